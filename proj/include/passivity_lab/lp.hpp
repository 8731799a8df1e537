#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "passivity_lab/errors.hpp"
#include "passivity_lab/simplex.hpp"

namespace passivity_lab {

enum class Sense { less_equal, greater_equal };

struct LinearRow {
  Eigen::VectorXd coeffs;
  Sense sense = Sense::less_equal;
  double rhs = 0.0;
};

/// Symmetric m x m block whose entries are linear in the LP variables:
/// P(row, col) = P(col, row) = sum of weight * z[var] over matching entries.
struct PsdBlock {
  struct Entry {
    int row;
    int col;
    int var;
    double weight;
  };
  int dim = 0;
  std::vector<Entry> entries;

  Eigen::MatrixXd matrix(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& e : entries) {
      P(e.row, e.col) += e.weight * z(e.var);
      if (e.row != e.col) P(e.col, e.row) += e.weight * z(e.var);
    }
    return P;
  }

  // Coefficients of v^T P v as a linear form in z.
  Eigen::VectorXd quadratic_form_coeffs(const Eigen::VectorXd& v, Eigen::Index num_vars) const {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(num_vars);
    for (const auto& e : entries) {
      const double f = e.row == e.col ? v(e.row) * v(e.row) : 2.0 * v(e.row) * v(e.col);
      a(e.var) += e.weight * f;
    }
    return a;
  }
};

/// maximize objective . z subject to linear rows, per-variable lower bounds
/// (-inf = free), sign constraints and an optional PSD block.
struct LPProblem {
  Eigen::VectorXd objective;
  std::vector<LinearRow> rows;
  Eigen::VectorXd lower_bounds;  // empty = all free
  std::optional<PsdBlock> psd_block;
  std::vector<int> sign_constrained;

  Eigen::Index num_vars() const { return objective.size(); }
};

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit };

inline const char* status_tag(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::iteration_limit: return "iteration_limit";
  }
  return "";
}

/// Farkas certificate: nonnegative multipliers over the problem's constraints
/// written as G z <= h (rows first, then bound and sign rows, then cut rows)
/// with G^T mu = 0 and h . mu < 0.
struct InfeasibilityCertificate {
  Eigen::VectorXd multipliers;
  double combined_rhs = 0.0;
  double residual = 0.0;  // ||G^T mu||_inf / ||mu||_1
  std::string summary;
};

struct SolveOutcome {
  SolveStatus status = SolveStatus::iteration_limit;
  std::optional<Eigen::VectorXd> solution;
  std::optional<Eigen::VectorXd> best_iterate;
  std::optional<InfeasibilityCertificate> certificate;
  int iterations = 0;
  int cuts_added = 0;
  int seed_cuts = 0;
  double max_violation = 0.0;  // of the returned solution, original units
  double min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// G z <= h view of an LPProblem (PSD block ignored).
struct InequalityForm {
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

inline InequalityForm to_inequality_form(const LPProblem& p) {
  const Eigen::Index nv = p.num_vars();
  std::vector<std::pair<Eigen::VectorXd, double>> rows;
  rows.reserve(p.rows.size() + static_cast<std::size_t>(nv));
  for (const auto& r : p.rows) {
    if (r.coeffs.size() != nv) throw ArgumentError("LP row width does not match variable count");
    if (r.sense == Sense::less_equal) rows.emplace_back(r.coeffs, r.rhs);
    else rows.emplace_back(-r.coeffs, -r.rhs);
  }
  if (p.lower_bounds.size() != 0) {
    if (p.lower_bounds.size() != nv) throw ArgumentError("lower bound vector has wrong size");
    for (Eigen::Index i = 0; i < nv; ++i) {
      if (!std::isfinite(p.lower_bounds(i))) continue;
      Eigen::VectorXd a = Eigen::VectorXd::Zero(nv);
      a(i) = -1.0;
      rows.emplace_back(a, -p.lower_bounds(i));
    }
  }
  for (int i : p.sign_constrained) {
    if (i < 0 || i >= nv) throw ArgumentError("sign-constrained index out of range");
    Eigen::VectorXd a = Eigen::VectorXd::Zero(nv);
    a(i) = -1.0;
    rows.emplace_back(a, 0.0);
  }
  InequalityForm f;
  f.G.resize(static_cast<Eigen::Index>(rows.size()), nv);
  f.h.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    f.G.row(static_cast<Eigen::Index>(k)) = rows[k].first.transpose();
    f.h(static_cast<Eigen::Index>(k)) = rows[k].second;
  }
  return f;
}

// Geometric-mean equilibration: G' = diag(r) G diag(s).
inline void equilibrate(const Eigen::MatrixXd& G, Eigen::VectorXd& r, Eigen::VectorXd& s) {
  r = Eigen::VectorXd::Ones(G.rows());
  s = Eigen::VectorXd::Ones(G.cols());
  for (int pass = 0; pass < 4; ++pass) {
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (Eigen::Index j = 0; j < G.cols(); ++j) {
        const double a = std::abs(G(i, j)) * s(j);
        if (a == 0.0) continue;
        lo = std::min(lo, a);
        hi = std::max(hi, a);
      }
      if (hi > 0.0) r(i) = 1.0 / std::sqrt(lo * hi);
    }
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (Eigen::Index i = 0; i < G.rows(); ++i) {
        const double a = std::abs(G(i, j)) * r(i);
        if (a == 0.0) continue;
        lo = std::min(lo, a);
        hi = std::max(hi, a);
      }
      if (hi > 0.0) s(j) = 1.0 / std::sqrt(lo * hi);
    }
  }
  // final pass: unit infinity-norm rows
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    const double hi = (G.row(i).transpose().cwiseProduct(s)).cwiseAbs().maxCoeff() * r(i);
    if (hi > 0.0) r(i) /= hi;
  }
}

inline InfeasibilityCertificate make_certificate(const InequalityForm& f, const Eigen::VectorXd& mu) {
  InfeasibilityCertificate c;
  const double norm = mu.lpNorm<1>();
  c.multipliers = norm > 0.0 ? Eigen::VectorXd(mu / norm) : mu;
  c.combined_rhs = f.h.dot(c.multipliers);
  c.residual = (f.G.transpose() * c.multipliers).cwiseAbs().maxCoeff();
  int support = 0;
  for (Eigen::Index i = 0; i < c.multipliers.size(); ++i)
    if (c.multipliers(i) > 1e-12) ++support;
  std::ostringstream os;
  os << "nonnegative combination of " << support << " constraint rows gives 0 <= "
     << c.combined_rhs << " (residual " << c.residual << ")";
  c.summary = os.str();
  return c;
}

}  // namespace detail

/// Solves the LP through its dual: for max c.z s.t. G z <= h the dual
/// min h.l s.t. G^T l = c, l >= 0 is in standard form with only
/// (#variables) equality rows, which keeps the tableau small when rows
/// outnumber variables. Primal z is read back from the dual multipliers; a
/// dual unbounded ray is a Farkas certificate of primal infeasibility.
inline SolveOutcome solve_lp(const LPProblem& problem, const SimplexOptions& opt = {}) {
  if (problem.psd_block) throw ArgumentError("solve_lp does not handle PSD blocks; use solve_with_psd_cuts");
  const auto form = detail::to_inequality_form(problem);
  const Eigen::Index nv = problem.num_vars();
  SolveOutcome out;
  if (form.G.rows() == 0) {
    if (problem.objective.cwiseAbs().maxCoeff() > 0.0) {
      out.status = SolveStatus::unbounded;
    } else {
      out.status = SolveStatus::optimal;
      out.solution = Eigen::VectorXd::Zero(nv);
    }
    return out;
  }

  Eigen::VectorXd r, s;
  detail::equilibrate(form.G, r, s);
  const Eigen::MatrixXd Gs = r.asDiagonal() * form.G * s.asDiagonal();
  const Eigen::VectorXd hs = r.cwiseProduct(form.h);
  const Eigen::VectorXd cs = s.cwiseProduct(problem.objective);

  const auto infeasibility_from_ray = [&](const Eigen::VectorXd& ray) {
    out.status = SolveStatus::infeasible;
    out.certificate = detail::make_certificate(form, r.cwiseProduct(ray));
  };

  StandardFormLP dual{Gs.transpose(), cs, hs};
  const auto res = solve_standard_form(dual, opt);
  out.iterations = res.iterations;
  switch (res.status) {
    case SimplexStatus::iteration_limit: out.status = SolveStatus::iteration_limit; return out;
    case SimplexStatus::unbounded: infeasibility_from_ray(res.ray); return out;
    case SimplexStatus::infeasible: {
      // Dual infeasible: the primal is unbounded or infeasible. The pure
      // feasibility problem (c = 0) has a feasible dual (l = 0), so its
      // boundedness decides.
      StandardFormLP feas{Gs.transpose(), Eigen::VectorXd::Zero(nv), hs};
      const auto res2 = solve_standard_form(feas, opt);
      out.iterations += res2.iterations;
      if (res2.status == SimplexStatus::unbounded) infeasibility_from_ray(res2.ray);
      else if (res2.status == SimplexStatus::optimal) out.status = SolveStatus::unbounded;
      else out.status = SolveStatus::iteration_limit;
      return out;
    }
    case SimplexStatus::optimal: break;
  }
  Eigen::VectorXd z = s.cwiseProduct(res.y);
  out.status = SolveStatus::optimal;
  out.max_violation = std::max(0.0, (form.G * z - form.h).maxCoeff());
  out.solution = std::move(z);
  return out;
}

/// Cutting-plane treatment of the PSD block: solve the LP relaxation, and
/// while the block has an eigenvalue below -eig_tol add v^T P v >= 0 for the
/// corresponding eigenvector v. The relaxation starts from the linear outer
/// approximation P_ii >= 0 and (e_i +- e_j)^T P (e_i +- e_j) >= 0.
inline SolveOutcome solve_with_psd_cuts(const LPProblem& problem, int max_cuts = 50,
                                        double eig_tol = 1e-8, const SimplexOptions& opt = {}) {
  if (!problem.psd_block) throw ArgumentError("solve_with_psd_cuts needs a PSD block");
  const auto& block = *problem.psd_block;
  const Eigen::Index nv = problem.num_vars();
  for (const auto& e : block.entries)
    if (e.var < 0 || e.var >= nv || e.row < 0 || e.col < 0 || e.row >= block.dim ||
        e.col >= block.dim)
      throw ArgumentError("PSD block entry out of range");

  LPProblem relaxed = problem;
  relaxed.psd_block.reset();
  const auto add_cut = [&](const Eigen::VectorXd& v) {
    relaxed.rows.push_back({block.quadratic_form_coeffs(v, nv), Sense::greater_equal, 0.0});
  };
  int seeds = 0;
  for (int i = 0; i < block.dim; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(block.dim);
    v(i) = 1.0;
    add_cut(v);
    ++seeds;
    for (int j = i + 1; j < block.dim; ++j) {
      for (double sgn : {1.0, -1.0}) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(block.dim);
        w(i) = 1.0;
        w(j) = sgn;
        add_cut(w / std::sqrt(2.0));
        ++seeds;
      }
    }
  }

  int cuts = 0;
  int iterations = 0;
  while (true) {
    SolveOutcome out = solve_lp(relaxed, opt);
    iterations += out.iterations;
    out.iterations = iterations;
    out.cuts_added = cuts;
    out.seed_cuts = seeds;
    if (out.status != SolveStatus::optimal) return out;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block.matrix(*out.solution));
    out.min_eigenvalue = eig.eigenvalues()(0);
    if (out.min_eigenvalue >= -eig_tol) return out;
    if (cuts >= max_cuts) {
      out.status = SolveStatus::iteration_limit;
      out.best_iterate = std::move(out.solution);
      out.solution.reset();
      return out;
    }
    add_cut(eig.eigenvectors().col(0));
    ++cuts;
  }
}

}  // namespace passivity_lab
