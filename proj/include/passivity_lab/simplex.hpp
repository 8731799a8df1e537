#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace passivity_lab {

/// min c.x  s.t.  A x = b,  x >= 0
struct StandardFormLP {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
};

enum class SimplexStatus { optimal, infeasible, unbounded, iteration_limit };

struct SimplexOptions {
  int max_iterations = 100000;
  double pivot_tol = 1e-9;
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  // Switch from Dantzig pricing to Bland's rule after this many consecutive
  // degenerate pivots.
  int bland_after = 50;
};

struct SimplexResult {
  SimplexStatus status = SimplexStatus::iteration_limit;
  Eigen::VectorXd x;         // primal point (optimal only)
  Eigen::VectorXd y;         // multipliers, c_B^T B^-1 (optimal only)
  Eigen::VectorXd ray;       // x >= 0, A ray = 0, c.ray < 0 (unbounded only)
  double objective = 0.0;
  double phase1_infeasibility = 0.0;
  int iterations = 0;
};

namespace detail {

// Dense tableau over [x | artificials]. Row i holds B^-1 [A | s_i e_i] and the
// right-hand side; `reduced` holds the current reduced costs.
class Tableau {
 public:
  Tableau(const StandardFormLP& lp, const SimplexOptions& opt)
      : opt_(opt), m_(lp.A.rows()), n_(lp.A.cols()), sign_(m_) {
    t_ = Eigen::MatrixXd::Zero(m_, n_ + m_ + 1);
    basis_.resize(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) {
      sign_(i) = lp.b(i) < 0.0 ? -1.0 : 1.0;
      t_.row(i).head(n_) = sign_(i) * lp.A.row(i);
      t_(i, n_ + i) = 1.0;
      t_(i, n_ + m_) = sign_(i) * lp.b(i);
      basis_[static_cast<std::size_t>(i)] = n_ + i;
    }
  }

  Eigen::Index rows() const { return m_; }
  Eigen::Index structural_cols() const { return n_; }
  double rhs(Eigen::Index i) const { return t_(i, n_ + m_); }
  const std::vector<Eigen::Index>& basis() const { return basis_; }
  const Eigen::VectorXd& sign() const { return sign_; }

  // Installs a cost vector over [x | artificials] and prices it out.
  void set_costs(const Eigen::VectorXd& costs) {
    costs_ = costs;
    reduced_ = costs;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double cb = costs_(basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) reduced_ -= cb * t_.row(i).head(n_ + m_).transpose();
    }
  }

  double objective() const {
    double v = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) v += costs_(basis_[static_cast<std::size_t>(i)]) * rhs(i);
    return v;
  }

  void pivot(Eigen::Index r, Eigen::Index q) {
    const double p = t_(r, q);
    t_.row(r) /= p;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double f = t_(i, q);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    const double fr = reduced_(q);
    if (fr != 0.0) reduced_ -= fr * t_.row(r).head(n_ + m_).transpose();
    reduced_(q) = 0.0;
    basis_[static_cast<std::size_t>(r)] = q;
  }

  // Runs primal simplex over columns [0, allowed_cols). Returns optimal,
  // unbounded (with entering column in *unbounded_col) or iteration_limit.
  SimplexStatus run(Eigen::Index allowed_cols, int* iterations, Eigen::Index* unbounded_col) {
    int degenerate_run = 0;
    while (true) {
      if (*iterations >= opt_.max_iterations) return SimplexStatus::iteration_limit;
      const bool bland = degenerate_run >= opt_.bland_after;
      Eigen::Index q = -1;
      double best = -opt_.optimality_tol;
      for (Eigen::Index j = 0; j < allowed_cols; ++j) {
        if (reduced_(j) < best) {
          q = j;
          if (bland) break;
          best = reduced_(j);
        }
      }
      if (q < 0) return SimplexStatus::optimal;

      Eigen::Index r = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double a = t_(i, q);
        if (a <= opt_.pivot_tol) continue;
        const double ratio = std::max(rhs(i), 0.0) / a;
        if (r < 0 || ratio < best_ratio - 1e-12) {
          r = i;
          best_ratio = ratio;
        } else if (ratio <= best_ratio + 1e-12) {
          // tie: Bland prefers the smallest basic index, otherwise the larger pivot
          const bool take = bland ? basis_[static_cast<std::size_t>(i)] <
                                        basis_[static_cast<std::size_t>(r)]
                                  : a > t_(r, q);
          if (take) r = i;
        }
      }
      if (r < 0) {
        *unbounded_col = q;
        return SimplexStatus::unbounded;
      }
      degenerate_run = best_ratio <= 1e-12 ? degenerate_run + 1 : 0;
      pivot(r, q);
      ++*iterations;
    }
  }

  // After phase 1: pivots basic artificials out where a structural column
  // allows it. Rows where none does are redundant and stay at zero.
  void drive_out_artificials() {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < n_) continue;
      Eigen::Index q = -1;
      double best = opt_.pivot_tol * 1e3;
      for (Eigen::Index j = 0; j < n_; ++j) {
        if (std::abs(t_(i, j)) > best) {
          best = std::abs(t_(i, j));
          q = j;
        }
      }
      if (q >= 0) pivot(i, q);
    }
  }

  Eigen::VectorXd column(Eigen::Index q) const { return t_.col(q); }
  double reduced(Eigen::Index j) const { return reduced_(j); }

 private:
  SimplexOptions opt_;
  Eigen::Index m_, n_;
  Eigen::MatrixXd t_;
  Eigen::VectorXd sign_;
  Eigen::VectorXd costs_;
  Eigen::VectorXd reduced_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace detail

/// Two-phase dense tableau simplex. Phase 1 minimizes the sum of artificial
/// variables; phase 2 never lets an artificial re-enter. The returned point
/// and multipliers are recomputed from the final basis by an LU solve on the
/// original data.
inline SimplexResult solve_standard_form(const StandardFormLP& lp, const SimplexOptions& opt = {}) {
  const Eigen::Index m = lp.A.rows();
  const Eigen::Index n = lp.A.cols();
  SimplexResult res;
  detail::Tableau tab(lp, opt);

  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setOnes();
  tab.set_costs(phase1);
  Eigen::Index unb = -1;
  auto st = tab.run(n + m, &res.iterations, &unb);
  if (st == SimplexStatus::iteration_limit) return res;
  res.phase1_infeasibility = tab.objective();
  const double scale = std::max(1.0, lp.b.cwiseAbs().maxCoeff());
  if (res.phase1_infeasibility > opt.feasibility_tol * scale) {
    res.status = SimplexStatus::infeasible;
    return res;
  }
  tab.drive_out_artificials();

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
  phase2.head(n) = lp.c;
  tab.set_costs(phase2);
  st = tab.run(n, &res.iterations, &unb);
  if (st == SimplexStatus::iteration_limit) return res;

  const auto& basis = tab.basis();
  if (st == SimplexStatus::unbounded) {
    res.status = SimplexStatus::unbounded;
    res.ray = Eigen::VectorXd::Zero(n);
    res.ray(unb) = 1.0;
    const Eigen::VectorXd col = tab.column(unb);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto bj = basis[static_cast<std::size_t>(i)];
      if (bj < n) res.ray(bj) = -col(i);
    }
    return res;
  }

  // Basis matrix in original coordinates; artificial columns are s_i e_i.
  Eigen::MatrixXd B(m, m);
  Eigen::VectorXd cb(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto bj = basis[static_cast<std::size_t>(i)];
    if (bj < n) {
      B.col(i) = lp.A.col(bj);
      cb(i) = lp.c(bj);
    } else {
      B.col(i).setZero();
      B(bj - n, i) = tab.sign()(bj - n);
      cb(i) = 0.0;
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
  res.x = Eigen::VectorXd::Zero(n);
  if (lu.isInvertible()) {
    const Eigen::VectorXd xb = lu.solve(lp.b);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto bj = basis[static_cast<std::size_t>(i)];
      if (bj < n) res.x(bj) = std::max(xb(i), 0.0);
    }
    res.y = lu.transpose().solve(cb);
  } else {
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto bj = basis[static_cast<std::size_t>(i)];
      if (bj < n) res.x(bj) = std::max(tab.rhs(i), 0.0);
    }
    // y_i = -s_i * (reduced cost of artificial i) when artificial costs are 0
    res.y.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) res.y(i) = -tab.sign()(i) * tab.reduced(n + i);
  }
  res.objective = lp.c.dot(res.x);
  res.status = SimplexStatus::optimal;
  return res;
}

}  // namespace passivity_lab
