#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "passivity_lab/dictionary.hpp"
#include "passivity_lab/errors.hpp"
#include "passivity_lab/lp.hpp"
#include "passivity_lab/trajectory.hpp"

namespace passivity_lab {

struct IdentifyOptions {
  int window = 1;
  SupplyKind supply = SupplyKind::output_feedback;
  bool structural = false;
  // Positivity rows read theta . phi(x_i) >= eps_pos * ||phi(x_i)||_2.
  double eps_pos = 1e-6;
  double eig_tol = 1e-8;
  int max_cuts = 50;
};

namespace detail {

// Per-sample integrand of the margin term: y^2 (OFP), u^2 (IFP), 0 (passive).
inline Eigen::VectorXd margin_integrand(const Trajectory& traj, SupplyKind kind) {
  switch (kind) {
    case SupplyKind::output_feedback: return traj.outputs.array().square();
    case SupplyKind::input_feedback: return traj.inputs.array().square();
    case SupplyKind::passive: return Eigen::VectorXd::Zero(traj.size());
  }
  return {};
}

inline void check_window(const Trajectory& traj, int window) {
  if (window < 1 || window > traj.size() - 1)
    throw ArgumentError("window T must satisfy 1 <= T <= N-1 (got " + std::to_string(window) + ")");
}

inline void check_dims(const Trajectory& traj, const Dictionary& dict) {
  if (traj.state_dim() != dict.state_dim)
    throw ArgumentError("trajectory state dimension does not match dictionary");
}

inline Eigen::MatrixXd feature_matrix(const Trajectory& traj, const Dictionary& dict) {
  Eigen::MatrixXd phi(traj.size(), dict.size());
  for (Eigen::Index i = 0; i < traj.size(); ++i)
    phi.row(i) = eval_features(dict, traj.state(i)).transpose();
  return phi;
}

}  // namespace detail

/// Differenced augmented regressor of window [t_k, t_{k+T}]: the first d
/// entries are phi(x(t_{k+T})) - phi(x(t_k)); the last is the window integral
/// of the margin integrand (y^2, u^2 or 0).
inline Eigen::VectorXd augmented_regressor(const Trajectory& traj, const Dictionary& dict,
                                           Eigen::Index k, int window, SupplyKind supply) {
  detail::check_dims(traj, dict);
  if (k < 0 || window < 1 || k + window >= traj.size())
    throw ArgumentError("window overruns the trajectory");
  Eigen::VectorXd out(dict.size() + 1);
  out.head(dict.size()) =
      eval_features(dict, traj.state(k + window)) - eval_features(dict, traj.state(k));
  out(dict.size()) =
      supply == SupplyKind::passive
          ? 0.0
          : trapezoid_integral(traj, detail::margin_integrand(traj, supply), k, k + window);
  return out;
}

/// Indices of the quadratic-form features (x_i^2 and x_i x_j) packed into a
/// symmetric block P with x^T P x = sum of those terms.
inline std::optional<PsdBlock> quadratic_form_block(const Dictionary& dict) {
  std::vector<int> states;
  const auto slot = [&states](int s) {
    for (std::size_t k = 0; k < states.size(); ++k)
      if (states[k] == s) return static_cast<int>(k);
    states.push_back(s);
    return static_cast<int>(states.size() - 1);
  };
  PsdBlock block;
  for (std::size_t k = 0; k < dict.features.size(); ++k) {
    const auto& f = dict.features[k];
    if (f.kind == FeatureKind::square) {
      const int a = slot(f.i);
      block.entries.push_back({a, a, static_cast<int>(k), 1.0});
    } else if (f.kind == FeatureKind::cross) {
      const int a = slot(f.i), b = slot(f.j);
      block.entries.push_back({a, b, static_cast<int>(k), a == b ? 1.0 : 0.5});
    }
  }
  if (block.entries.empty()) return std::nullopt;
  block.dim = static_cast<int>(states.size());
  return block;
}

/// Assembles the identification LP over z = (theta, margin):
///   rows 0..N-1      positivity  theta . phi(x_i) >= eps_pos ||phi(x_i)||
///   rows N..2N-T-1   dissipation (dphi, int m) . z <= int u y  over [t_k, t_{k+T}]
///   row  2N-T        margin >= 0
/// and maximizes the margin (zero objective for plain passivity). The
/// structural variant adds the quadratic-form PSD block and theta_i >= 0 for
/// every feature that is not a cross term.
inline LPProblem build_constraints(const Trajectory& traj, const Dictionary& dict,
                                   const IdentifyOptions& opt) {
  detail::check_dims(traj, dict);
  detail::check_window(traj, opt.window);
  const Eigen::Index n = traj.size();
  const Eigen::Index d = dict.size();
  const int T = opt.window;

  const Eigen::MatrixXd phi = detail::feature_matrix(traj, dict);
  const Eigen::VectorXd supplied =
      cumulative_trapezoid(traj.inputs.cwiseProduct(traj.outputs), traj.sample_period);
  const Eigen::VectorXd margin_int =
      cumulative_trapezoid(detail::margin_integrand(traj, opt.supply), traj.sample_period);

  LPProblem p;
  p.objective = Eigen::VectorXd::Zero(d + 1);
  if (opt.supply != SupplyKind::passive) p.objective(d) = 1.0;
  p.rows.reserve(static_cast<std::size_t>(2 * n - T + 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    LinearRow r;
    r.coeffs = Eigen::VectorXd::Zero(d + 1);
    r.coeffs.head(d) = phi.row(i).transpose();
    r.sense = Sense::greater_equal;
    r.rhs = opt.eps_pos * phi.row(i).norm();
    p.rows.push_back(std::move(r));
  }
  for (Eigen::Index k = 0; k + T < n; ++k) {
    LinearRow r;
    r.coeffs.resize(d + 1);
    r.coeffs.head(d) = (phi.row(k + T) - phi.row(k)).transpose();
    r.coeffs(d) = opt.supply == SupplyKind::passive ? 0.0 : margin_int(k + T) - margin_int(k);
    r.sense = Sense::less_equal;
    r.rhs = supplied(k + T) - supplied(k);
    p.rows.push_back(std::move(r));
  }
  LinearRow margin_row;
  margin_row.coeffs = Eigen::VectorXd::Zero(d + 1);
  margin_row.coeffs(d) = 1.0;
  margin_row.sense = Sense::greater_equal;
  p.rows.push_back(std::move(margin_row));

  if (opt.structural) {
    p.psd_block = quadratic_form_block(dict);
    for (Eigen::Index k = 0; k < d; ++k)
      if (dict.features[static_cast<std::size_t>(k)].kind != FeatureKind::cross)
        p.sign_constrained.push_back(static_cast<int>(k));
  }
  return p;
}

/// Returned when the LP has no solution: at this window and noise level the
/// data do not certify the requested supply rate.
struct InfeasibleReport {
  int window = 0;
  int constraint_count = 0;
  SolveStatus status = SolveStatus::infeasible;
  std::optional<InfeasibilityCertificate> certificate;
  std::string summary;
};

using IdentifyResult = std::variant<StorageEstimate, InfeasibleReport>;

inline IdentifyResult identify(const Trajectory& traj, const Dictionary& dict,
                               const IdentifyOptions& opt) {
  const LPProblem problem = build_constraints(traj, dict, opt);
  const int rows = static_cast<int>(problem.rows.size());
  const SolveOutcome out = problem.psd_block
                               ? solve_with_psd_cuts(problem, opt.max_cuts, opt.eig_tol)
                               : solve_lp(problem);
  if (out.status != SolveStatus::optimal) {
    InfeasibleReport rep;
    rep.window = opt.window;
    rep.constraint_count = rows;
    rep.status = out.status;
    rep.certificate = out.certificate;
    rep.summary = std::string(status_tag(out.status)) + " at T=" + std::to_string(opt.window);
    if (out.certificate) rep.summary += ": " + out.certificate->summary;
    return rep;
  }
  const Eigen::VectorXd& z = *out.solution;
  StorageEstimate est;
  est.dictionary = dict;
  est.theta = z.head(dict.size());
  est.margin = opt.supply == SupplyKind::passive ? 0.0 : std::max(0.0, z(dict.size()));
  est.supply_kind = opt.supply;
  est.diagnostics.window = opt.window;
  est.diagnostics.constraint_count = rows;
  est.diagnostics.solver_iterations = out.iterations;
  est.diagnostics.cuts_added = out.cuts_added;
  est.diagnostics.seed_cuts = out.seed_cuts;
  est.diagnostics.min_psd_eigenvalue = std::isnan(out.min_eigenvalue) ? 0.0 : out.min_eigenvalue;
  return est;
}

struct VerifyOptions {
  double eps_pos = 1e-6;
  double positivity_tol = 1e-9;
  double dissipation_tol = 1e-8;
};

struct VerifyReport {
  int positivity_rows = 0;
  int dissipation_rows = 0;
  int positivity_violations = 0;
  int dissipation_violations = 0;
  double worst_positivity_slack = std::numeric_limits<double>::infinity();
  double worst_dissipation_slack = std::numeric_limits<double>::infinity();

  int violations() const { return positivity_violations + dissipation_violations; }
};

/// Checks every positivity and windowed dissipation inequality of `est` on
/// `traj` (which may be held-out data). Slacks are rhs - lhs, so negative
/// means violated.
inline VerifyReport verify_estimate(const StorageEstimate& est, const Trajectory& traj, int window,
                                    const VerifyOptions& opt = {}) {
  detail::check_dims(traj, est.dictionary);
  detail::check_window(traj, window);
  const Eigen::MatrixXd phi = detail::feature_matrix(traj, est.dictionary);
  const Eigen::VectorXd storage = phi * est.theta;
  const Eigen::VectorXd supplied =
      cumulative_trapezoid(traj.inputs.cwiseProduct(traj.outputs), traj.sample_period);
  const Eigen::VectorXd margin_int =
      cumulative_trapezoid(detail::margin_integrand(traj, est.supply_kind), traj.sample_period);

  VerifyReport rep;
  for (Eigen::Index i = 0; i < traj.size(); ++i) {
    const double slack = storage(i) - opt.eps_pos * phi.row(i).norm();
    ++rep.positivity_rows;
    rep.worst_positivity_slack = std::min(rep.worst_positivity_slack, slack);
    if (slack < -opt.positivity_tol) ++rep.positivity_violations;
  }
  for (Eigen::Index k = 0; k + window < traj.size(); ++k) {
    const Eigen::Index j = k + window;
    const double supply =
        supplied(j) - supplied(k) - est.margin * (margin_int(j) - margin_int(k));
    const double slack = supply - (storage(j) - storage(k));
    ++rep.dissipation_rows;
    rep.worst_dissipation_slack = std::min(rep.worst_dissipation_slack, slack);
    if (slack < -opt.dissipation_tol) ++rep.dissipation_violations;
  }
  return rep;
}

}  // namespace passivity_lab
