#include <gtest/gtest.h>

#include <algorithm>

#include "passivity_lab/benchmark.hpp"
#include "passivity_lab/identify.hpp"

namespace pl = passivity_lab;

namespace {

pl::Trajectory benchmark_run() {
  pl::SimulationOptions o;
  o.max_samples = 1000;
  return pl::simulate(pl::pendulum_model(8.0, 0.5), Eigen::Vector2d::Zero(), pl::InputSignal::multisine(), o);
}

const pl::Trajectory& clean() {
  static const pl::Trajectory t = benchmark_run();
  return t;
}

const pl::Trajectory& noisy() {
  static const pl::Trajectory t = pl::add_measurement_noise(clean(), 0, 0.01, 42);
  return t;
}

// Equilibrium data: x stays at the origin while a static map y = gain * u is
// recorded, so storage differences vanish and only the supply rate matters.
pl::Trajectory static_gain(double gain) {
  const Eigen::Index n = 200;
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 0.0, 0.1 * (n - 1));
  Eigen::VectorXd u = (t.array() * 1.3).sin() + 0.5 * (t.array() * 0.4).cos();
  return pl::Trajectory::make(t, Eigen::MatrixXd::Zero(n, 2), u, gain * u);
}

pl::IdentifyOptions with(int window, pl::SupplyKind kind = pl::SupplyKind::output_feedback, bool structural = false) {
  pl::IdentifyOptions o;
  o.window = window;
  o.supply = kind;
  o.structural = structural;
  return o;
}

}  // namespace

TEST(Regressor, EquilibriumDataHasZeroDifferences) {
  const auto tr = static_gain(1.0);
  const auto phi = pl::augmented_regressor(tr, pl::pendulum_dictionary(), 5, 7, pl::SupplyKind::output_feedback);
  EXPECT_EQ(phi.head(9).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(phi(9), 0.0);
}

TEST(Regressor, PassiveHasZeroMarginEntry) {
  const auto phi = pl::augmented_regressor(clean(), pl::pendulum_dictionary(), 3, 10, pl::SupplyKind::passive);
  EXPECT_EQ(phi(9), 0.0);
}

TEST(Regressor, MarginEntryMatchesFineGridQuadrature) {
  pl::SimulationOptions fine;
  fine.duration = 1.0;
  fine.sample_period = 0.001;
  const auto f = pl::simulate(pl::pendulum_model(8.0, 0.5), Eigen::Vector2d::Zero(), pl::InputSignal::multisine(), fine);
  const double oracle = pl::trapezoid_integral(f, f.outputs.array().square().matrix(), 0, f.size() - 1);
  const auto phi = pl::augmented_regressor(clean(), pl::pendulum_dictionary(), 0, 10, pl::SupplyKind::output_feedback);
  EXPECT_NEAR(phi(9), oracle, 0.005 * oracle);
}

TEST(Regressor, IfpUsesInputEnergy) {
  const auto tr = clean();
  const auto phi = pl::augmented_regressor(tr, pl::pendulum_dictionary(), 4, 6, pl::SupplyKind::input_feedback);
  EXPECT_NEAR(phi(9), pl::trapezoid_integral(tr, tr.inputs.array().square().matrix(), 4, 10), 1e-12);
}

TEST(Regressor, WindowOverrunRejected) {
  EXPECT_THROW(pl::augmented_regressor(clean(), pl::pendulum_dictionary(), 995, 5, pl::SupplyKind::passive),
               pl::ArgumentError);
}

TEST(Constraints, RowCountIsTwoNMinusTPlusOne) {
  const auto d = pl::pendulum_dictionary();
  EXPECT_EQ(pl::build_constraints(clean(), d, with(1)).rows.size(), 2000u);
  EXPECT_EQ(pl::build_constraints(clean(), d, with(200)).rows.size(), 1801u);
  EXPECT_EQ(pl::build_constraints(clean(), d, with(999)).rows.size(), 1002u);
}

TEST(Constraints, WindowOutOfRangeRejected) {
  const auto d = pl::pendulum_dictionary();
  EXPECT_THROW(pl::build_constraints(clean(), d, with(0)), pl::ArgumentError);
  EXPECT_THROW(pl::build_constraints(clean(), d, with(1000)), pl::ArgumentError);
}

TEST(Constraints, DimensionMismatchRejected) {
  const auto d1 = pl::Dictionary::make({pl::Feature::square(0)}, 1);
  EXPECT_THROW(pl::build_constraints(clean(), d1, with(1)), pl::ArgumentError);
}

TEST(Constraints, PassiveSupplyDropsMargin) {
  const auto p = pl::build_constraints(clean(), pl::pendulum_dictionary(), with(3, pl::SupplyKind::passive));
  EXPECT_EQ(p.objective.cwiseAbs().maxCoeff(), 0.0);
  for (std::size_t k = 1000; k + 1 < p.rows.size(); ++k) EXPECT_EQ(p.rows[k].coeffs(9), 0.0);
}

TEST(Constraints, DissipationRowMatchesRegressor) {
  const auto d = pl::pendulum_dictionary();
  const auto p = pl::build_constraints(clean(), d, with(10));
  const auto phi = pl::augmented_regressor(clean(), d, 37, 10, pl::SupplyKind::output_feedback);
  const auto& r = p.rows[1000 + 37];
  EXPECT_EQ(r.sense, pl::Sense::less_equal);
  EXPECT_LT((r.coeffs - phi).cwiseAbs().maxCoeff(), 1e-10);
  const Eigen::VectorXd uy = clean().inputs.cwiseProduct(clean().outputs);
  EXPECT_NEAR(r.rhs, pl::trapezoid_integral(clean(), uy, 37, 47), 1e-10);
}

TEST(Constraints, StructuralBlockAndSigns) {
  const auto p = pl::build_constraints(clean(), pl::pendulum_dictionary(), with(1, pl::SupplyKind::output_feedback, true));
  ASSERT_TRUE(p.psd_block.has_value());
  EXPECT_EQ(p.psd_block->dim, 2);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(10);
  z(0) = 1.0;
  z(1) = 3.0;
  z(2) = 2.0;
  Eigen::Matrix2d expect;
  expect << 1.0, 1.5, 1.5, 2.0;
  EXPECT_TRUE(p.psd_block->matrix(z).isApprox(expect));
  std::vector<int> signs = p.sign_constrained;
  std::sort(signs.begin(), signs.end());
  EXPECT_EQ(signs, (std::vector<int>{0, 2, 3, 4, 5, 6, 7, 8}));
}

TEST(Identify, NoiseFreeMarginAndSelfConsistency) {
  const auto r = pl::identify(clean(), pl::pendulum_dictionary(), with(1));
  ASSERT_TRUE(std::holds_alternative<pl::StorageEstimate>(r));
  const auto& est = std::get<pl::StorageEstimate>(r);
  EXPECT_NEAR(est.margin, 0.471, 0.02);
  EXPECT_EQ(est.diagnostics.constraint_count, 2000);
  const auto rep = pl::verify_estimate(est, clean(), 1);
  EXPECT_EQ(rep.violations(), 0) << rep.worst_dissipation_slack;
}

TEST(Identify, NoiseFreeFeasibleAtEveryWindow) {
  for (int t : {1, 2, 5, 10, 50, 100, 200}) {
    const auto r = pl::identify(clean(), pl::pendulum_dictionary(), with(t));
    ASSERT_TRUE(std::holds_alternative<pl::StorageEstimate>(r)) << "T=" << t;
    EXPECT_EQ(pl::verify_estimate(std::get<pl::StorageEstimate>(r), clean(), t).violations(), 0) << "T=" << t;
  }
}

TEST(Identify, NoisyShortWindowIsInfeasibleWithCertificate) {
  const auto r = pl::identify(noisy(), pl::pendulum_dictionary(), with(1));
  ASSERT_TRUE(std::holds_alternative<pl::InfeasibleReport>(r));
  const auto& rep = std::get<pl::InfeasibleReport>(r);
  EXPECT_EQ(rep.status, pl::SolveStatus::infeasible);
  EXPECT_EQ(rep.window, 1);
  EXPECT_EQ(rep.constraint_count, 2000);
  ASSERT_TRUE(rep.certificate.has_value());
  EXPECT_GE(rep.certificate->multipliers.minCoeff(), 0.0);
  EXPECT_LT(rep.certificate->combined_rhs, 0.0);
  EXPECT_LT(rep.certificate->residual, 1e-8);
}

TEST(Identify, NoisyLongWindowStructuralMargin) {
  const auto r = pl::identify(noisy(), pl::pendulum_dictionary(), with(200, pl::SupplyKind::output_feedback, true));
  ASSERT_TRUE(std::holds_alternative<pl::StorageEstimate>(r));
  const auto& est = std::get<pl::StorageEstimate>(r);
  EXPECT_GE(est.margin, 0.48);
  EXPECT_LE(est.margin, 0.51);
  EXPECT_GE(est.diagnostics.min_psd_eigenvalue, -1e-8);
  for (Eigen::Index k = 0; k < est.theta.size(); ++k)
    if (k != 1) EXPECT_GE(est.theta(k), -1e-8) << "feature " << k;  // the cross term is free
}

TEST(Identify, StructuralNeverExceedsUnconstrained) {
  for (int t : {1, 20, 200}) {
    const auto& tr = t == 1 ? clean() : noisy();
    const auto u = pl::identify(tr, pl::pendulum_dictionary(), with(t));
    const auto s = pl::identify(tr, pl::pendulum_dictionary(), with(t, pl::SupplyKind::output_feedback, true));
    ASSERT_TRUE(std::holds_alternative<pl::StorageEstimate>(u));
    if (!std::holds_alternative<pl::StorageEstimate>(s)) continue;  // infeasible is also consistent
    EXPECT_LE(std::get<pl::StorageEstimate>(s).margin, std::get<pl::StorageEstimate>(u).margin + 1e-6) << "T=" << t;
  }
}

TEST(Identify, StructuralPrunesToEnergyTerms) {
  const auto r = pl::identify(clean(), pl::pendulum_dictionary(), with(1, pl::SupplyKind::output_feedback, true));
  ASSERT_TRUE(std::holds_alternative<pl::StorageEstimate>(r));
  const auto p = pl::prune(std::get<pl::StorageEstimate>(r));
  EXPECT_EQ(pl::kept_terms(p), (std::vector<std::string>{"x2^2", "1-cos(x1)"}));
}

TEST(Identify, StaticGainMarginsMatchSupplyAlgebra) {
  // y = 2u: u y - nu u^2 = (2 - nu) u^2 and u y - rho y^2 = (2 - 4 rho) u^2
  const auto tr = static_gain(2.0);
  const auto ifp = pl::identify(tr, pl::pendulum_dictionary(), with(1, pl::SupplyKind::input_feedback));
  const auto ofp = pl::identify(tr, pl::pendulum_dictionary(), with(1, pl::SupplyKind::output_feedback));
  ASSERT_TRUE(std::holds_alternative<pl::StorageEstimate>(ifp));
  ASSERT_TRUE(std::holds_alternative<pl::StorageEstimate>(ofp));
  EXPECT_NEAR(std::get<pl::StorageEstimate>(ifp).margin, 2.0, 1e-9);
  EXPECT_NEAR(std::get<pl::StorageEstimate>(ofp).margin, 0.5, 1e-9);
}

TEST(Identify, NegativeGainIsNotPassive) {
  const auto r = pl::identify(static_gain(-1.0), pl::pendulum_dictionary(), with(1, pl::SupplyKind::passive));
  EXPECT_TRUE(std::holds_alternative<pl::InfeasibleReport>(r));
}

TEST(Identify, IfpEstimateVerifiesOnTrainingData) {
  const auto r = pl::identify(clean(), pl::pendulum_dictionary(), with(5, pl::SupplyKind::input_feedback));
  ASSERT_TRUE(std::holds_alternative<pl::StorageEstimate>(r));
  const auto& est = std::get<pl::StorageEstimate>(r);
  EXPECT_EQ(est.supply_kind, pl::SupplyKind::input_feedback);
  EXPECT_GE(est.margin, 0.0);
  EXPECT_EQ(pl::verify_estimate(est, clean(), 5).violations(), 0);
}

TEST(Identify, PassiveFeasibilitySurvivesScalingByCSquared) {
  const auto r = pl::identify(clean(), pl::pendulum_dictionary(), with(1, pl::SupplyKind::passive));
  ASSERT_TRUE(std::holds_alternative<pl::StorageEstimate>(r));
  auto est = std::get<pl::StorageEstimate>(r);
  const double c = 3.0;
  const auto scaled = pl::Trajectory::make(clean().sample_times, clean().states, c * clean().inputs, c * clean().outputs);
  est.theta *= c * c;
  pl::VerifyOptions v;
  v.eps_pos = 0.0;
  v.dissipation_tol = 1e-7;
  EXPECT_EQ(pl::verify_estimate(est, scaled, 1, v).violations(), 0);
}

TEST(Verify, AnalyticStorageOnFinelySampledData) {
  // Same experiment at 100 Hz: trapezoid error shrinks and the exact storage verifies.
  pl::SimulationOptions o;
  o.duration = 30.0;
  o.sample_period = 0.01;
  const auto fine = pl::simulate(pl::pendulum_model(8.0, 0.5), Eigen::Vector2d::Zero(), pl::InputSignal::multisine(), o);
  const auto est = pl::pendulum_energy_storage(8.0, 0.5);
  pl::VerifyOptions v;
  v.dissipation_tol = 1e-3;
  for (int t : {1, 10, 100, 1000}) EXPECT_EQ(pl::verify_estimate(est, fine, t, v).violations(), 0) << "T=" << t;
}

TEST(Verify, ZeroThetaFailsPositivity) {
  auto est = pl::pendulum_energy_storage(8.0, 0.5);
  est.theta.setZero();
  est.margin = 0.0;
  const auto rep = pl::verify_estimate(est, clean(), 1);
  EXPECT_GT(rep.positivity_violations, 0);
}
