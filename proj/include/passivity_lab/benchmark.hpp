#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "passivity_lab/dictionary.hpp"
#include "passivity_lab/errors.hpp"
#include "passivity_lab/trajectory.hpp"

namespace passivity_lab {

/// Input-affine SISO system  x' = f(x) + g(x) u,  y = h(x).
struct BenchmarkModel {
  using Field = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using Output = std::function<double(const Eigen::VectorXd&)>;

  int state_dim = 0;
  Field drift;
  Field input_field;
  Output output_map;
  std::map<std::string, double> params;

  Eigen::VectorXd derivative(const Eigen::VectorXd& x, double u) const {
    return drift(x) + input_field(x) * u;
  }
};

inline BenchmarkModel pendulum_model(double b1, double b2) {
  if (!(b1 > 0.0) || !(b2 > 0.0)) throw ArgumentError("pendulum parameters must be positive");
  BenchmarkModel m;
  m.state_dim = 2;
  m.drift = [b1, b2](const Eigen::VectorXd& x) {
    return Eigen::Vector2d(x(1), -b1 * std::sin(x(0)) - b2 * x(1)).eval();
  };
  m.input_field = [](const Eigen::VectorXd&) { return Eigen::Vector2d(0.0, 1.0).eval(); };
  m.output_map = [](const Eigen::VectorXd& x) { return x(1); };
  m.params = {{"b1", b1}, {"b2", b2}};
  return m;
}

/// Analytic storage of the pendulum, S = x2^2 / 2 + b1 (1 - cos x1), written
/// over the nine-term pendulum dictionary.
inline StorageEstimate pendulum_energy_storage(double b1, double b2) {
  StorageEstimate est;
  est.dictionary = pendulum_dictionary();
  est.theta = Eigen::VectorXd::Zero(9);
  est.theta(2) = 0.5;
  est.theta(7) = b1;
  est.margin = b2;
  est.supply_kind = SupplyKind::output_feedback;
  return est;
}

struct Sinusoid {
  double amplitude = 0.0;
  double frequency = 0.0;  // rad/s
  double phase = 0.0;
};

struct InputSignal {
  enum class Kind { zero, multisine, custom };
  Kind kind = Kind::zero;
  std::vector<Sinusoid> components;

  static InputSignal zero() { return {}; }
  /// u(t) = 2 (2 sin 0.2t + sin t + sin 2t)
  static InputSignal multisine() {
    return {Kind::multisine, {{4.0, 0.2, 0.0}, {2.0, 1.0, 0.0}, {2.0, 2.0, 0.0}}};
  }
  static InputSignal custom(std::vector<Sinusoid> c) { return {Kind::custom, std::move(c)}; }

  double operator()(double t) const {
    double u = 0.0;
    for (const auto& s : components) u += s.amplitude * std::sin(s.frequency * t + s.phase);
    return u;
  }
};

/// Damping law u = -k (dS/dx . b).
struct Controller {
  double gain = 0.0;
  Eigen::VectorXd b;
  StorageEstimate storage;

  double operator()(const Eigen::VectorXd& x) const {
    return -gain * storage_gradient(storage, x).dot(b);
  }
};

struct SimulationOptions {
  double duration = 100.0;
  double sample_period = 0.1;
  double internal_step = 0.001;
  std::optional<Eigen::Index> max_samples;
};

namespace detail {

inline long checked_ratio(double num, double den, const char* what) {
  const double r = num / den;
  const long n = std::lround(r);
  if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-9 * std::max(1.0, r))
    throw ArgumentError(what);
  return n;
}

// Fixed-step RK4 with the input evaluated through `input(t, x)`; inputs are
// recorded at the sample instants from the same law.
template <typename InputLaw>
Trajectory integrate(const BenchmarkModel& model, const Eigen::VectorXd& x0, InputLaw&& input,
                     const SimulationOptions& opt) {
  if (x0.size() != model.state_dim) throw ArgumentError("initial state has wrong dimension");
  if (!(opt.sample_period > 0.0) || !(opt.internal_step > 0.0))
    throw ArgumentError("sample period and internal step must be positive");
  if (opt.duration < opt.sample_period) throw ArgumentError("duration shorter than one sample");
  const long sub =
      checked_ratio(opt.sample_period, opt.internal_step, "internal_step must divide sample_period");

  Eigen::Index n = static_cast<Eigen::Index>(std::floor(opt.duration / opt.sample_period + 1e-9)) + 1;
  if (opt.max_samples) n = std::min(n, *opt.max_samples);
  if (n < 2) throw ArgumentError("simulation must record at least 2 samples");

  const double h = opt.sample_period / static_cast<double>(sub);
  Eigen::VectorXd times(n), u(n), y(n);
  Eigen::MatrixXd xs(n, model.state_dim);
  Eigen::VectorXd x = x0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t_i = static_cast<double>(i) * opt.sample_period;
    times(i) = t_i;
    xs.row(i) = x.transpose();
    u(i) = input(t_i, x);
    y(i) = model.output_map(x);
    if (i + 1 == n) break;
    for (long s = 0; s < sub; ++s) {
      const double t = t_i + static_cast<double>(s) * h;
      const auto rhs = [&](double tt, const Eigen::VectorXd& xx) {
        return model.derivative(xx, input(tt, xx));
      };
      const Eigen::VectorXd k1 = rhs(t, x);
      const Eigen::VectorXd k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
      const Eigen::VectorXd k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
      const Eigen::VectorXd k4 = rhs(t + h, x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!x.allFinite()) throw SimulationDiverged(t + h);
    }
  }
  return Trajectory::make(std::move(times), std::move(xs), std::move(u), std::move(y));
}

}  // namespace detail

/// Open-loop simulation with classic RK4 at `internal_step`, sampled every
/// `sample_period`. N = floor(duration / sample_period) + 1, optionally capped.
inline Trajectory simulate(const BenchmarkModel& model, const Eigen::VectorXd& x0,
                           const InputSignal& input, const SimulationOptions& opt) {
  return detail::integrate(
      model, x0, [&input](double t, const Eigen::VectorXd&) { return input(t); }, opt);
}

/// Closed loop under a state-feedback damping controller applied at every
/// internal step. Recorded inputs are the applied control.
inline Trajectory simulate_closed_loop(const BenchmarkModel& model, const Controller& ctrl,
                                       const Eigen::VectorXd& x0, const SimulationOptions& opt) {
  if (ctrl.b.size() != model.state_dim) throw ArgumentError("controller vector has wrong dimension");
  return detail::integrate(
      model, x0, [&ctrl](double, const Eigen::VectorXd& x) { return ctrl(x); }, opt);
}

}  // namespace passivity_lab
