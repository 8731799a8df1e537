#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "passivity_lab/errors.hpp"

namespace passivity_lab {

struct NoiseMeta {
  int channel = 0;  // zero-based state index
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Uniformly sampled record of a SISO input-affine system.
///
/// Row i of `states` is x(t_i). All sequences share the length N >= 2 and the
/// time grid is uniform with period `sample_period`. Construct through
/// `Trajectory::make`, which validates those invariants.
struct Trajectory {
  Eigen::VectorXd sample_times;
  Eigen::MatrixXd states;  // N x n
  Eigen::VectorXd inputs;
  Eigen::VectorXd outputs;
  double sample_period = 0.0;
  std::optional<NoiseMeta> noise_meta;

  Eigen::Index size() const { return sample_times.size(); }
  Eigen::Index state_dim() const { return states.cols(); }
  Eigen::VectorXd state(Eigen::Index i) const { return states.row(i).transpose(); }

  static Trajectory make(Eigen::VectorXd times, Eigen::MatrixXd states, Eigen::VectorXd inputs,
                         Eigen::VectorXd outputs, std::optional<NoiseMeta> noise = std::nullopt);
};

namespace detail {

// Returns an empty string if the invariants hold, otherwise a description.
inline std::string check_trajectory(const Eigen::VectorXd& times, const Eigen::MatrixXd& states,
                                    const Eigen::VectorXd& inputs, const Eigen::VectorXd& outputs,
                                    double* period_out) {
  const auto n = times.size();
  if (n < 2) return "need at least 2 samples";
  if (states.rows() != n || inputs.size() != n || outputs.size() != n)
    return "sequence lengths differ";
  if (states.cols() < 1) return "state dimension must be >= 1";
  const double period = (times(n - 1) - times(0)) / static_cast<double>(n - 1);
  if (!(period > 0.0)) return "time must be strictly increasing";
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double dt = times(i + 1) - times(i);
    if (!(dt > 0.0)) return "time must be strictly increasing (sample " + std::to_string(i + 1) + ")";
    // 1e-12 relative, plus the rounding carried by the time stamps themselves.
    const double tol = 1e-12 * period + 8.0 * std::numeric_limits<double>::epsilon() *
                                            std::max(std::abs(times(i)), std::abs(times(i + 1)));
    if (std::abs(dt - period) > tol)
      return "non-uniform sampling at sample " + std::to_string(i + 1);
  }
  if (period_out) *period_out = period;
  return {};
}

}  // namespace detail

inline Trajectory Trajectory::make(Eigen::VectorXd times, Eigen::MatrixXd states,
                                   Eigen::VectorXd inputs, Eigen::VectorXd outputs,
                                   std::optional<NoiseMeta> noise) {
  double period = 0.0;
  if (auto err = detail::check_trajectory(times, states, inputs, outputs, &period); !err.empty())
    throw ArgumentError("invalid trajectory: " + err);
  Trajectory t;
  t.sample_times = std::move(times);
  t.states = std::move(states);
  t.inputs = std::move(inputs);
  t.outputs = std::move(outputs);
  t.sample_period = period;
  t.noise_meta = noise;
  return t;
}

/// Trapezoid-rule approximation of the integral of a sampled integrand over
/// [t_k, t_j]. Exact for integrands that are piecewise linear on the grid.
inline double trapezoid_integral(const Trajectory& traj, const Eigen::VectorXd& integrand,
                                 Eigen::Index k, Eigen::Index j) {
  if (integrand.size() != traj.size())
    throw ArgumentError("integrand length does not match trajectory");
  if (k < 0 || j >= traj.size() || k >= j)
    throw ArgumentError("trapezoid_integral requires 0 <= k < j < N");
  double sum = 0.5 * (integrand(k) + integrand(j));
  for (Eigen::Index i = k + 1; i < j; ++i) sum += integrand(i);
  return sum * traj.sample_period;
}

/// Running trapezoid integral: out(i) = integral from t_0 to t_i. Window
/// integrals are differences of two entries.
inline Eigen::VectorXd cumulative_trapezoid(const Eigen::VectorXd& integrand, double period) {
  Eigen::VectorXd out(integrand.size());
  if (integrand.size() == 0) return out;
  out(0) = 0.0;
  for (Eigen::Index i = 1; i < integrand.size(); ++i)
    out(i) = out(i - 1) + 0.5 * period * (integrand(i - 1) + integrand(i));
  return out;
}

/// Copy of `traj` with i.i.d. N(0, sigma^2) samples added to one state channel.
/// Inputs and outputs are left as recorded.
inline Trajectory add_measurement_noise(const Trajectory& traj, int channel, double sigma,
                                        std::uint64_t seed) {
  if (channel < 0 || channel >= traj.state_dim())
    throw ArgumentError("noise channel out of range");
  if (!(sigma >= 0.0)) throw ArgumentError("sigma must be >= 0");
  Trajectory out = traj;
  out.noise_meta = NoiseMeta{channel, sigma, seed};
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.states(i, channel) += gauss(rng);
  return out;
}

// ---------------------------------------------------------------------------
// CSV I/O: header `t,x1,...,xn,u,y`, '#' comment lines, 17 significant digits.

inline void write_csv(std::ostream& os, const Trajectory& traj) {
  if (traj.noise_meta) {
    os << "# noise: channel=" << traj.noise_meta->channel + 1 << " sigma="
       << std::setprecision(17) << traj.noise_meta->sigma << " seed=" << traj.noise_meta->seed
       << '\n';
  }
  os << 't';
  for (Eigen::Index c = 0; c < traj.state_dim(); ++c) os << ",x" << c + 1;
  os << ",u,y\n";
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < traj.size(); ++i) {
    os << traj.sample_times(i);
    for (Eigen::Index c = 0; c < traj.state_dim(); ++c) os << ',' << traj.states(i, c);
    os << ',' << traj.inputs(i) << ',' << traj.outputs(i) << '\n';
  }
}

inline void save_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ArgumentError("cannot open for writing: " + path);
  write_csv(os, traj);
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(s);
  while (std::getline(is, field, sep)) out.push_back(field);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& field, int line_no) {
  const auto f = trim(field);
  try {
    std::size_t used = 0;
    const double v = std::stod(f, &used);
    if (used != f.size()) throw std::invalid_argument(f);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": not a number: '" + f + "'");
  }
}

inline std::optional<NoiseMeta> parse_noise_comment(const std::string& line) {
  const auto pos = line.find("noise:");
  if (pos == std::string::npos) return std::nullopt;
  NoiseMeta meta;
  std::istringstream is(line.substr(pos + 6));
  std::string kv;
  bool any = false;
  while (is >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const auto key = kv.substr(0, eq);
    const auto val = kv.substr(eq + 1);
    try {
      if (key == "channel") meta.channel = std::stoi(val) - 1;
      else if (key == "sigma") meta.sigma = std::stod(val);
      else if (key == "seed") meta.seed = std::stoull(val);
      else continue;
    } catch (const std::exception&) {
      throw ParseError("bad noise comment value '" + kv + "'");
    }
    any = true;
  }
  return any ? std::optional<NoiseMeta>(meta) : std::nullopt;
}

}  // namespace detail

inline Trajectory read_csv(std::istream& is) {
  std::string line;
  int line_no = 0;
  std::optional<NoiseMeta> noise;
  std::optional<std::size_t> n_states;
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      if (auto m = detail::parse_noise_comment(t)) noise = m;
      continue;
    }
    const auto fields = detail::split(t, ',');
    if (!n_states) {
      const auto bad_header = [&] {
        return ParseError("line " + std::to_string(line_no) +
                          ": malformed header, expected t,x1,...,xn,u,y");
      };
      if (fields.size() < 4) throw bad_header();
      if (detail::trim(fields.front()) != "t" || detail::trim(fields[fields.size() - 2]) != "u" ||
          detail::trim(fields.back()) != "y")
        throw bad_header();
      for (std::size_t c = 1; c + 2 < fields.size(); ++c)
        if (detail::trim(fields[c]) != "x" + std::to_string(c)) throw bad_header();
      n_states = fields.size() - 3;
      continue;
    }
    if (fields.size() != *n_states + 3)
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(*n_states + 3) + " fields, got " +
                       std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(detail::parse_number(f, line_no));
    if (!rows.empty() && !(row[0] > rows.back()[0]))
      throw ParseError("line " + std::to_string(line_no) + ": time is not increasing");
    rows.push_back(std::move(row));
  }
  if (!n_states) throw ParseError("missing header line");
  if (rows.size() < 2) throw ParseError("need at least 2 samples");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(*n_states);
  Eigen::VectorXd times(n), u(n), y(n);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    times(i) = r[0];
    for (Eigen::Index c = 0; c < d; ++c) x(i, c) = r[static_cast<std::size_t>(c + 1)];
    u(i) = r[static_cast<std::size_t>(d + 1)];
    y(i) = r[static_cast<std::size_t>(d + 2)];
  }
  double period = 0.0;
  if (auto err = detail::check_trajectory(times, x, u, y, &period); !err.empty())
    throw ParseError("invalid trajectory data: " + err);
  return Trajectory::make(std::move(times), std::move(x), std::move(u), std::move(y), noise);
}

inline Trajectory load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open trajectory file: " + path);
  return read_csv(is);
}

}  // namespace passivity_lab
