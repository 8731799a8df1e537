#pragma once

#include <Eigen/Dense>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "passivity_lab/benchmark.hpp"
#include "passivity_lab/dictionary.hpp"
#include "passivity_lab/errors.hpp"
#include "passivity_lab/identify.hpp"

namespace passivity_lab {

/// Everything a CLI run needs. Defaults reproduce the pendulum experiment:
/// b1 = 8, b2 = 0.5, multisine input, 100 s at 10 Hz (1000 samples).
struct RunConfig {
  // [model]
  double b1 = 8.0;
  double b2 = 0.5;
  // [input]
  std::string input_kind = "multisine";  // multisine | zero
  // [simulation]
  double duration = 100.0;
  double sample_period = 0.1;
  double internal_step = 0.001;
  long max_samples = 1000;  // 0 = no cap
  Eigen::VectorXd x0 = Eigen::Vector2d::Zero();
  // [noise]
  int noise_channel = 1;  // 1-based
  double sigma = 0.0;
  std::uint64_t seed = 42;
  // [identify]
  int window = 1;
  SupplyKind supply = SupplyKind::output_feedback;
  bool structural = false;
  double eps_pos = 1e-6;
  double eig_tol = 1e-8;
  int max_cuts = 50;
  double prune_threshold = 0.01;
  // [sweep]
  std::vector<int> sweep_windows;
  // [montecarlo]
  int runs = 20;
  std::uint64_t seed_base = 42;
  int threads = 0;  // 0 = hardware concurrency
  // [analysis]
  Eigen::VectorXd b = Eigen::Vector2d(0.0, 1.0);
  std::vector<double> gains{0.5, 1.0, 2.0};
  Eigen::VectorXd damping_x0 = Eigen::Vector2d(1.0, 0.0);
  double damping_duration = 30.0;
  int grid = 400;
  double c_tol = 0.01;
  double margin_tol = 0.0;
  bool whole_space = false;
  double search_pad = 3.0;  // whole-space search box, multiple of the data extent
  std::vector<double> level_values;  // empty: a spread up to the DoA level

  InputSignal input() const {
    return input_kind == "zero" ? InputSignal::zero() : InputSignal::multisine();
  }

  SimulationOptions simulation() const {
    SimulationOptions o;
    o.duration = duration;
    o.sample_period = sample_period;
    o.internal_step = internal_step;
    if (max_samples > 0) o.max_samples = max_samples;
    return o;
  }

  IdentifyOptions identify_options(int T) const {
    IdentifyOptions o;
    o.window = T;
    o.supply = supply;
    o.structural = structural;
    o.eps_pos = eps_pos;
    o.eig_tol = eig_tol;
    o.max_cuts = max_cuts;
    return o;
  }
};

/// Per-command experiment settings: noise-free T = 1 for identify; sigma = 0.01
/// for the sweep (T = 1..20) and for 20 structural Monte Carlo runs at T = 200.
inline RunConfig paper_defaults(const std::string& command) {
  RunConfig c;
  if (command == "sweep") {
    c.sigma = 0.01;
    for (int t = 1; t <= 20; ++t) c.sweep_windows.push_back(t);
  } else if (command == "montecarlo") {
    c.sigma = 0.01;
    c.window = 200;
    c.structural = true;
  } else if (command == "doa" || command == "damping") {
    c.window = 200;
    c.structural = true;
  }
  return c;
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError(key + ": expected a number, got '" + v + "'");
  }
}

inline long to_long(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) throw ParseError(key + ": expected an integer, got '" + v + "'");
  return static_cast<long>(d);
}

inline bool to_bool(const std::string& key, std::string v) {
  for (auto& ch : v) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError(key + ": expected a boolean, got '" + v + "'");
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
  return out;
}

inline Eigen::VectorXd to_vector(const std::string& key, const std::string& v) {
  const auto d = to_doubles(key, v);
  return Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
}

// "1-20", "1,5,9" or a mix such as "1-4,10".
inline std::vector<int> to_windows(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& item : split_list(v)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(static_cast<int>(to_long(key, item)));
      continue;
    }
    const long a = to_long(key, item.substr(0, dash));
    const long b = to_long(key, item.substr(dash + 1));
    if (b < a) throw ParseError(key + ": empty range '" + item + "'");
    for (long t = a; t <= b; ++t) out.push_back(static_cast<int>(t));
  }
  return out;
}

}  // namespace detail

/// Applies one `section.key = value` setting. Unknown keys are errors.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  const auto& v = value;
  if (key == "model.b1") c.b1 = to_double(key, v);
  else if (key == "model.b2") c.b2 = to_double(key, v);
  else if (key == "input.kind") {
    if (v != "multisine" && v != "zero") throw ParseError(key + ": expected multisine or zero");
    c.input_kind = v;
  }
  else if (key == "simulation.duration") c.duration = to_double(key, v);
  else if (key == "simulation.sample_period") c.sample_period = to_double(key, v);
  else if (key == "simulation.internal_step") c.internal_step = to_double(key, v);
  else if (key == "simulation.max_samples") c.max_samples = to_long(key, v);
  else if (key == "simulation.x0") c.x0 = to_vector(key, v);
  else if (key == "noise.channel") c.noise_channel = static_cast<int>(to_long(key, v));
  else if (key == "noise.sigma") c.sigma = to_double(key, v);
  else if (key == "noise.seed") c.seed = static_cast<std::uint64_t>(to_long(key, v));
  else if (key == "identify.T") c.window = static_cast<int>(to_long(key, v));
  else if (key == "identify.supply") c.supply = supply_from_tag(v);
  else if (key == "identify.structural") c.structural = to_bool(key, v);
  else if (key == "identify.eps_pos") c.eps_pos = to_double(key, v);
  else if (key == "identify.eig_tol") c.eig_tol = to_double(key, v);
  else if (key == "identify.max_cuts") c.max_cuts = static_cast<int>(to_long(key, v));
  else if (key == "identify.prune_threshold") c.prune_threshold = to_double(key, v);
  else if (key == "sweep.T") c.sweep_windows = to_windows(key, v);
  else if (key == "montecarlo.runs") c.runs = static_cast<int>(to_long(key, v));
  else if (key == "montecarlo.seed_base") c.seed_base = static_cast<std::uint64_t>(to_long(key, v));
  else if (key == "montecarlo.threads") c.threads = static_cast<int>(to_long(key, v));
  else if (key == "analysis.b") c.b = to_vector(key, v);
  else if (key == "analysis.k") c.gains = to_doubles(key, v);
  else if (key == "analysis.x0") c.damping_x0 = to_vector(key, v);
  else if (key == "analysis.duration") c.damping_duration = to_double(key, v);
  else if (key == "analysis.grid") c.grid = static_cast<int>(to_long(key, v));
  else if (key == "analysis.c_tol") c.c_tol = to_double(key, v);
  else if (key == "analysis.margin_tol") c.margin_tol = to_double(key, v);
  else if (key == "analysis.whole_space") c.whole_space = to_bool(key, v);
  else if (key == "analysis.search_pad") c.search_pad = to_double(key, v);
  else if (key == "analysis.levels") c.level_values = to_doubles(key, v);
  else throw ParseError("unknown config key '" + key + "'");
}

/// Parses `key=value` (as given to --set).
inline void apply_assignment(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ParseError("expected section.key=value, got '" + assignment + "'");
  apply_setting(c, assignment.substr(0, eq), assignment.substr(eq + 1));
}

/// Overlays an INI document ([section] / key = value) onto `c`.
inline void merge_ini(RunConfig& c, std::istream& is) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ParseError("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) apply_setting(c, section + "." + key, value.data());
  }
}

inline void merge_ini_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  merge_ini(c, in);
}

/// Checks ranges before any computation; throws ArgumentError.
inline void validate(const RunConfig& c) {
  const auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw ArgumentError(std::string(what) + " must be positive");
  };
  positive(c.b1, "model.b1");
  positive(c.b2, "model.b2");
  positive(c.duration, "simulation.duration");
  positive(c.sample_period, "simulation.sample_period");
  positive(c.internal_step, "simulation.internal_step");
  detail::checked_ratio(c.sample_period, c.internal_step,
                        "simulation.internal_step must divide simulation.sample_period");
  if (c.max_samples < 0 || c.max_samples == 1) throw ArgumentError("simulation.max_samples must be 0 or >= 2");
  if (c.x0.size() != 2) throw ArgumentError("simulation.x0 needs 2 entries");
  if (c.noise_channel < 1 || c.noise_channel > 2) throw ArgumentError("noise.channel must be 1 or 2");
  if (!(c.sigma >= 0.0)) throw ArgumentError("noise.sigma must be >= 0");
  if (c.window < 1) throw ArgumentError("identify.T must be >= 1");
  if (!(c.eps_pos >= 0.0)) throw ArgumentError("identify.eps_pos must be >= 0");
  positive(c.eig_tol, "identify.eig_tol");
  if (c.max_cuts < 0) throw ArgumentError("identify.max_cuts must be >= 0");
  if (!(c.prune_threshold >= 0.0 && c.prune_threshold < 1.0))
    throw ArgumentError("identify.prune_threshold must be in [0, 1)");
  for (int t : c.sweep_windows)
    if (t < 1) throw ArgumentError("sweep.T entries must be >= 1");
  if (c.runs < 1) throw ArgumentError("montecarlo.runs must be >= 1");
  if (c.threads < 0) throw ArgumentError("montecarlo.threads must be >= 0");
  if (c.b.size() != 2 || (c.b.array() == 0.0).all()) throw ArgumentError("analysis.b needs 2 entries, not all zero");
  for (double k : c.gains)
    if (!(k >= 0.0)) throw ArgumentError("analysis.k gains must be >= 0");
  if (c.damping_x0.size() != 2) throw ArgumentError("analysis.x0 needs 2 entries");
  positive(c.damping_duration, "analysis.duration");
  if (c.grid < 3) throw ArgumentError("analysis.grid must be >= 3");
  positive(c.c_tol, "analysis.c_tol");
  positive(c.search_pad, "analysis.search_pad");
}

}  // namespace passivity_lab
