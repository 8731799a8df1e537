#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <future>
#include <map>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "passivity_lab/analysis.hpp"
#include "passivity_lab/benchmark.hpp"
#include "passivity_lab/config.hpp"
#include "passivity_lab/identify.hpp"
#include "passivity_lab/report.hpp"
#include "passivity_lab/trajectory.hpp"

namespace passivity_lab {

/// Noise-free simulation of the configured experiment.
inline Trajectory clean_trajectory(const RunConfig& cfg) {
  return simulate(pendulum_model(cfg.b1, cfg.b2), cfg.x0, cfg.input(), cfg.simulation());
}

inline Trajectory noisy_copy(const Trajectory& clean, const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.sigma == 0.0) return clean;
  return add_measurement_noise(clean, cfg.noise_channel - 1, cfg.sigma, seed);
}

inline Trajectory experiment_trajectory(const RunConfig& cfg) {
  return noisy_copy(clean_trajectory(cfg), cfg, cfg.seed);
}

/// identify followed by pruning of an optimal estimate.
inline IdentifyResult identify_and_prune(const Trajectory& traj, const RunConfig& cfg, int window) {
  auto r = identify(traj, pendulum_dictionary(), cfg.identify_options(window));
  if (auto* est = std::get_if<StorageEstimate>(&r)) *est = prune(*est, cfg.prune_threshold);
  return r;
}

// ---------------------------------------------------------------------------

struct SweepRow {
  int window = 0;
  std::string status;
  double margin = 0.0;  // NaN unless optimal
};

inline std::vector<SweepRow> feasibility_sweep(const Trajectory& traj, const RunConfig& cfg) {
  if (cfg.sweep_windows.empty()) throw ArgumentError("sweep.T list is empty");
  std::vector<SweepRow> rows;
  for (int t : cfg.sweep_windows) {
    const auto r = identify(traj, pendulum_dictionary(), cfg.identify_options(t));
    if (const auto* est = std::get_if<StorageEstimate>(&r))
      rows.push_back({t, "optimal", est->margin});
    else
      rows.push_back({t, status_tag(std::get<InfeasibleReport>(r).status),
                      std::numeric_limits<double>::quiet_NaN()});
  }
  return rows;
}

/// Smallest T after which every swept window is feasible; 0 if the last one is not.
inline int feasibility_transition(const std::vector<SweepRow>& rows) {
  int t_star = 0;
  for (const auto& r : rows) {
    if (r.status != "optimal") t_star = 0;
    else if (t_star == 0) t_star = r.window;
  }
  return t_star;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "T,status,margin\n";
  os.precision(10);
  for (const auto& r : rows) {
    os << r.window << ',' << r.status << ',';
    if (r.status == "optimal") os << r.margin;
    os << '\n';
  }
}

// ---------------------------------------------------------------------------

struct MonteCarloRun {
  std::uint64_t seed = 0;
  std::string status;
  double margin = 0.0;
  std::vector<std::string> kept;
};

struct MonteCarloSummary {
  std::vector<MonteCarloRun> runs;
  int feasible = 0;
  double margin_min = 0.0;
  double margin_max = 0.0;
  double margin_mean = 0.0;
  std::map<std::string, int> kept_frequency;
};

/// Independent noise realizations (seed_base + i) of one clean trajectory,
/// identified concurrently.
inline MonteCarloSummary monte_carlo(const RunConfig& cfg) {
  const Trajectory clean = clean_trajectory(cfg);
  const auto one = [&cfg, &clean](int i) {
    MonteCarloRun run;
    run.seed = cfg.seed_base + static_cast<std::uint64_t>(i);
    const auto r = identify_and_prune(noisy_copy(clean, cfg, run.seed), cfg, cfg.window);
    if (const auto* est = std::get_if<StorageEstimate>(&r)) {
      run.status = "optimal";
      run.margin = est->margin;
      run.kept = kept_terms(*est);
    } else {
      run.status = status_tag(std::get<InfeasibleReport>(r).status);
    }
    return run;
  };

  const int workers = cfg.threads > 0 ? cfg.threads
                                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  MonteCarloSummary s;
  s.runs.resize(static_cast<std::size_t>(cfg.runs));
  for (int start = 0; start < cfg.runs; start += workers) {
    std::vector<std::future<MonteCarloRun>> batch;
    for (int i = start; i < std::min(cfg.runs, start + workers); ++i)
      batch.push_back(std::async(std::launch::async, one, i));
    for (std::size_t b = 0; b < batch.size(); ++b)
      s.runs[static_cast<std::size_t>(start) + b] = batch[b].get();
  }

  for (const auto& f : pendulum_dictionary().features) s.kept_frequency[f.name()] = 0;
  double sum = 0.0;
  for (const auto& run : s.runs) {
    if (run.status != "optimal") continue;
    s.margin_min = s.feasible == 0 ? run.margin : std::min(s.margin_min, run.margin);
    s.margin_max = s.feasible == 0 ? run.margin : std::max(s.margin_max, run.margin);
    sum += run.margin;
    ++s.feasible;
    for (const auto& k : run.kept) ++s.kept_frequency[k];
  }
  if (s.feasible > 0) s.margin_mean = sum / s.feasible;
  return s;
}

inline json monte_carlo_to_json(const MonteCarloSummary& s, const RunConfig& cfg) {
  json runs = json::array();
  for (const auto& r : s.runs)
    runs.push_back({{"seed", r.seed}, {"status", r.status}, {"margin", r.margin}, {"kept_terms", r.kept}});
  json j{{"runs", cfg.runs},
         {"feasible", s.feasible},
         {"sigma", cfg.sigma},
         {"T", cfg.window},
         {"structural", cfg.structural},
         {"seed_base", cfg.seed_base},
         {"per_run", runs},
         {"kept_frequency", s.kept_frequency}};
  if (s.feasible > 0)
    j["margin"] = {{"min", s.margin_min}, {"max", s.margin_max}, {"mean", s.margin_mean}};
  return j;
}

// ---------------------------------------------------------------------------

struct DoaRun {
  LfsSeries lfs;
  DoAEstimate estimate;
  std::vector<double> levels;
  std::vector<std::pair<double, std::vector<Eigen::Vector2d>>> contours;
};

/// L_fS estimate -> negative region -> level-set DoA. Pruned estimates are
/// analysed in their pruned form.
inline DoaRun doa_pipeline(const StorageEstimate& raw, const Trajectory& traj, const RunConfig& cfg) {
  const StorageEstimate est = raw.is_pruned() ? pruned_storage(raw) : raw;
  DoaRun run;
  run.lfs = estimate_lfs(est, traj, constant_direction(cfg.b));
  NegativeRegionOptions nopt;
  nopt.margin_tol = cfg.margin_tol;
  nopt.whole_space_prior = cfg.whole_space;
  const RegionDescriptor region = negative_region(run.lfs, traj, nopt);

  DoaOptions dopt;
  dopt.grid = cfg.grid;
  dopt.c_tol = cfg.c_tol;
  if (region.kind == RegionKind::whole_space) {
    const Eigen::Vector2d extent = traj.states.cwiseAbs().colwise().maxCoeff().transpose();
    dopt.search_box = std::make_pair(Eigen::Vector2d(-cfg.search_pad * extent),
                                     Eigen::Vector2d(cfg.search_pad * extent));
  }
  run.estimate = doa_estimate(est, region, dopt);

  run.levels = cfg.level_values;
  if (run.levels.empty())
    for (double f : {0.25, 0.5, 0.75, 1.0}) run.levels.push_back(f * run.estimate.level);
  const LevelGrid grid(est, run.estimate.box_lower, run.estimate.box_upper, cfg.grid);
  for (double c : run.levels) run.contours.emplace_back(c, grid.contour(c));
  return run;
}

inline void write_level_csv(std::ostream& os, const DoaRun& run) {
  os << "c,x1,x2\n";
  os.precision(10);
  for (const auto& [c, pts] : run.contours)
    for (const auto& p : pts) os << c << ',' << p(0) << ',' << p(1) << '\n';
}

inline void write_lfs_csv(std::ostream& os, const LfsSeries& lfs) {
  os << "t,lfs\n";
  os.precision(17);
  for (Eigen::Index i = 0; i < lfs.values.size(); ++i) os << lfs.times(i) << ',' << lfs.values(i) << '\n';
}

// ---------------------------------------------------------------------------

struct DampingRun {
  Eigen::VectorXd times;
  Eigen::VectorXd s_open;
  std::vector<double> gains;
  std::vector<Eigen::VectorXd> s_closed;

  // First sample index with S <= frac * S(x0); -1 if never reached.
  static Eigen::Index first_passage(const Eigen::VectorXd& s, double frac = 0.01) {
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) <= frac * s(0)) return i;
    return -1;
  }
};

inline Eigen::VectorXd storage_series(const StorageEstimate& est, const Trajectory& traj) {
  Eigen::VectorXd s(traj.size());
  for (Eigen::Index i = 0; i < traj.size(); ++i) s(i) = eval_storage(est, traj.state(i));
  return s;
}

/// Autonomous run against damping-controlled runs u = -k dS/dx . b, one per
/// gain; k = 0 reproduces the autonomous run.
inline DampingRun damping_comparison(const StorageEstimate& raw, const RunConfig& cfg) {
  const StorageEstimate est = raw.is_pruned() ? pruned_storage(raw) : raw;
  const BenchmarkModel model = pendulum_model(cfg.b1, cfg.b2);
  SimulationOptions opt = cfg.simulation();
  opt.duration = cfg.damping_duration;
  opt.max_samples.reset();
  const Trajectory open = simulate(model, cfg.damping_x0, InputSignal::zero(), opt);
  DampingRun run;
  run.times = open.sample_times;
  run.s_open = storage_series(est, open);
  for (double k : cfg.gains) {
    if (k < 0.0) throw ArgumentError("damping gain must be >= 0");
    run.gains.push_back(k);
    if (k == 0.0) {
      run.s_closed.push_back(run.s_open);
      continue;
    }
    const Trajectory closed = simulate_closed_loop(model, damping_control(est, cfg.b, k), cfg.damping_x0, opt);
    run.s_closed.push_back(storage_series(est, closed));
  }
  return run;
}

inline void write_damping_csv(std::ostream& os, const DampingRun& run) {
  os << "t,S_open";
  for (double k : run.gains) os << ",S_closed_k" << k;
  os << '\n';
  os.precision(12);
  for (Eigen::Index i = 0; i < run.times.size(); ++i) {
    os << run.times(i) << ',' << run.s_open(i);
    for (const auto& s : run.s_closed) os << ',' << s(i);
    os << '\n';
  }
}

}  // namespace passivity_lab
