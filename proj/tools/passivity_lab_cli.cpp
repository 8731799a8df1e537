// passivity-lab: command-line front end for storage-function identification
// and the analyses built on it.

#include "CLI11.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "passivity_lab/commands.hpp"

namespace pl = passivity_lab;

namespace {

enum Exit { ok = 0, failure = 1, config_error = 2, infeasible = 3, degenerate = 4 };

struct Args {
  std::string command;
  std::string config;
  bool paper_defaults = false;
  std::string out;
  std::vector<std::string> settings;
  std::string trajectory;
  std::string result;
  std::string levels;
  std::string lfs;
  double rho = std::nan("");
  double nu = std::nan("");
};

// Writes to --out when given, stdout otherwise.
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream os(path);
  if (!os) throw pl::ParseError("cannot write " + path);
  write(os);
}

pl::RunConfig load_config(const Args& a) {
  if (a.paper_defaults && !a.config.empty())
    throw pl::ArgumentError("--paper-defaults cannot be combined with --config");
  pl::RunConfig cfg = pl::paper_defaults(a.command);
  if (!a.config.empty()) pl::merge_ini_file(cfg, a.config);
  for (const auto& s : a.settings) pl::apply_assignment(cfg, s);
  pl::validate(cfg);
  return cfg;
}

pl::Trajectory input_trajectory(const Args& a, const pl::RunConfig& cfg) {
  return a.trajectory.empty() ? pl::experiment_trajectory(cfg) : pl::load_csv(a.trajectory);
}

int cmd_simulate(const Args& a, const pl::RunConfig& cfg) {
  const auto traj = pl::experiment_trajectory(cfg);
  emit(a.out, [&](std::ostream& os) { pl::write_csv(os, traj); });
  std::cerr << "simulate: " << traj.size() << " samples\n";
  return ok;
}

int cmd_identify(const Args& a, const pl::RunConfig& cfg) {
  const auto traj = input_trajectory(a, cfg);
  const auto r = pl::identify_and_prune(traj, cfg, cfg.window);
  emit(a.out, [&](std::ostream& os) { os << pl::result_to_json(r).dump(2) << '\n'; });
  if (const auto* rep = std::get_if<pl::InfeasibleReport>(&r)) {
    std::cerr << "identify: " << rep->summary << '\n';
    return infeasible;
  }
  const auto& est = std::get<pl::StorageEstimate>(r);
  std::cerr << "identify: optimal, margin " << est.margin << ", kept";
  for (const auto& k : pl::kept_terms(est)) std::cerr << ' ' << k;
  std::cerr << '\n';
  return ok;
}

int cmd_sweep(const Args& a, const pl::RunConfig& cfg) {
  const auto traj = input_trajectory(a, cfg);
  const auto rows = pl::feasibility_sweep(traj, cfg);
  emit(a.out, [&](std::ostream& os) { pl::write_sweep_csv(os, rows); });
  const int t_star = pl::feasibility_transition(rows);
  std::cerr << "sweep: " << (t_star > 0 ? "feasible from T=" + std::to_string(t_star)
                                        : std::string("not feasible at the largest T"))
            << '\n';
  return ok;
}

int cmd_montecarlo(const Args& a, const pl::RunConfig& cfg) {
  const auto s = pl::monte_carlo(cfg);
  emit(a.out, [&](std::ostream& os) { os << pl::monte_carlo_to_json(s, cfg).dump(2) << '\n'; });
  std::cerr << "montecarlo: " << s.feasible << "/" << cfg.runs << " feasible";
  if (s.feasible > 0) std::cerr << ", margin in [" << s.margin_min << ", " << s.margin_max << "]";
  std::cerr << '\n';
  return ok;
}

// Estimate from --result, or identified from the configured experiment.
std::optional<pl::StorageEstimate> storage_for_analysis(const Args& a, const pl::RunConfig& cfg,
                                                        const pl::Trajectory& traj) {
  if (!a.result.empty()) return pl::estimate_from_json(pl::read_json_file(a.result));
  const auto r = pl::identify_and_prune(traj, cfg, cfg.window);
  if (const auto* rep = std::get_if<pl::InfeasibleReport>(&r)) {
    std::cerr << "identify: " << rep->summary << '\n';
    return std::nullopt;
  }
  return std::get<pl::StorageEstimate>(r);
}

int cmd_doa(const Args& a, const pl::RunConfig& cfg) {
  const auto traj = input_trajectory(a, cfg);
  const auto est = storage_for_analysis(a, cfg, traj);
  if (!est) return infeasible;
  const auto run = pl::doa_pipeline(*est, traj, cfg);
  const std::string ref = a.result.empty() ? "identified from configuration" : a.result;
  emit(a.out, [&](std::ostream& os) { os << pl::doa_to_json(run.estimate, ref).dump(2) << '\n'; });
  std::string levels = a.levels;
  if (levels.empty() && !a.out.empty()) levels = a.out + ".levels.csv";
  if (!levels.empty()) emit(levels, [&](std::ostream& os) { pl::write_level_csv(os, run); });
  if (!a.lfs.empty()) emit(a.lfs, [&](std::ostream& os) { pl::write_lfs_csv(os, run.lfs); });
  std::cerr << "doa: c = " << run.estimate.level << " (" << pl::region_tag(run.estimate.region.kind)
            << (run.estimate.limited_by_boundedness ? ", boundedness-limited" : ", containment-limited")
            << ")\n";
  return ok;
}

int cmd_damping(const Args& a, const pl::RunConfig& cfg) {
  std::optional<pl::StorageEstimate> est;
  if (!a.result.empty()) {
    est = pl::estimate_from_json(pl::read_json_file(a.result));
  } else {
    est = storage_for_analysis(a, cfg, input_trajectory(a, cfg));
    if (!est) return infeasible;
  }
  const auto run = pl::damping_comparison(*est, cfg);
  emit(a.out, [&](std::ostream& os) { pl::write_damping_csv(os, run); });
  std::cerr << "damping: 1% of S(x0) reached at sample " << pl::DampingRun::first_passage(run.s_open)
            << " open loop";
  for (std::size_t i = 0; i < run.gains.size(); ++i)
    std::cerr << ", " << pl::DampingRun::first_passage(run.s_closed[i]) << " with k=" << run.gains[i];
  std::cerr << '\n';
  return ok;
}

int cmd_certify(const Args& a) {
  if (std::isnan(a.rho) || std::isnan(a.nu)) throw pl::ArgumentError("certify needs --rho and --nu");
  const auto v = pl::certify_feedback(a.rho, a.nu);
  const char* word = v == pl::Verdict::certified ? "certified" : "not_certified";
  emit(a.out, [&](std::ostream& os) { os << word << '\n'; });
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Storage-function identification from trajectory data"};
  Args a;
  app.add_option("command", a.command, "simulate|identify|sweep|montecarlo|doa|damping|certify")
      ->required()
      ->check(CLI::IsMember({"simulate", "identify", "sweep", "montecarlo", "doa", "damping", "certify"}));
  app.add_option("--config", a.config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_flag("--paper-defaults", a.paper_defaults, "use the built-in pendulum experiment settings");
  app.add_option("--out", a.out, "output file (default: stdout)");
  app.add_option("--set", a.settings, "override a setting, section.key=value")->take_all();
  app.add_option("--trajectory", a.trajectory, "trajectory CSV instead of simulating")->check(CLI::ExistingFile);
  app.add_option("--result", a.result, "result JSON from identify")->check(CLI::ExistingFile);
  app.add_option("--levels", a.levels, "level-curve CSV (doa)");
  app.add_option("--lfs", a.lfs, "L_fS series CSV (doa)");
  app.add_option("--rho", a.rho, "plant OFP margin (certify)");
  app.add_option("--nu", a.nu, "IFP margin of the other system (certify)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return config_error;
  }

  try {
    if (a.command == "certify") return cmd_certify(a);
    const pl::RunConfig cfg = load_config(a);
    if (a.command == "simulate") return cmd_simulate(a, cfg);
    if (a.command == "identify") return cmd_identify(a, cfg);
    if (a.command == "sweep") return cmd_sweep(a, cfg);
    if (a.command == "montecarlo") return cmd_montecarlo(a, cfg);
    if (a.command == "doa") return cmd_doa(a, cfg);
    if (a.command == "damping") return cmd_damping(a, cfg);
  } catch (const pl::ArgumentError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const pl::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const pl::MissingPriorError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const pl::DegenerateError& e) {
    std::cerr << "degenerate input: " << e.what() << '\n';
    return degenerate;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return failure;
  }
  return failure;
}
