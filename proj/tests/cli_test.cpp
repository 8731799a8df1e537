#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("passivity_lab_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  // Runs the CLI with stderr captured to `<name>.err`; returns the exit code.
  static int run(const std::string& args, const std::string& name = "last") {
    const std::string cmd = std::string(PASSIVITY_LAB_CLI) + " " + args + " 2> " + path(name + ".err");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::vector<std::string> lines(const std::string& p) {
    std::vector<std::string> out;
    std::ifstream in(p);
    for (std::string l; std::getline(in, l);)
      if (!l.empty() && l[0] != '#') out.push_back(l);
    return out;
  }

  static json read_json(const std::string& p) { return json::parse(slurp(p)); }

  // theta on the pendulum dictionary for S = 0.123 x1^2 + 0.494 x2^2 + 7.67 (1 - cos x1)
  static std::string write_reference_storage() {
    const std::string out = path("reference.json");
    EXPECT_EQ(run("identify --out " + out, "reference"), 0);
    auto j = read_json(out);
    j["theta"] = {0.123, 0.0, 0.494, 0.0, 0.0, 0.0, 0.0, 7.67, 0.0};
    j.erase("pruned");
    std::ofstream(out) << j.dump(2);
    return out;
  }

  static inline fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateDefaultAndShortRun) {
  ASSERT_EQ(run("simulate --out " + path("sim.csv")), 0);
  auto l = lines(path("sim.csv"));
  EXPECT_EQ(l.size(), 1001u);
  EXPECT_EQ(l.front(), "t,x1,x2,u,y");
  ASSERT_EQ(run("simulate --set simulation.duration=10 --out " + path("short.csv")), 0);
  EXPECT_EQ(lines(path("short.csv")).size(), 102u);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("simulate --set simulation.internal_step=0.03 --out " + path("x.csv")), 2);
  EXPECT_NE(slurp(path("last.err")).find("internal_step"), std::string::npos);
  EXPECT_EQ(run("simulate --set identify.window=3"), 2);
  EXPECT_EQ(run("transmogrify"), 2);
  EXPECT_EQ(run("certify --rho 0.5"), 2);
  std::ofstream(path("c.ini")) << "[noise]\nsigma = 0.01\n";
  EXPECT_EQ(run("identify --paper-defaults --config " + path("c.ini")), 2);
}

TEST_F(Cli, IniConfigIsApplied) {
  std::ofstream(path("short.ini")) << "[simulation]\nduration = 5\n";
  ASSERT_EQ(run("simulate --config " + path("short.ini") + " --out " + path("ini.csv")), 0);
  EXPECT_EQ(lines(path("ini.csv")).size(), 52u);
}

TEST_F(Cli, IdentifyNoiseFree) {
  ASSERT_EQ(run("identify --paper-defaults --out " + path("id.json")), 0);
  const auto j = read_json(path("id.json"));
  EXPECT_EQ(j.at("status"), "optimal");
  EXPECT_EQ(j.at("T"), 1);
  EXPECT_EQ(j.at("constraint_count"), 2000);
  EXPECT_NEAR(j.at("margin").get<double>(), 0.471, 0.02);
  EXPECT_EQ(j.at("theta").size(), 9u);
}

TEST_F(Cli, IdentifyNoisyShortWindowIsInfeasible) {
  ASSERT_EQ(run("identify --set noise.sigma=0.01 --out " + path("inf.json")), 3);
  const auto j = read_json(path("inf.json"));
  EXPECT_EQ(j.at("status"), "infeasible");
  EXPECT_LT(j.at("certificate").at("combined_rhs").get<double>(), 0.0);
}

TEST_F(Cli, IdentifyNoisyStructural) {
  ASSERT_EQ(run("identify --set noise.sigma=0.01 --set identify.T=200 --set identify.structural=true --out " +
                path("s200.json")),
            0);
  const auto j = read_json(path("s200.json"));
  const double rho = j.at("margin").get<double>();
  EXPECT_GE(rho, 0.48);
  EXPECT_LE(rho, 0.51);
  const auto kept = j.at("pruned").at("kept_terms").get<std::vector<std::string>>();
  EXPECT_NE(std::find(kept.begin(), kept.end(), "x2^2"), kept.end());
  EXPECT_NE(std::find(kept.begin(), kept.end(), "1-cos(x1)"), kept.end());
  for (const auto& k : kept) EXPECT_EQ(k.find("exp"), std::string::npos) << k;
}

TEST_F(Cli, IdentifyFromSavedTrajectory) {
  ASSERT_EQ(run("simulate --set noise.sigma=0.01 --out " + path("noisy.csv")), 0);
  EXPECT_NE(slurp(path("noisy.csv")).find("sigma"), std::string::npos);
  ASSERT_EQ(run("identify --trajectory " + path("noisy.csv") + " --set identify.T=200 --out " + path("a.json")),
            0);
  ASSERT_EQ(run("identify --set noise.sigma=0.01 --set identify.T=200 --out " + path("b.json")), 0);
  EXPECT_NEAR(read_json(path("a.json")).at("margin").get<double>(),
              read_json(path("b.json")).at("margin").get<double>(), 1e-9);
}

TEST_F(Cli, Deterministic) {
  ASSERT_EQ(run("identify --set noise.sigma=0.01 --set identify.T=50 --out " + path("d1.json")), 0);
  ASSERT_EQ(run("identify --set noise.sigma=0.01 --set identify.T=50 --out " + path("d2.json")), 0);
  EXPECT_EQ(slurp(path("d1.json")), slurp(path("d2.json")));
}

TEST_F(Cli, SweepFindsTransition) {
  ASSERT_EQ(run("sweep --paper-defaults --out " + path("sweep.csv"), "sweep"), 0);
  const auto l = lines(path("sweep.csv"));
  ASSERT_EQ(l.size(), 21u);
  EXPECT_EQ(l.front(), "T,status,margin");
  EXPECT_EQ(l[1].rfind("1,infeasible", 0), 0u);
  EXPECT_EQ(l[20].rfind("20,optimal", 0), 0u);
  EXPECT_NE(slurp(path("sweep.err")).find("feasible from T="), std::string::npos);
}

TEST_F(Cli, SweepNoiseFreeAllFeasible) {
  ASSERT_EQ(run("sweep --set noise.sigma=0 --set sweep.T=1-5 --out " + path("sweep0.csv")), 0);
  const auto l = lines(path("sweep0.csv"));
  ASSERT_EQ(l.size(), 6u);
  for (std::size_t i = 1; i < l.size(); ++i) EXPECT_NE(l[i].find("optimal"), std::string::npos) << l[i];
}

TEST_F(Cli, SweepWithoutWindowsIsConfigError) {
  EXPECT_EQ(run("sweep --set sweep.T="), 2);
}

TEST_F(Cli, MonteCarloSingleRun) {
  ASSERT_EQ(run("montecarlo --set montecarlo.runs=1 --out " + path("mc.json")), 0);
  const auto j = read_json(path("mc.json"));
  EXPECT_EQ(j.at("runs"), 1);
  EXPECT_EQ(j.at("feasible"), 1);
  const auto& m = j.at("margin");
  EXPECT_EQ(m.at("min"), m.at("max"));
  EXPECT_EQ(m.at("min"), m.at("mean"));
  EXPECT_EQ(j.at("per_run").size(), 1u);
  EXPECT_EQ(j.at("per_run")[0].at("seed"), 42);
}

TEST_F(Cli, DoaFromSavedEstimate) {
  const auto est = write_reference_storage();
  ASSERT_EQ(run("doa --result " + est + " --out " + path("doa.json") + " --lfs " + path("lfs.csv"), "doa"), 0);
  const auto j = read_json(path("doa.json"));
  EXPECT_GT(j.at("c").get<double>(), 0.0);
  EXPECT_EQ(j.at("region_kind"), "convex_hull");
  EXPECT_EQ(j.at("storage_ref"), est);
  EXPECT_TRUE(fs::exists(path("doa.json.levels.csv")));
  EXPECT_EQ(lines(path("lfs.csv")).front(), "t,lfs");
  EXPECT_EQ(lines(path("lfs.csv")).size(), 1000u);

  ASSERT_EQ(run("doa --result " + est + " --set analysis.whole_space=true --out " + path("doa_ws.json")), 0);
  const auto w = read_json(path("doa_ws.json"));
  EXPECT_EQ(w.at("region_kind"), "whole_space");
  EXPECT_TRUE(w.at("limited_by_boundedness").get<bool>());
  EXPECT_GT(w.at("c").get<double>(), j.at("c").get<double>());
}

TEST_F(Cli, DoaDefaultPipeline) {
  ASSERT_EQ(run("doa --paper-defaults --out " + path("doa_default.json") + " --levels " + path("lv.csv")), 0);
  EXPECT_GT(read_json(path("doa_default.json")).at("c").get<double>(), 0.0);
  EXPECT_EQ(lines(path("lv.csv")).front(), "c,x1,x2");
}

TEST_F(Cli, DoaNegativeStorageIsDegenerate) {
  auto j = read_json(write_reference_storage());
  j["theta"] = {-1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  std::ofstream(path("neg.json")) << j.dump();
  EXPECT_EQ(run("doa --result " + path("neg.json")), 4);
}

TEST_F(Cli, InfeasibleResultCannotBeAnalysed) {
  ASSERT_EQ(run("identify --set noise.sigma=0.01 --out " + path("inf2.json")), 3);
  EXPECT_EQ(run("doa --result " + path("inf2.json")), 2);
}

TEST_F(Cli, DampingSpeedsUpDecay) {
  const auto est = write_reference_storage();
  ASSERT_EQ(run("damping --result " + est + " --set analysis.k=0,1 --out " + path("damp.csv")), 0);
  const auto l = lines(path("damp.csv"));
  ASSERT_EQ(l.front(), "t,S_open,S_closed_k0,S_closed_k1");
  EXPECT_EQ(l.size(), 302u);
  const auto passage = [&](int col) {
    double s0 = -1.0;
    for (std::size_t i = 1; i < l.size(); ++i) {
      std::vector<double> v;
      std::stringstream ss(l[i]);
      for (std::string f; std::getline(ss, f, ',');) v.push_back(std::stod(f));
      if (s0 < 0) s0 = v[static_cast<std::size_t>(col)];
      if (v[static_cast<std::size_t>(col)] <= 0.01 * s0) return i;
      if (col == 2) EXPECT_EQ(v[1], v[2]) << "k=0 must match the open loop";
    }
    return l.size();
  };
  EXPECT_LT(passage(3), passage(1));
  passage(2);
}

TEST_F(Cli, DampingNegativeGainRejected) {
  EXPECT_EQ(run("damping --set analysis.k=-1"), 2);
}

TEST_F(Cli, Certify) {
  ASSERT_EQ(run("certify --rho 0.5 --nu -0.3 --out " + path("v1.txt")), 0);
  EXPECT_EQ(slurp(path("v1.txt")), "certified\n");
  ASSERT_EQ(run("certify --rho 0.5 --nu -0.5 --out " + path("v2.txt")), 0);
  EXPECT_EQ(slurp(path("v2.txt")), "not_certified\n");
  ASSERT_EQ(run("certify --rho 0.496 --nu 0 --out " + path("v3.txt")), 0);
  EXPECT_EQ(slurp(path("v3.txt")), "certified\n");
}
