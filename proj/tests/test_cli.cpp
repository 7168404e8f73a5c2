#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "swssb/commands.hpp"

using namespace swssb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("swssb_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json base_json() {
  return nlohmann::json::parse(R"({
    "schema_version": 1,
    "dimension": 1,
    "sizes": [16],
    "alphas": [0.0],
    "initial": {"sector": "odd", "pattern": "random_in_sector"},
    "schedule": {"sweeps_total": 40, "burn_in_sweeps": 10, "sample_interval_sweeps": 5},
    "seeds": {"master_seed": 7, "n_trajectories": 2}
  })");
}

std::string error_message(const nlohmann::json& j) {
  try {
    config_from_json(j);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    return e.what();
  }
  ADD_FAILURE() << "config accepted: " << j.dump();
  return {};
}

struct Run {
  int code;
  std::string out;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(SWSSB_CLI_PATH) + " " + args + " 2>&1";
  Run r{0, {}};
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {-1, {}};
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  auto j = base_json();
  j["measurement"] = {{"observables", {"n_minus", "abs_m"}}, {"binder", true},
                      {"fidelity", {{"enabled", true}, {"radii", {0, 1}}, {"separation", 8}}}};
  const auto c = config_from_json(j);
  EXPECT_EQ(c.sizes, std::vector<std::uint32_t>{16});
  EXPECT_EQ(c.measurement.observables.size(), 2u);
  ASSERT_TRUE(c.measurement.fidelity.separation);
  EXPECT_EQ(*c.measurement.fidelity.separation, 8u);
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, ErrorsNameTheField) {
  auto j = base_json();
  j["alphas"] = {0.5, 1.5};
  EXPECT_NE(error_message(j).find("alphas[1]"), std::string::npos);

  j = base_json();
  j["schedule"]["sample_interval_sweeps"] = 0;
  EXPECT_NE(error_message(j).find("schedule.sample_interval_sweeps"), std::string::npos);

  j = base_json();
  j["schedule"]["burn_in_sweeps"] = 40;
  EXPECT_NE(error_message(j).find("schedule.burn_in_sweeps"), std::string::npos);

  j = base_json();
  j["variant"] = "strict";
  EXPECT_NE(error_message(j).find("variant"), std::string::npos);

  j = base_json();
  j["dimension"] = 2;
  EXPECT_NE(error_message(j).find("variant"), std::string::npos);

  j = base_json();
  j["measurement"] = {{"observables", {"rho_act"}}};
  EXPECT_NE(error_message(j).find("measurement.observables[0]"), std::string::npos);

  j = base_json();
  j["initial"]["pattern"] = "all_minus";  // N = 16 is even
  EXPECT_NE(error_message(j).find("initial.sector"), std::string::npos);

  j = base_json();
  j["seeds"]["n_trajectories"] = 0;
  EXPECT_NE(error_message(j).find("seeds.n_trajectories"), std::string::npos);

  j = base_json();
  j["sizez"] = {16};
  EXPECT_NE(error_message(j).find("sizez"), std::string::npos);

  j = base_json();
  j.erase("seeds");
  EXPECT_NE(error_message(j).find("seeds"), std::string::npos);

  j = base_json();
  j["measurement"] = {{"fidelity", {{"enabled", true}, {"radii", {7}}}}};
  EXPECT_NE(error_message(j).find("measurement.fidelity.radii[0]"), std::string::npos);
}

TEST(Simulate, SingleMinusIsFrozenAtAlphaZero) {
  auto j = base_json();
  j["sizes"] = {64};
  j["initial"]["pattern"] = "single_minus";
  auto cfg = config_from_json(j);
  SimulateOptions o;
  o.out_dir = scratch("single_minus").string();
  o.threads = 1;
  const auto rep = cmd_simulate(cfg, o);
  ASSERT_EQ(rep.result.cells.size(), 1u);
  const auto& s = rep.result.cells[0].summaries.at(0);
  EXPECT_EQ(s.observable, "n_minus");
  EXPECT_DOUBLE_EQ(s.mean, 1.0 / 64.0);
  EXPECT_EQ(s.std_error, 0.0);
  EXPECT_TRUE(fs::exists(rep.out_dir / "summary.csv"));
  EXPECT_TRUE(fs::exists(rep.out_dir / "manifest.json"));
  EXPECT_EQ(rep.files.back(), "manifest.json");
}

TEST(Simulate, OutputsIndependentOfThreadCount) {
  auto j = base_json();
  j["sizes"] = {8, 12};
  j["alphas"] = {0.3, 0.9};
  j["seeds"]["n_trajectories"] = 3;
  j["measurement"] = {{"observables", {"n_minus", "abs_m"}}, {"binder", true}, {"snapshot_every", 1},
                      {"fidelity", {{"enabled", true}, {"radii", {0, 1}}}}};
  const auto cfg = config_from_json(j);
  SimulateOptions a, b;
  a.out_dir = scratch("threads1").string();
  a.threads = 1;
  b.out_dir = scratch("threads4").string();
  b.threads = 4;
  const auto ra = cmd_simulate(cfg, a);
  const auto rb = cmd_simulate(cfg, b);
  ASSERT_EQ(ra.files, rb.files);
  for (const auto& f : ra.files) {
    if (f == "manifest.json") continue;
    EXPECT_EQ(slurp(ra.out_dir / f), slurp(rb.out_dir / f)) << f;
  }
  auto ma = nlohmann::json::parse(slurp(ra.out_dir / "manifest.json"));
  auto mb = nlohmann::json::parse(slurp(rb.out_dir / "manifest.json"));
  ma.erase("wall_time_seconds");
  mb.erase("wall_time_seconds");
  ma["config"].erase("output_dir");
  mb["config"].erase("output_dir");
  ma.erase("config_hash");
  mb.erase("config_hash");
  EXPECT_EQ(ma, mb);
}

TEST(Simulate, SeedChangesResults) {
  auto j = base_json();
  j["alphas"] = {0.5};
  const auto cfg = config_from_json(j);
  SimulateOptions a, b;
  a.out_dir = scratch("seed_a").string();
  b.out_dir = scratch("seed_b").string();
  b.seed = 8;
  const auto ra = cmd_simulate(cfg, a);
  const auto rb = cmd_simulate(cfg, b);
  EXPECT_NE(slurp(ra.out_dir / "summary.csv"), slurp(rb.out_dir / "summary.csv"));
}

TEST(Simulate, FailingTrajectoryIsIsolated) {
  auto j = base_json();
  j["alphas"] = {0.2, 0.6};
  j["seeds"]["n_trajectories"] = 3;
  const auto cfg = config_from_json(j);
  SimulateOptions o;
  o.out_dir = scratch("crash").string();
  o.threads = 2;
  o.hooks.before_trajectory = [](const TaskInfo& t) {
    if (t.alpha == 0.6 && t.trajectory == 1) throw std::runtime_error("injected fault");
  };
  const auto rep = cmd_simulate(cfg, o);
  ASSERT_EQ(rep.result.failures.size(), 1u);
  EXPECT_EQ(rep.result.failures[0].task.trajectory, 1u);
  EXPECT_NE(rep.result.failures[0].error.find("injected fault"), std::string::npos);
  EXPECT_EQ(rep.result.cells[0].trajectories_ok, 3u);
  EXPECT_EQ(rep.result.cells[1].trajectories_ok, 2u);
  const auto m = nlohmann::json::parse(slurp(rep.out_dir / "manifest.json"));
  EXPECT_EQ(m["failures"].size(), 1u);
  EXPECT_EQ(m["failures"][0]["stream_id"].get<std::uint64_t>(), stream_id_for(1, 1));
  EXPECT_EQ(m["cells"][1]["trajectories_failed"], 1);
}

TEST(Simulate, UnwritableOutputFailsBeforeRunning) {
  const auto blocker = scratch("blocker");
  { std::ofstream(blocker) << "x"; }
  auto cfg = config_from_json(base_json());
  SimulateOptions o;
  o.out_dir = (blocker / "sub").string();
  bool ran = false;
  o.hooks.before_trajectory = [&](const TaskInfo&) { ran = true; };
  try {
    cmd_simulate(cfg, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io_failure);
  }
  EXPECT_FALSE(ran);
}

TEST(FidelityCommand, ReadsArchivesFromSimulation) {
  auto j = base_json();
  j["alphas"] = {0.7};
  j["measurement"] = {{"snapshot_every", 1}, {"fidelity", {{"enabled", true}, {"radii", {1}}}}};
  SimulateOptions so;
  so.out_dir = scratch("fid").string();
  const auto rep = cmd_simulate(config_from_json(j), so);
  FidelityOptions fo;
  fo.snapshot_files = {rep.out_dir / "snapshots/L16_alpha0.7.sws"};
  fo.histogram_files = {rep.out_dir / "histograms/L16_alpha0.7_R1.swh"};
  fo.radii = {0, 1};
  fo.bootstrap_replicates = 50;
  const auto rows = cmd_fidelity(fo);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.L, 16u);
    EXPECT_DOUBLE_EQ(r.alpha, 0.7);
    EXPECT_GE(r.estimate.value, 0.0);
    EXPECT_LE(r.estimate.value, 1.0 + 1e-12);
    EXPECT_LE(r.estimate.ci_lo, r.estimate.ci_hi);
  }
  EXPECT_EQ(rows[2].R, 1u);
  std::ostringstream os;
  write_fidelity_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "alpha,L,R,value,ci_lo,ci_hi");

  FidelityOptions none;
  EXPECT_THROW(cmd_fidelity(none), Error);
  fo.snapshot_files = {rep.out_dir / "summary.csv"};
  fo.histogram_files.clear();
  try {
    cmd_fidelity(fo);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse_failure);
  }
}

TEST(ExactCommand, SmallTasksPass) {
  ExactOptions o;
  o.task = "connectivity";
  o.dim = 1;
  o.sizes = {6, 8};
  auto checks = cmd_exact(o);
  ASSERT_EQ(checks.size(), 2u);
  for (const auto& c : checks) EXPECT_TRUE(c.pass) << c.subject;

  o.task = "steady";
  o.sizes = {6};
  o.alpha = 0.0;
  checks = cmd_exact(o);
  ASSERT_EQ(checks.size(), 2u);
  for (const auto& c : checks) EXPECT_TRUE(c.pass) << c.subject << ' ' << c.quantity;

  o = {};
  o.task = "bounds";
  checks = cmd_exact(o);
  EXPECT_FALSE(checks.empty());
  for (const auto& c : checks) EXPECT_TRUE(c.pass) << c.subject << ' ' << c.quantity;

  const auto js = exact_to_json(checks);
  EXPECT_EQ(js.size(), checks.size());
  EXPECT_TRUE(js[0].contains("family"));

  o.task = "bogus";
  EXPECT_THROW(cmd_exact(o), Error);
}

TEST(AnalyzeCommand, MeanFieldAndSynthetic) {
  AnalyzeOptions o;
  o.task = "meanfield";
  EXPECT_EQ(cmd_analyze(o).result["alpha_c"], "12/37");
  o.half_near = true;
  EXPECT_EQ(cmd_analyze(o).result["alpha_c"], "9/16");

  o = {};
  o.task = "synthetic-crossing";
  EXPECT_NEAR(cmd_analyze(o).result["mean"].get<double>(), 0.25, 1e-3);

  o = {};
  o.task = "synthetic-collapse";
  o.out_dir = scratch("analyze");
  const auto rep = cmd_analyze(o);
  EXPECT_NEAR(rep.result["alpha_c"].get<double>(), 0.44, 0.02);
  EXPECT_TRUE(fs::exists(*o.out_dir / "collapse_n_minus.dat"));
  EXPECT_TRUE(fs::exists(*o.out_dir / "analysis_synthetic-collapse.json"));
}

TEST(AnalyzeCommand, ReadsSimulationSummary) {
  auto j = base_json();
  j["sizes"] = {8, 12, 16};
  j["alphas"] = {0.8};
  j["seeds"]["n_trajectories"] = 8;
  j["measurement"] = {{"observables", {"abs_m"}}};
  SimulateOptions so;
  so.out_dir = scratch("minf").string();
  const auto sim = cmd_simulate(config_from_json(j), so);
  AnalyzeOptions o;
  o.task = "minf";
  o.inputs = {sim.out_dir / "summary.csv"};
  const auto rep = cmd_analyze(o);
  ASSERT_EQ(rep.result.size(), 1u);
  EXPECT_TRUE(std::isfinite(rep.result[0]["m_inf"].get<double>()));

  o.inputs = {sim.out_dir / "missing.csv"};
  try {
    cmd_analyze(o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io_failure);
  }
}

TEST(Binary, ReportsErrorsAsJson) {
  const auto bad = scratch("bad_config.json");
  auto j = base_json();
  j["alphas"] = {2.0};
  { std::ofstream(bad) << j.dump(); }
  const auto r = run_cli("simulate --config " + bad.string());
  EXPECT_EQ(r.code, 1);
  const auto line = r.out.substr(0, r.out.find('\n'));
  const auto err = nlohmann::json::parse(line);
  EXPECT_EQ(err["error"], "invalid_argument");
  EXPECT_NE(err["message"].get<std::string>().find("alphas[0]"), std::string::npos);

  const auto usage = run_cli("simulate --dim 1");
  EXPECT_EQ(usage.code, 64);
  EXPECT_NE(usage.out.find("\"usage\""), std::string::npos);

  EXPECT_EQ(run_cli("frobnicate").code, 64);
}

TEST(Binary, MeanFieldAndQuickSimulate) {
  const auto mf = run_cli("analyze meanfield");
  EXPECT_EQ(mf.code, 0);
  EXPECT_EQ(mf.out, "12/37\n");
  const auto dir = scratch("quick");
  const auto r = run_cli("simulate --dim 1 --alpha 0.5 --L 8 --out " + dir.string() + " --threads 1");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "summary.csv"));
}
