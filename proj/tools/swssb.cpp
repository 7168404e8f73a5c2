#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "swssb/commands.hpp"

namespace {

int report_error(const std::string& kind, const std::string& message, int code) {
  nlohmann::json j{{"error", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return code;
}

// Flags shared by subcommands that can build a config without a file.
struct QuickRun {
  std::optional<int> dim;
  std::vector<double> alphas;
  std::vector<std::uint32_t> sizes;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"swssb: strong-to-weak symmetry breaking kinetic Monte Carlo and exact oracles"};
  app.require_subcommand(1);
  std::optional<unsigned> threads;
  app.add_option("--threads", threads, "worker threads (default: $SWSSB_THREADS, else hardware concurrency)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "run (L, alpha, trajectory) cells from a JSON config");
  std::string config_path;
  std::optional<std::string> sim_out;
  std::optional<std::uint64_t> sim_seed;
  QuickRun quick;
  std::string variant = "strict";
  sim->add_option("--config", config_path, "experiment config (JSON)");
  sim->add_option("--out", sim_out, "output directory (overrides config)");
  sim->add_option("--seed", sim_seed, "master seed (overrides config)");
  sim->add_option("--dim", quick.dim, "dimension for a config-less run (1 or 2)");
  sim->add_option("--alpha", quick.alphas, "alpha values for a config-less run");
  sim->add_option("--L", quick.sizes, "lattice sizes for a config-less run");
  sim->add_option("--variant", variant, "2d Toom variant for a config-less run")->check(CLI::IsMember({"strict", "chill"}));
  sim->add_option("--threads", threads, "worker threads");

  // fidelity
  auto* fid = app.add_subcommand("fidelity", "marginal fidelity from snapshot or histogram archives");
  swssb::FidelityOptions fopts;
  std::vector<std::string> snap_files, hist_files;
  std::optional<std::string> fid_out;
  bool one_point = false;
  fid->add_option("--snapshots", snap_files, "snapshot archives (.sws)");
  fid->add_option("--histograms", hist_files, "histogram archives (.swh)");
  fid->add_option("--R", fopts.radii, "radii R (Rx in 2d)");
  fid->add_option("--Ry", fopts.ry, "fixed Ry in 2d");
  fid->add_option("--separation", fopts.separation, "|i - j| along x (default L/2)");
  fid->add_flag("--one-point", one_point, "one-point instead of two-point fidelity");
  fid->add_option("--bootstrap", fopts.bootstrap_replicates, "bootstrap replicates");
  fid->add_option("--seed", fopts.seed, "bootstrap seed");
  fid->add_option("--out", fid_out, "output CSV (default stdout)");

  // exact
  auto* ex = app.add_subcommand("exact", "exact small-system oracle checks");
  swssb::ExactOptions eopts;
  std::optional<std::string> ex_out;
  ex->add_option("task", eopts.task, "steady | connectivity | double-stochastic | closed-forms | bounds | all");
  ex->add_option("--dim", eopts.dim, "restrict to dimension 1 or 2");
  ex->add_option("--L", eopts.sizes, "lattice sizes (side length in 2d)");
  ex->add_option("--alpha", eopts.alpha, "alpha for the steady-state task (default 1)");
  ex->add_option("--out", ex_out, "write JSON records to this file");

  // analyze
  auto* an = app.add_subcommand("analyze", "collapse, crossing, m_inf fits and mean-field alpha_c");
  swssb::AnalyzeOptions aopts;
  std::vector<std::string> inputs;
  std::optional<std::string> an_out;
  an->add_option("task", aopts.task, "meanfield | collapse | crossing | minf | synthetic-collapse | synthetic-crossing")
      ->required();
  an->add_option("--input", inputs, "summary.csv or fidelity.csv files");
  an->add_option("--observable", aopts.observable, "observable name (e.g. n_minus, F_R3, binder, abs_m)");
  an->add_option("--alpha-min", aopts.alpha_min, "lower alpha bound");
  an->add_option("--alpha-max", aopts.alpha_max, "upper alpha bound");
  an->add_flag("--half-near", aopts.half_near, "halve distance-one escapes in the mean-field balance");
  an->add_option("--out", an_out, "directory for JSON results and plot files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("usage", e.what(), 64);
  }

  try {
    if (*sim) {
      swssb::ExperimentConfig cfg;
      if (!config_path.empty()) {
        cfg = swssb::load_config(config_path);
      } else {
        if (!quick.dim || quick.alphas.empty() || quick.sizes.empty())
          return report_error("usage", "simulate needs --config, or all of --dim, --alpha and --L", 64);
        cfg.dimension = *quick.dim;
        cfg.alphas = quick.alphas;
        cfg.sizes = quick.sizes;
        if (cfg.dimension == 2) {
          cfg.variant = variant == "chill" ? swssb::ToomVariant::chill : swssb::ToomVariant::strict;
          cfg.measurement.observables = {swssb::Observable::abs_magnetization};
        }
        cfg.schedule = {1000, 500, 10};
      }
      swssb::SimulateOptions so;
      so.out_dir = sim_out;
      so.seed = sim_seed;
      so.threads = threads;
      const auto rep = swssb::cmd_simulate(cfg, so);
      std::cout << "wrote " << rep.files.size() << " files to " << rep.out_dir.string() << '\n';
      if (!rep.result.failures.empty()) {
        std::cerr << nlohmann::json{{"error", "partial"},
                                    {"message", std::to_string(rep.result.failures.size()) +
                                                    " trajectories failed; see manifest.json"}}
                         .dump()
                  << '\n';
        return 2;
      }
    } else if (*fid) {
      fopts.two_point = !one_point;
      for (const auto& f : snap_files) fopts.snapshot_files.emplace_back(f);
      for (const auto& f : hist_files) fopts.histogram_files.emplace_back(f);
      const auto rows = swssb::cmd_fidelity(fopts);
      if (fid_out) {
        std::ofstream os(*fid_out, std::ios::trunc);
        if (!os) return report_error("io_failure", "cannot write " + *fid_out, 1);
        swssb::write_fidelity_csv(os, rows);
      } else {
        swssb::write_fidelity_csv(std::cout, rows);
      }
    } else if (*ex) {
      const auto checks = swssb::cmd_exact(eopts);
      swssb::print_exact_table(std::cout, checks);
      if (ex_out) {
        std::ofstream os(*ex_out, std::ios::trunc);
        if (!os) return report_error("io_failure", "cannot write " + *ex_out, 1);
        os << swssb::exact_to_json(checks).dump(2) << '\n';
      }
      for (const auto& c : checks)
        if (!c.pass) return 1;
    } else if (*an) {
      for (const auto& f : inputs) aopts.inputs.emplace_back(f);
      if (an_out) aopts.out_dir = *an_out;
      const auto rep = swssb::cmd_analyze(aopts);
      std::cout << rep.text;
    }
  } catch (const swssb::Error& e) {
    return report_error(std::string(swssb::to_string(e.kind())), e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}
