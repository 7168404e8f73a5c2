#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "swssb/archive.hpp"
#include "swssb/config.hpp"
#include "swssb/fidelity.hpp"
#include "swssb/observables.hpp"
#include "swssb/trajectory.hpp"

namespace swssb {

inline constexpr const char* tool_version = "1.0.0";

// --threads flag, then SWSSB_THREADS, then hardware concurrency.
inline unsigned resolve_threads(std::optional<unsigned> flag) {
  if (flag && *flag > 0) return *flag;
  if (const char* env = std::getenv("SWSSB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    require(end != env && *end == '\0' && v > 0, ErrorKind::invalid_argument,
            std::string("SWSSB_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<unsigned>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

inline SpinConfig initial_config(const ExperimentConfig& cfg, const Lattice& lattice, RngStream& rng) {
  switch (cfg.pattern) {
    case InitialPattern::all_plus: return SpinConfig(lattice.sites());
    case InitialPattern::all_minus: return SpinConfig::all_minus(lattice.sites());
    case InitialPattern::single_minus: {
      SpinConfig c(lattice.sites());
      c.flip(0);
      return c;
    }
    case InitialPattern::random_in_sector: return random_config_in_sector(lattice, cfg.sector, rng);
  }
  return SpinConfig(lattice.sites());
}

struct TaskInfo {
  std::uint32_t L = 0;
  double alpha = 0.0;
  std::size_t cell = 0;
  std::uint32_t trajectory = 0;
  std::uint64_t stream_id = 0;
};

// Test hook: called on the worker before each trajectory; may throw.
struct SimulationHooks {
  std::function<void(const TaskInfo&)> before_trajectory;
};

inline std::uint64_t stream_id_for(std::size_t cell, std::uint32_t trajectory) {
  return (static_cast<std::uint64_t>(cell) << 32) | trajectory;
}

namespace detail {

class HistogramSink final : public SnapshotSink {
 public:
  explicit HistogramSink(std::vector<MarginalHistogram>* hists) : hists_(hists) {}
  void observe(std::uint64_t, const SpinConfig& s) override {
    for (auto& h : *hists_) h.accumulate(s);
  }

 private:
  std::vector<MarginalHistogram>* hists_;
};

class MomentSink final : public SnapshotSink {
 public:
  explicit MomentSink(MomentAccumulator* acc) : acc_(acc) {}
  void observe(std::uint64_t, const SpinConfig& s) override { acc_->add(magnetization(s)); }

 private:
  MomentAccumulator* acc_;
};

class SnapshotCollector final : public SnapshotSink {
 public:
  SnapshotCollector(std::vector<SpinConfig>* out, std::uint32_t every) : out_(out), every_(every) {}
  void observe(std::uint64_t, const SpinConfig& s) override {
    if (count_++ % every_ == 0) out_->push_back(s);
  }

 private:
  std::vector<SpinConfig>* out_;
  std::uint32_t every_;
  std::uint64_t count_ = 0;
};

}  // namespace detail

struct TrajectoryOutput {
  bool ok = false;
  std::string error;
  TrajectoryRecord record;
  MomentAccumulator moments;
  std::vector<MarginalHistogram> histograms;  // one per fidelity radius
  std::vector<SpinConfig> snapshots;
};

struct TrajectoryFailure {
  TaskInfo task;
  std::string error;
};

struct CellResult {
  std::uint32_t L = 0;
  double alpha = 0.0;
  std::size_t cell = 0;
  std::uint32_t trajectories_ok = 0;
  std::vector<ObservableSummary> summaries;
  std::optional<ObservableSummary> binder;
  std::vector<std::uint32_t> radii;
  std::vector<FidelityEstimate> fidelity;
  std::vector<MarginalHistogram> merged_histograms;
  std::vector<TrajectoryOutput> trajectories;  // kept for series / snapshot output
};

struct SimulationResult {
  std::vector<CellResult> cells;
  std::vector<TrajectoryFailure> failures;
  double wall_time_seconds = 0.0;
};

inline TrajectoryOutput run_one(const ExperimentConfig& cfg, const TaskInfo& task, const SimulationHooks& hooks) {
  TrajectoryOutput out;
  try {
    if (hooks.before_trajectory) hooks.before_trajectory(task);
    const Lattice lattice = cfg.lattice_for(task.L);
    const MixedKernel kernel = cfg.kernel_for(task.alpha);
    RngStream rng(cfg.master_seed, task.stream_id);
    SpinConfig init = initial_config(cfg, lattice, rng);

    std::vector<SnapshotSink*> sinks;
    const auto& fp = cfg.measurement.fidelity;
    if (fp.enabled)
      for (auto R : fp.radii) out.histograms.emplace_back(lattice, cfg.region_for(lattice, R), fp.pooled);
    detail::HistogramSink hist_sink(&out.histograms);
    detail::MomentSink moment_sink(&out.moments);
    detail::SnapshotCollector snap_sink(&out.snapshots, std::max(1U, cfg.measurement.snapshot_every));
    if (fp.enabled) sinks.push_back(&hist_sink);
    if (cfg.measurement.binder) sinks.push_back(&moment_sink);
    if (cfg.measurement.snapshot_every > 0) sinks.push_back(&snap_sink);

    out.record = run_trajectory(std::move(init), lattice, kernel, cfg.schedule, rng, cfg.measurement.observables, sinks);
    out.ok = true;
  } catch (const std::exception& e) {
    out = TrajectoryOutput{};
    out.error = e.what();
  }
  return out;
}

// Leave-one-trajectory-out jackknife for the Binder ratio.
inline ObservableSummary binder_summary(double alpha, std::uint32_t L, const std::vector<MomentAccumulator>& per_traj) {
  MomentAccumulator all;
  for (const auto& a : per_traj) all.merge(a);
  ObservableSummary s{"binder", alpha, L, binder_ratio(all), 0.0, all.count};
  const std::size_t n = per_traj.size();
  if (n > 1) {
    std::vector<double> loo;
    for (std::size_t k = 0; k < n; ++k) {
      MomentAccumulator rest;
      for (std::size_t t = 0; t < n; ++t)
        if (t != k) rest.merge(per_traj[t]);
      loo.push_back(binder_ratio(rest));
    }
    double mean = 0.0;
    for (double v : loo) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : loo) var += (v - mean) * (v - mean);
    s.std_error = std::sqrt(var * static_cast<double>(n - 1) / static_cast<double>(n));
  }
  return s;
}

namespace detail {

inline CellResult reduce_cell(const ExperimentConfig& cfg, const std::vector<TaskInfo>& tasks,
                              std::vector<TrajectoryOutput>& slots, std::size_t first, std::size_t cell,
                              std::vector<TrajectoryFailure>& failures) {
  const auto& fp = cfg.measurement.fidelity;
  CellResult cr;
  cr.L = tasks[first].L;
  cr.alpha = tasks[first].alpha;
  cr.cell = cell;
  std::vector<MomentAccumulator> moments;
  std::vector<std::vector<MarginalHistogram>> hists(fp.enabled ? fp.radii.size() : 0);
  for (std::size_t k = first; k < first + cfg.n_trajectories; ++k) {
    auto& out = slots[k];
    if (!out.ok) {
      failures.push_back({tasks[k], out.error});
      continue;
    }
    ++cr.trajectories_ok;
    moments.push_back(out.moments);
    for (std::size_t r = 0; r < hists.size(); ++r) hists[r].push_back(std::move(out.histograms[r]));
    out.histograms.clear();
    cr.trajectories.push_back(std::move(out));
  }
  if (cr.trajectories_ok == 0) return cr;
  for (std::size_t o = 0; o < cfg.measurement.observables.size(); ++o) {
    std::vector<ObservableSeries> per;
    for (const auto& tr : cr.trajectories) per.push_back(tr.record.series[o]);
    cr.summaries.push_back(
        summarize_ensemble(std::string(to_string(cfg.measurement.observables[o])), cr.alpha, cr.L, per));
  }
  if (cfg.measurement.binder) {
    try {
      cr.binder = binder_summary(cr.alpha, cr.L, moments);
    } catch (const Error&) {
      // <m^2> = 0: the ratio is undefined for this cell and no row is written.
    }
  }
  for (std::size_t r = 0; r < hists.size(); ++r) {
    BootstrapOptions bo;
    bo.replicates = fp.bootstrap_replicates;
    bo.seed = cfg.master_seed ^ (stream_id_for(cell, 0) + 0x9e3779b97f4a7c15ULL * (r + 1));
    cr.radii.push_back(fp.radii[r]);
    cr.fidelity.push_back(trajectory_bootstrap(hists[r], bo));
    MarginalHistogram merged = hists[r].front();
    for (std::size_t t = 1; t < hists[r].size(); ++t) merged.merge(hists[r][t]);
    cr.merged_histograms.push_back(std::move(merged));
  }
  return cr;
}

}  // namespace detail

// Runs every (L, alpha, trajectory) task on a bounded worker pool. Workers
// write into preallocated per-task slots; the worker that completes the last
// trajectory of a cell reduces that cell, using only that cell's slots in
// trajectory order, so results do not depend on scheduling.
inline SimulationResult simulate(const ExperimentConfig& cfg, unsigned threads, const SimulationHooks& hooks = {}) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<TaskInfo> tasks;
  std::size_t n_cells = 0;
  for (auto L : cfg.sizes)
    for (double alpha : cfg.alphas) {
      for (std::uint32_t t = 0; t < cfg.n_trajectories; ++t)
        tasks.push_back({L, alpha, n_cells, t, stream_id_for(n_cells, t)});
      ++n_cells;
    }
  std::vector<TrajectoryOutput> slots(tasks.size());
  std::vector<CellResult> cells(n_cells);
  std::vector<std::vector<TrajectoryFailure>> cell_failures(n_cells);
  std::vector<std::atomic<std::uint32_t>> remaining(n_cells);
  for (auto& r : remaining) r.store(cfg.n_trajectories);
  std::atomic<std::size_t> next{0};
  std::exception_ptr reduce_error;
  std::atomic<bool> reduce_failed{false};
  {
    std::vector<std::jthread> pool;
    const unsigned n = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(tasks.size())));
    for (unsigned w = 0; w < n; ++w)
      pool.emplace_back([&] {
        for (std::size_t k = next.fetch_add(1); k < tasks.size(); k = next.fetch_add(1)) {
          slots[k] = run_one(cfg, tasks[k], hooks);
          const std::size_t c = tasks[k].cell;
          if (remaining[c].fetch_sub(1) == 1) {
            try {
              cells[c] = detail::reduce_cell(cfg, tasks, slots, c * cfg.n_trajectories, c, cell_failures[c]);
            } catch (...) {
              if (!reduce_failed.exchange(true)) reduce_error = std::current_exception();
            }
          }
        }
      });
  }
  if (reduce_error) std::rethrow_exception(reduce_error);

  SimulationResult res;
  res.cells = std::move(cells);
  for (auto& f : cell_failures) res.failures.insert(res.failures.end(), f.begin(), f.end());
  res.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// --- outputs -----------------------------------------------------------------------

inline constexpr std::string_view fidelity_csv_header = "alpha,L,R,value,ci_lo,ci_hi";

inline std::string alpha_tag(double alpha) {
  std::ostringstream os;
  os << std::setprecision(6) << alpha;
  return os.str();
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

namespace detail {
inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
  std::ofstream os(p, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  require(static_cast<bool>(os), ErrorKind::io_failure, "cannot write " + p.string());
  return os;
}
}  // namespace detail

// Fails before any simulation if the directory cannot be created or written.
inline void ensure_writable_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec && std::filesystem::is_directory(dir), ErrorKind::io_failure,
          "config.output_dir: cannot create '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
  const auto probe = dir / ".swssb_write_probe";
  {
    std::ofstream os(probe);
    require(static_cast<bool>(os), ErrorKind::io_failure, "config.output_dir: '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

// Writes summary.csv, fidelity.csv, series/, histograms/, snapshots/ and
// manifest.json. Returns the relative paths written (manifest last).
inline std::vector<std::string> write_outputs(const ExperimentConfig& cfg, const SimulationResult& res,
                                              const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  fs::create_directories(dir);

  {
    std::vector<ObservableSummary> rows;
    for (const auto& c : res.cells) {
      rows.insert(rows.end(), c.summaries.begin(), c.summaries.end());
      if (c.binder) rows.push_back(*c.binder);
    }
    auto os = detail::open_out(dir / "summary.csv");
    write_observable_csv(os, rows);
    files.emplace_back("summary.csv");
  }

  const auto& fp = cfg.measurement.fidelity;
  if (fp.enabled) {
    auto os = detail::open_out(dir / "fidelity.csv");
    os << fidelity_csv_header << '\n';
    for (const auto& c : res.cells)
      for (std::size_t r = 0; r < c.fidelity.size(); ++r)
        os << format_double(c.alpha) << ',' << c.L << ',' << c.radii[r] << ',' << format_double(c.fidelity[r].value)
           << ',' << format_double(c.fidelity[r].ci_lo) << ',' << format_double(c.fidelity[r].ci_hi) << '\n';
    files.emplace_back("fidelity.csv");
    fs::create_directories(dir / "histograms");
    for (const auto& c : res.cells)
      for (std::size_t r = 0; r < c.merged_histograms.size(); ++r) {
        const std::string name = "histograms/L" + std::to_string(c.L) + "_alpha" + alpha_tag(c.alpha) + "_R" +
                                 std::to_string(c.radii[r]) + ".swh";
        auto hs = detail::open_out(dir / name, true);
        write_histogram(hs, c.merged_histograms[r],
                        {c.alpha, variant_code(cfg.kernel_for(c.alpha)), cfg.master_seed, c.trajectories_ok});
        files.push_back(name);
      }
  }

  if (cfg.measurement.series && !cfg.measurement.observables.empty()) {
    fs::create_directories(dir / "series");
    for (const auto& c : res.cells) {
      const std::string name = "series/L" + std::to_string(c.L) + "_alpha" + alpha_tag(c.alpha) + ".csv";
      auto os = detail::open_out(dir / name);
      os << "trajectory,sweep";
      for (auto o : cfg.measurement.observables) os << ',' << to_string(o);
      os << '\n';
      for (std::size_t t = 0; t < c.trajectories.size(); ++t) {
        const auto& series = c.trajectories[t].record.series;
        if (series.empty()) continue;
        for (std::size_t s = 0; s < series[0].samples.size(); ++s) {
          os << t << ',' << series[0].samples[s].first;
          for (const auto& ser : series) os << ',' << format_double(ser.samples[s].second);
          os << '\n';
        }
      }
      files.push_back(name);
    }
  }

  if (cfg.measurement.snapshot_every > 0) {
    fs::create_directories(dir / "snapshots");
    for (const auto& c : res.cells) {
      SnapshotArchive a{cfg.lattice_for(c.L), {c.alpha, variant_code(cfg.kernel_for(c.alpha)), cfg.master_seed, c.trajectories_ok}, {}};
      for (const auto& tr : c.trajectories) a.snapshots.insert(a.snapshots.end(), tr.snapshots.begin(), tr.snapshots.end());
      const std::string name = "snapshots/L" + std::to_string(c.L) + "_alpha" + alpha_tag(c.alpha) + ".sws";
      auto os = detail::open_out(dir / name, true);
      write_snapshots(os, a);
      files.push_back(name);
    }
  }

  nlohmann::json m;
  m["tool"] = "swssb";
  m["version"] = tool_version;
  m["config"] = to_json(cfg);
  m["config_hash"] = hex64(config_hash(cfg));
  m["master_seed"] = cfg.master_seed;
  m["stream_layout"] = "stream_id = (cell_index << 32) | trajectory; cells ordered by size then alpha";
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : res.cells)
    cells.push_back({{"cell_index", c.cell},
                     {"L", c.L},
                     {"alpha", c.alpha},
                     {"trajectories_ok", c.trajectories_ok},
                     {"trajectories_failed", cfg.n_trajectories - c.trajectories_ok}});
  m["cells"] = cells;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : res.failures)
    failures.push_back({{"L", f.task.L},
                        {"alpha", f.task.alpha},
                        {"trajectory", f.task.trajectory},
                        {"stream_id", f.task.stream_id},
                        {"error", f.error}});
  m["failures"] = failures;
  m["files"] = files;
  m["wall_time_seconds"] = res.wall_time_seconds;
  auto os = detail::open_out(dir / "manifest.json");
  os << m.dump(2) << '\n';
  files.emplace_back("manifest.json");
  return files;
}

}  // namespace swssb
