#pragma once

#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <vector>

#include "swssb/dynamics.hpp"
#include "swssb/error.hpp"
#include "swssb/lattice.hpp"
#include "swssb/observables.hpp"
#include "swssb/rng.hpp"

namespace swssb {

// Times are in sweeps (N elementary updates). A snapshot is taken after
// sweep s when s > burn_in_sweeps and (s - burn_in_sweeps) is a multiple of
// sample_interval_sweeps.
struct Schedule {
  std::uint64_t sweeps_total = 1;
  std::uint64_t burn_in_sweeps = 0;
  std::uint64_t sample_interval_sweeps = 1;

  void validate() const {
    require(sweeps_total >= 1, ErrorKind::invalid_argument, "schedule.sweeps_total must be >= 1");
    require(burn_in_sweeps < sweeps_total, ErrorKind::invalid_argument,
            "schedule.burn_in_sweeps must be < schedule.sweeps_total");
    require(sample_interval_sweeps >= 1, ErrorKind::invalid_argument,
            "schedule.sample_interval_sweeps must be >= 1 sweep");
  }

  bool is_sample(std::uint64_t sweep) const {
    return sweep > burn_in_sweeps && (sweep - burn_in_sweeps) % sample_interval_sweeps == 0;
  }

  std::uint64_t n_samples() const { return (sweeps_total - burn_in_sweeps) / sample_interval_sweeps; }
};

// Receives post-burn-in snapshots. Implementations are per-trajectory.
class SnapshotSink {
 public:
  virtual ~SnapshotSink() = default;
  virtual void observe(std::uint64_t sweep, const SpinConfig& snapshot) = 0;
};

struct TrajectoryRecord {
  SpinConfig final_config;
  std::vector<ObservableSeries> series;
  std::uint64_t sweeps_run = 0;
  std::uint64_t samples = 0;
};

inline TrajectoryRecord run_trajectory(SpinConfig config, const Lattice& lattice, const MixedKernel& kernel,
                                       const Schedule& schedule, RngStream& rng,
                                       std::span<const Observable> observables = {},
                                       std::span<SnapshotSink* const> sinks = {}) {
  check_kernel_lattice(kernel, lattice);
  schedule.validate();
  require(config.size() == lattice.sites(), ErrorKind::invalid_argument,
          "initial configuration size does not match " + lattice.describe());
  for (auto o : observables)
    require(!needs_torus(o) || lattice.dim() == 2, ErrorKind::invalid_argument,
            std::string(to_string(o)) + " is only defined on a torus");

  TrajectoryRecord rec;
  rec.series.resize(observables.size());
  for (std::size_t k = 0; k < observables.size(); ++k) {
    rec.series[k].name = std::string(to_string(observables[k]));
    rec.series[k].samples.reserve(schedule.n_samples());
  }

  for (std::uint64_t s = 1; s <= schedule.sweeps_total; ++s) {
    sweep(config, lattice, kernel, rng);
    if (!schedule.is_sample(s)) continue;
    ++rec.samples;
    for (std::size_t k = 0; k < observables.size(); ++k)
      rec.series[k].samples.emplace_back(s, measure(observables[k], config, lattice));
    for (SnapshotSink* sink : sinks) {
      try {
        sink->observe(s, config);
      } catch (const std::exception& e) {
        fail(ErrorKind::io_failure, "sink failed in trajectory (master_seed=" + std::to_string(rng.master_seed()) +
                                        ", stream=" + std::to_string(rng.stream_id()) + ", " + lattice.describe() +
                                        ", " + kernel.describe() + ", sweep=" + std::to_string(s) + "): " + e.what());
      }
    }
  }
  for (auto& series : rec.series) series.finalize();
  rec.sweeps_run = schedule.sweeps_total;
  rec.final_config = std::move(config);
  return rec;
}

}  // namespace swssb
