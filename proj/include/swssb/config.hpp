#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "swssb/dynamics.hpp"
#include "swssb/error.hpp"
#include "swssb/fidelity.hpp"
#include "swssb/lattice.hpp"
#include "swssb/observables.hpp"
#include "swssb/trajectory.hpp"

namespace swssb {

enum class InitialPattern { all_plus, all_minus, single_minus, random_in_sector };

inline std::string_view to_string(InitialPattern p) {
  switch (p) {
    case InitialPattern::all_plus: return "all_plus";
    case InitialPattern::all_minus: return "all_minus";
    case InitialPattern::single_minus: return "single_minus";
    case InitialPattern::random_in_sector: return "random_in_sector";
  }
  return "?";
}

struct FidelityPlan {
  bool enabled = false;
  std::vector<std::uint32_t> radii{0, 1, 2, 3};  // R in 1d, Rx in 2d
  std::uint32_t ry = 1;                          // fixed Ry in 2d
  bool two_point = true;
  std::optional<std::uint32_t> separation;       // along x; default L/2
  bool pooled = true;                            // pool all translates of the region
  std::uint32_t bootstrap_replicates = 200;
};

struct MeasurementPlan {
  std::vector<Observable> observables{Observable::minus_density};
  bool series = true;        // per-(L, alpha) time-series CSVs
  bool binder = false;       // Binder ratio rows from the sampled magnetization
  FidelityPlan fidelity;
  std::uint32_t snapshot_every = 0;  // archive every k-th sampled snapshot, 0 = off
};

struct ExperimentConfig {
  static constexpr int schema_version = 1;
  int dimension = 1;
  std::vector<std::uint32_t> sizes;
  std::vector<double> alphas;
  std::optional<ToomVariant> variant;
  Parity sector = Parity::odd;
  InitialPattern pattern = InitialPattern::random_in_sector;
  Schedule schedule;
  std::uint64_t master_seed = 1;
  std::uint32_t n_trajectories = 1;
  MeasurementPlan measurement;
  std::string output_dir = "out";

  Lattice lattice_for(std::uint32_t L) const { return dimension == 1 ? Lattice::ring(L) : Lattice::square(L); }

  MixedKernel kernel_for(double alpha) const {
    return dimension == 1 ? MixedKernel::one_d(alpha) : MixedKernel::two_d(alpha, *variant);
  }

  RegionSpec region_for(const Lattice& lat, std::uint32_t R) const {
    const std::uint32_t ry = dimension == 2 ? measurement.fidelity.ry : 0;
    if (!measurement.fidelity.two_point) return RegionSpec::one_point(lat, 0, R, ry);
    const Site j = measurement.fidelity.separation
                       ? lat.shift(0, static_cast<int>(*measurement.fidelity.separation), 0)
                       : RegionSpec::default_partner(lat, 0);
    return RegionSpec::two_point(lat, 0, j, R, ry);
  }

  // Throws invalid_argument naming the offending field.
  void validate() const {
    const auto need = [](bool ok, const std::string& field, const std::string& msg) {
      require(ok, ErrorKind::invalid_argument, "config." + field + ": " + msg);
    };
    need(dimension == 1 || dimension == 2, "dimension", "must be 1 or 2");
    need(!sizes.empty(), "sizes", "must list at least one lattice size");
    need(!alphas.empty(), "alphas", "must list at least one alpha");
    for (std::size_t k = 0; k < sizes.size(); ++k)
      need(sizes[k] >= 3, "sizes[" + std::to_string(k) + "]", "lattice size must be >= 3");
    for (std::size_t k = 0; k < alphas.size(); ++k)
      need(alphas[k] >= 0.0 && alphas[k] <= 1.0, "alphas[" + std::to_string(k) + "]", "alpha must be in [0,1]");
    if (dimension == 2) need(variant.has_value(), "variant", "2d runs need \"strict\" or \"chill\"");
    else need(!variant.has_value(), "variant", "only meaningful for dimension 2");
    need(schedule.sweeps_total >= 1, "schedule.sweeps_total", "must be >= 1");
    need(schedule.burn_in_sweeps < schedule.sweeps_total, "schedule.burn_in_sweeps", "must be < sweeps_total");
    need(schedule.sample_interval_sweeps >= 1, "schedule.sample_interval_sweeps", "cadence must be >= 1 sweep");
    need(n_trajectories >= 1, "seeds.n_trajectories", "must be >= 1");
    need(!output_dir.empty(), "output_dir", "must be non-empty");
    for (std::size_t k = 0; k < measurement.observables.size(); ++k)
      need(!needs_torus(measurement.observables[k]) || dimension == 2,
           "measurement.observables[" + std::to_string(k) + "]", "only defined on a torus");
    for (auto L : sizes) {
      const std::size_t n = dimension == 1 ? L : std::size_t{L} * L;
      switch (pattern) {
        case InitialPattern::all_plus: need(sector == Parity::even, "initial.sector", "all_plus is in the even sector"); break;
        case InitialPattern::all_minus:
          need(parity_of_count(n) == sector, "initial.sector",
               "all_minus has parity of N = " + std::to_string(n) + ", which differs from the requested sector");
          break;
        case InitialPattern::single_minus: need(sector == Parity::odd, "initial.sector", "single_minus is in the odd sector"); break;
        case InitialPattern::random_in_sector: break;
      }
    }
    const auto& f = measurement.fidelity;
    if (f.enabled) {
      need(!f.radii.empty(), "measurement.fidelity.radii", "must list at least one radius");
      for (auto L : sizes) {
        const Lattice lat = lattice_for(L);
        for (std::size_t k = 0; k < f.radii.size(); ++k) {
          try {
            (void)region_for(lat, f.radii[k]);
          } catch (const Error& e) {
            need(false, "measurement.fidelity.radii[" + std::to_string(k) + "]",
                 "L = " + std::to_string(L) + ": " + e.what());
          }
        }
      }
    }
  }
};

inline std::string to_string(Parity p) { return p == Parity::even ? "even" : "odd"; }

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["schema_version"] = ExperimentConfig::schema_version;
  j["dimension"] = c.dimension;
  j["sizes"] = c.sizes;
  j["alphas"] = c.alphas;
  j["variant"] = c.variant ? nlohmann::json(std::string(to_string(*c.variant))) : nlohmann::json(nullptr);
  j["initial"] = {{"sector", to_string(c.sector)}, {"pattern", std::string(to_string(c.pattern))}};
  j["schedule"] = {{"sweeps_total", c.schedule.sweeps_total},
                   {"burn_in_sweeps", c.schedule.burn_in_sweeps},
                   {"sample_interval_sweeps", c.schedule.sample_interval_sweeps}};
  j["seeds"] = {{"master_seed", c.master_seed}, {"n_trajectories", c.n_trajectories}};
  nlohmann::json obs = nlohmann::json::array();
  for (auto o : c.measurement.observables) obs.push_back(std::string(to_string(o)));
  const auto& f = c.measurement.fidelity;
  j["measurement"] = {
      {"observables", obs},
      {"series", c.measurement.series},
      {"binder", c.measurement.binder},
      {"snapshot_every", c.measurement.snapshot_every},
      {"fidelity",
       {{"enabled", f.enabled},
        {"radii", f.radii},
        {"ry", f.ry},
        {"two_point", f.two_point},
        {"separation", f.separation ? nlohmann::json(*f.separation) : nlohmann::json(nullptr)},
        {"pooled", f.pooled},
        {"bootstrap_replicates", f.bootstrap_replicates}}}};
  j["output_dir"] = c.output_dir;
  return j;
}

namespace detail {

template <class T>
T field(const nlohmann::json& j, const std::string& key, const std::string& path) {
  require(j.is_object(), ErrorKind::invalid_argument, "config." + path + ": expected an object");
  require(j.contains(key), ErrorKind::invalid_argument, "config." + path + key + ": missing required field");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_argument, "config." + path + key + ": " + e.what());
  }
}

template <class T>
T field_or(const nlohmann::json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return field<T>(j, key, path);
}

}  // namespace detail

// Unknown keys are rejected so that typos do not silently fall back to defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::field;
  using detail::field_or;
  const auto check_keys = [](const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                             const std::string& path) {
    require(obj.is_object(), ErrorKind::invalid_argument, "config" + (path.empty() ? "" : "." + path) + ": expected an object");
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      require(ok, ErrorKind::invalid_argument, "config." + path + (path.empty() ? "" : ".") + k + ": unknown field");
    }
  };
  check_keys(j, {"schema_version", "dimension", "sizes", "alphas", "variant", "initial", "schedule", "seeds",
                 "measurement", "output_dir"}, "");
  const int version = field<int>(j, "schema_version", "");
  require(version == ExperimentConfig::schema_version, ErrorKind::invalid_argument,
          "config.schema_version: unsupported version " + std::to_string(version));
  ExperimentConfig c;
  c.dimension = field<int>(j, "dimension", "");
  c.sizes = field<std::vector<std::uint32_t>>(j, "sizes", "");
  c.alphas = field<std::vector<double>>(j, "alphas", "");
  const auto variant = field_or<std::string>(j, "variant", "", "");
  if (variant == "strict") c.variant = ToomVariant::strict;
  else if (variant == "chill") c.variant = ToomVariant::chill;
  else require(variant.empty(), ErrorKind::invalid_argument, "config.variant: expected \"strict\" or \"chill\"");

  require(j.contains("initial"), ErrorKind::invalid_argument, "config.initial: missing required field");
  const auto& init = j.at("initial");
  check_keys(init, {"sector", "pattern"}, "initial");
  const auto sector = field<std::string>(init, "sector", "initial.");
  require(sector == "even" || sector == "odd", ErrorKind::invalid_argument, "config.initial.sector: expected even or odd");
  c.sector = sector == "even" ? Parity::even : Parity::odd;
  const auto pattern = field<std::string>(init, "pattern", "initial.");
  bool matched = false;
  for (auto p : {InitialPattern::all_plus, InitialPattern::all_minus, InitialPattern::single_minus,
                 InitialPattern::random_in_sector})
    if (to_string(p) == pattern) {
      c.pattern = p;
      matched = true;
    }
  require(matched, ErrorKind::invalid_argument, "config.initial.pattern: unknown pattern '" + pattern + "'");

  require(j.contains("schedule"), ErrorKind::invalid_argument, "config.schedule: missing required field");
  const auto& s = j.at("schedule");
  check_keys(s, {"sweeps_total", "burn_in_sweeps", "sample_interval_sweeps"}, "schedule");
  c.schedule.sweeps_total = field<std::uint64_t>(s, "sweeps_total", "schedule.");
  c.schedule.burn_in_sweeps = field<std::uint64_t>(s, "burn_in_sweeps", "schedule.");
  c.schedule.sample_interval_sweeps = field<std::uint64_t>(s, "sample_interval_sweeps", "schedule.");

  require(j.contains("seeds"), ErrorKind::invalid_argument, "config.seeds: missing required field");
  const auto& seeds = j.at("seeds");
  check_keys(seeds, {"master_seed", "n_trajectories"}, "seeds");
  c.master_seed = field<std::uint64_t>(seeds, "master_seed", "seeds.");
  c.n_trajectories = field<std::uint32_t>(seeds, "n_trajectories", "seeds.");

  if (j.contains("measurement")) {
    const auto& m = j.at("measurement");
    check_keys(m, {"observables", "series", "binder", "snapshot_every", "fidelity"}, "measurement");
    if (m.contains("observables")) {
      c.measurement.observables.clear();
      const auto names = field<std::vector<std::string>>(m, "observables", "measurement.");
      for (std::size_t k = 0; k < names.size(); ++k) {
        try {
          c.measurement.observables.push_back(observable_from_string(names[k]));
        } catch (const Error& e) {
          fail(ErrorKind::invalid_argument, "config.measurement.observables[" + std::to_string(k) + "]: " + e.what());
        }
      }
    }
    c.measurement.series = field_or<bool>(m, "series", "measurement.", c.measurement.series);
    c.measurement.binder = field_or<bool>(m, "binder", "measurement.", c.measurement.binder);
    c.measurement.snapshot_every = field_or<std::uint32_t>(m, "snapshot_every", "measurement.", 0);
    if (m.contains("fidelity")) {
      const auto& f = m.at("fidelity");
      check_keys(f, {"enabled", "radii", "ry", "two_point", "separation", "pooled", "bootstrap_replicates"},
                 "measurement.fidelity");
      auto& fp = c.measurement.fidelity;
      const std::string p = "measurement.fidelity.";
      fp.enabled = field_or<bool>(f, "enabled", p, fp.enabled);
      fp.radii = field_or<std::vector<std::uint32_t>>(f, "radii", p, fp.radii);
      fp.ry = field_or<std::uint32_t>(f, "ry", p, fp.ry);
      fp.two_point = field_or<bool>(f, "two_point", p, fp.two_point);
      if (f.contains("separation") && !f.at("separation").is_null())
        fp.separation = field<std::uint32_t>(f, "separation", p);
      fp.pooled = field_or<bool>(f, "pooled", p, fp.pooled);
      fp.bootstrap_replicates = field_or<std::uint32_t>(f, "bootstrap_replicates", p, fp.bootstrap_replicates);
    }
  }
  c.output_dir = field_or<std::string>(j, "output_dir", "", c.output_dir);
  c.validate();
  return c;
}

// FNV-1a 64 over the canonical JSON text (keys sorted, no whitespace).
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace swssb
