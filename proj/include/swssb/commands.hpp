#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "swssb/analysis.hpp"
#include "swssb/archive.hpp"
#include "swssb/config.hpp"
#include "swssb/exact.hpp"
#include "swssb/fidelity.hpp"
#include "swssb/simulate.hpp"

namespace swssb {

// --- simulate ------------------------------------------------------------------------

struct SimulateOptions {
  std::optional<std::string> out_dir;       // overrides config.output_dir
  std::optional<std::uint64_t> seed;        // overrides seeds.master_seed
  std::optional<unsigned> threads;
  SimulationHooks hooks;
};

struct SimulateReport {
  ExperimentConfig config;
  SimulationResult result;
  std::vector<std::string> files;
  std::filesystem::path out_dir;
};

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io_failure, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse_failure, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

inline SimulateReport cmd_simulate(ExperimentConfig cfg, const SimulateOptions& opts = {}) {
  if (opts.out_dir) cfg.output_dir = *opts.out_dir;
  if (opts.seed) cfg.master_seed = *opts.seed;
  cfg.validate();
  SimulateReport rep;
  rep.out_dir = cfg.output_dir;
  ensure_writable_dir(rep.out_dir);
  rep.result = simulate(cfg, resolve_threads(opts.threads), opts.hooks);
  rep.files = write_outputs(cfg, rep.result, rep.out_dir);
  rep.config = std::move(cfg);
  return rep;
}

// --- fidelity ------------------------------------------------------------------------

struct FidelityOptions {
  std::vector<std::filesystem::path> snapshot_files;
  std::vector<std::filesystem::path> histogram_files;
  std::vector<std::uint32_t> radii{0, 1, 2, 3};
  std::uint32_t ry = 1;  // 2d only
  bool two_point = true;
  std::optional<std::uint32_t> separation;
  std::size_t bootstrap_replicates = 200;
  std::uint64_t seed = 1;
};

struct FidelityRow {
  double alpha = 0.0;
  std::uint32_t L = 0;
  std::uint32_t R = 0;
  FidelityEstimate estimate;
};

inline RegionSpec fidelity_region(const Lattice& lat, const FidelityOptions& o, std::uint32_t R) {
  const std::uint32_t ry = lat.dim() == 2 ? o.ry : 0;
  if (!o.two_point) return RegionSpec::one_point(lat, 0, R, ry);
  const Site j = o.separation ? lat.shift(0, static_cast<int>(*o.separation), 0) : RegionSpec::default_partner(lat, 0);
  return RegionSpec::two_point(lat, 0, j, R, ry);
}

// Snapshot archives: translation-averaged estimator, bootstrap over
// snapshots. Histogram archives: stored marginal, multinomial bootstrap.
inline std::vector<FidelityRow> cmd_fidelity_rows(const FidelityOptions& o, const std::vector<SnapshotArchive>& archives,
                                                  const std::vector<HistogramArchive>& histograms) {
  require(!archives.empty() || !histograms.empty(), ErrorKind::insufficient_data, "no snapshot or histogram inputs");
  std::vector<FidelityRow> rows;
  BootstrapOptions bo;
  bo.replicates = o.bootstrap_replicates;
  bo.seed = o.seed;
  for (const auto& a : archives) {
    require(a.snapshots.size() >= 2, ErrorKind::insufficient_data,
            "snapshot set has " + std::to_string(a.snapshots.size()) + " snapshots; need at least 2");
    for (auto R : o.radii) {
      const RegionSpec shape = fidelity_region(a.lattice, o, R);
      rows.push_back({a.meta.alpha, a.lattice.lx(), R, translation_average(a.snapshots, a.lattice, shape, bo)});
    }
  }
  for (const auto& h : histograms)
    rows.push_back({h.meta.alpha, h.histogram.lattice().lx(), h.histogram.region().rx, histogram_bootstrap(h.histogram, bo)});
  return rows;
}

inline void write_fidelity_csv(std::ostream& os, const std::vector<FidelityRow>& rows) {
  os << fidelity_csv_header << '\n';
  for (const auto& r : rows)
    os << format_double(r.alpha) << ',' << r.L << ',' << r.R << ',' << format_double(r.estimate.value) << ','
       << format_double(r.estimate.ci_lo) << ',' << format_double(r.estimate.ci_hi) << '\n';
}

inline std::vector<FidelityRow> cmd_fidelity(const FidelityOptions& o) {
  std::vector<SnapshotArchive> archives;
  std::vector<HistogramArchive> hists;
  for (const auto& p : o.snapshot_files) archives.push_back(read_file<SnapshotArchive>(p, read_snapshots));
  for (const auto& p : o.histogram_files) hists.push_back(read_file<HistogramArchive>(p, read_histogram));
  return cmd_fidelity_rows(o, archives, hists);
}

// --- exact ---------------------------------------------------------------------------

struct ExactCheck {
  std::string task;
  std::string subject;
  std::string quantity;
  double value = 0.0;
  std::string expected;
  bool pass = false;
};

struct ExactOptions {
  std::string task = "all";  // steady | connectivity | double-stochastic | closed-forms | bounds | all
  std::optional<int> dim;
  std::vector<std::uint32_t> sizes;  // overrides defaults per task
  std::optional<double> alpha;       // steady-state task; default 1
};

namespace detail {

inline Eigen::MatrixXd columns_of(const std::vector<ExactDistribution>& ds) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(ds.front().size()), static_cast<Eigen::Index>(ds.size()));
  for (std::size_t k = 0; k < ds.size(); ++k)
    for (std::size_t x = 0; x < ds[k].size(); ++x) m(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(k)) = ds[k][x];
  return m;
}

// The steady-state span claimed for each case, or empty if none is claimed.
inline std::vector<ExactDistribution> expected_span(const Lattice& lat, double alpha) {
  if (alpha == 1.0) {
    std::vector<ExactDistribution> v{build_state(lat, StateFamily::rho0())};
    if (lat.dim() == 2) v.push_back(build_state(lat, StateFamily::rho0_minus()));
    v.push_back(build_state(lat, StateFamily::rho_plus()));
    v.push_back(build_state(lat, StateFamily::rho_minus()));
    return v;
  }
  if (alpha == 0.0 && lat.dim() == 1) return {build_state(lat, StateFamily::rho0()), build_state(lat, StateFamily::rhoW())};
  return {};
}

}  // namespace detail

inline std::vector<ExactCheck> cmd_exact(const ExactOptions& o) {
  std::vector<ExactCheck> out;
  const auto want = [&](const char* t) { return o.task == "all" || o.task == t; };
  const auto dims = [&]() -> std::vector<int> {
    if (o.dim) return {*o.dim};
    return {1, 2};
  }();
  require(o.task == "all" || o.task == "steady" || o.task == "connectivity" || o.task == "double-stochastic" ||
              o.task == "closed-forms" || o.task == "bounds",
          ErrorKind::invalid_argument, "unknown exact task '" + o.task + "'");
  const auto lattices = [&](int d, std::vector<std::uint32_t> defaults) {
    std::vector<Lattice> v;
    for (auto L : o.sizes.empty() ? defaults : o.sizes) v.push_back(d == 1 ? Lattice::ring(L) : Lattice::square(L));
    return v;
  };

  if (want("steady")) {
    const double alpha = o.alpha.value_or(1.0);
    for (int d : dims)
      for (const auto& lat : lattices(d, d == 1 ? std::vector<std::uint32_t>{6, 8, 10} : std::vector<std::uint32_t>{3})) {
        const MixedKernel k = d == 1 ? MixedKernel::one_d(alpha) : MixedKernel::two_d(alpha, ToomVariant::strict);
        const auto rep = steady_states(build_generator(lat, k));
        const auto span = detail::expected_span(lat, alpha);
        ExactCheck dim{"steady", lat.describe() + " alpha=" + format_double(alpha), "null-space dimension",
                       static_cast<double>(rep.dimension), span.empty() ? "-" : std::to_string(span.size()),
                       !rep.ambiguous && (span.empty() || rep.dimension == span.size())};
        out.push_back(dim);
        if (!span.empty()) {
          const double angle = subspace_angle(rep.basis, detail::columns_of(span));
          out.push_back({"steady", dim.subject, "basis overlap cos(angle)", std::cos(angle), ">= 1-1e-9",
                         std::cos(angle) >= 1.0 - 1e-9 && angle < 1e-8});
        }
      }
  }

  if (want("connectivity")) {
    for (int d : dims)
      for (const auto& lat : lattices(d, d == 1 ? std::vector<std::uint32_t>{8, 10, 12} : std::vector<std::uint32_t>{3, 4})) {
        const MixedKernel k = d == 1 ? MixedKernel::one_d(1.0) : MixedKernel::two_d(1.0, ToomVariant::strict);
        const auto cls = connectivity_classes(lat, k);
        bool parity_ok = true;
        for (const auto& members : cls.members)
          for (auto x : members) parity_ok = parity_ok && (std::popcount(x) & 1) == (std::popcount(members.front()) & 1);
        const std::size_t expected = d == 1 ? 3 : 4;
        out.push_back({"connectivity", lat.describe(), "classes", static_cast<double>(cls.count()),
                       std::to_string(expected), cls.count() == expected && parity_ok});
      }
  }

  if (want("double-stochastic")) {
    for (int d : dims) {
      const Lattice lat = d == 1 ? Lattice::ring(8) : Lattice::square(3);
      const MixedKernel swssb = d == 1 ? MixedKernel::one_d(1.0) : MixedKernel::two_d(1.0, ToomVariant::strict);
      const auto r = verify_double_stochastic(lat, swssb);
      out.push_back({"double-stochastic", lat.describe() + " swssb rule", "worst asymmetry", r.worst_asymmetry, "< 1e-12",
                     r.symmetric});
      const MixedKernel base = d == 1 ? MixedKernel::one_d(0.0) : MixedKernel::two_d(0.0, ToomVariant::strict);
      const auto b = verify_double_stochastic(lat, base);
      out.push_back({"double-stochastic", lat.describe() + " alpha=0 rule", "worst asymmetry", b.worst_asymmetry,
                     "> 1e-12 (irreversible)", !b.symmetric});
    }
  }

  if (want("closed-forms")) {
    const Lattice ring16 = Lattice::ring(16);
    for (std::uint32_t R : {1U, 2U, 3U}) {
      const Lattice ring = Lattice::ring(16);
      const double v = exact_marginal_fidelity(build_state(ring, StateFamily::rhoW()), RegionSpec::one_point(ring, 0, R));
      out.push_back({"closed-forms", "rhoW L=16 R=" + std::to_string(R), "F_i^R", v,
                     format_double(closed_form::rhoW_one_point(16, R)),
                     std::abs(v - closed_form::rhoW_one_point(16, R)) < 1e-10});
      const double v2 = exact_marginal_fidelity(build_state(ring, StateFamily::rhoW()),
                                                RegionSpec::two_point(ring, 0, 8, R));
      out.push_back({"closed-forms", "rhoW L=16 R=" + std::to_string(R), "F_ij^R", v2,
                     format_double(closed_form::rhoW_two_point(16)), std::abs(v2 - closed_form::rhoW_two_point(16)) < 1e-10});
    }
    for (std::uint32_t R : {0U, 1U, 2U}) {
      const double v = exact_marginal_fidelity(build_state(ring16, StateFamily::classical_memory()),
                                               RegionSpec::two_point(ring16, 0, 8, R));
      out.push_back({"closed-forms", "classical_memory L=16 R=" + std::to_string(R), "F_ij^R", v,
                     format_double(closed_form::classical_memory_two_point(R)),
                     std::abs(v - closed_form::classical_memory_two_point(R)) < 1e-10});
    }
    for (double s : {0.0, 0.001, 0.1, 0.5, 1.0}) {
      const double v = exact_marginal_fidelity(build_state(ring16, StateFamily::partially_dead(s)),
                                               RegionSpec::two_point(ring16, 0, 8, 1));
      const double cf = closed_form::partially_dead_two_point(16, 1, s);
      out.push_back({"closed-forms", "partially_dead L=16 R=1 s=" + format_double(s), "F_ij^R", v, format_double(cf),
                     std::abs(v - cf) < 1e-10});
      out.push_back({"closed-forms", "partially_dead L=16 R=1 s=" + format_double(s), "printed form (reference only)",
                     closed_form::partially_dead_two_point_printed(16, 1, s), "-", true});
    }
    for (double beta : {0.2, 0.5, 1.0}) {
      const double tm = gibbs_one_point_fidelity(beta, 12, 1, GibbsMethod::transfer_matrix);
      for (std::uint32_t R : {1U, 2U, 3U}) {
        const double en = gibbs_one_point_fidelity(beta, 12, R, GibbsMethod::enumeration);
        out.push_back({"closed-forms", "gibbs L=12 beta=" + format_double(beta) + " R=" + std::to_string(R), "F_i^R", en,
                       format_double(tm), std::abs(en - tm) < 1e-10});
      }
    }
  }

  if (want("bounds")) {
    const Lattice ring = Lattice::ring(10);
    std::vector<std::pair<std::string, ExactDistribution>> states;
    for (const auto& f : {StateFamily::rho0(), StateFamily::rhoW(), StateFamily::rho_plus(), StateFamily::rho_minus(),
                          StateFamily::classical_memory(), StateFamily::partially_dead(0.3), StateFamily::gibbs_1d(0.5),
                          StateFamily::wandering_cluster({0.5, 0.3, 0.2})})
      states.emplace_back(f.name(), build_state(ring, f));
    for (const auto& [name, dist] : states) {
      double prev = 2.0;
      bool monotone = true;
      double worst_gap = -1e9;
      for (std::uint32_t R = 0; R <= 2; ++R) {
        const auto region = RegionSpec::two_point(ring, 0, 5, R);
        const double fij = exact_marginal_fidelity(dist, region);
        monotone = monotone && fij <= prev + 1e-12;
        prev = fij;
        const double fi = exact_marginal_fidelity(dist, RegionSpec::one_point(ring, 0, R));
        const double fj = exact_marginal_fidelity(dist, RegionSpec::one_point(ring, 5, R));
        const double mi = std::max(0.0, mutual_information(dist, region.block(ring, 0), region.block(ring, 5)));
        worst_gap = std::max(worst_gap, std::abs(fij - fi * fj) - 2.0 * std::pow(2.0 * mi, 0.25));
      }
      out.push_back({"bounds", name + " L=10", "F_ij^R non-increasing in R", monotone ? 1.0 : 0.0, "1", monotone});
      out.push_back({"bounds", name + " L=10", "max(gap - 2(2 MI)^(1/4))", worst_gap, "<= 1e-12", worst_gap <= 1e-12});
    }
    for (double beta : {0.2, 0.5, 1.0}) {
      const double f = gibbs_one_point_fidelity(beta, 10, 1, GibbsMethod::enumeration);
      out.push_back({"bounds", "gibbs L=10 beta=" + format_double(beta), "F_i - exp(-2 beta)",
                     f - closed_form::gibbs_lower_bound(beta), ">= 0", f >= closed_form::gibbs_lower_bound(beta)});
    }
  }
  return out;
}

inline void print_exact_table(std::ostream& os, const std::vector<ExactCheck>& checks) {
  for (const auto& c : checks)
    os << (c.pass ? "PASS " : "FAIL ") << std::left << std::setw(18) << c.task << ' ' << std::setw(36) << c.subject << ' '
       << std::setw(30) << c.quantity << ' ' << format_double(c.value) << "  (expected " << c.expected << ")\n";
}

inline nlohmann::json exact_to_json(const std::vector<ExactCheck>& checks) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : checks)
    a.push_back({{"task", c.task}, {"family", c.subject}, {"quantity", c.quantity}, {"value", c.value},
                 {"expected", c.expected}, {"pass", c.pass}});
  return a;
}

// --- analyze -------------------------------------------------------------------------

struct AnalyzeOptions {
  std::string task;  // meanfield | collapse | crossing | minf | synthetic-collapse | synthetic-crossing
  std::vector<std::filesystem::path> inputs;
  std::string observable;
  std::optional<double> alpha_min, alpha_max;
  bool half_near = false;
  std::optional<std::filesystem::path> out_dir;
};

struct AnalyzeReport {
  nlohmann::json result;
  std::string text;
  std::vector<std::string> files;
};

inline ScalingDataset load_datasets(const std::vector<std::filesystem::path>& paths) {
  require(!paths.empty(), ErrorKind::insufficient_data, "analysis needs at least one --input CSV");
  ScalingDataset all;
  for (const auto& p : paths) {
    std::ifstream in(p);
    require(static_cast<bool>(in), ErrorKind::io_failure, "cannot open " + p.string());
    auto ds = read_scaling_csv(in, p.string());
    all.records.insert(all.records.end(), ds.records.begin(), ds.records.end());
  }
  return all;
}

inline nlohmann::json collapse_json(const CollapseResult& r) {
  nlohmann::json cov = nlohmann::json::array();
  for (int a = 0; a < 3; ++a) cov.push_back({r.covariance(a, 0), r.covariance(a, 1), r.covariance(a, 2)});
  return {{"alpha_c", r.alpha_c},       {"beta_over_nu", r.beta_over_nu}, {"one_over_nu", r.one_over_nu},
          {"quality", r.quality},       {"covariance", cov},              {"converged", r.converged},
          {"status", r.status},         {"points_used", r.points_used}};
}

inline AnalyzeReport cmd_analyze(const AnalyzeOptions& o) {
  AnalyzeReport rep;
  std::ostringstream text;
  const auto write = [&](const std::string& name, const std::string& body) {
    if (!o.out_dir) return;
    std::filesystem::create_directories(*o.out_dir);
    std::ofstream os(*o.out_dir / name, std::ios::trunc);
    require(static_cast<bool>(os), ErrorKind::io_failure, "cannot write " + (*o.out_dir / name).string());
    os << body;
    rep.files.push_back(name);
  };
  const auto window = [&](ScalingDataset ds) {
    if (o.alpha_min || o.alpha_max)
      ds = ds.alpha_window(o.alpha_min.value_or(-1.0), o.alpha_max.value_or(2.0));
    return ds;
  };
  const auto run_collapse = [&](const ScalingDataset& ds, const std::string& obs) {
    const auto sub = window(ds.only(obs));
    const auto r = data_collapse(sub, "");
    rep.result = collapse_json(r);
    rep.result["observable"] = obs;
    text << "collapse " << obs << ": alpha_c=" << format_double(r.alpha_c) << " beta/nu=" << format_double(r.beta_over_nu)
         << " 1/nu=" << format_double(r.one_over_nu) << " quality=" << format_double(r.quality) << " (" << r.status << ")\n";
    std::ostringstream plot;
    write_collapse_plot(plot, sub, r);
    write("collapse_" + obs + ".dat", plot.str());
  };
  const auto run_crossing = [&](const ScalingDataset& ds, const std::string& obs) {
    const auto r = binder_crossing(window(ds), obs);
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& c : r.crossings)
      pairs.push_back({{"L1", c.L1}, {"L2", c.L2}, {"alpha", c.alpha}, {"sign_changes", c.sign_changes}});
    rep.result = {{"observable", obs}, {"mean", r.mean}, {"spread", r.spread}, {"pairs", pairs}, {"failures", r.failures}};
    text << "crossing " << obs << ": alpha=" << format_double(r.mean) << " spread=" << format_double(r.spread) << '\n';
  };

  if (o.task == "meanfield") {
    const auto r = meanfield_alpha_c(RateBalanceSpec::standard_bookkeeping(o.half_near ? DistanceWeighting::half_near
                                                                                     : DistanceWeighting::uniform));
    rep.result = {{"alpha_c", to_string(r.alpha_c)},
                  {"numerator", r.alpha_c.numerator()},
                  {"denominator", r.alpha_c.denominator()},
                  {"weighting", o.half_near ? "half_near" : "uniform"}};
    text << to_string(r.alpha_c) << '\n';
  } else if (o.task == "collapse") {
    run_collapse(load_datasets(o.inputs), o.observable.empty() ? "n_minus" : o.observable);
  } else if (o.task == "crossing") {
    run_crossing(load_datasets(o.inputs), o.observable.empty() ? "binder" : o.observable);
  } else if (o.task == "minf") {
    const std::string obs = o.observable.empty() ? "abs_m" : o.observable;
    const auto fits = m_infinity_fit(window(load_datasets(o.inputs)), obs);
    rep.result = nlohmann::json::array();
    for (const auto& f : fits) {
      rep.result.push_back({{"alpha", f.alpha}, {"m_inf", f.m_inf}, {"m_inf_error", f.m_inf_error}, {"c", f.c},
                            {"c_error", f.c_error}, {"chi2", f.chi2}, {"residuals", f.residuals}});
      text << "alpha=" << format_double(f.alpha) << " m_inf=" << format_double(f.m_inf) << " +- "
           << format_double(f.m_inf_error) << '\n';
    }
  } else if (o.task == "synthetic-collapse") {
    run_collapse(synthetic_collapse_dataset(0.44, 0.5, 0.54, {32, 64, 128, 256},
                                            {0.36, 0.38, 0.40, 0.42, 0.44, 0.46, 0.48, 0.50, 0.52}, "n_minus"),
                 "n_minus");
  } else if (o.task == "synthetic-crossing") {
    run_crossing(synthetic_binder_dataset(0.25, {10, 16, 20}, {0.18, 0.2, 0.22, 0.24, 0.26, 0.28, 0.3}), "binder");
  } else {
    fail(ErrorKind::invalid_argument, "unknown analysis task '" + o.task + "'");
  }
  write("analysis_" + o.task + ".json", rep.result.dump(2) + "\n");
  rep.text = text.str();
  return rep;
}

}  // namespace swssb
