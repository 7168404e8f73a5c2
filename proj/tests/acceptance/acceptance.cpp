// Acceptance runner: `swssb_acceptance N` checks criterion N (1..10), or all
// of them with no argument. Each criterion prints indented detail lines and
// exactly one "criterion N: PASS|FAIL" line; the exit code is 0 only if every
// requested criterion passed. Simulation outputs go under $SWSSB_ACCEPTANCE_OUT
// (default ./acceptance_out).

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "swssb/commands.hpp"

using namespace swssb;
namespace fs = std::filesystem;

namespace tol {
constexpr double subspace_angle = 1e-8;
constexpr double rate_asymmetry = 1e-12;
constexpr double closed_form = 1e-10;
constexpr double bound_slack = 1e-12;
constexpr double confidence = 0.95;
constexpr double exact_rounding = 1e-10;  // null-space oracle round-off
// criterion 6
constexpr double slope_absorbing = 1.0;
constexpr double slope_absorbing_band = 0.1;
constexpr double slope_active_max = 0.05;
constexpr double active_density_min = 0.05;
constexpr double alpha_c_lo = 0.40, alpha_c_hi = 0.48;
constexpr double beta_over_nu = 0.5, one_over_nu = 0.54, exponent_band = 0.1;
constexpr double fidelity_alpha_c_band = 0.04;
// criterion 7
constexpr double strict_m_band = 0.002;
constexpr double chill_003_hi = 0.9995, chill_003_lo = 0.9993 - 0.002;
constexpr double chill_004_hi = 0.9992, chill_004_lo = 0.999 - 0.002;
// criterion 8
constexpr double binder_ordered = 2.0 / 3.0, binder_band = 0.01;
constexpr double crossing_lo = 0.21, crossing_hi = 0.27;
}  // namespace tol

namespace {

struct Report {
  bool pass = true;
  std::vector<std::string> lines;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { lines.push_back("     " + what); }
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

fs::path work_root() {
  const char* env = std::getenv("SWSSB_ACCEPTANCE_OUT");
  return env && *env ? fs::path(env) : fs::path("acceptance_out");
}

fs::path fresh_dir(const std::string& name) {
  const auto p = work_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Independent construction of a uniform distribution over a predicate.
template <class Pred>
Eigen::VectorXd uniform_over(std::size_t n_sites, Pred pred) {
  const std::size_t dim = std::size_t{1} << n_sites;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  double count = 0;
  for (std::uint64_t x = 0; x < dim; ++x)
    if (pred(x)) {
      v[static_cast<Eigen::Index>(x)] = 1.0;
      ++count;
    }
  return v / count;
}

// Direct marginalization: sum the distribution over everything outside the
// region, then take the Bhattacharyya overlap with the flipped pattern.
double direct_fidelity(const ExactDistribution& d, const std::vector<Site>& sites, const std::vector<Site>& flipped) {
  std::vector<double> m(std::size_t{1} << sites.size(), 0.0);
  std::uint64_t mask = 0;
  for (std::size_t k = 0; k < sites.size(); ++k)
    for (Site f : flipped)
      if (sites[k] == f) mask |= std::uint64_t{1} << k;
  for (std::uint64_t x = 0; x < d.size(); ++x) {
    std::uint64_t p = 0;
    for (std::size_t k = 0; k < sites.size(); ++k) p |= ((x >> sites[k]) & 1U) << k;
    m[p] += d[x];
  }
  double f = 0.0;
  for (std::uint64_t p = 0; p < m.size(); ++p) f += std::sqrt(m[p] * m[p ^ mask]);
  return f;
}

std::vector<Site> ring_block(std::uint32_t L, Site c, std::uint32_t R) {
  std::vector<Site> s;
  for (int d = -static_cast<int>(R); d <= static_cast<int>(R); ++d)
    s.push_back(static_cast<Site>((static_cast<int>(c) + d + static_cast<int>(L)) % static_cast<int>(L)));
  return s;
}

std::vector<Site> cat(std::vector<Site> a, const std::vector<Site>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

bool single_sector(const ExactDistribution& d) {
  int seen = -1;
  for (std::uint64_t x = 0; x < d.size(); ++x)
    if (d[x] > 0.0) {
      const int p = std::popcount(x) & 1;
      if (seen >= 0 && p != seen) return false;
      seen = p;
    }
  return true;
}

ScalingDataset load_csv(const fs::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorKind::io_failure, "cannot open " + p.string());
  return read_scaling_csv(in, p.string());
}

double mean_of(const ScalingDataset& ds, const std::string& obs, double alpha, std::uint32_t L) {
  for (const auto& r : ds.records)
    if (r.observable == obs && r.L == L && std::abs(r.alpha - alpha) < 1e-9) return r.mean;
  fail(ErrorKind::insufficient_data, "no " + obs + " row for alpha=" + fmt(alpha) + " L=" + std::to_string(L));
}

// Least-squares slope of log(y) against log(L).
double log_slope(const std::vector<std::uint32_t>& sizes, const std::vector<double>& ys) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(sizes.size());
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const double x = std::log(static_cast<double>(sizes[k])), y = std::log(ys[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

SimulateReport run_pipeline(ExperimentConfig cfg, const std::string& name) {
  SimulateOptions o;
  o.out_dir = fresh_dir(name).string();
  const auto t0 = std::chrono::steady_clock::now();
  auto rep = cmd_simulate(std::move(cfg), o);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  require(rep.result.failures.empty(), ErrorKind::contract_violation,
          name + ": " + std::to_string(rep.result.failures.size()) + " trajectories failed");
  std::cout << "     [" << name << "] simulated in " << fmt(dt, 4) << " s, outputs in " << rep.out_dir.string() << '\n';
  return rep;
}

// --- 1: steady-state spans -------------------------------------------------------------

Report criterion1() {
  Report r;
  for (std::uint32_t L : {6u, 8u, 10u}) {
    const auto lat = Lattice::ring(L);
    const auto rep = steady_states(build_generator(lat, MixedKernel::one_d(1.0)));
    Eigen::MatrixXd span(std::int64_t{1} << L, 3);
    span.col(0) = uniform_over(L, [](std::uint64_t x) { return x == 0; });
    span.col(1) = uniform_over(L, [](std::uint64_t x) { return x != 0 && std::popcount(x) % 2 == 0; });
    span.col(2) = uniform_over(L, [](std::uint64_t x) { return std::popcount(x) % 2 == 1; });
    const double angle = subspace_angle(rep.basis, span);
    r.check(rep.dimension == 3 && !rep.ambiguous, "1d L=" + std::to_string(L) + " null-space dimension " +
                                                       std::to_string(rep.dimension) + " (want 3)");
    r.check(angle < tol::subspace_angle, "1d L=" + std::to_string(L) + " subspace angle " + fmt(angle));
  }
  {
    const auto lat = Lattice::square(3);
    const auto rep = steady_states(build_generator(lat, MixedKernel::two_d(1.0, ToomVariant::strict)));
    const std::uint64_t full = (std::uint64_t{1} << 9) - 1;
    Eigen::MatrixXd span(512, 4);
    span.col(0) = uniform_over(9, [](std::uint64_t x) { return x == 0; });
    span.col(1) = uniform_over(9, [&](std::uint64_t x) { return x == full; });
    span.col(2) = uniform_over(9, [](std::uint64_t x) { return x != 0 && std::popcount(x) % 2 == 0; });
    span.col(3) = uniform_over(9, [&](std::uint64_t x) { return x != full && std::popcount(x) % 2 == 1; });
    const double angle = subspace_angle(rep.basis, span);
    r.check(rep.dimension == 4 && !rep.ambiguous, "2d 3x3 null-space dimension " + std::to_string(rep.dimension) + " (want 4)");
    r.check(angle < tol::subspace_angle, "2d 3x3 subspace angle " + fmt(angle));
  }
  return r;
}

// --- 2: connectivity and double stochasticity --------------------------------------------

Report criterion2() {
  Report r;
  for (std::uint32_t L = 3; L <= 12; ++L) {
    const auto c = connectivity_classes(Lattice::ring(L), MixedKernel::one_d(1.0));
    r.check(c.count() == 3, "1d L=" + std::to_string(L) + ": " + std::to_string(c.count()) + " classes (want 3)");
  }
  for (std::uint32_t L : {3u, 4u}) {
    const auto c = connectivity_classes(Lattice::square(L), MixedKernel::two_d(1.0, ToomVariant::strict));
    r.check(c.count() == 4, "2d " + std::to_string(L) + "x" + std::to_string(L) + ": " + std::to_string(c.count()) +
                                " classes (want 4)");
  }
  for (std::uint32_t L : {8u, 12u}) {
    const auto d = verify_double_stochastic(Lattice::ring(L), MixedKernel::one_d(1.0), tol::rate_asymmetry);
    r.check(d.worst_asymmetry < tol::rate_asymmetry, "1d L=" + std::to_string(L) + " triplet rule worst asymmetry " +
                                                         fmt(d.worst_asymmetry));
  }
  for (std::uint32_t L : {3u, 4u}) {
    const auto d = verify_double_stochastic(Lattice::square(L), MixedKernel::two_d(1.0, ToomVariant::strict), tol::rate_asymmetry);
    r.check(d.worst_asymmetry < tol::rate_asymmetry, "2d " + std::to_string(L) + "x" + std::to_string(L) +
                                                         " plaquette rule worst asymmetry " + fmt(d.worst_asymmetry));
  }
  return r;
}

// --- 3: closed forms -------------------------------------------------------------------

Report criterion3() {
  Report r;
  double worst = 0.0;
  const auto compare = [&](const std::string& what, double library, double direct, double closed) {
    const double e = std::max(std::abs(library - direct), std::abs(closed - direct));
    worst = std::max(worst, e);
    if (e >= tol::closed_form) r.check(false, what + ": library " + fmt(library, 12) + ", direct " + fmt(direct, 12) +
                                                  ", closed form " + fmt(closed, 12));
  };
  for (std::uint32_t L : {12u, 16u}) {
    const auto lat = Lattice::ring(L);
    const Site j = L / 2;
    const auto cm = build_state(lat, StateFamily::classical_memory());
    const auto w = build_state(lat, StateFamily::rhoW());
    for (std::uint32_t R = 0; 2 * R + 1 <= L / 2; ++R) {
      const auto bi = ring_block(L, 0, R), bj = ring_block(L, j, R);
      const auto two = RegionSpec::two_point(lat, 0, j, R);
      compare("classical memory L=" + std::to_string(L) + " R=" + std::to_string(R), exact_marginal_fidelity(cm, two),
              direct_fidelity(cm, cat(bi, bj), {0, j}), closed_form::classical_memory_two_point(R));
      compare("rhoW two-point L=" + std::to_string(L) + " R=" + std::to_string(R), exact_marginal_fidelity(w, two),
              direct_fidelity(w, cat(bi, bj), {0, j}), closed_form::rhoW_two_point(L));
      compare("rhoW one-point L=" + std::to_string(L) + " R=" + std::to_string(R),
              exact_marginal_fidelity(w, RegionSpec::one_point(lat, 0, R)), direct_fidelity(w, bi, {0}),
              closed_form::rhoW_one_point(L, R));
    }
  }
  {
    const std::uint32_t L = 16;
    const auto lat = Lattice::ring(L);
    for (double s : {0.0, 1e-3, 0.05, 0.3, 0.7, 1.0}) {
      const auto d = build_state(lat, StateFamily::partially_dead(s));
      for (std::uint32_t R = 0; R <= 3; ++R)
        compare("partially dead s=" + fmt(s) + " R=" + std::to_string(R),
                exact_marginal_fidelity(d, RegionSpec::two_point(lat, 0, 8, R)),
                direct_fidelity(d, cat(ring_block(L, 0, R), ring_block(L, 8, R)), {0, 8}),
                closed_form::partially_dead_two_point(L, R, s));
    }
  }
  for (double beta : {0.2, 0.5, 1.0, 2.0}) {
    const std::uint32_t L = 14;
    const auto lat = Lattice::ring(L);
    const auto d = build_state(lat, StateFamily::gibbs_1d(beta));
    const double cf = closed_form::gibbs_one_point(beta, L);
    for (std::uint32_t R = 1; R <= 4; ++R)
      compare("gibbs beta=" + fmt(beta) + " R=" + std::to_string(R),
              exact_marginal_fidelity(d, RegionSpec::one_point(lat, 0, R)), direct_fidelity(d, ring_block(L, 0, R), {0}), cf);
  }
  r.check(worst < tol::closed_form, "worst deviation across the closed-form suite " + fmt(worst));
  return r;
}

// --- 4: bounds -------------------------------------------------------------------------

struct BoundTally {
  std::size_t states = 0, checks = 0, monotone = 0, factorization = 0, cmi = 0, strong = 0;
  double worst_factorization = -1e9, worst_cmi = -1e9;
};

void check_bounds(const ExactDistribution& d, BoundTally& t) {
  const auto& lat = d.lattice();
  const std::uint32_t L = lat.lx();
  const Site j = L / 2;
  ++t.states;
  double prev_one = 2.0;
  for (std::uint32_t R = 0; 2 * R + 1 <= L; ++R) {
    const double f = exact_marginal_fidelity(d, RegionSpec::one_point(lat, 0, R));
    ++t.checks;
    if (f > prev_one + tol::bound_slack) ++t.monotone;
    prev_one = f;
  }
  double prev_two = 2.0;
  for (std::uint32_t R = 0; 2 * (2 * R + 1) <= L; ++R) {
    const auto two = RegionSpec::two_point(lat, 0, j, R);
    const double fij = exact_marginal_fidelity(d, two);
    const double fi = exact_marginal_fidelity(d, RegionSpec::one_point(lat, 0, R));
    const double fj = exact_marginal_fidelity(d, RegionSpec::one_point(lat, j, R));
    const double mi = std::max(0.0, mutual_information(d, ring_block(L, 0, R), ring_block(L, j, R)));
    const double excess = std::abs(fij - fi * fj) - 2.0 * std::pow(2.0 * mi, 0.25);
    t.checks += 2;
    if (fij > prev_two + tol::bound_slack) ++t.monotone;
    prev_two = fij;
    t.worst_factorization = std::max(t.worst_factorization, excess);
    if (excess > tol::bound_slack) ++t.factorization;
  }
  if (!single_sector(d)) return;
  ++t.strong;
  for (std::uint32_t inner = 0; inner <= 2; ++inner)
    for (std::uint32_t outer = inner + 1; outer <= 4 && 2 * outer + 1 < L; ++outer) {
      const auto split = ring_cmi_split(lat, 0, inner, outer);
      const double cmi = std::max(0.0, conditional_mutual_information(d, split.a, split.b, split.c));
      const double fi = exact_marginal_fidelity(d, RegionSpec::one_point(lat, 0, outer));
      const double excess = fi - 2.0 * std::sqrt(2.0) * std::pow(cmi, 0.25);
      ++t.checks;
      t.worst_cmi = std::max(t.worst_cmi, excess);
      if (excess > tol::bound_slack) ++t.cmi;
    }
}

Report criterion4() {
  Report r;
  BoundTally t;
  for (std::uint32_t L : {10u, 12u}) {
    const auto lat = Lattice::ring(L);
    for (const auto& f : {StateFamily::rho0(), StateFamily::rho0_minus(), StateFamily::rhoW(), StateFamily::rho_plus(),
                          StateFamily::rho_minus(), StateFamily::classical_memory(), StateFamily::partially_dead(0.0),
                          StateFamily::partially_dead(0.01), StateFamily::partially_dead(0.3), StateFamily::partially_dead(1.0),
                          StateFamily::gibbs_1d(0.2), StateFamily::gibbs_1d(0.5), StateFamily::gibbs_1d(1.0),
                          StateFamily::wandering_cluster({1.0}), StateFamily::wandering_cluster({0.5, 0.3, 0.2})})
      check_bounds(build_state(lat, f), t);
  }
  const std::size_t families = t.states;

  // Random strongly symmetric (one parity sector) and weakly symmetric
  // (invariant under the global flip) distributions, smooth and peaked.
  std::mt19937_64 gen(20240601);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::uint32_t L = 10;
  const auto lat = Lattice::ring(L);
  const std::uint64_t dim = std::uint64_t{1} << L, all = dim - 1;
  for (int k = 0; k < 64; ++k) {
    const double sharpness = k % 4 < 2 ? 0.5 : 3.0;
    std::vector<double> w(dim);
    for (auto& x : w) x = std::exp(sharpness * g(gen));
    if (k % 2 == 0) {
      const int sector = (k / 2) % 2;
      for (std::uint64_t x = 0; x < dim; ++x)
        if ((std::popcount(x) & 1) != sector) w[x] = 0.0;
    } else {
      for (std::uint64_t x = 0; x < dim; ++x)
        if (x < (x ^ all)) w[x ^ all] = w[x];
    }
    check_bounds(ExactDistribution::from_weights(lat, w), t);
  }
  r.note(std::to_string(families) + " family states and " + std::to_string(t.states - families) +
         " random states; " + std::to_string(t.strong) + " strongly symmetric; " + std::to_string(t.checks) + " inequalities");
  r.check(t.monotone == 0, "F^R non-increasing in R: " + std::to_string(t.monotone) + " violations");
  r.check(t.factorization == 0, "|F_ij - F_i F_j| <= 2 (2 MI)^(1/4): " + std::to_string(t.factorization) +
                                    " violations, worst excess " + fmt(t.worst_factorization));
  r.check(t.cmi == 0, "F_i <= 2 sqrt(2) CMI^(1/4): " + std::to_string(t.cmi) + " violations, worst excess " + fmt(t.worst_cmi));

  for (double beta : {0.2, 0.5, 1.0}) {
    const double bound = closed_form::gibbs_lower_bound(beta);
    double lowest = 2.0;
    const auto d = build_state(Lattice::ring(12), StateFamily::gibbs_1d(beta));
    for (std::uint32_t R = 0; R <= 5; ++R)
      lowest = std::min(lowest, exact_marginal_fidelity(d, RegionSpec::one_point(d.lattice(), 0, R)));
    for (std::uint32_t Lg : {12u, 64u, 1024u})
      lowest = std::min(lowest, gibbs_one_point_fidelity(beta, Lg, 1, GibbsMethod::transfer_matrix));
    r.check(lowest >= bound - tol::bound_slack,
            "Gibbs beta=" + fmt(beta) + ": min F_i " + fmt(lowest) + " >= exp(-beta |V_i| / 2) = " + fmt(bound));
  }
  return r;
}

// --- 5: sampled vs exact -----------------------------------------------------------------

Report criterion5() {
  Report r;
  const std::uint32_t L = 12;
  const auto lat = Lattice::ring(L);
  const auto rep = steady_states(build_generator(lat, MixedKernel::one_d(1.0)));
  const ExactDistribution* odd = nullptr;
  for (const auto& d : rep.distributions) {
    double w = 0.0;
    for (std::uint64_t x = 0; x < d.size(); ++x)
      if (std::popcount(x) & 1) w += d[x];
    if (w > 0.5) odd = &d;
  }
  require(odd != nullptr, ErrorKind::contract_violation, "no odd-sector steady state found");

  ExperimentConfig cfg;
  cfg.dimension = 1;
  cfg.sizes = {L};
  cfg.alphas = {1.0};
  cfg.sector = Parity::odd;
  cfg.pattern = InitialPattern::random_in_sector;
  cfg.schedule = {200 + 10 * 10000, 200, 10};
  cfg.n_trajectories = 10;
  cfg.master_seed = 5;
  cfg.measurement.observables = {Observable::minus_density};
  cfg.measurement.series = false;
  cfg.measurement.snapshot_every = 1;
  const auto sim = run_pipeline(cfg, "criterion5");
  const auto archive = read_file<SnapshotArchive>(sim.out_dir / "snapshots/L12_alpha1.sws", read_snapshots);
  r.note(std::to_string(archive.snapshots.size()) + " snapshots");
  r.check(archive.snapshots.size() >= 100000, "at least 1e5 snapshots");
  BootstrapOptions bo;
  bo.replicates = 400;
  bo.confidence = tol::confidence;
  bo.seed = 11;
  for (std::uint32_t R : {0u, 1u, 2u}) {
    const auto shape = RegionSpec::two_point(lat, 0, L / 2, R);
    const double exact = exact_marginal_fidelity(*odd, shape);
    r.note("R=" + std::to_string(R) + ": exact - 1 = " + fmt(exact - 1.0, 3));
    const auto est = translation_average(archive.snapshots, lat, shape, bo);
    r.check(est.ci_lo - tol::exact_rounding <= exact && exact <= est.ci_hi + tol::exact_rounding, "R=" + std::to_string(R) + ": exact " + fmt(exact, 8) + ", sampled " +
                                                          fmt(est.value, 8) + ", 95% CI [" + fmt(est.ci_lo, 8) + ", " +
                                                          fmt(est.ci_hi, 8) + "]");
  }
  return r;
}

// --- 6: 1+1d transition ---------------------------------------------------------------------

ExperimentConfig criterion6_config(std::uint64_t sweeps, std::uint32_t seeds) {
  ExperimentConfig cfg;
  cfg.dimension = 1;
  cfg.sizes = {32, 64, 128};
  cfg.alphas = {0.30, 0.36, 0.38, 0.40, 0.42, 0.44, 0.46, 0.48, 0.50, 0.52, 0.60};
  cfg.sector = Parity::odd;
  cfg.pattern = InitialPattern::random_in_sector;
  cfg.schedule = {sweeps, sweeps / 2, 100};
  cfg.n_trajectories = seeds;
  cfg.master_seed = 6;
  cfg.measurement.observables = {Observable::minus_density};
  cfg.measurement.series = false;
  cfg.measurement.fidelity.enabled = true;
  cfg.measurement.fidelity.radii = {3};
  cfg.measurement.fidelity.two_point = true;
  cfg.measurement.fidelity.pooled = true;
  return cfg;
}

Report criterion6() {
  Report r;
  const auto sim = run_pipeline(criterion6_config(200000, 50), "criterion6");
  const auto summary = load_csv(sim.out_dir / "summary.csv");
  const auto fidelity = load_csv(sim.out_dir / "fidelity.csv");
  const std::vector<std::uint32_t> sizes{32, 64, 128};

  for (double a : {0.30, 0.60}) {
    std::vector<double> n;
    for (auto L : sizes) n.push_back(mean_of(summary, "n_minus", a, L));
    const double s = log_slope(sizes, n);
    r.note("alpha=" + fmt(a) + ": n_minus = " + fmt(n[0]) + ", " + fmt(n[1]) + ", " + fmt(n[2]) + "; log-log slope " + fmt(s));
    if (a < 0.5)
      r.check(std::abs(s + tol::slope_absorbing) <= tol::slope_absorbing_band, "(a) alpha=0.30 n_minus ~ 1/L");
    else
      r.check(std::abs(s) < tol::slope_active_max && n.back() >= tol::active_density_min,
              "(a) alpha=0.60 n_minus L-independent and O(1)");
  }

  CollapseResult nc;
  try {
    nc = data_collapse(summary.only("n_minus").alpha_window(0.36, 0.52), "");
    r.note("n_minus collapse: alpha_c=" + fmt(nc.alpha_c) + " beta/nu=" + fmt(nc.beta_over_nu) + " 1/nu=" +
           fmt(nc.one_over_nu) + " quality=" + fmt(nc.quality) + " (" + nc.status + ")");
    r.check(nc.alpha_c >= tol::alpha_c_lo && nc.alpha_c <= tol::alpha_c_hi, "(b) alpha_c in [0.40, 0.48]");
    r.check(std::abs(nc.beta_over_nu - tol::beta_over_nu) <= tol::exponent_band, "(b) beta/nu within 0.1 of 0.5");
    r.check(std::abs(nc.one_over_nu - tol::one_over_nu) <= tol::exponent_band, "(b) 1/nu within 0.1 of 0.54");
  } catch (const Error& e) {
    r.check(false, std::string("(b) n_minus collapse failed: ") + e.what());
    return r;
  }
  try {
    const auto fc = data_collapse(fidelity.only("F_R3").alpha_window(0.36, 0.52), "");
    r.note("F_R3 collapse: alpha_c=" + fmt(fc.alpha_c) + " beta/nu=" + fmt(fc.beta_over_nu) + " 1/nu=" +
           fmt(fc.one_over_nu) + " quality=" + fmt(fc.quality) + " (" + fc.status + ")");
    r.check(std::abs(fc.alpha_c - nc.alpha_c) <= tol::fidelity_alpha_c_band, "(c) fidelity alpha_c within 0.04 of n_minus");
  } catch (const Error& e) {
    r.check(false, std::string("(c) fidelity collapse failed: ") + e.what());
  }
  return r;
}

// --- 7, 8: 2+1d --------------------------------------------------------------------------

ExperimentConfig two_d_config(ToomVariant v, std::vector<std::uint32_t> sizes, std::vector<double> alphas,
                              std::uint64_t sweeps, std::uint32_t seeds, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.dimension = 2;
  cfg.variant = v;
  cfg.sizes = std::move(sizes);
  cfg.alphas = std::move(alphas);
  cfg.sector = Parity::odd;
  cfg.pattern = InitialPattern::single_minus;
  cfg.schedule = {sweeps, sweeps / 5, 10};
  cfg.n_trajectories = seeds;
  cfg.master_seed = seed;
  cfg.measurement.observables = {Observable::abs_magnetization};
  cfg.measurement.series = false;
  return cfg;
}

Report criterion7() {
  Report r;
  const std::vector<std::uint32_t> sizes{10, 12, 16, 20};
  const auto strict = run_pipeline(two_d_config(ToomVariant::strict, sizes, {0.05, 0.10}, 20000, 50, 71), "criterion7_strict");
  const auto chill = run_pipeline(two_d_config(ToomVariant::chill, sizes, {0.03, 0.04}, 20000, 50, 72), "criterion7_chill");
  const auto fs_ = m_infinity_fit(load_csv(strict.out_dir / "summary.csv"), "abs_m");
  const auto fc = m_infinity_fit(load_csv(chill.out_dir / "summary.csv"), "abs_m");
  for (const auto& f : fs_)
    r.check(std::abs(f.m_inf - 1.0) <= tol::strict_m_band, "strict alpha=" + fmt(f.alpha) + ": m_inf = " + fmt(f.m_inf, 6) +
                                                               " +- " + fmt(f.m_inf_error, 2) + " (want 1.000 +- 0.002)");
  for (const auto& f : fc) {
    const bool a3 = std::abs(f.alpha - 0.03) < 1e-9;
    const double lo = a3 ? tol::chill_003_lo : tol::chill_004_lo, hi = a3 ? tol::chill_003_hi : tol::chill_004_hi;
    r.check(f.m_inf >= lo && f.m_inf <= hi, "chill alpha=" + fmt(f.alpha) + ": m_inf = " + fmt(f.m_inf, 6) + " +- " +
                                                fmt(f.m_inf_error, 2) + " (want [" + fmt(lo) + ", " + fmt(hi) + "])");
  }
  r.check(fs_.size() == 2 && fc.size() == 2, "four m_inf fits");
  return r;
}

Report criterion8() {
  Report r;
  std::vector<double> alphas{0.05};
  for (int k = 0; k <= 12; ++k) alphas.push_back(0.18 + 0.01 * k);
  auto cfg = two_d_config(ToomVariant::strict, {10, 16, 20}, alphas, 20000, 20, 81);
  cfg.measurement.observables = {Observable::magnetization};
  cfg.measurement.binder = true;
  const auto sim = run_pipeline(cfg, "criterion8");
  const auto ds = load_csv(sim.out_dir / "summary.csv");
  for (std::uint32_t L : {10u, 16u, 20u}) {
    const double b = mean_of(ds, "binder", 0.05, L);
    r.check(std::abs(b - tol::binder_ordered) <= tol::binder_band, "L=" + std::to_string(L) + " binder(0.05) = " + fmt(b));
  }
  try {
    const auto c = binder_crossing(ds.alpha_window(0.18, 0.30), "binder");
    for (const auto& p : c.crossings)
      r.note("L=" + std::to_string(p.L1) + "/" + std::to_string(p.L2) + " cross at " + fmt(p.alpha) + " (" +
             std::to_string(p.sign_changes) + " sign changes)");
    for (const auto& f : c.failures) r.note(f);
    r.check(c.mean >= tol::crossing_lo && c.mean <= tol::crossing_hi,
            "mean pairwise crossing " + fmt(c.mean) + " +- " + fmt(c.spread) + " in [0.21, 0.27]");
  } catch (const Error& e) {
    r.check(false, std::string("binder crossing failed: ") + e.what());
  }
  return r;
}

// --- 9: mean field ---------------------------------------------------------------------------

Report criterion9() {
  Report r;
  const auto u = meanfield_alpha_c(RateBalanceSpec::standard_bookkeeping(DistanceWeighting::uniform));
  const auto h = meanfield_alpha_c(RateBalanceSpec::standard_bookkeeping(DistanceWeighting::half_near));
  r.check(u.alpha_c == Rational(12, 37), "uniform weighting: " + to_string(u.alpha_c) + " (want 12/37)");
  r.check(h.alpha_c == Rational(9, 16), "half-weighted near escapes: " + to_string(h.alpha_c) + " (want 9/16)");
  return r;
}

// --- 10: determinism ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Runs `cfg`, then reruns from the config stored in the first run's manifest,
// and compares every output byte for byte (manifest: ignoring wall time).
void rerun_from_manifest(Report& r, ExperimentConfig cfg, const std::string& name) {
  cfg.output_dir = (work_root() / (name + "_a")).string();
  fs::remove_all(cfg.output_dir);
  const auto a = run_pipeline(cfg, name + "_a");
  const auto manifest = nlohmann::json::parse(slurp(a.out_dir / "manifest.json"));
  auto again = config_from_json(manifest.at("config"));
  const auto b_dir = fresh_dir(name + "_b");
  SimulateOptions o;
  o.out_dir = b_dir.string();
  o.threads = 3;
  const auto b = cmd_simulate(again, o);
  std::size_t same = 0, differ = 0;
  for (const auto& f : a.files) {
    if (f == "manifest.json") continue;
    (slurp(a.out_dir / f) == slurp(b.out_dir / f) ? same : differ) += 1;
  }
  auto ma = manifest, mb = nlohmann::json::parse(slurp(b.out_dir / "manifest.json"));
  for (auto* m : {&ma, &mb}) {
    m->erase("wall_time_seconds");
    (*m)["config"].erase("output_dir");
    m->erase("config_hash");
  }
  const bool manifest_same = ma == mb && a.files == b.files;
  r.check(differ == 0 && manifest_same && same > 0, name + ": " + std::to_string(same) + " files identical, " +
                                                       std::to_string(differ) + " differ; manifest " +
                                                       (manifest_same ? "identical" : "differs"));
}

Report criterion10() {
  Report r;
  {
    auto cfg = criterion6_config(4000, 4);
    cfg.measurement.series = true;
    cfg.measurement.snapshot_every = 5;
    cfg.measurement.observables = {Observable::minus_density, Observable::abs_magnetization};
    cfg.measurement.binder = true;
    rerun_from_manifest(r, cfg, "criterion10_1d");
  }
  {
    auto cfg = two_d_config(ToomVariant::chill, {6, 8, 10}, {0.05, 0.25}, 2000, 4, 101);
    cfg.measurement.fidelity.enabled = true;
    cfg.measurement.fidelity.radii = {0, 1};
    cfg.measurement.snapshot_every = 10;
    cfg.measurement.series = true;
    rerun_from_manifest(r, cfg, "criterion10_2d");
  }
  {
    // Analysis on the same inputs is deterministic too.
    AnalyzeOptions o;
    o.task = "minf";
    o.inputs = {work_root() / "criterion10_2d_a/summary.csv"};
    o.observable = "abs_m";
    const auto x = cmd_analyze(o).result.dump();
    o.inputs = {work_root() / "criterion10_2d_b/summary.csv"};
    r.check(cmd_analyze(o).result.dump() == x, "m_inf fit identical on both runs");
    AnalyzeOptions c;
    c.task = "synthetic-collapse";
    r.check(cmd_analyze(c).result.dump() == cmd_analyze(c).result.dump(), "collapse fit identical on repeat");
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Report()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                      criterion6, criterion7, criterion8, criterion9, criterion10};
  std::vector<int> which;
  for (int k = 1; k < argc; ++k) {
    const int c = std::atoi(argv[k]);
    if (c < 1 || c > 10) {
      std::cerr << "usage: swssb_acceptance [criterion 1..10 ...]\n";
      return 64;
    }
    which.push_back(c);
  }
  if (which.empty())
    for (int c = 1; c <= 10; ++c) which.push_back(c);

  bool all = true;
  for (int c : which) {
    const auto t0 = std::chrono::steady_clock::now();
    Report r;
    try {
      r = criteria[static_cast<std::size_t>(c - 1)]();
    } catch (const std::exception& e) {
      r.check(false, std::string("exception: ") + e.what());
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& l : r.lines) std::cout << "  " << l << '\n';
    std::cout << "criterion " << c << ": " << (r.pass ? "PASS" : "FAIL") << " (" << fmt(dt, 4) << " s)" << std::endl;
    all = all && r.pass;
  }
  return all ? 0 : 1;
}
