#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "swssb/dynamics.hpp"
#include "swssb/error.hpp"
#include "swssb/fidelity.hpp"
#include "swssb/lattice.hpp"
#include "swssb/union_find.hpp"

namespace swssb {

// Size limits (number of sites N) for the brute-force routines.
struct ExactCaps {
  static constexpr std::size_t distribution = 20;
  static constexpr std::size_t generator = 16;
  static constexpr std::size_t dense_null_space = 12;
  static constexpr std::size_t connectivity = 20;
};

inline void require_cap(std::size_t n, std::size_t cap, const char* what) {
  require(n <= cap, ErrorKind::resource_limit,
          std::string(what) + ": N = " + std::to_string(n) + " exceeds cap " + std::to_string(cap));
}

// Probability vector over the 2^N configurations, indexed by SpinConfig::index().
class ExactDistribution {
 public:
  ExactDistribution(Lattice lattice, std::vector<double> probs) : lattice_(std::move(lattice)), probs_(std::move(probs)) {
    require_cap(lattice_.sites(), ExactCaps::distribution, "ExactDistribution");
    require(probs_.size() == (std::size_t{1} << lattice_.sites()), ErrorKind::invalid_argument,
            "ExactDistribution needs 2^N entries");
    double total = 0.0;
    for (double p : probs_) {
      require(p >= 0.0 && std::isfinite(p), ErrorKind::invalid_argument, "probabilities must be finite and >= 0");
      total += p;
    }
    // Summation error grows with the number of terms.
    const double slack = 1e-12 + 4.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(probs_.size());
    if (std::abs(total - 1.0) > slack) {
      std::ostringstream os;
      os << "probabilities sum to " << std::setprecision(17) << total << ", not 1";
      fail(ErrorKind::invalid_argument, os.str());
    }
  }

  // Normalizes non-negative weights.
  static ExactDistribution from_weights(Lattice lattice, std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    require(total > 0.0, ErrorKind::invalid_argument, "weights sum to zero");
    for (double& w : weights) w /= total;
    return ExactDistribution(std::move(lattice), std::move(weights));
  }

  const Lattice& lattice() const noexcept { return lattice_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::uint64_t x) const { return probs_[x]; }

 private:
  Lattice lattice_;
  std::vector<double> probs_;
};

inline std::uint64_t all_minus_index(const Lattice& lattice) {
  return lattice.sites() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << lattice.sites()) - 1;
}

// Configurations with zero exit rate under the SWSSB rule: all-+ always,
// all-- on the torus (the triplet rule does move (---) in 1d).
inline bool swssb_frozen(std::uint64_t x, const Lattice& lattice) {
  return x == 0 || (lattice.dim() == 2 && x == all_minus_index(lattice));
}

// --- generator ----------------------------------------------------------------

// Rates out of configuration `from`, self-transitions dropped, duplicates
// merged, sorted by target. One time unit is one sweep, so the rate to c' is
// sum over sites r of (1 - alpha) P_base(r; c -> c') + alpha P_swssb(r; c -> c').
inline std::vector<std::pair<std::uint64_t, double>> outgoing_rates(std::uint64_t from, const Lattice& lattice,
                                                                    const MixedKernel& kernel) {
  const SpinConfig c = SpinConfig::from_index(from, lattice.sites());
  std::vector<std::pair<std::uint64_t, double>> out;
  const auto emit = [&](const OutcomeList& list, double weight) {
    for (const auto& o : list) {
      if (o.n_flips == 0) continue;
      std::uint64_t to = from;
      for (std::uint8_t k = 0; k < o.n_flips; ++k) to ^= std::uint64_t{1} << o.flips[k];
      if (to != from) out.emplace_back(to, weight * o.prob);
    }
  };
  for (Site r = 0; r < lattice.sites(); ++r) {
    if (kernel.alpha < 1.0) emit(base_rule_outcomes(c, lattice, kernel, r), 1.0 - kernel.alpha);
    if (kernel.alpha > 0.0) emit(swssb_rule_outcomes(c, lattice, kernel, r), kernel.alpha);
  }
  std::sort(out.begin(), out.end());
  std::vector<std::pair<std::uint64_t, double>> merged;
  for (const auto& [to, rate] : out) {
    if (!merged.empty() && merged.back().first == to) merged.back().second += rate;
    else merged.emplace_back(to, rate);
  }
  return merged;
}

// Columns are sources: G(to, from) is the rate from -> to and G(c, c) is
// minus the total exit rate of c, so every column sums to zero.
struct SparseGenerator {
  Lattice lattice;
  MixedKernel kernel;
  Eigen::SparseMatrix<double> matrix;

  std::size_t dimension() const { return static_cast<std::size_t>(matrix.cols()); }
};

inline SparseGenerator build_generator(const Lattice& lattice, const MixedKernel& kernel) {
  kernel.validate();
  check_kernel_lattice(kernel, lattice);
  require_cap(lattice.sites(), ExactCaps::generator, "build_generator");
  const std::size_t dim = std::size_t{1} << lattice.sites();
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::uint64_t from = 0; from < dim; ++from) {
    double exit = 0.0;
    for (const auto& [to, rate] : outgoing_rates(from, lattice, kernel)) {
      triplets.emplace_back(static_cast<int>(to), static_cast<int>(from), rate);
      exit += rate;
    }
    if (exit != 0.0) triplets.emplace_back(static_cast<int>(from), static_cast<int>(from), -exit);
  }
  SparseGenerator g{lattice, kernel, Eigen::SparseMatrix<double>(static_cast<int>(dim), static_cast<int>(dim))};
  g.matrix.setFromTriplets(triplets.begin(), triplets.end());
  g.matrix.makeCompressed();
  return g;
}

// --- steady states ------------------------------------------------------------

struct SteadyStateReport {
  std::size_t dimension = 0;
  std::size_t even_dimension = 0;
  std::size_t odd_dimension = 0;
  Eigen::MatrixXd basis;                          // orthonormal null-space columns, 2^N rows
  std::vector<ExactDistribution> distributions;   // extremal stationary distributions
  double relative_tolerance = 1e-9;
  double largest_null_singular_value = 0.0;       // relative to the block's largest
  double smallest_kept_singular_value = 1.0;      // smallest singular value above threshold, relative
  bool ambiguous = false;
  std::vector<std::string> notes;
};

namespace detail {

// Rows of a null-space basis restricted to one recurrent class are parallel;
// transient states have zero rows. Grouping rows by direction recovers the
// classes, and Q P^{-1} (P = one representative direction per class) gives
// vectors proportional to the class-supported stationary distributions.
inline bool extremal_from_null_block(const Eigen::MatrixXd& q, const std::vector<std::uint64_t>& states,
                                     const Lattice& lattice, std::vector<ExactDistribution>& out,
                                     std::vector<std::string>& notes) {
  const Eigen::Index k = q.cols();
  if (k == 0) return true;
  double max_norm = 0.0;
  for (Eigen::Index r = 0; r < q.rows(); ++r) max_norm = std::max(max_norm, q.row(r).norm());
  std::vector<Eigen::RowVectorXd> reps;
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    const double n = q.row(r).norm();
    if (n <= 1e-8 * max_norm) continue;
    Eigen::RowVectorXd d = q.row(r) / n;
    bool found = false;
    for (const auto& rep : reps)
      if (std::abs(rep.dot(d)) > 1.0 - 1e-8) {
        found = true;
        break;
      }
    if (!found) reps.push_back(d);
  }
  if (static_cast<Eigen::Index>(reps.size()) != k) {
    notes.push_back("null-space rows form " + std::to_string(reps.size()) + " directions for dimension " +
                    std::to_string(k) + "; extremal decomposition skipped");
    return false;
  }
  Eigen::MatrixXd p(k, k);
  for (Eigen::Index a = 0; a < k; ++a) p.row(a) = reps[static_cast<std::size_t>(a)];
  const Eigen::MatrixXd x = q * p.inverse();
  for (Eigen::Index col = 0; col < k; ++col) {
    Eigen::VectorXd v = x.col(col);
    const double s = v.sum();
    if (s == 0.0) return false;
    v /= s;
    std::vector<double> probs(std::size_t{1} << lattice.sites(), 0.0);
    for (Eigen::Index r = 0; r < v.size(); ++r) {
      double val = v(r);
      if (val < 0.0) {
        if (val < -1e-9) {
          notes.push_back("stationary vector has negative entries; extremal decomposition skipped");
          return false;
        }
        val = 0.0;
      }
      probs[states[static_cast<std::size_t>(r)]] = val;
    }
    out.push_back(ExactDistribution::from_weights(lattice, std::move(probs)));
  }
  return true;
}

}  // namespace detail

// Null space of the generator by singular-value thresholding, one parity
// block at a time (the generator never connects the two sectors).
inline SteadyStateReport steady_states(const SparseGenerator& gen, double relative_tolerance = 1e-9) {
  const std::size_t n_sites = gen.lattice.sites();
  require_cap(n_sites, ExactCaps::dense_null_space, "steady_states (dense SVD)");
  const std::size_t dim = gen.dimension();
  SteadyStateReport rep;
  rep.relative_tolerance = relative_tolerance;

  std::vector<std::vector<std::uint64_t>> blocks(2);
  for (std::uint64_t x = 0; x < dim; ++x) blocks[static_cast<std::size_t>(std::popcount(x) & 1)].push_back(x);

  std::vector<Eigen::VectorXd> columns;
  bool decomposed = true;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto& states = blocks[b];
    if (states.empty()) continue;
    std::vector<std::int64_t> local(dim, -1);
    for (std::size_t k = 0; k < states.size(); ++k) local[states[k]] = static_cast<std::int64_t>(k);
    const auto m = static_cast<Eigen::Index>(states.size());
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(m, m);
    for (std::uint64_t from : states)
      for (Eigen::SparseMatrix<double>::InnerIterator it(gen.matrix, static_cast<Eigen::Index>(from)); it; ++it) {
        const auto lr = local[static_cast<std::size_t>(it.row())];
        require(lr >= 0, ErrorKind::contract_violation, "generator couples opposite parity sectors");
        block(lr, local[from]) = it.value();
      }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(block, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    std::vector<Eigen::Index> null_cols;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
      const double rel = smax > 0.0 ? sv(k) / smax : 0.0;
      if (smax == 0.0 || rel < relative_tolerance) {
        null_cols.push_back(k);
        rep.largest_null_singular_value = std::max(rep.largest_null_singular_value, rel);
      } else {
        rep.smallest_kept_singular_value = std::min(rep.smallest_kept_singular_value, rel);
      }
      if (smax > 0.0 && rel >= relative_tolerance / 100.0 && rel <= relative_tolerance * 100.0) {
        rep.ambiguous = true;
        rep.notes.push_back("singular value " + std::to_string(rel) + " (relative) lies near the tolerance");
      }
    }
    Eigen::MatrixXd q(m, static_cast<Eigen::Index>(null_cols.size()));
    for (std::size_t k = 0; k < null_cols.size(); ++k) q.col(static_cast<Eigen::Index>(k)) = svd.matrixV().col(null_cols[k]);
    (b == 0 ? rep.even_dimension : rep.odd_dimension) = null_cols.size();
    for (Eigen::Index k = 0; k < q.cols(); ++k) {
      Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
      for (Eigen::Index r = 0; r < m; ++r) full(static_cast<Eigen::Index>(states[static_cast<std::size_t>(r)])) = q(r, k);
      columns.push_back(std::move(full));
    }
    decomposed = detail::extremal_from_null_block(q, states, gen.lattice, rep.distributions, rep.notes) && decomposed;
  }
  if (!decomposed) rep.ambiguous = true;
  rep.dimension = columns.size();
  rep.basis.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) rep.basis.col(static_cast<Eigen::Index>(k)) = columns[k];
  // Deterministic order: by smallest configuration in the support.
  std::sort(rep.distributions.begin(), rep.distributions.end(), [](const auto& a, const auto& b) {
    const auto first = [](const ExactDistribution& d) {
      for (std::size_t x = 0; x < d.size(); ++x)
        if (d[x] > 0.0) return x;
      return d.size();
    };
    return first(a) < first(b);
  });
  return rep;
}

// Largest principal angle between span(q) (orthonormal columns) and
// span(vectors). Spaces of different dimension are at angle pi/2.
inline double subspace_angle(const Eigen::MatrixXd& q, const Eigen::MatrixXd& vectors) {
  require(q.rows() == vectors.rows(), ErrorKind::invalid_argument, "subspace_angle: row mismatch");
  if (q.cols() != vectors.cols()) return std::numbers::pi / 2;
  if (q.cols() == 0) return 0.0;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(vectors);
  const Eigen::MatrixXd p = qr.householderQ() * Eigen::MatrixXd::Identity(vectors.rows(), vectors.cols());
  const Eigen::MatrixXd residual = p - q * (q.transpose() * p);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual);
  return std::asin(std::min(1.0, svd.singularValues()(0)));
}

// --- connectivity and rate symmetry -------------------------------------------

struct ConnectivityClasses {
  std::vector<std::uint32_t> class_of;             // class id per configuration
  std::vector<std::vector<std::uint64_t>> members; // ordered by smallest member

  std::size_t count() const noexcept { return members.size(); }
};

// Union-find over every nonzero transition of the kernel, generated on the fly.
inline ConnectivityClasses connectivity_classes(const Lattice& lattice, const MixedKernel& kernel) {
  kernel.validate();
  check_kernel_lattice(kernel, lattice);
  require_cap(lattice.sites(), ExactCaps::connectivity, "connectivity_classes");
  const std::size_t dim = std::size_t{1} << lattice.sites();
  UnionFind uf(dim);
  for (std::uint64_t from = 0; from < dim; ++from)
    for (const auto& [to, rate] : outgoing_rates(from, lattice, kernel))
      if (rate > 0.0) uf.unite(static_cast<std::uint32_t>(from), static_cast<std::uint32_t>(to));
  ConnectivityClasses out;
  out.class_of.assign(dim, 0);
  std::vector<std::int64_t> id_of_root(dim, -1);
  for (std::uint64_t x = 0; x < dim; ++x) {
    const auto root = uf.find(static_cast<std::uint32_t>(x));
    if (id_of_root[root] < 0) {
      id_of_root[root] = static_cast<std::int64_t>(out.members.size());
      out.members.emplace_back();
    }
    const auto id = static_cast<std::uint32_t>(id_of_root[root]);
    out.class_of[x] = id;
    out.members[id].push_back(x);
  }
  return out;
}

struct RateSymmetryReport {
  bool symmetric = true;
  double worst_asymmetry = 0.0;
  std::uint64_t worst_from = 0;
  std::uint64_t worst_to = 0;
};

// Checks rate(c -> c') == rate(c' -> c) for every pair, tolerance 1e-12.
inline RateSymmetryReport verify_double_stochastic(const Lattice& lattice, const MixedKernel& kernel,
                                                   double tolerance = 1e-12) {
  kernel.validate();
  check_kernel_lattice(kernel, lattice);
  require_cap(lattice.sites(), ExactCaps::connectivity, "verify_double_stochastic");
  const std::size_t dim = std::size_t{1} << lattice.sites();
  std::vector<std::vector<std::pair<std::uint64_t, double>>> rates(dim);
  for (std::uint64_t x = 0; x < dim; ++x) rates[x] = outgoing_rates(x, lattice, kernel);
  const auto rate_of = [&](std::uint64_t from, std::uint64_t to) {
    const auto& row = rates[from];
    auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(to, -std::numeric_limits<double>::infinity()));
    return it != row.end() && it->first == to ? it->second : 0.0;
  };
  RateSymmetryReport rep;
  for (std::uint64_t from = 0; from < dim; ++from)
    for (const auto& [to, rate] : rates[from]) {
      const double asym = std::abs(rate - rate_of(to, from));
      if (asym > rep.worst_asymmetry) {
        rep.worst_asymmetry = asym;
        rep.worst_from = from;
        rep.worst_to = to;
      }
    }
  rep.symmetric = rep.worst_asymmetry <= tolerance;
  return rep;
}

// --- marginals, fidelities, information -----------------------------------------

// Marginal over `sites`; bit k of the result index is sites[k].
inline std::vector<double> marginal(const ExactDistribution& dist, const std::vector<Site>& sites) {
  require(sites.size() <= 24, ErrorKind::resource_limit, "marginal over more than 24 sites");
  for (Site s : sites)
    require(s < dist.lattice().sites(), ErrorKind::invalid_argument, "marginal site out of range");
  std::vector<double> m(std::size_t{1} << sites.size(), 0.0);
  for (std::uint64_t x = 0; x < dist.size(); ++x) {
    const double p = dist[x];
    if (p == 0.0) continue;
    std::uint64_t pat = 0;
    for (std::size_t k = 0; k < sites.size(); ++k) pat |= ((x >> sites[k]) & 1U) << k;
    m[pat] += p;
  }
  return m;
}

inline double bhattacharyya_flip_dense(const std::vector<double>& m, std::uint64_t mask) {
  double acc = 0.0;
  for (std::uint64_t x = 0; x < m.size(); ++x)
    if (m[x] > 0.0 && m[x ^ mask] > 0.0) acc += std::sqrt(m[x] * m[x ^ mask]);
  return acc;
}

inline double exact_marginal_fidelity(const ExactDistribution& dist, const RegionSpec& region) {
  region.validate(dist.lattice());
  return bhattacharyya_flip_dense(marginal(dist, region.sites(dist.lattice())), region.flip_mask());
}

// Global fidelity sum_x sqrt(p(x) p(x with `flipped` sites inverted)).
inline double exact_global_fidelity(const ExactDistribution& dist, const std::vector<Site>& flipped) {
  std::uint64_t mask = 0;
  for (Site s : flipped) {
    require(s < dist.lattice().sites(), ErrorKind::invalid_argument, "flipped site out of range");
    mask |= std::uint64_t{1} << s;
  }
  return bhattacharyya_flip_dense(dist.probs(), mask);
}

// Shannon entropy (nats) of the marginal on `sites`.
inline double marginal_entropy(const ExactDistribution& dist, const std::vector<Site>& sites) {
  double h = 0.0;
  for (double p : marginal(dist, sites))
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

namespace detail {
inline std::vector<Site> join(std::vector<Site> a, const std::vector<Site>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}
inline void require_disjoint(std::vector<Site> a, std::vector<Site> b, const char* what) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<Site> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  require(common.empty(), ErrorKind::invalid_argument, std::string(what) + ": regions overlap");
}
}  // namespace detail

inline double mutual_information(const ExactDistribution& dist, const std::vector<Site>& a,
                                 const std::vector<Site>& c) {
  detail::require_disjoint(a, c, "mutual_information");
  return marginal_entropy(dist, a) + marginal_entropy(dist, c) - marginal_entropy(dist, detail::join(a, c));
}

inline double conditional_mutual_information(const ExactDistribution& dist, const std::vector<Site>& a,
                                             const std::vector<Site>& b, const std::vector<Site>& c) {
  detail::require_disjoint(a, b, "conditional_mutual_information");
  detail::require_disjoint(a, c, "conditional_mutual_information");
  detail::require_disjoint(b, c, "conditional_mutual_information");
  const auto ab = detail::join(a, b);
  return marginal_entropy(dist, ab) + marginal_entropy(dist, detail::join(b, c)) - marginal_entropy(dist, b) -
         marginal_entropy(dist, detail::join(ab, c));
}

// A = sites within distance `inner` of i, B = distance inner+1 .. outer,
// C = the rest of the ring.
struct CmiSplit {
  std::vector<Site> a, b, c;
};

inline CmiSplit ring_cmi_split(const Lattice& lattice, Site i, std::uint32_t inner, std::uint32_t outer) {
  require(lattice.dim() == 1, ErrorKind::invalid_argument, "ring_cmi_split needs a ring");
  require(inner <= outer, ErrorKind::invalid_argument, "ring_cmi_split: inner radius exceeds outer");
  require(2 * outer + 1 <= lattice.lx(), ErrorKind::invalid_argument, "ring_cmi_split: outer radius too large for L");
  CmiSplit s;
  const auto L = static_cast<std::int64_t>(lattice.lx());
  for (std::int64_t x = 0; x < L; ++x) {
    std::int64_t d = std::abs(x - static_cast<std::int64_t>(i));
    d = std::min(d, L - d);
    const auto site = static_cast<Site>(x);
    if (d <= inner) s.a.push_back(site);
    else if (d <= outer) s.b.push_back(site);
    else s.c.push_back(site);
  }
  return s;
}

// --- state families -------------------------------------------------------------

struct StateFamily {
  enum class Kind { rho0, rho0_minus, rhoW, rho_plus, rho_minus, classical_memory, partially_dead, gibbs_1d, wandering_cluster };
  Kind kind = Kind::rho0;
  double s = 0.0;
  double beta = 0.0;
  std::vector<double> cluster_weights;  // a_n for n = 1, 2, ...

  static StateFamily make(Kind k, double s = 0.0, double beta = 0.0, std::vector<double> a = {}) {
    StateFamily f;
    f.kind = k;
    f.s = s;
    f.beta = beta;
    f.cluster_weights = std::move(a);
    return f;
  }
  static StateFamily rho0() { return make(Kind::rho0); }
  static StateFamily rho0_minus() { return make(Kind::rho0_minus); }
  static StateFamily rhoW() { return make(Kind::rhoW); }
  static StateFamily rho_plus() { return make(Kind::rho_plus); }
  static StateFamily rho_minus() { return make(Kind::rho_minus); }
  static StateFamily classical_memory() { return make(Kind::classical_memory); }
  static StateFamily partially_dead(double s) { return make(Kind::partially_dead, s); }
  static StateFamily gibbs_1d(double beta) { return make(Kind::gibbs_1d, 0.0, beta); }
  static StateFamily wandering_cluster(std::vector<double> a) { return make(Kind::wandering_cluster, 0.0, 0.0, std::move(a)); }

  std::string name() const {
    switch (kind) {
      case Kind::rho0: return "rho0";
      case Kind::rho0_minus: return "rho0_minus";
      case Kind::rhoW: return "rhoW";
      case Kind::rho_plus: return "rho_plus";
      case Kind::rho_minus: return "rho_minus";
      case Kind::classical_memory: return "classical_memory";
      case Kind::partially_dead: return "partially_dead";
      case Kind::gibbs_1d: return "gibbs_1d";
      case Kind::wandering_cluster: return "wandering_cluster";
    }
    return "?";
  }
};

// rho_plus / rho_minus are the uniform distributions on the non-frozen
// configurations of each parity sector, i.e. the recurrent classes of the
// SWSSB rule other than the frozen points.
inline ExactDistribution build_state(const Lattice& lattice, const StateFamily& f) {
  using K = StateFamily::Kind;
  const std::size_t n = lattice.sites();
  require_cap(n, ExactCaps::distribution, "build_state");
  const std::size_t dim = std::size_t{1} << n;
  const std::uint64_t all = all_minus_index(lattice);
  std::vector<double> w(dim, 0.0);
  const auto sector_uniform = [&](int parity_bit, double weight) {
    for (std::uint64_t x = 0; x < dim; ++x)
      if ((std::popcount(x) & 1) == parity_bit && !swssb_frozen(x, lattice)) w[x] += weight;
  };
  const auto sector_count = [&](int parity_bit) {
    std::size_t c = 0;
    for (std::uint64_t x = 0; x < dim; ++x) c += (std::popcount(x) & 1) == parity_bit && !swssb_frozen(x, lattice);
    return c;
  };
  switch (f.kind) {
    case K::rho0: w[0] = 1.0; break;
    case K::rho0_minus: w[all] = 1.0; break;
    case K::rhoW:
      for (std::size_t r = 0; r < n; ++r) w[std::uint64_t{1} << r] = 1.0;
      break;
    case K::rho_plus: sector_uniform(0, 1.0); break;
    case K::rho_minus: sector_uniform(1, 1.0); break;
    case K::classical_memory:
      w[0] += 0.5;
      w[all] += 0.5;
      break;
    case K::partially_dead: {
      require(f.s >= 0.0 && f.s <= 1.0, ErrorKind::invalid_argument, "partially_dead needs s in [0,1]");
      const std::size_t m = sector_count(0);
      require(m > 0 || f.s == 0.0, ErrorKind::invalid_argument, "partially_dead: empty even sector");
      w[0] += 1.0 - f.s;
      if (m > 0) sector_uniform(0, f.s / static_cast<double>(m));
      break;
    }
    case K::gibbs_1d: {
      require(lattice.dim() == 1, ErrorKind::invalid_argument, "gibbs_1d needs a ring");
      require(std::isfinite(f.beta) && f.beta >= 0.0, ErrorKind::invalid_argument, "gibbs_1d needs finite beta >= 0");
      // exp(beta sum X X) up to the constant exp(beta L)
      for (std::uint64_t x = 0; x < dim; ++x) {
        const SpinConfig c = SpinConfig::from_index(x, n);
        const auto broken = static_cast<double>(broken_bonds(c, lattice));
        w[x] = std::exp(-2.0 * f.beta * broken);
      }
      break;
    }
    case K::wandering_cluster: {
      require(lattice.dim() == 1, ErrorKind::invalid_argument, "wandering_cluster needs a ring");
      require(!f.cluster_weights.empty() && f.cluster_weights.size() <= n, ErrorKind::invalid_argument,
              "wandering_cluster needs 1 <= #weights <= L");
      double total = 0.0;
      for (double a : f.cluster_weights) {
        require(a >= 0.0, ErrorKind::invalid_argument, "wandering_cluster weights must be >= 0");
        total += a;
      }
      require(std::abs(total - 1.0) <= 1e-12, ErrorKind::invalid_argument, "wandering_cluster weights must sum to 1");
      const auto L = static_cast<std::int64_t>(n);
      for (std::size_t k = 0; k < f.cluster_weights.size(); ++k) {
        const auto len = static_cast<std::int64_t>(k + 1);
        for (std::int64_t r = 0; r < L; ++r) {
          std::uint64_t x = 0;
          const std::int64_t start = r - (len - 1) / 2;
          for (std::int64_t t = 0; t < len; ++t) x |= std::uint64_t{1} << (((start + t) % L + L) % L);
          w[x] += f.cluster_weights[k] / static_cast<double>(L);
        }
      }
      break;
    }
  }
  return ExactDistribution::from_weights(lattice, std::move(w));
}

// --- Gibbs one-point fidelity ------------------------------------------------------

enum class GibbsMethod { enumeration, transfer_matrix };

// p(X) proportional to exp(beta sum_r X_r X_{r+1}) on a ring of length L.
// For R >= 1 the value is <exp(-beta X_i (X_{i-1} + X_{i+1}))>, which the
// transfer-matrix path evaluates as Tr(T^{L-2} J) / Tr(T^L) with J = 2 * ones.
inline double gibbs_one_point_fidelity(double beta, std::uint32_t L, std::uint32_t R,
                                       GibbsMethod method = GibbsMethod::transfer_matrix) {
  require(std::isfinite(beta) && beta >= 0.0, ErrorKind::invalid_argument, "gibbs needs finite beta >= 0");
  require(L >= 3, ErrorKind::invalid_argument, "gibbs needs L >= 3");
  require(2 * R + 1 <= L, ErrorKind::invalid_argument, "R too large for L");
  if (method == GibbsMethod::enumeration) {
    const Lattice ring = Lattice::ring(L);
    const auto dist = build_state(ring, StateFamily::gibbs_1d(beta));
    return exact_marginal_fidelity(dist, RegionSpec::one_point(ring, 0, R));
  }
  if (R == 0) return 1.0;
  Eigen::Matrix2d t;
  t << std::exp(beta), std::exp(-beta), std::exp(-beta), std::exp(beta);
  // t^(L-2), rescaled as we go; the scale cancels in the ratio.
  Eigen::Matrix2d acc = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d base = t / t.maxCoeff();
  for (std::uint32_t e = L - 2; e > 0; e >>= 1) {
    if (e & 1U) {
      acc = acc * base;
      acc /= acc.maxCoeff();
    }
    base = base * base;
    base /= base.maxCoeff();
  }
  const Eigen::Matrix2d j = Eigen::Matrix2d::Constant(2.0);
  return (acc * j).trace() / (acc * t * t).trace();
}

// --- closed forms -------------------------------------------------------------------

namespace closed_form {

inline double rhoW_one_point(std::uint32_t L, std::uint32_t R) {
  return 2.0 * std::sqrt(static_cast<double>(L) - 2.0 * R - 1.0) / static_cast<double>(L);
}

inline double rhoW_two_point(std::uint32_t L) { return 2.0 / static_cast<double>(L); }

inline double classical_memory_two_point(std::uint32_t R) { return R == 0 ? 1.0 : 0.0; }

// Two-point fidelity of (1 - s) rho0 + s * uniform(even \ all-+), two blocks
// of 2R+1 sites. m = 2(2R+1) region sites; among the 2^{L-1} - 1 support
// configurations, 2^{L-m-1} - 1 restrict to the all-+ pattern and 2^{L-m-1}
// to each other pattern.
inline double partially_dead_two_point(std::uint32_t L, std::uint32_t R, double s) {
  const double m = 2.0 * (2.0 * R + 1.0);
  const double denom = std::ldexp(1.0, static_cast<int>(L) - 1) - 1.0;
  const double inside = std::ldexp(1.0, static_cast<int>(L - m - 1));
  const double p0 = 1.0 - s + s * (inside - 1.0) / denom;
  const double px = s * inside / denom;
  return 2.0 * std::sqrt(p0 * px) + (std::ldexp(1.0, static_cast<int>(m)) - 2.0) * px;
}

// As printed in the source: denominators 2^L - 1 and 2^m - 1 partner
// patterns. Reported for comparison only; it is not normalized for s > 0.
inline double partially_dead_two_point_printed(std::uint32_t L, std::uint32_t R, double s) {
  const double m = 2.0 * (2.0 * R + 1.0);
  const double denom = std::ldexp(1.0, static_cast<int>(L)) - 1.0;
  const double inside = std::ldexp(1.0, static_cast<int>(L - m - 1));
  const double p0 = 1.0 - s + s * (inside - 1.0) / denom;
  const double px = s * inside / denom;
  return 2.0 * std::sqrt(p0 * px) + (std::ldexp(1.0, static_cast<int>(m)) - 1.0) * px;
}

// The two leading contributions for large L and where they trade places.
inline double partially_dead_sqrt_term(std::uint32_t R, double s) {
  return 2.0 * std::sqrt(s * (1.0 - s)) * std::ldexp(1.0, -static_cast<int>(2 * R + 1));
}
inline double partially_dead_linear_term(double s) { return s; }
inline double partially_dead_crossover(std::uint32_t R) { return 1.0 / (1.0 + std::ldexp(1.0, static_cast<int>(4 * R))); }

inline double gibbs_one_point(double beta, std::uint32_t L) {
  const double c = 2.0 * std::cosh(beta), s = 2.0 * std::sinh(beta);
  const double ratio = s / c;
  return 4.0 / (c * c) / (1.0 + std::pow(ratio, static_cast<double>(L)));
}

inline double gibbs_one_point_infinite(double beta) { return 1.0 / (std::cosh(beta) * std::cosh(beta)); }

// Lower bound exp(-beta ||V_i|| / 2) with ||V_i|| = 4.
inline double gibbs_lower_bound(double beta) { return std::exp(-2.0 * beta); }

}  // namespace closed_form

}  // namespace swssb
