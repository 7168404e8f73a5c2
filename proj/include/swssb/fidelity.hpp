#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "swssb/error.hpp"
#include "swssb/lattice.hpp"
#include "swssb/rng.hpp"

namespace swssb {

// Blocks R(i) (and R(j)) around the insertion points. In 1d a block is the
// 2R+1 sites i-R..i+R; on a torus it is the (2Rx+1) x (2Ry+1) rectangle
// centred at i. Region-local bit order: block i then block j, each block in
// row-major order (dy outer, dx inner), bit 0 first.
struct RegionSpec {
  int dimension = 1;
  Site i = 0;
  std::optional<Site> j;
  std::uint32_t rx = 0;
  std::uint32_t ry = 0;

  static RegionSpec one_point(const Lattice& lattice, Site i, std::uint32_t rx, std::uint32_t ry = 0) {
    RegionSpec r{lattice.dim(), i, std::nullopt, rx, lattice.dim() == 1 ? 0 : ry};
    r.validate(lattice);
    return r;
  }

  static RegionSpec two_point(const Lattice& lattice, Site i, Site j, std::uint32_t rx, std::uint32_t ry = 0) {
    RegionSpec r{lattice.dim(), i, j, rx, lattice.dim() == 1 ? 0 : ry};
    r.validate(lattice);
    return r;
  }

  // j = i + L/2 (ring) or i + (Lx/2, 0) (torus).
  static Site default_partner(const Lattice& lattice, Site i) {
    return lattice.dim() == 1 ? static_cast<Site>((i + lattice.lx() / 2) % lattice.lx())
                              : lattice.shift(i, static_cast<int>(lattice.lx() / 2), 0);
  }

  bool is_two_point() const noexcept { return j.has_value(); }
  std::size_t block_size() const noexcept { return std::size_t{2 * rx + 1} * (2 * ry + 1); }
  std::size_t width() const noexcept { return block_size() * (is_two_point() ? 2 : 1); }
  std::size_t center_offset() const noexcept { return std::size_t{ry} * (2 * rx + 1) + rx; }

  std::uint64_t i_mask() const noexcept { return std::uint64_t{1} << center_offset(); }
  std::uint64_t j_mask() const noexcept { return std::uint64_t{1} << (block_size() + center_offset()); }
  std::uint64_t flip_mask() const noexcept { return is_two_point() ? (i_mask() | j_mask()) : i_mask(); }

  std::vector<Site> block(const Lattice& lattice, Site center) const {
    std::vector<Site> out;
    out.reserve(block_size());
    const int irx = static_cast<int>(rx), iry = static_cast<int>(ry);
    for (int dy = -iry; dy <= iry; ++dy)
      for (int dx = -irx; dx <= irx; ++dx) out.push_back(lattice.shift(center, dx, dy));
    return out;
  }

  std::vector<Site> sites(const Lattice& lattice) const {
    auto out = block(lattice, i);
    if (j) {
      auto bj = block(lattice, *j);
      out.insert(out.end(), bj.begin(), bj.end());
    }
    return out;
  }

  // The same shape moved so that its first insertion point is `new_i`.
  RegionSpec translated(const Lattice& lattice, Site new_i) const {
    RegionSpec r = *this;
    const int dx = static_cast<int>(lattice.x_of(new_i)) - static_cast<int>(lattice.x_of(i));
    const int dy = static_cast<int>(lattice.y_of(new_i)) - static_cast<int>(lattice.y_of(i));
    r.i = new_i;
    if (j) r.j = lattice.shift(*j, dx, dy);
    return r;
  }

  void validate(const Lattice& lattice) const {
    require(dimension == lattice.dim(), ErrorKind::invalid_argument, "region dimension does not match lattice");
    require(i < lattice.sites() && (!j || *j < lattice.sites()), ErrorKind::invalid_argument,
            "region insertion point out of range");
    require(2 * rx + 1 <= lattice.lx(), ErrorKind::invalid_argument,
            "R too large for L: block width 2R+1 = " + std::to_string(2 * rx + 1) + " exceeds " +
                std::to_string(lattice.lx()));
    require(2 * ry + 1 <= lattice.ly(), ErrorKind::invalid_argument,
            "Ry too large for Ly: block height 2Ry+1 = " + std::to_string(2 * ry + 1) + " exceeds " +
                std::to_string(lattice.ly()));
    require(width() <= 64, ErrorKind::invalid_argument, "region wider than 64 sites");
    if (j) {
      require(*j != i, ErrorKind::invalid_argument, "two-point region needs i != j");
      auto a = block(lattice, i);
      auto b = block(lattice, *j);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      std::vector<Site> common;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
      require(common.empty(), ErrorKind::invalid_argument,
              "region blocks R(i) and R(j) overlap: need |i-j| > 2R along the separation axis");
    }
  }

  friend bool operator==(const RegionSpec&, const RegionSpec&) = default;
};

inline std::uint64_t extract_pattern(const SpinConfig& c, const std::vector<Site>& sites) {
  std::uint64_t p = 0;
  for (std::size_t k = 0; k < sites.size(); ++k) p |= std::uint64_t{c.is_minus(sites[k])} << k;
  return p;
}

// Sum_x sqrt(p(x) p(x ^ mask)) over an empirical pattern distribution.
template <class Counts>
double bhattacharyya_flip(const Counts& counts, double total, std::uint64_t mask) {
  if (total <= 0) return 0.0;
  double acc = 0.0;
  for (const auto& [pattern, count] : counts) {
    if (count == 0) continue;
    auto it = counts.find(pattern ^ mask);
    if (it != counts.end() && it->second > 0)
      acc += std::sqrt(static_cast<double>(count) * static_cast<double>(it->second));
  }
  return acc / total;
}

// Empirical distribution of region-restricted patterns. With pooled = true
// every snapshot contributes the pattern at every translate of the region
// (the translation-averaged marginal).
class MarginalHistogram {
 public:
  MarginalHistogram(Lattice lattice, RegionSpec region, bool pooled = false)
      : lattice_(std::move(lattice)), region_(region), pooled_(pooled) {
    region_.validate(lattice_);
    if (pooled_) {
      for (Site b = 0; b < lattice_.sites(); ++b) site_lists_.push_back(region_.translated(lattice_, b).sites(lattice_));
    } else {
      site_lists_.push_back(region_.sites(lattice_));
    }
  }

  void accumulate(const SpinConfig& snapshot) {
    require(snapshot.size() == lattice_.sites(), ErrorKind::invalid_argument,
            "snapshot size does not match histogram lattice " + lattice_.describe());
    for (const auto& sites : site_lists_) {
      ++counts_[extract_pattern(snapshot, sites)];
      ++total_;
    }
  }

  void add(std::uint64_t pattern, std::uint64_t count) {
    require(region_.width() == 64 || pattern >> region_.width() == 0, ErrorKind::invalid_argument,
            "pattern wider than region");
    counts_[pattern] += count;
    total_ += count;
  }

  void merge(const MarginalHistogram& other) {
    require(other.lattice_ == lattice_ && other.region_ == region_ && other.pooled_ == pooled_,
            ErrorKind::invalid_argument, "cannot merge histograms over different regions");
    for (const auto& [p, c] : other.counts_) counts_[p] += c;
    total_ += other.total_;
  }

  const Lattice& lattice() const noexcept { return lattice_; }
  const RegionSpec& region() const noexcept { return region_; }
  bool pooled() const noexcept { return pooled_; }
  std::uint64_t total() const noexcept { return total_; }
  const std::unordered_map<std::uint64_t, std::uint64_t>& counts() const noexcept { return counts_; }

  std::vector<std::pair<std::uint64_t, std::uint64_t>> sorted_entries() const {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> v(counts_.begin(), counts_.end());
    std::sort(v.begin(), v.end());
    return v;
  }

  // Samples per possible pattern, total / 2^width. Values below 1 mean the
  // plug-in estimator cannot see most flip partners even when they have
  // nonzero probability.
  double coverage_ratio() const {
    return static_cast<double>(total_) / std::ldexp(1.0, static_cast<int>(region_.width()));
  }
  bool undersampled() const { return coverage_ratio() < 1.0; }

 private:
  Lattice lattice_;
  RegionSpec region_;
  bool pooled_;
  std::vector<std::vector<Site>> site_lists_;
  std::unordered_map<std::uint64_t, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

inline double marginal_two_point_fidelity(const MarginalHistogram& h) {
  require(h.region().is_two_point(), ErrorKind::invalid_argument, "two-point fidelity needs a two-point region");
  require(h.total() > 0, ErrorKind::insufficient_data, "empty histogram");
  return bhattacharyya_flip(h.counts(), static_cast<double>(h.total()), h.region().flip_mask());
}

inline double marginal_one_point_fidelity(const MarginalHistogram& h) {
  require(!h.region().is_two_point(), ErrorKind::invalid_argument, "one-point fidelity needs a one-point region");
  require(h.total() > 0, ErrorKind::insufficient_data, "empty histogram");
  return bhattacharyya_flip(h.counts(), static_cast<double>(h.total()), h.region().flip_mask());
}

inline double marginal_fidelity(const MarginalHistogram& h) {
  return h.region().is_two_point() ? marginal_two_point_fidelity(h) : marginal_one_point_fidelity(h);
}

// |F_ij - F_i F_j| for histograms over R(i) u R(j), R(i) and R(j).
inline double factorization_gap(const MarginalHistogram& hij, const MarginalHistogram& hi,
                                const MarginalHistogram& hj) {
  const RegionSpec& r = hij.region();
  require(r.is_two_point() && !hi.region().is_two_point() && !hj.region().is_two_point(),
          ErrorKind::invalid_argument, "factorization_gap needs one two-point and two one-point histograms");
  require(hi.region().i == r.i && hj.region().i == *r.j && hi.region().rx == r.rx && hi.region().ry == r.ry &&
              hj.region().rx == r.rx && hj.region().ry == r.ry,
          ErrorKind::invalid_argument, "one-point regions must be R(i) and R(j) of the two-point region");
  return std::abs(marginal_two_point_fidelity(hij) - marginal_one_point_fidelity(hi) * marginal_one_point_fidelity(hj));
}

// --- translation averaging with snapshot bootstrap ----------------------------

struct FidelityEstimate {
  double value = 0.0;           // plug-in estimate
  double bias_corrected = 0.0;  // 2 * value - mean(bootstrap replicates)
  double ci_lo = 0.0;           // basic bootstrap interval
  double ci_hi = 0.0;
  double bootstrap_sd = 0.0;
  std::size_t n_snapshots = 0;
  std::size_t n_base_points = 0;
};

struct BootstrapOptions {
  std::size_t replicates = 200;
  double confidence = 0.95;
  std::uint64_t seed = 0x5eed;
};

namespace detail {

// Pattern counts for one base point, dense when the region is narrow.
class PatternCounter {
 public:
  explicit PatternCounter(std::size_t width) : dense_(width <= 20) {
    if (dense_) table_.assign(std::size_t{1} << width, 0.0);
  }
  void clear() {
    if (dense_) {
      for (auto p : touched_) table_[p] = 0.0;
      touched_.clear();
    } else {
      map_.clear();
    }
  }
  void add(std::uint64_t p, double w) {
    if (dense_) {
      if (table_[p] == 0.0) touched_.push_back(p);
      table_[p] += w;
    } else {
      map_[p] += w;
    }
  }
  double fidelity(double total, std::uint64_t mask) const {
    if (total <= 0) return 0.0;
    double acc = 0.0;
    if (dense_) {
      for (auto p : touched_) {
        const double a = table_[p], b = table_[p ^ mask];
        if (a > 0 && b > 0) acc += std::sqrt(a * b);
      }
    } else {
      for (const auto& [p, a] : map_) {
        auto it = map_.find(p ^ mask);
        if (it != map_.end() && a > 0 && it->second > 0) acc += std::sqrt(a * it->second);
      }
    }
    return acc / total;
  }

 private:
  bool dense_;
  std::vector<double> table_;
  std::vector<std::uint64_t> touched_;
  std::unordered_map<std::uint64_t, double> map_;
};

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Basic (reverse-percentile) interval 2*theta - q_{1-a/2}, 2*theta - q_{a/2},
// clipped to [0, 1] where a fidelity lives: at F = 1 every replicate falls
// below the plug-in value and the raw interval sits entirely above 1.
// With no replicates the interval collapses onto the point estimate.
template <class Estimate>
void finish_bootstrap(Estimate& out, std::vector<double> reps, double confidence) {
  if (reps.empty()) {
    out.bias_corrected = out.ci_lo = out.ci_hi = out.value;
    return;
  }
  double mean = 0.0, sq = 0.0;
  for (double r : reps) mean += r;
  mean /= static_cast<double>(reps.size());
  for (double r : reps) sq += (r - mean) * (r - mean);
  out.bootstrap_sd = reps.size() > 1 ? std::sqrt(sq / static_cast<double>(reps.size() - 1)) : 0.0;
  out.bias_corrected = 2.0 * out.value - mean;
  const double a = (1.0 - confidence) / 2.0;
  out.ci_lo = std::clamp(2.0 * out.value - quantile(reps, 1.0 - a), 0.0, 1.0);
  out.ci_hi = std::clamp(2.0 * out.value - quantile(reps, a), 0.0, 1.0);
}

}  // namespace detail

// Mean over all base points i of the marginal fidelity estimator for the
// region shape `shape` translated to i. The interval is the basic bootstrap
// interval from resampling whole snapshots, which corrects the first-order
// plug-in bias.
inline FidelityEstimate translation_average(const std::vector<SpinConfig>& snapshots, const Lattice& lattice,
                                            const RegionSpec& shape, const BootstrapOptions& opts = {}) {
  require(snapshots.size() >= 2, ErrorKind::insufficient_data,
          "translation_average needs at least 2 snapshots, got " + std::to_string(snapshots.size()));
  shape.validate(lattice);
  const std::size_t nb = lattice.sites();
  const std::size_t ns = snapshots.size();
  std::vector<std::vector<Site>> site_lists;
  site_lists.reserve(nb);
  for (Site b = 0; b < nb; ++b) site_lists.push_back(shape.translated(lattice, b).sites(lattice));

  std::vector<std::uint64_t> patterns(ns * nb);
  for (std::size_t s = 0; s < ns; ++s) {
    require(snapshots[s].size() == lattice.sites(), ErrorKind::invalid_argument, "snapshot size mismatch");
    for (std::size_t b = 0; b < nb; ++b) patterns[s * nb + b] = extract_pattern(snapshots[s], site_lists[b]);
  }

  const std::uint64_t mask = shape.flip_mask();
  detail::PatternCounter counter(shape.width());
  const auto estimate = [&](const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double acc = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      counter.clear();
      for (std::size_t s = 0; s < ns; ++s)
        if (weights[s] > 0) counter.add(patterns[s * nb + b], weights[s]);
      acc += counter.fidelity(total, mask);
    }
    return acc / static_cast<double>(nb);
  };

  FidelityEstimate out;
  out.n_snapshots = ns;
  out.n_base_points = nb;
  std::vector<double> weights(ns, 1.0);
  out.value = estimate(weights);

  RngStream rng(opts.seed, 0);
  std::vector<double> reps;
  reps.reserve(opts.replicates);
  for (std::size_t k = 0; k < opts.replicates; ++k) {
    std::fill(weights.begin(), weights.end(), 0.0);
    for (std::size_t s = 0; s < ns; ++s) weights[rng.below(ns)] += 1.0;
    reps.push_back(estimate(weights));
  }
  detail::finish_bootstrap(out, std::move(reps), opts.confidence);
  return out;
}

// Multinomial bootstrap on a histogram's counts, for archived histograms
// whose individual snapshots are gone. Each count is treated as one draw.
inline FidelityEstimate histogram_bootstrap(const MarginalHistogram& h, const BootstrapOptions& opts = {}) {
  require(h.total() >= 2, ErrorKind::insufficient_data, "histogram bootstrap needs at least 2 samples");
  FidelityEstimate out;
  out.value = marginal_fidelity(h);
  out.n_snapshots = h.total();
  out.n_base_points = 1;
  const auto entries = h.sorted_entries();
  std::vector<double> cumulative;
  cumulative.reserve(entries.size());
  double run = 0.0;
  for (const auto& [p, c] : entries) cumulative.push_back(run += static_cast<double>(c));
  const std::uint64_t mask = h.region().flip_mask();
  RngStream rng(opts.seed, 1);
  std::vector<double> reps;
  std::unordered_map<std::uint64_t, double> draw;
  for (std::size_t k = 0; k < opts.replicates; ++k) {
    draw.clear();
    for (std::uint64_t t = 0; t < h.total(); ++t) {
      const double u = rng.uniform() * run;
      const auto idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                                cumulative.begin());
      draw[entries[std::min(idx, entries.size() - 1)].first] += 1.0;
    }
    reps.push_back(bhattacharyya_flip(draw, static_cast<double>(h.total()), mask));
  }
  detail::finish_bootstrap(out, std::move(reps), opts.confidence);
  return out;
}

// Fidelity of the merged histogram with a basic bootstrap interval from
// resampling whole trajectories (each histogram is one trajectory). Falls back
// to histogram_bootstrap for a single trajectory.
inline FidelityEstimate trajectory_bootstrap(const std::vector<MarginalHistogram>& per_trajectory,
                                             const BootstrapOptions& opts = {}) {
  require(!per_trajectory.empty(), ErrorKind::insufficient_data, "trajectory_bootstrap: no histograms");
  MarginalHistogram merged = per_trajectory.front();
  for (std::size_t t = 1; t < per_trajectory.size(); ++t) merged.merge(per_trajectory[t]);
  if (per_trajectory.size() == 1) return histogram_bootstrap(merged, opts);

  FidelityEstimate out;
  out.value = marginal_fidelity(merged);
  out.n_snapshots = merged.total();
  out.n_base_points = per_trajectory.size();
  const std::uint64_t mask = merged.region().flip_mask();
  const std::size_t nt = per_trajectory.size();

  // Shared pattern index over the union of supports.
  std::unordered_map<std::uint64_t, std::uint32_t> slot;
  std::vector<std::uint64_t> patterns;
  for (const auto& [p, c] : merged.sorted_entries()) {
    slot.emplace(p, static_cast<std::uint32_t>(patterns.size()));
    patterns.push_back(p);
  }
  std::vector<std::int64_t> partner(patterns.size(), -1);
  for (std::size_t k = 0; k < patterns.size(); ++k) {
    auto it = slot.find(patterns[k] ^ mask);
    if (it != slot.end()) partner[k] = it->second;
  }
  std::vector<std::vector<std::pair<std::uint32_t, double>>> sparse(nt);
  std::vector<double> totals(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    for (const auto& [p, c] : per_trajectory[t].counts()) sparse[t].emplace_back(slot.at(p), static_cast<double>(c));
    totals[t] = static_cast<double>(per_trajectory[t].total());
  }
  RngStream rng(opts.seed, 2);
  std::vector<double> acc(patterns.size());
  std::vector<double> reps;
  reps.reserve(opts.replicates);
  for (std::size_t k = 0; k < opts.replicates; ++k) {
    std::fill(acc.begin(), acc.end(), 0.0);
    double total = 0.0;
    for (std::size_t d = 0; d < nt; ++d) {
      const std::size_t t = rng.below(nt);
      for (const auto& [idx, c] : sparse[t]) acc[idx] += c;
      total += totals[t];
    }
    double f = 0.0;
    for (std::size_t q = 0; q < patterns.size(); ++q)
      if (partner[q] >= 0 && acc[q] > 0.0) f += std::sqrt(acc[q] * acc[static_cast<std::size_t>(partner[q])]);
    reps.push_back(total > 0.0 ? f / total : 0.0);
  }
  detail::finish_bootstrap(out, std::move(reps), opts.confidence);
  return out;
}

}  // namespace swssb
