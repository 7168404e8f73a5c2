#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "swssb/error.hpp"
#include "swssb/lattice.hpp"
#include "swssb/rng.hpp"

namespace swssb {

enum class ToomVariant { strict, chill };

inline std::string_view to_string(ToomVariant v) { return v == ToomVariant::strict ? "strict" : "chill"; }

// Interpolated update rule: each elementary update applies the SWSSB rule
// with probability alpha and the absorbing rule (1d) or pair-flip Toom rule
// (2d) with probability 1 - alpha.
struct MixedKernel {
  int dimension = 1;
  double alpha = 0.0;
  std::optional<ToomVariant> toom;

  static MixedKernel one_d(double alpha) {
    MixedKernel k{1, alpha, std::nullopt};
    k.validate();
    return k;
  }
  static MixedKernel two_d(double alpha, ToomVariant variant) {
    MixedKernel k{2, alpha, variant};
    k.validate();
    return k;
  }

  void validate() const {
    require(dimension == 1 || dimension == 2, ErrorKind::invalid_argument, "kernel dimension must be 1 or 2");
    require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::invalid_argument,
            "alpha must lie in [0,1], got " + std::to_string(alpha));
    require(toom.has_value() == (dimension == 2), ErrorKind::invalid_argument,
            "a Toom variant is required in 2d and forbidden in 1d");
  }

  std::string describe() const {
    std::string s = dimension == 1 ? "absorbing+triplet" : std::string(to_string(*toom)) + "-toom+plaquette";
    return s + " alpha=" + std::to_string(alpha);
  }
};

inline void check_kernel_lattice(const MixedKernel& kernel, const Lattice& lattice) {
  kernel.validate();
  require(kernel.dimension == lattice.dim(), ErrorKind::invalid_argument,
          "kernel dimension does not match lattice " + lattice.describe());
  require(lattice.dim() == 2 || lattice.lx() >= 3, ErrorKind::invalid_argument,
          "1d dynamics needs a ring of at least 3 sites");
}

// --- local scramble tables -------------------------------------------------
//
// Triplet patterns: bit 0 = r-1, bit 1 = r, bit 2 = r+1 (bit set = minus).
// Plaquette patterns: bit k = k-th site of Lattice::plaquette.
// A scramble replaces the local pattern by a uniform draw from the set of
// same-parity patterns minus the frozen ones; the draw may return the
// current pattern.
namespace tables {
inline constexpr std::array<std::uint8_t, 3> triplet_even{0b011, 0b101, 0b110};
inline constexpr std::array<std::uint8_t, 4> triplet_odd{0b001, 0b010, 0b100, 0b111};
inline constexpr std::array<std::uint8_t, 6> plaquette_even{0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100};
inline constexpr std::array<std::uint8_t, 8> plaquette_odd{0b0001, 0b0010, 0b0100, 0b1000,
                                                           0b0111, 0b1011, 0b1101, 0b1110};
}  // namespace tables

// --- 1d rules ---------------------------------------------------------------

// Absorbing rule at site r: if X_r = -1, flip r-1 and r.
inline void step_absorbing_1d(SpinConfig& c, const Lattice& lattice, Site r) {
  if (c.is_minus(r)) {
    c.flip(lattice.left(r));
    c.flip(r);
  }
}

inline std::uint8_t triplet_pattern(const SpinConfig& c, const Lattice& lattice, Site r) {
  return static_cast<std::uint8_t>(c.is_minus(lattice.left(r)) | (c.is_minus(r) << 1) |
                                   (c.is_minus(lattice.right(r)) << 2));
}

inline void write_triplet(SpinConfig& c, const Lattice& lattice, Site r, std::uint8_t from, std::uint8_t to) {
  const std::uint8_t diff = from ^ to;
  if (diff & 1U) c.flip(lattice.left(r));
  if (diff & 2U) c.flip(r);
  if (diff & 4U) c.flip(lattice.right(r));
}

// SWSSB triplet rule centred at r: (+++) is left alone, anything else is
// scrambled uniformly within its parity sector minus (+++).
inline void step_swssb_triplet(SpinConfig& c, const Lattice& lattice, Site r, RngStream& rng) {
  const std::uint8_t p = triplet_pattern(c, lattice, r);
  if (p == 0) return;
  const std::uint8_t next = (std::popcount(p) & 1)
                                ? tables::triplet_odd[rng.below(tables::triplet_odd.size())]
                                : tables::triplet_even[rng.below(tables::triplet_even.size())];
  write_triplet(c, lattice, r, p, next);
}

// --- 2d rules ---------------------------------------------------------------

struct PairFlipMove {
  Site target = 0;
  Site partner = 0;
  int delta_dw = 0;

  friend bool operator==(const PairFlipMove&, const PairFlipMove&) = default;
};

// Fixed-capacity move list (at most the eight Moore partners).
class MoveList {
 public:
  void push_back(const PairFlipMove& m) noexcept { moves_[size_++] = m; }
  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  const PairFlipMove& operator[](std::size_t k) const noexcept { return moves_[k]; }
  const PairFlipMove* begin() const noexcept { return moves_.data(); }
  const PairFlipMove* end() const noexcept { return moves_.data() + size_; }

 private:
  std::array<PairFlipMove, 8> moves_{};
  std::size_t size_ = 0;
};

struct PairFlipSets {
  MoveList strict;  // delta_dw < 0
  MoveList chill;   // delta_dw <= 0
};

// Anti-aligned with both its north and east neighbours.
inline bool toom_unstable(const SpinConfig& c, const Lattice& lattice, Site r) {
  const bool s = c.is_minus(r);
  return c.is_minus(lattice.north(r)) != s && c.is_minus(lattice.east(r)) != s;
}

// Change in the number of broken bonds when r and q are flipped together.
// Only bonds with exactly one flipped endpoint change; a bond r-q (q a nearest
// neighbour) is unchanged.
inline int pair_flip_delta(const SpinConfig& c, const Lattice& lattice, Site r, Site q) {
  int delta = 0;
  const auto side = [&](Site a, Site other) {
    const bool s = c.is_minus(a);
    const std::array<Site, 4> nb{lattice.east(a), lattice.west(a), lattice.north(a), lattice.south(a)};
    for (Site n : nb) {
      if (n == other) continue;
      delta += (c.is_minus(n) == s) ? 1 : -1;
    }
  };
  side(r, q);
  side(q, r);
  return delta;
}

inline PairFlipSets pair_flip_sets_unchecked(const SpinConfig& c, const Lattice& lattice, Site r) {
  PairFlipSets sets;
  for (Site q : lattice.moore(r)) {
    const int d = pair_flip_delta(c, lattice, r, q);
    const PairFlipMove move{r, q, d};
    if (d < 0) sets.strict.push_back(move);
    if (d <= 0) sets.chill.push_back(move);
  }
  return sets;
}

inline PairFlipSets enumerate_pair_flips(const SpinConfig& c, const Lattice& lattice, Site r) {
  require(lattice.dim() == 2, ErrorKind::invalid_argument, "pair flips are defined on a torus");
  require(r < lattice.sites(), ErrorKind::invalid_argument, "site out of range");
  require(toom_unstable(c, lattice, r), ErrorKind::contract_violation,
          "enumerate_pair_flips called on a Toom-stable site " + std::to_string(r));
  return pair_flip_sets_unchecked(c, lattice, r);
}

// Pair-flip Toom rule at r. Stable sites and empty admissible sets do nothing;
// otherwise a uniformly chosen admissible move flips target and partner.
inline void step_toom_pair(SpinConfig& c, const Lattice& lattice, Site r, ToomVariant variant, RngStream& rng) {
  if (!toom_unstable(c, lattice, r)) return;
  const PairFlipSets sets = pair_flip_sets_unchecked(c, lattice, r);
  const MoveList& admissible = variant == ToomVariant::strict ? sets.strict : sets.chill;
  if (admissible.empty()) return;
  const PairFlipMove& m = admissible[rng.below(admissible.size())];
  c.flip(m.target);
  c.flip(m.partner);
}

inline std::uint8_t plaquette_pattern(const SpinConfig& c, const std::array<Site, 4>& sites) {
  return static_cast<std::uint8_t>(c.is_minus(sites[0]) | (c.is_minus(sites[1]) << 1) |
                                   (c.is_minus(sites[2]) << 2) | (c.is_minus(sites[3]) << 3));
}

inline void write_plaquette(SpinConfig& c, const std::array<Site, 4>& sites, std::uint8_t from, std::uint8_t to) {
  const std::uint8_t diff = from ^ to;
  for (int k = 0; k < 4; ++k)
    if (diff & (1U << k)) c.flip(sites[k]);
}

// SWSSB plaquette rule on the plaquette anchored at `anchor`: (++++) and
// (----) are frozen, every other pattern is scrambled within its sector.
inline void step_swssb_plaquette(SpinConfig& c, const Lattice& lattice, Site anchor, RngStream& rng) {
  const auto sites = lattice.plaquette(anchor);
  const std::uint8_t p = plaquette_pattern(c, sites);
  if (p == 0 || p == 0b1111) return;
  const std::uint8_t next = (std::popcount(p) & 1)
                                ? tables::plaquette_odd[rng.below(tables::plaquette_odd.size())]
                                : tables::plaquette_even[rng.below(tables::plaquette_even.size())];
  write_plaquette(c, sites, p, next);
}

// --- composition ------------------------------------------------------------

// One elementary update: a uniform site, then the SWSSB rule with probability
// alpha (triplet centred there / plaquette anchored there), else the absorbing
// or Toom rule at that site.
inline void elementary_update(SpinConfig& c, const Lattice& lattice, const MixedKernel& kernel, RngStream& rng) {
  const auto r = static_cast<Site>(rng.below(lattice.sites()));
  const bool swssb = kernel.alpha >= 1.0 || (kernel.alpha > 0.0 && rng.uniform() < kernel.alpha);
  if (kernel.dimension == 1) {
    if (swssb) step_swssb_triplet(c, lattice, r, rng);
    else step_absorbing_1d(c, lattice, r);
  } else {
    if (swssb) step_swssb_plaquette(c, lattice, r, rng);
    else step_toom_pair(c, lattice, r, *kernel.toom, rng);
  }
}

// N elementary updates (one unit of time).
inline void sweep(SpinConfig& c, const Lattice& lattice, const MixedKernel& kernel, RngStream& rng) {
  const std::size_t n = lattice.sites();
  for (std::size_t k = 0; k < n; ++k) elementary_update(c, lattice, kernel, rng);
}

// --- exact outcome enumeration ------------------------------------------------
//
// Each rule applied at one site, as a list of (sites to flip, probability).
// Used by the exact generator; the sampling steps above draw from the same
// tables.

struct LocalOutcome {
  std::array<Site, 4> flips{};
  std::uint8_t n_flips = 0;
  double prob = 0.0;
};

class OutcomeList {
 public:
  void push_back(const LocalOutcome& o) noexcept { items_[size_++] = o; }
  std::size_t size() const noexcept { return size_; }
  const LocalOutcome* begin() const noexcept { return items_.data(); }
  const LocalOutcome* end() const noexcept { return items_.data() + size_; }

 private:
  std::array<LocalOutcome, 8> items_{};
  std::size_t size_ = 0;
};

inline OutcomeList absorbing_outcomes(const SpinConfig& c, const Lattice& lattice, Site r) {
  OutcomeList out;
  if (c.is_minus(r)) out.push_back({{lattice.left(r), r, 0, 0}, 2, 1.0});
  else out.push_back({{}, 0, 1.0});
  return out;
}

inline OutcomeList triplet_outcomes(const SpinConfig& c, const Lattice& lattice, Site r) {
  OutcomeList out;
  const std::uint8_t p = triplet_pattern(c, lattice, r);
  if (p == 0) {
    out.push_back({{}, 0, 1.0});
    return out;
  }
  const std::array<Site, 3> sites{lattice.left(r), r, lattice.right(r)};
  const auto emit = [&](const auto& table) {
    for (std::uint8_t next : table) {
      LocalOutcome o;
      o.prob = 1.0 / static_cast<double>(table.size());
      const std::uint8_t diff = p ^ next;
      for (int k = 0; k < 3; ++k)
        if (diff & (1U << k)) o.flips[o.n_flips++] = sites[k];
      out.push_back(o);
    }
  };
  if (std::popcount(p) & 1) emit(tables::triplet_odd);
  else emit(tables::triplet_even);
  return out;
}

inline OutcomeList plaquette_outcomes(const SpinConfig& c, const Lattice& lattice, Site anchor) {
  OutcomeList out;
  const auto sites = lattice.plaquette(anchor);
  const std::uint8_t p = plaquette_pattern(c, sites);
  if (p == 0 || p == 0b1111) {
    out.push_back({{}, 0, 1.0});
    return out;
  }
  const auto emit = [&](const auto& table) {
    for (std::uint8_t next : table) {
      LocalOutcome o;
      o.prob = 1.0 / static_cast<double>(table.size());
      const std::uint8_t diff = p ^ next;
      for (int k = 0; k < 4; ++k)
        if (diff & (1U << k)) o.flips[o.n_flips++] = sites[k];
      out.push_back(o);
    }
  };
  if (std::popcount(p) & 1) emit(tables::plaquette_odd);
  else emit(tables::plaquette_even);
  return out;
}

inline OutcomeList toom_outcomes(const SpinConfig& c, const Lattice& lattice, Site r, ToomVariant variant) {
  OutcomeList out;
  if (!toom_unstable(c, lattice, r)) {
    out.push_back({{}, 0, 1.0});
    return out;
  }
  const PairFlipSets sets = pair_flip_sets_unchecked(c, lattice, r);
  const MoveList& admissible = variant == ToomVariant::strict ? sets.strict : sets.chill;
  if (admissible.empty()) {
    out.push_back({{}, 0, 1.0});
    return out;
  }
  for (const auto& m : admissible)
    out.push_back({{m.target, m.partner, 0, 0}, 2, 1.0 / static_cast<double>(admissible.size())});
  return out;
}

// The rule applied with probability (1 - alpha) at a site.
inline OutcomeList base_rule_outcomes(const SpinConfig& c, const Lattice& lattice, const MixedKernel& kernel,
                                      Site r) {
  return kernel.dimension == 1 ? absorbing_outcomes(c, lattice, r) : toom_outcomes(c, lattice, r, *kernel.toom);
}

// The rule applied with probability alpha at a site.
inline OutcomeList swssb_rule_outcomes(const SpinConfig& c, const Lattice& lattice, const MixedKernel& kernel,
                                       Site r) {
  return kernel.dimension == 1 ? triplet_outcomes(c, lattice, r) : plaquette_outcomes(c, lattice, r);
}

}  // namespace swssb
