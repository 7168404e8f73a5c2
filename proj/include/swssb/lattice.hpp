#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "swssb/error.hpp"
#include "swssb/rng.hpp"

namespace swssb {

using Site = std::uint32_t;

// Periodic ring (dim 1, ly == 1) or periodic torus (dim 2). Sites on the
// torus are row-major: site = y * lx + x, "north" is +y and "east" is +x.
class Lattice {
 public:
  static Lattice ring(std::uint32_t length) {
    require(length >= 1, ErrorKind::invalid_argument, "ring length must be >= 1");
    return Lattice(1, length, 1);
  }

  // Both sides >= 3 so that the eight Moore neighbours of a site are distinct.
  static Lattice torus(std::uint32_t lx, std::uint32_t ly) {
    require(lx >= 3 && ly >= 3, ErrorKind::invalid_argument,
            "torus sides must be >= 3, got " + std::to_string(lx) + "x" + std::to_string(ly));
    return Lattice(2, lx, ly);
  }

  static Lattice square(std::uint32_t side) { return torus(side, side); }

  int dim() const noexcept { return dim_; }
  std::uint32_t lx() const noexcept { return lx_; }
  std::uint32_t ly() const noexcept { return ly_; }
  std::size_t sites() const noexcept { return std::size_t{lx_} * ly_; }

  Site x_of(Site r) const noexcept { return r % lx_; }
  Site y_of(Site r) const noexcept { return r / lx_; }

  // Wrapped coordinates; dx, dy may be negative.
  Site at(std::int64_t x, std::int64_t y) const noexcept {
    const auto wx = static_cast<Site>(((x % lx_) + lx_) % lx_);
    const auto wy = static_cast<Site>(((y % ly_) + ly_) % ly_);
    return wy * lx_ + wx;
  }
  Site shift(Site r, int dx, int dy = 0) const noexcept {
    return at(std::int64_t{x_of(r)} + dx, std::int64_t{y_of(r)} + dy);
  }

  Site left(Site r) const noexcept { return r == 0 ? lx_ - 1 : r - 1; }
  Site right(Site r) const noexcept { return r + 1 == lx_ ? 0 : r + 1; }

  Site east(Site r) const noexcept {
    const Site x = x_of(r);
    return x + 1 == lx_ ? r + 1 - lx_ : r + 1;
  }
  Site west(Site r) const noexcept {
    const Site x = x_of(r);
    return x == 0 ? r + lx_ - 1 : r - 1;
  }
  Site north(Site r) const noexcept {
    const Site n = r + lx_;
    return n >= sites() ? n - static_cast<Site>(sites()) : n;
  }
  Site south(Site r) const noexcept {
    return r < lx_ ? r + static_cast<Site>(sites()) - lx_ : r - lx_;
  }

  // Nearest neighbours: {left, right} on a ring, {east, west, north, south} on a torus.
  std::vector<Site> neighbors(Site r) const {
    if (dim_ == 1) return {left(r), right(r)};
    return {east(r), west(r), north(r), south(r)};
  }

  // Offsets of the Moore neighbourhood in a fixed order; the order is part of
  // the pair-flip move enumeration and therefore of trajectory reproducibility.
  static constexpr std::array<std::array<int, 2>, 8> moore_offsets{{
      {-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};

  std::array<Site, 8> moore(Site r) const noexcept {
    std::array<Site, 8> out{};
    for (std::size_t k = 0; k < 8; ++k) out[k] = shift(r, moore_offsets[k][0], moore_offsets[k][1]);
    return out;
  }

  // Elementary 2x2 plaquette anchored at its lower-left site, ordered
  // (x,y), (x+1,y), (x,y+1), (x+1,y+1).
  std::array<Site, 4> plaquette(Site anchor) const noexcept {
    const Site e = east(anchor);
    return {anchor, e, north(anchor), north(e)};
  }

  std::string describe() const {
    if (dim_ == 1) return "ring(" + std::to_string(lx_) + ")";
    return "torus(" + std::to_string(lx_) + "x" + std::to_string(ly_) + ")";
  }

  friend bool operator==(const Lattice&, const Lattice&) = default;

 private:
  Lattice(int dim, std::uint32_t lx, std::uint32_t ly) : dim_(dim), lx_(lx), ly_(ly) {}

  int dim_;
  std::uint32_t lx_;
  std::uint32_t ly_;
};

enum class Parity : int { even = 1, odd = -1 };

inline int sign(Parity p) noexcept { return static_cast<int>(p); }

inline Parity parity_of_count(std::size_t minus_count) noexcept {
  return (minus_count & 1U) ? Parity::odd : Parity::even;
}

// Bit-packed +-1 configuration: bit r set means X_r = -1.
class SpinConfig {
 public:
  SpinConfig() = default;

  explicit SpinConfig(std::size_t n) : n_(n), words_((n + 63) / 64, 0) {}

  // Low n bits of `bits` (n <= 64); also the enumeration index used by the
  // exact oracle.
  static SpinConfig from_index(std::uint64_t bits, std::size_t n) {
    require(n <= 64, ErrorKind::invalid_argument, "from_index supports at most 64 sites");
    SpinConfig c(n);
    if (n > 0) c.words_[0] = n == 64 ? bits : bits & ((std::uint64_t{1} << n) - 1);
    return c;
  }

  // Spins given as +1 / -1.
  static SpinConfig from_spins(std::span<const int> spins) {
    SpinConfig c(spins.size());
    for (std::size_t r = 0; r < spins.size(); ++r) {
      require(spins[r] == 1 || spins[r] == -1, ErrorKind::invalid_argument, "spins must be +1 or -1");
      if (spins[r] == -1) c.flip(static_cast<Site>(r));
    }
    return c;
  }
  static SpinConfig from_spins(std::initializer_list<int> spins) {
    return from_spins(std::span<const int>(spins.begin(), spins.size()));
  }

  static SpinConfig all_minus(std::size_t n) {
    SpinConfig c(n);
    for (auto& w : c.words_) w = ~std::uint64_t{0};
    c.clear_tail();
    return c;
  }

  std::size_t size() const noexcept { return n_; }

  bool is_minus(Site r) const noexcept { return (words_[r >> 6] >> (r & 63)) & 1U; }
  int spin(Site r) const noexcept { return is_minus(r) ? -1 : 1; }

  void flip(Site r) noexcept { words_[r >> 6] ^= std::uint64_t{1} << (r & 63); }
  void set_minus(Site r, bool minus) noexcept {
    if (is_minus(r) != minus) flip(r);
  }

  std::size_t count_minus() const noexcept {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  std::uint64_t index() const {
    require(n_ <= 64, ErrorKind::invalid_argument, "index() requires at most 64 sites");
    return words_.empty() ? 0 : words_[0];
  }

  std::span<const std::uint64_t> words() const noexcept { return words_; }
  std::span<std::uint64_t> mutable_words() noexcept { return words_; }

  void clear_tail() noexcept {
    if (n_ % 64 != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << (n_ % 64)) - 1;
  }

  friend bool operator==(const SpinConfig&, const SpinConfig&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

inline Parity parity(const SpinConfig& c) noexcept { return parity_of_count(c.count_minus()); }

inline SpinConfig flip_pair(SpinConfig c, Site r, Site r2) {
  require(r != r2, ErrorKind::invalid_argument, "flip_pair needs two distinct sites");
  require(r < c.size() && r2 < c.size(), ErrorKind::invalid_argument, "flip_pair site out of range");
  c.flip(r);
  c.flip(r2);
  return c;
}

// Uniform over the requested parity sector by rejection from uniform
// bitstrings (acceptance 1/2 for any N >= 1).
inline SpinConfig random_config_in_sector(const Lattice& lattice, Parity sector, RngStream& rng) {
  const std::size_t n = lattice.sites();
  SpinConfig c(n);
  for (;;) {
    for (auto& w : c.mutable_words()) w = rng.next();
    c.clear_tail();
    if (parity(c) == sector) return c;
  }
}

// Number of unsatisfied nearest-neighbour bonds. The torus has 2N bonds
// ((r, east) and (r, north) for every r); the ring has N bonds (r, right).
inline std::size_t broken_bonds(const SpinConfig& c, const Lattice& lattice) {
  std::size_t count = 0;
  for (Site r = 0; r < lattice.sites(); ++r) {
    const bool s = c.is_minus(r);
    if (lattice.dim() == 1) {
      count += s != c.is_minus(lattice.right(r));
    } else {
      count += s != c.is_minus(lattice.east(r));
      count += s != c.is_minus(lattice.north(r));
    }
  }
  return count;
}

inline std::string to_string(const SpinConfig& c) {
  std::string s;
  s.reserve(c.size());
  for (Site r = 0; r < c.size(); ++r) s.push_back(c.is_minus(r) ? '-' : '+');
  return s;
}

// Inverse of to_string: '+' / '-' characters, other characters ignored.
inline SpinConfig config_from_string(std::string_view text) {
  std::vector<int> spins;
  for (char ch : text) {
    if (ch == '+') spins.push_back(1);
    else if (ch == '-') spins.push_back(-1);
  }
  return SpinConfig::from_spins(std::span<const int>(spins));
}

}  // namespace swssb
