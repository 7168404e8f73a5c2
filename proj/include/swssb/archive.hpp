#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "swssb/dynamics.hpp"
#include "swssb/error.hpp"
#include "swssb/fidelity.hpp"
#include "swssb/lattice.hpp"

namespace swssb {

// Binary archives are little-endian regardless of host byte order.
//
// Histogram archive ("SWSSBHST", version 1):
//   char[8] magic, u32 version,
//   u32 dim, u32 lx, u32 ly,
//   u32 two_point, u32 i, u32 j, u32 rx, u32 ry, u32 pooled,
//   f64 alpha, u32 variant (0 = 1d, 1 = strict, 2 = chill),
//   u64 master_seed, u64 n_trajectories, u64 n_entries, u64 total,
//   n_entries x (u64 pattern, u64 count), sorted by pattern.
//
// Snapshot archive ("SWSSBSNP", version 1):
//   char[8] magic, u32 version, u32 dim, u32 lx, u32 ly,
//   f64 alpha, u32 variant, u64 master_seed, u64 n_snapshots,
//   u32 words_per_snapshot, then n_snapshots x words_per_snapshot u64
//   (bit r of the packed words is site r, set = minus).

struct RunMetadata {
  double alpha = 0.0;
  std::uint32_t variant = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t n_trajectories = 0;
};

inline std::uint32_t variant_code(const MixedKernel& k) {
  if (!k.toom) return 0;
  return *k.toom == ToomVariant::strict ? 1 : 2;
}

namespace io {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xff);
  os.write(b.data(), 4);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xff);
  os.write(b.data(), 8);
}
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_bytes(std::istream& is, int n, const std::string& what) {
  std::array<unsigned char, 8> b{};
  is.read(reinterpret_cast<char*>(b.data()), n);
  require(is.gcount() == n, ErrorKind::parse_failure, "truncated archive while reading " + what);
  std::uint64_t v = 0;
  for (int k = 0; k < n; ++k) v |= std::uint64_t{b[static_cast<std::size_t>(k)]} << (8 * k);
  return v;
}
inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  return static_cast<std::uint32_t>(get_bytes(is, 4, what));
}
inline std::uint64_t get_u64(std::istream& is, const std::string& what) { return get_bytes(is, 8, what); }
inline double get_f64(std::istream& is, const std::string& what) {
  return std::bit_cast<double>(get_bytes(is, 8, what));
}

inline void expect_magic(std::istream& is, const char* magic) {
  char buf[8] = {};
  is.read(buf, 8);
  require(is.gcount() == 8 && std::memcmp(buf, magic, 8) == 0, ErrorKind::parse_failure,
          std::string("bad archive magic, expected ") + std::string(magic, 8));
  const auto version = get_u32(is, "version");
  require(version == 1, ErrorKind::parse_failure, "unsupported archive version " + std::to_string(version));
}

inline Lattice lattice_from(std::uint32_t dim, std::uint32_t lx, std::uint32_t ly) {
  require(dim == 1 || dim == 2, ErrorKind::parse_failure, "archive has invalid dimension");
  if (dim == 1) {
    require(ly == 1, ErrorKind::parse_failure, "1d archive must have ly = 1");
    return Lattice::ring(lx);
  }
  return Lattice::torus(lx, ly);
}

}  // namespace io

struct HistogramArchive {
  MarginalHistogram histogram;
  RunMetadata meta;
};

inline void write_histogram(std::ostream& os, const MarginalHistogram& h, const RunMetadata& meta) {
  const RegionSpec& r = h.region();
  const Lattice& lat = h.lattice();
  os.write("SWSSBHST", 8);
  io::put_u32(os, 1);
  io::put_u32(os, static_cast<std::uint32_t>(lat.dim()));
  io::put_u32(os, lat.lx());
  io::put_u32(os, lat.ly());
  io::put_u32(os, r.is_two_point() ? 1 : 0);
  io::put_u32(os, r.i);
  io::put_u32(os, r.j.value_or(0));
  io::put_u32(os, r.rx);
  io::put_u32(os, r.ry);
  io::put_u32(os, h.pooled() ? 1 : 0);
  io::put_f64(os, meta.alpha);
  io::put_u32(os, meta.variant);
  io::put_u64(os, meta.master_seed);
  io::put_u64(os, meta.n_trajectories);
  const auto entries = h.sorted_entries();
  io::put_u64(os, entries.size());
  io::put_u64(os, h.total());
  for (const auto& [p, c] : entries) {
    io::put_u64(os, p);
    io::put_u64(os, c);
  }
}

inline HistogramArchive read_histogram(std::istream& is) {
  io::expect_magic(is, "SWSSBHST");
  const auto dim = io::get_u32(is, "dim");
  const auto lx = io::get_u32(is, "lx");
  const auto ly = io::get_u32(is, "ly");
  const Lattice lat = io::lattice_from(dim, lx, ly);
  const bool two = io::get_u32(is, "two_point") != 0;
  const auto i = io::get_u32(is, "i");
  const auto j = io::get_u32(is, "j");
  const auto rx = io::get_u32(is, "rx");
  const auto ry = io::get_u32(is, "ry");
  const bool pooled = io::get_u32(is, "pooled") != 0;
  RunMetadata meta;
  meta.alpha = io::get_f64(is, "alpha");
  meta.variant = io::get_u32(is, "variant");
  meta.master_seed = io::get_u64(is, "master_seed");
  meta.n_trajectories = io::get_u64(is, "n_trajectories");
  const auto n_entries = io::get_u64(is, "n_entries");
  const auto total = io::get_u64(is, "total");
  const RegionSpec region = two ? RegionSpec::two_point(lat, i, j, rx, ry) : RegionSpec::one_point(lat, i, rx, ry);
  HistogramArchive a{MarginalHistogram(lat, region, pooled), meta};
  std::uint64_t sum = 0;
  for (std::uint64_t k = 0; k < n_entries; ++k) {
    const auto p = io::get_u64(is, "pattern");
    const auto c = io::get_u64(is, "count");
    a.histogram.add(p, c);
    sum += c;
  }
  require(sum == total, ErrorKind::parse_failure, "histogram archive counts do not sum to its total");
  return a;
}

inline nlohmann::json histogram_to_json(const MarginalHistogram& h, const RunMetadata& meta) {
  const RegionSpec& r = h.region();
  nlohmann::json j;
  j["lattice"] = {{"dim", h.lattice().dim()}, {"lx", h.lattice().lx()}, {"ly", h.lattice().ly()}};
  j["region"] = {{"two_point", r.is_two_point()}, {"i", r.i}, {"rx", r.rx}, {"ry", r.ry}, {"pooled", h.pooled()}};
  if (r.j) j["region"]["j"] = *r.j;
  j["alpha"] = meta.alpha;
  j["variant"] = meta.variant;
  j["master_seed"] = meta.master_seed;
  j["n_trajectories"] = meta.n_trajectories;
  j["total"] = h.total();
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [p, c] : h.sorted_entries()) {
    std::string bits;
    for (std::size_t k = 0; k < r.width(); ++k) bits.push_back((p >> k) & 1U ? '-' : '+');
    entries.push_back({{"pattern", p}, {"spins", bits}, {"count", c}});
  }
  j["entries"] = std::move(entries);
  return j;
}

struct SnapshotArchive {
  Lattice lattice = Lattice::ring(1);
  RunMetadata meta;
  std::vector<SpinConfig> snapshots;
};

inline void write_snapshots(std::ostream& os, const SnapshotArchive& a) {
  os.write("SWSSBSNP", 8);
  io::put_u32(os, 1);
  io::put_u32(os, static_cast<std::uint32_t>(a.lattice.dim()));
  io::put_u32(os, a.lattice.lx());
  io::put_u32(os, a.lattice.ly());
  io::put_f64(os, a.meta.alpha);
  io::put_u32(os, a.meta.variant);
  io::put_u64(os, a.meta.master_seed);
  io::put_u64(os, a.snapshots.size());
  const auto words = static_cast<std::uint32_t>((a.lattice.sites() + 63) / 64);
  io::put_u32(os, words);
  for (const auto& s : a.snapshots) {
    require(s.size() == a.lattice.sites(), ErrorKind::invalid_argument, "snapshot size mismatch");
    for (auto w : s.words()) io::put_u64(os, w);
  }
}

inline SnapshotArchive read_snapshots(std::istream& is) {
  io::expect_magic(is, "SWSSBSNP");
  const auto dim = io::get_u32(is, "dim");
  const auto lx = io::get_u32(is, "lx");
  const auto ly = io::get_u32(is, "ly");
  SnapshotArchive a;
  a.lattice = io::lattice_from(dim, lx, ly);
  a.meta.alpha = io::get_f64(is, "alpha");
  a.meta.variant = io::get_u32(is, "variant");
  a.meta.master_seed = io::get_u64(is, "master_seed");
  const auto n = io::get_u64(is, "n_snapshots");
  const auto words = io::get_u32(is, "words_per_snapshot");
  require(words == (a.lattice.sites() + 63) / 64, ErrorKind::parse_failure, "snapshot word count does not match lattice");
  a.snapshots.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    SpinConfig c(a.lattice.sites());
    for (auto& w : c.mutable_words()) w = io::get_u64(is, "snapshot");
    const auto before = c.words().back();
    c.clear_tail();
    require(c.words().back() == before, ErrorKind::parse_failure, "snapshot has bits beyond the lattice");
    a.snapshots.push_back(std::move(c));
  }
  return a;
}

template <class T, class Reader>
T read_file(const std::filesystem::path& path, Reader reader) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io_failure, "cannot open " + path.string());
  return reader(in);
}

}  // namespace swssb
