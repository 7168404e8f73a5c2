#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "swssb/error.hpp"
#include "swssb/lattice.hpp"

namespace swssb {

// Fraction of minus spins.
inline double minus_density(const SpinConfig& c) {
  return c.size() == 0 ? 0.0 : static_cast<double>(c.count_minus()) / static_cast<double>(c.size());
}

// (1/N) sum_r X_r
inline double magnetization(const SpinConfig& c) {
  const auto n = static_cast<double>(c.size());
  return (n - 2.0 * static_cast<double>(c.count_minus())) / n;
}

// Fraction of plaquettes that are neither (++++) nor (----).
inline double active_density(const SpinConfig& c, const Lattice& lattice) {
  require(lattice.dim() == 2, ErrorKind::invalid_argument, "active_density needs a torus");
  std::size_t active = 0;
  for (Site r = 0; r < lattice.sites(); ++r) {
    const auto p = lattice.plaquette(r);
    const int minus = c.is_minus(p[0]) + c.is_minus(p[1]) + c.is_minus(p[2]) + c.is_minus(p[3]);
    active += (minus != 0 && minus != 4);
  }
  return static_cast<double>(active) / static_cast<double>(lattice.sites());
}

// Broken nearest-neighbour bonds over the 2N bonds of the torus.
inline double domain_wall_density(const SpinConfig& c, const Lattice& lattice) {
  require(lattice.dim() == 2, ErrorKind::invalid_argument, "domain_wall_density needs a torus");
  return static_cast<double>(broken_bonds(c, lattice)) / (2.0 * static_cast<double>(lattice.sites()));
}

enum class Observable { minus_density, magnetization, abs_magnetization, active_density, domain_wall_density };

inline std::string_view to_string(Observable o) {
  switch (o) {
    case Observable::minus_density: return "n_minus";
    case Observable::magnetization: return "m";
    case Observable::abs_magnetization: return "abs_m";
    case Observable::active_density: return "rho_act";
    case Observable::domain_wall_density: return "n_dw";
  }
  return "?";
}

inline Observable observable_from_string(std::string_view name) {
  for (auto o : {Observable::minus_density, Observable::magnetization, Observable::abs_magnetization,
                 Observable::active_density, Observable::domain_wall_density})
    if (to_string(o) == name) return o;
  fail(ErrorKind::invalid_argument, "unknown observable '" + std::string(name) + "'");
}

inline bool needs_torus(Observable o) {
  return o == Observable::active_density || o == Observable::domain_wall_density;
}

inline double measure(Observable o, const SpinConfig& c, const Lattice& lattice) {
  switch (o) {
    case Observable::minus_density: return minus_density(c);
    case Observable::magnetization: return magnetization(c);
    case Observable::abs_magnetization: return std::abs(magnetization(c));
    case Observable::active_density: return active_density(c, lattice);
    case Observable::domain_wall_density: return domain_wall_density(c, lattice);
  }
  return 0.0;
}

// Mergeable mean/variance (Chan et al. parallel update).
struct RunningStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }

  void merge(const RunningStats& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(count) + static_cast<double>(o.count);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / n;
    m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
    count += o.count;
  }

  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double std_error() const { return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0; }
};

struct MomentAccumulator {
  double sum_m2 = 0.0;
  double sum_m4 = 0.0;
  double sum_abs_m = 0.0;
  std::uint64_t count = 0;

  void add(double m) {
    const double m2 = m * m;
    sum_m2 += m2;
    sum_m4 += m2 * m2;
    sum_abs_m += std::abs(m);
    ++count;
  }

  void merge(const MomentAccumulator& o) {
    sum_m2 += o.sum_m2;
    sum_m4 += o.sum_m4;
    sum_abs_m += o.sum_abs_m;
    count += o.count;
  }

  double mean_m2() const { return sum_m2 / static_cast<double>(count); }
  double mean_m4() const { return sum_m4 / static_cast<double>(count); }
  double mean_abs_m() const { return sum_abs_m / static_cast<double>(count); }
};

// 1 - <m^4> / (3 <m^2>^2)
inline double binder_ratio(const MomentAccumulator& acc) {
  require(acc.count > 0, ErrorKind::undefined_ratio, "binder_ratio: no samples");
  const double m2 = acc.mean_m2();
  require(m2 > 0.0, ErrorKind::undefined_ratio, "binder_ratio: <m^2> = 0");
  return 1.0 - acc.mean_m4() / (3.0 * m2 * m2);
}

struct BatchMeans {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t batch_size = 1;
  std::size_t batches = 0;
  double batch_autocorrelation = 0.0;
};

inline double lag1_autocorrelation(const std::vector<double>& x) {
  if (x.size() < 3) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    den += (x[k] - mean) * (x[k] - mean);
    if (k + 1 < x.size()) num += (x[k] - mean) * (x[k + 1] - mean);
  }
  return den > 0.0 ? num / den : 0.0;
}

// Batch-means error: the batch size doubles until the lag-1 autocorrelation
// of the batch means drops below 0.1 or fewer than 8 batches would remain.
inline BatchMeans batch_means(const std::vector<double>& samples) {
  BatchMeans out;
  if (samples.empty()) return out;
  double total = 0.0;
  for (double v : samples) total += v;
  out.mean = total / static_cast<double>(samples.size());
  if (samples.size() < 2) return out;

  std::size_t b = 1;
  for (;;) {
    const std::size_t nb = samples.size() / b;
    std::vector<double> means(nb, 0.0);
    for (std::size_t k = 0; k < nb; ++k) {
      for (std::size_t t = 0; t < b; ++t) means[k] += samples[k * b + t];
      means[k] /= static_cast<double>(b);
    }
    const double rho = lag1_autocorrelation(means);
    RunningStats st;
    for (double m : means) st.add(m);
    out.batch_size = b;
    out.batches = nb;
    out.batch_autocorrelation = rho;
    out.std_error = st.std_error();
    if (rho < 0.1 || samples.size() / (2 * b) < 8) break;
    b *= 2;
  }
  return out;
}

// Post-burn-in time series of one observable from one trajectory.
struct ObservableSeries {
  std::string name;
  std::vector<std::pair<std::uint64_t, double>> samples;  // (sweep, value)
  double mean = 0.0;
  double std_error = 0.0;

  void finalize() {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.push_back(s.second);
    const BatchMeans bm = batch_means(v);
    mean = bm.mean;
    std_error = bm.std_error;
  }
};

// One row of the observable summary CSV.
struct ObservableSummary {
  std::string observable;
  double alpha = 0.0;
  std::uint32_t L = 0;
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t n_samples = 0;
};

inline constexpr std::string_view observable_csv_header = "observable,alpha,L,mean,std_error,n_samples";

// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline void write_observable_csv(std::ostream& os, const std::vector<ObservableSummary>& rows) {
  os << observable_csv_header << '\n';
  for (const auto& r : rows)
    os << r.observable << ',' << format_double(r.alpha) << ',' << r.L << ',' << format_double(r.mean) << ','
       << format_double(r.std_error) << ',' << r.n_samples << '\n';
}

// Ensemble summary: one mean per trajectory, error from the spread across
// trajectories (independent by construction).
inline ObservableSummary summarize_ensemble(std::string name, double alpha, std::uint32_t L,
                                            const std::vector<ObservableSeries>& per_trajectory) {
  ObservableSummary s{std::move(name), alpha, L, 0.0, 0.0, 0};
  RunningStats across;
  std::uint64_t n = 0;
  for (const auto& series : per_trajectory) {
    if (series.samples.empty()) continue;
    double total = 0.0;
    for (const auto& [sweep, v] : series.samples) total += v;
    across.add(total / static_cast<double>(series.samples.size()));
    n += series.samples.size();
  }
  s.mean = across.mean;
  s.n_samples = n;
  if (across.count > 1) {
    s.std_error = across.std_error();
  } else if (per_trajectory.size() == 1) {
    auto copy = per_trajectory.front();
    copy.finalize();
    s.std_error = copy.std_error;
  }
  return s;
}

}  // namespace swssb
