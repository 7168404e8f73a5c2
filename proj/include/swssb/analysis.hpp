#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_fit.h>
#include <gsl/gsl_interp.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_roots.h>

#include <Eigen/Dense>
#include <boost/rational.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "swssb/error.hpp"
#include "swssb/observables.hpp"

namespace swssb {

struct ScalingRecord {
  double alpha = 0.0;
  std::uint32_t L = 0;
  std::string observable;
  double mean = 0.0;
  double std_error = 0.0;
};

struct ScalingDataset {
  std::vector<ScalingRecord> records;

  ScalingDataset only(const std::string& observable) const {
    ScalingDataset out;
    for (const auto& r : records)
      if (r.observable == observable) out.records.push_back(r);
    return out;
  }

  ScalingDataset alpha_window(double lo, double hi) const {
    ScalingDataset out;
    for (const auto& r : records)
      if (r.alpha >= lo - 1e-12 && r.alpha <= hi + 1e-12) out.records.push_back(r);
    return out;
  }

  std::set<std::uint32_t> sizes() const {
    std::set<std::uint32_t> s;
    for (const auto& r : records) s.insert(r.L);
    return s;
  }

  std::set<double> alphas() const {
    std::set<double> s;
    for (const auto& r : records) s.insert(r.alpha);
    return s;
  }

  void validate_for_collapse() const {
    require(sizes().size() >= 2, ErrorKind::insufficient_data, "collapse needs at least 2 distinct L");
    require(alphas().size() >= 3, ErrorKind::insufficient_data, "collapse needs at least 3 distinct alpha");
    for (const auto& r : records)
      require(r.std_error > 0.0 && std::isfinite(r.mean), ErrorKind::invalid_argument,
              "collapse records need finite means and positive errors");
  }
};

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    require(pos == s.size(), ErrorKind::parse_failure, context + ": trailing characters in '" + s + "'");
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::parse_failure, context + ": cannot parse number '" + s + "'");
  }
}
}  // namespace detail

// Reads the observable summary CSV (observable,alpha,L,mean,std_error,...)
// or the fidelity CSV (alpha,L,R,value,ci_lo,ci_hi); fidelity rows become
// observable "F_R<R>" with std_error = (ci_hi - ci_lo) / (2 * 1.96).
inline ScalingDataset read_scaling_csv(std::istream& in, const std::string& source = "csv") {
  std::string header;
  require(static_cast<bool>(std::getline(in, header)), ErrorKind::parse_failure, source + ": empty file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto cols = detail::split_csv_line(header);
  std::map<std::string, std::size_t> idx;
  for (std::size_t k = 0; k < cols.size(); ++k) idx[cols[k]] = k;
  const bool fidelity = idx.count("R") && idx.count("value");
  const bool summary = idx.count("observable") && idx.count("mean");
  require(fidelity || summary, ErrorKind::parse_failure, source + ": unrecognized header '" + header + "'");
  ScalingDataset ds;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    const std::string ctx = source + ":" + std::to_string(lineno);
    require(cells.size() == cols.size(), ErrorKind::parse_failure, ctx + ": expected " + std::to_string(cols.size()) + " fields");
    ScalingRecord r;
    r.alpha = detail::parse_double(cells[idx["alpha"]], ctx);
    r.L = static_cast<std::uint32_t>(detail::parse_double(cells[idx["L"]], ctx));
    if (fidelity) {
      r.observable = "F_R" + cells[idx["R"]];
      r.mean = detail::parse_double(cells[idx["value"]], ctx);
      r.std_error = (detail::parse_double(cells[idx["ci_hi"]], ctx) - detail::parse_double(cells[idx["ci_lo"]], ctx)) /
                    (2.0 * 1.96);
    } else {
      r.observable = cells[idx["observable"]];
      r.mean = detail::parse_double(cells[idx["mean"]], ctx);
      r.std_error = detail::parse_double(cells[idx["std_error"]], ctx);
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

// --- finite-size-scaling collapse ----------------------------------------------
//
// Ansatz O(alpha, L) L^{beta/nu} = f((alpha - alpha_c) L^{1/nu}). Quality
// (Houdayer-Hartmann): every rescaled point is compared with a master-curve
// value from a weighted local linear fit through the bracketing points of the
// other sizes, S = (1/N) sum (y - Y)^2 / (dy^2 + dY^2).

struct CollapseParams {
  double alpha_c = 0.0;
  double beta_over_nu = 0.0;
  double one_over_nu = 0.0;
};

struct CollapseResult {
  double alpha_c = 0.0;
  double beta_over_nu = 0.0;
  double one_over_nu = 0.0;
  double quality = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  bool converged = false;
  std::string status;
  std::size_t iterations = 0;
  std::size_t points_used = 0;
};

inline double collapse_quality(const ScalingDataset& ds, const CollapseParams& p, std::size_t* used = nullptr) {
  struct Pt {
    double x, y, dy;
  };
  std::map<std::uint32_t, std::vector<Pt>> curves;
  for (const auto& r : ds.records) {
    const double L = r.L;
    const double scale = std::pow(L, p.beta_over_nu);
    curves[r.L].push_back({(r.alpha - p.alpha_c) * std::pow(L, p.one_over_nu), r.mean * scale, r.std_error * scale});
  }
  for (auto& [L, pts] : curves) std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.x < b.x; });

  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [L, pts] : curves) {
    for (const auto& pt : pts) {
      double k = 0, kx = 0, ky = 0, kxx = 0, kxy = 0;
      std::size_t neighbours = 0;
      for (const auto& [L2, other] : curves) {
        if (L2 == L || other.size() < 2) continue;
        if (pt.x < other.front().x || pt.x > other.back().x) continue;
        auto hi = std::lower_bound(other.begin(), other.end(), pt.x, [](const Pt& a, double x) { return a.x < x; });
        if (hi == other.begin()) ++hi;
        auto lo = hi - 1;
        for (auto it : {lo, hi}) {
          const double w = 1.0 / (it->dy * it->dy);
          k += w;
          kx += w * it->x;
          ky += w * it->y;
          kxx += w * it->x * it->x;
          kxy += w * it->x * it->y;
          ++neighbours;
        }
      }
      if (neighbours < 2) continue;
      const double delta = k * kxx - kx * kx;
      if (!(delta > 0.0)) continue;
      const double y_fit = (kxx * ky - kx * kxy) / delta + pt.x * (k * kxy - kx * ky) / delta;
      const double dy2_fit = (kxx - 2.0 * pt.x * kx + pt.x * pt.x * k) / delta;
      sum += (pt.y - y_fit) * (pt.y - y_fit) / (pt.dy * pt.dy + dy2_fit);
      ++n;
    }
  }
  if (used) *used = n;
  if (n == 0) return std::numeric_limits<double>::max();
  return sum / static_cast<double>(n);
}

struct CollapseOptions {
  std::vector<CollapseParams> starts;  // empty: default multi-start grid
  double step = 0.05;
  double size_tolerance = 1e-7;
  std::size_t max_iterations = 4000;
  // Fraction of points that must have a master-curve estimate; below it the
  // objective is penalized so the optimizer cannot shrink the overlap away.
  double min_overlap = 0.5;
};

namespace detail {

struct CollapseContext {
  const ScalingDataset* ds;
  double min_points;
};

inline double collapse_objective(const gsl_vector* v, void* params) {
  const auto* ctx = static_cast<const CollapseContext*>(params);
  const CollapseParams p{gsl_vector_get(v, 0), gsl_vector_get(v, 1), gsl_vector_get(v, 2)};
  if (!(p.one_over_nu > 0.02) || p.one_over_nu > 5.0 || std::abs(p.beta_over_nu) > 5.0) return 1e30;
  std::size_t used = 0;
  const double q = collapse_quality(*ctx->ds, p, &used);
  if (static_cast<double>(used) < ctx->min_points) return 1e30;
  return q;
}

}  // namespace detail

inline CollapseResult data_collapse(const ScalingDataset& all, const std::string& observable,
                                    const CollapseOptions& opts = {}) {
  const ScalingDataset ds = observable.empty() ? all : all.only(observable);
  ds.validate_for_collapse();
  std::vector<CollapseParams> starts = opts.starts;
  if (starts.empty()) {
    const auto alphas = ds.alphas();
    const std::vector<double> grid(alphas.begin(), alphas.end());
    const std::vector<std::pair<double, double>> exps{{0.5, 0.54}, {0.25, 0.3}, {0.8, 0.9}, {0.5, 1.2}};
    for (double q : {0.5, 0.25, 0.75}) {
      const double a = grid[static_cast<std::size_t>(q * static_cast<double>(grid.size() - 1))];
      for (const auto& [b, nu] : exps) starts.push_back({a, b, nu});
    }
  }

  detail::CollapseContext ctx{&ds, opts.min_overlap * static_cast<double>(ds.records.size())};
  gsl_multimin_function fn{&detail::collapse_objective, 3, &ctx};
  const gsl_multimin_fminimizer_type* type = gsl_multimin_fminimizer_nmsimplex2;
  CollapseResult best;
  best.quality = std::numeric_limits<double>::max();
  for (const auto& s : starts) {
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(3), &gsl_vector_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> step(gsl_vector_alloc(3), &gsl_vector_free);
    gsl_vector_set(x.get(), 0, s.alpha_c);
    gsl_vector_set(x.get(), 1, s.beta_over_nu);
    gsl_vector_set(x.get(), 2, s.one_over_nu);
    gsl_vector_set(step.get(), 0, opts.step * 0.2);
    gsl_vector_set(step.get(), 1, opts.step);
    gsl_vector_set(step.get(), 2, opts.step);
    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> m(
        gsl_multimin_fminimizer_alloc(type, 3), &gsl_multimin_fminimizer_free);
    gsl_multimin_fminimizer_set(m.get(), &fn, x.get(), step.get());
    int status = GSL_CONTINUE;
    std::size_t iter = 0;
    while (status == GSL_CONTINUE && iter < opts.max_iterations) {
      ++iter;
      if (gsl_multimin_fminimizer_iterate(m.get()) != GSL_SUCCESS) break;
      status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(m.get()), opts.size_tolerance);
    }
    const double q = m->fval;
    if (q < best.quality) {
      best.alpha_c = gsl_vector_get(m->x, 0);
      best.beta_over_nu = gsl_vector_get(m->x, 1);
      best.one_over_nu = gsl_vector_get(m->x, 2);
      best.quality = q;
      best.converged = status == GSL_SUCCESS;
      best.iterations = iter;
    }
  }
  best.status = best.converged ? "converged" : "not converged (best simplex point retained)";
  collapse_quality(ds, {best.alpha_c, best.beta_over_nu, best.one_over_nu}, &best.points_used);

  // Covariance: 2 H^{-1} / N for the chi^2-like sum N * S, inflated by S when S > 1.
  const std::array<double, 3> x0{best.alpha_c, best.beta_over_nu, best.one_over_nu};
  const std::array<double, 3> h{1e-3, 3e-3, 3e-3};
  const auto f = [&](std::array<double, 3> x) {
    return collapse_quality(ds, {x[0], x[1], x[2]});
  };
  Eigen::Matrix3d hess;
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) {
      auto pp = x0, pm = x0, mp = x0, mm = x0;
      pp[a] += h[a]; pp[b] += h[b];
      pm[a] += h[a]; pm[b] -= h[b];
      mp[a] -= h[a]; mp[b] += h[b];
      mm[a] -= h[a]; mm[b] -= h[b];
      hess(a, b) = hess(b, a) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h[a] * h[b]);
    }
  const double n = static_cast<double>(std::max<std::size_t>(best.points_used, 1));
  Eigen::FullPivLU<Eigen::Matrix3d> lu(hess * n);
  if (lu.isInvertible()) best.covariance = 2.0 * lu.inverse() * std::max(1.0, best.quality);
  else best.status += "; Hessian singular, covariance unavailable";
  return best;
}

// Two-column (x, y) rescaled data, one block per L separated by blank lines.
inline void write_collapse_plot(std::ostream& os, const ScalingDataset& ds, const CollapseResult& r) {
  std::map<std::uint32_t, std::vector<std::pair<double, double>>> curves;
  for (const auto& rec : ds.records) {
    const double L = rec.L;
    curves[rec.L].emplace_back((rec.alpha - r.alpha_c) * std::pow(L, r.one_over_nu),
                               rec.mean * std::pow(L, r.beta_over_nu));
  }
  bool first = true;
  for (auto& [L, pts] : curves) {
    std::sort(pts.begin(), pts.end());
    if (!first) os << "\n\n";
    first = false;
    os << "# L=" << L << '\n';
    for (const auto& [x, y] : pts) os << format_double(x) << ' ' << format_double(y) << '\n';
  }
}

// --- Binder crossings --------------------------------------------------------------

struct PairCrossing {
  std::uint32_t L1 = 0;
  std::uint32_t L2 = 0;
  double alpha = 0.0;
  std::size_t sign_changes = 0;
};

struct CrossingResult {
  double mean = 0.0;
  double spread = 0.0;  // sample standard deviation over pairs (0 for one pair)
  std::vector<PairCrossing> crossings;
  std::vector<std::string> failures;
};

namespace detail {

// Monotone (Steffen) cubic through one size's (alpha, value) points.
class MonotoneCurve {
 public:
  MonotoneCurve(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    require(x_.size() >= 3, ErrorKind::insufficient_data, "monotone interpolation needs >= 3 points");
    interp_.reset(gsl_interp_alloc(gsl_interp_steffen, x_.size()));
    accel_.reset(gsl_interp_accel_alloc());
    gsl_interp_init(interp_.get(), x_.data(), y_.data(), x_.size());
  }
  double operator()(double x) const {
    require(x >= x_.front() && x <= x_.back(), ErrorKind::invalid_argument, "interpolation outside sampled range");
    return gsl_interp_eval(interp_.get(), x_.data(), y_.data(), x, accel_.get());
  }
  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }
  const std::vector<double>& xs() const { return x_; }

 private:
  struct InterpFree {
    void operator()(gsl_interp* p) const { gsl_interp_free(p); }
  };
  struct AccelFree {
    void operator()(gsl_interp_accel* p) const { gsl_interp_accel_free(p); }
  };
  std::vector<double> x_, y_;
  std::unique_ptr<gsl_interp, InterpFree> interp_;
  std::unique_ptr<gsl_interp_accel, AccelFree> accel_;
};

struct DiffCtx {
  const MonotoneCurve* a;
  const MonotoneCurve* b;
};

inline double diff_fn(double x, void* p) {
  const auto* c = static_cast<const DiffCtx*>(p);
  return (*c->a)(x) - (*c->b)(x);
}

inline double brent_root(const MonotoneCurve& a, const MonotoneCurve& b, double lo, double hi) {
  DiffCtx ctx{&a, &b};
  gsl_function f{&diff_fn, &ctx};
  std::unique_ptr<gsl_root_fsolver, decltype(&gsl_root_fsolver_free)> s(gsl_root_fsolver_alloc(gsl_root_fsolver_brent),
                                                                       &gsl_root_fsolver_free);
  gsl_root_fsolver_set(s.get(), &f, lo, hi);
  for (int iter = 0; iter < 200; ++iter) {
    gsl_root_fsolver_iterate(s.get());
    const double xl = gsl_root_fsolver_x_lower(s.get()), xu = gsl_root_fsolver_x_upper(s.get());
    if (gsl_root_test_interval(xl, xu, 1e-12, 0.0) == GSL_SUCCESS) break;
  }
  return gsl_root_fsolver_root(s.get());
}

}  // namespace detail

// Pairwise crossings of per-size curves of `observable` (typically "binder").
// Each pair is solved on the overlap of the sampled alpha ranges only; the
// first sign change of the difference on the union of sample points is used.
inline CrossingResult binder_crossing(const ScalingDataset& all, const std::string& observable,
                                      std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs = {}) {
  const ScalingDataset ds = all.only(observable);
  std::map<std::uint32_t, std::vector<std::pair<double, double>>> per_size;
  for (const auto& r : ds.records) per_size[r.L].emplace_back(r.alpha, r.mean);
  require(per_size.size() >= 2, ErrorKind::insufficient_data, "binder_crossing needs at least 2 sizes");
  std::map<std::uint32_t, std::unique_ptr<detail::MonotoneCurve>> curves;
  for (auto& [L, pts] : per_size) {
    std::sort(pts.begin(), pts.end());
    std::vector<double> x, y;
    for (const auto& [a, v] : pts) {
      x.push_back(a);
      y.push_back(v);
    }
    curves[L] = std::make_unique<detail::MonotoneCurve>(std::move(x), std::move(y));
  }
  if (pairs.empty())
    for (auto i = curves.begin(); i != curves.end(); ++i)
      for (auto j = std::next(i); j != curves.end(); ++j) pairs.emplace_back(i->first, j->first);

  CrossingResult out;
  for (const auto& [l1, l2] : pairs) {
    require(curves.count(l1) && curves.count(l2), ErrorKind::invalid_argument, "binder_crossing: unknown size");
    const auto& a = *curves[l1];
    const auto& b = *curves[l2];
    const double lo = std::max(a.lo(), b.lo()), hi = std::min(a.hi(), b.hi());
    std::vector<double> grid;
    for (double x : a.xs())
      if (x >= lo && x <= hi) grid.push_back(x);
    for (double x : b.xs())
      if (x >= lo && x <= hi) grid.push_back(x);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    PairCrossing pc{l1, l2, 0.0, 0};
    bool found = false;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
      const double d0 = a(grid[k]) - b(grid[k]);
      const double d1 = a(grid[k + 1]) - b(grid[k + 1]);
      if (d0 == 0.0 && !found) {
        pc.alpha = grid[k];
        found = true;
        ++pc.sign_changes;
      } else if (d0 * d1 < 0.0) {
        ++pc.sign_changes;
        if (!found) {
          pc.alpha = detail::brent_root(a, b, grid[k], grid[k + 1]);
          found = true;
        }
      }
    }
    if (!found && !grid.empty() && a(grid.back()) == b(grid.back())) {
      pc.alpha = grid.back();
      found = true;
      pc.sign_changes = 1;
    }
    if (found) out.crossings.push_back(pc);
    else out.failures.push_back("L=" + std::to_string(l1) + " and L=" + std::to_string(l2) + " do not cross in [" +
                                format_double(lo) + ", " + format_double(hi) + "]");
  }
  if (out.crossings.empty()) {
    std::string msg = "no crossing found";
    for (const auto& f : out.failures) msg += "; " + f;
    fail(ErrorKind::no_crossing, msg);
  }
  RunningStats st;
  for (const auto& c : out.crossings) st.add(c.alpha);
  out.mean = st.mean;
  out.spread = std::sqrt(st.variance());
  return out;
}

// --- m_infinity fits ---------------------------------------------------------------

struct MInfinityFit {
  double alpha = 0.0;
  double m_inf = 0.0;
  double m_inf_error = 0.0;
  double c = 0.0;
  double c_error = 0.0;
  double chi2 = 0.0;
  std::size_t n_sizes = 0;
  std::vector<double> residuals;  // mean - fit, ordered by L
};

// Weighted least squares of mean against 1/L^2 per alpha: mean = m_inf - c / L^2.
// Parameter errors are inflated by sqrt(chi2/dof) when that exceeds 1.
inline std::vector<MInfinityFit> m_infinity_fit(const ScalingDataset& all, const std::string& observable = "abs_m") {
  const ScalingDataset ds = all.only(observable);
  std::map<double, std::vector<ScalingRecord>> by_alpha;
  for (const auto& r : ds.records) by_alpha[r.alpha].push_back(r);
  require(!by_alpha.empty(), ErrorKind::insufficient_data, "m_infinity_fit: no records for " + observable);
  std::vector<MInfinityFit> out;
  for (auto& [alpha, recs] : by_alpha) {
    std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.L < b.L; });
    require(recs.size() >= 3, ErrorKind::insufficient_data,
            "m_infinity_fit needs >= 3 sizes at alpha = " + format_double(alpha));
    std::vector<double> x, y, w;
    for (const auto& r : recs) {
      require(r.std_error > 0.0, ErrorKind::invalid_argument, "m_infinity_fit needs positive errors");
      x.push_back(1.0 / (static_cast<double>(r.L) * r.L));
      y.push_back(r.mean);
      w.push_back(1.0 / (r.std_error * r.std_error));
    }
    double c0, c1, cov00, cov01, cov11, chi2;
    gsl_fit_wlinear(x.data(), 1, w.data(), 1, y.data(), 1, x.size(), &c0, &c1, &cov00, &cov01, &cov11, &chi2);
    const double dof = static_cast<double>(x.size() - 2);
    const double inflate = std::max(1.0, chi2 / dof);
    MInfinityFit f;
    f.alpha = alpha;
    f.m_inf = c0;
    f.c = -c1;
    f.m_inf_error = std::sqrt(cov00 * inflate);
    f.c_error = std::sqrt(cov11 * inflate);
    f.chi2 = chi2;
    f.n_sizes = x.size();
    for (std::size_t k = 0; k < x.size(); ++k) f.residuals.push_back(y[k] - (c0 + c1 * x[k]));
    out.push_back(std::move(f));
  }
  return out;
}

// --- mean-field rate balance ---------------------------------------------------------

using Rational = boost::rational<long long>;

enum class DistanceWeighting { uniform, half_near };

// One elementary process in the rate balance. Processes of the (1 - alpha)
// rule carry a (1 - alpha) factor, SWSSB processes an alpha factor.
struct RateProcess {
  std::string label;
  bool swssb = false;
  bool escape = true;  // escape adds to the balance, collapse subtracts
  long long multiplicity = 1;
  Rational factor{1};
  int distance = 0;  // escape distance; 1 is halved under half_near, 0 = not applicable
};

struct RateBalanceSpec {
  std::vector<RateProcess> processes;
  DistanceWeighting weighting = DistanceWeighting::uniform;

  // Bookkeeping for a pair of minus spins in the 1d mixed dynamics.
  static RateBalanceSpec standard_bookkeeping(DistanceWeighting w = DistanceWeighting::uniform) {
    RateBalanceSpec s;
    s.weighting = w;
    s.processes = {
        {"abs_escape", false, true, 1, Rational(1), 1},
        {"abs_collapse", false, false, 2, Rational(1), 0},
        {"swssb_center_collapse", true, false, 1, Rational(3, 4), 0},
        {"swssb_edge_escape_near", true, true, 2, Rational(1, 4), 1},
        {"swssb_edge_escape_far", true, true, 2, Rational(1, 4), 2},
        {"swssb_edge_expand", true, true, 2, Rational(1, 4), 0},
        {"swssb_inner_escape", true, true, 2, Rational(2, 3), 1},
    };
    return s;
  }

  void validate() const {
    for (const auto& p : processes)
      require(p.multiplicity >= 0 && p.factor >= Rational(0), ErrorKind::invalid_argument,
              "rate process '" + p.label + "' has a negative multiplicity or rate");
  }
};

struct MeanFieldResult {
  Rational alpha_c{0};
  Rational constant{0};  // balance = constant + slope * alpha
  Rational slope{0};
};

inline MeanFieldResult meanfield_alpha_c(const RateBalanceSpec& spec) {
  spec.validate();
  Rational a(0), b(0);  // coefficients of (1 - alpha) and alpha
  for (const auto& p : spec.processes) {
    Rational w = Rational(p.multiplicity) * p.factor;
    if (p.escape && p.distance == 1 && spec.weighting == DistanceWeighting::half_near) w /= 2;
    if (!p.escape) w = -w;
    (p.swssb ? b : a) += w;
  }
  MeanFieldResult r;
  r.constant = a;
  r.slope = b - a;
  require(r.slope != Rational(0), ErrorKind::no_root, "rate balance is independent of alpha");
  r.alpha_c = -r.constant / r.slope;
  require(r.alpha_c >= Rational(0) && r.alpha_c <= Rational(1), ErrorKind::no_root,
          "rate balance root " + std::to_string(r.alpha_c.numerator()) + "/" +
              std::to_string(r.alpha_c.denominator()) + " lies outside [0,1]");
  return r;
}

inline std::string to_string(const Rational& r) {
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

// --- synthetic inputs ------------------------------------------------------------------

// Master curve used by the synthetic collapse dataset.
inline double synthetic_scaling_function(double x) { return 0.5 + std::log1p(std::exp(2.0 * x)); }

// O = L^{-b} f((alpha - alpha_c) L^{nu_inv}), relative error `rel_error`.
inline ScalingDataset synthetic_collapse_dataset(double alpha_c, double beta_over_nu, double one_over_nu,
                                                 const std::vector<std::uint32_t>& sizes,
                                                 const std::vector<double>& alphas, const std::string& observable,
                                                 double rel_error = 0.01) {
  ScalingDataset ds;
  for (auto L : sizes)
    for (double a : alphas) {
      const double l = L;
      const double v = std::pow(l, -beta_over_nu) * synthetic_scaling_function((a - alpha_c) * std::pow(l, one_over_nu));
      ds.records.push_back({a, L, observable, v, rel_error * v});
    }
  return ds;
}

// Curves 1/3 + (1/3)(1 - tanh(k L (alpha - alpha_x))): all equal 2/3 at alpha_x.
inline ScalingDataset synthetic_binder_dataset(double alpha_x, const std::vector<std::uint32_t>& sizes,
                                               const std::vector<double>& alphas, double k = 0.5) {
  ScalingDataset ds;
  for (auto L : sizes)
    for (double a : alphas) {
      const double v = 1.0 / 3.0 + (1.0 - std::tanh(k * L * (a - alpha_x))) / 3.0;
      ds.records.push_back({a, L, "binder", v, 1e-3});
    }
  return ds;
}

}  // namespace swssb
