#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "swssb/observables.hpp"

using namespace swssb;

namespace {

SpinConfig checkerboard(const Lattice& lat) {
  SpinConfig c(lat.sites());
  for (Site r = 0; r < lat.sites(); ++r) c.set_minus(r, (lat.x_of(r) + lat.y_of(r)) % 2 == 1);
  return c;
}

SpinConfig global_flip(SpinConfig c) {
  for (Site r = 0; r < c.size(); ++r) c.flip(r);
  return c;
}

}  // namespace

TEST(Observables, MinusDensity) {
  EXPECT_EQ(minus_density(SpinConfig(10)), 0.0);
  EXPECT_EQ(minus_density(SpinConfig::all_minus(10)), 1.0);
  SpinConfig c(10);
  c.flip(4);
  EXPECT_DOUBLE_EQ(minus_density(c), 0.1);
}

TEST(Observables, Magnetization) {
  EXPECT_EQ(magnetization(SpinConfig(6)), 1.0);
  EXPECT_EQ(magnetization(config_from_string("+-+-+-")), 0.0);
  EXPECT_EQ(magnetization(SpinConfig::all_minus(6)), -1.0);
}

TEST(Observables, ActiveDensity) {
  const auto lat = Lattice::square(4);
  EXPECT_EQ(active_density(SpinConfig(16), lat), 0.0);
  EXPECT_EQ(active_density(SpinConfig::all_minus(16), lat), 0.0);
  EXPECT_EQ(active_density(checkerboard(lat), lat), 1.0);
  SpinConfig one(16);
  one.flip(lat.at(2, 2));
  EXPECT_DOUBLE_EQ(active_density(one, lat), 4.0 / 16.0);
  EXPECT_THROW(active_density(SpinConfig(4), Lattice::ring(4)), Error);
}

TEST(Observables, DomainWallDensity) {
  const auto lat = Lattice::square(6);
  EXPECT_EQ(domain_wall_density(SpinConfig(36), lat), 0.0);
  EXPECT_EQ(domain_wall_density(checkerboard(lat), lat), 1.0);
  SpinConfig one(36);
  one.flip(7);
  EXPECT_DOUBLE_EQ(domain_wall_density(one, lat), 4.0 / (2.0 * 36.0));
}

TEST(Observables, RangesAndFlipSymmetry) {
  const auto lat = Lattice::square(6);
  RngStream rng(1, 0);
  for (int k = 0; k < 100000; ++k) {
    const auto c = random_config_in_sector(lat, k % 2 ? Parity::odd : Parity::even, rng);
    const auto f = global_flip(c);
    const double n = minus_density(c), m = magnetization(c), a = active_density(c, lat),
                 d = domain_wall_density(c, lat);
    ASSERT_GE(n, 0.0);
    ASSERT_LE(n, 1.0);
    ASSERT_GE(m, -1.0);
    ASSERT_LE(m, 1.0);
    ASSERT_GE(a, 0.0);
    ASSERT_LE(a, 1.0);
    ASSERT_GE(d, 0.0);
    ASSERT_LE(d, 1.0);
    ASSERT_DOUBLE_EQ(magnetization(f), -m);
    ASSERT_DOUBLE_EQ(minus_density(f), 1.0 - n);
    ASSERT_EQ(active_density(f, lat), a);
    ASSERT_EQ(domain_wall_density(f, lat), d);
  }
}

TEST(Observables, NamesRoundTrip) {
  for (auto o : {Observable::minus_density, Observable::magnetization, Observable::abs_magnetization,
                 Observable::active_density, Observable::domain_wall_density})
    EXPECT_EQ(observable_from_string(to_string(o)), o);
  EXPECT_THROW(observable_from_string("energy"), Error);
}

TEST(Binder, TwoValuedMagnetizationGivesTwoThirds) {
  MomentAccumulator acc;
  for (int k = 0; k < 100; ++k) acc.add(k % 2 ? 1.0 : -1.0);
  EXPECT_DOUBLE_EQ(binder_ratio(acc), 2.0 / 3.0);
}

TEST(Binder, GaussianNearZero) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> g(0.0, 0.3);
  MomentAccumulator acc;
  for (int k = 0; k < 400000; ++k) acc.add(g(gen));
  EXPECT_NEAR(binder_ratio(acc), 0.0, 0.01);
}

TEST(Binder, ScaleInvariant) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MomentAccumulator a, b;
  for (int k = 0; k < 1000; ++k) {
    const double m = u(gen);
    a.add(m);
    b.add(-3.7 * m);
  }
  EXPECT_NEAR(binder_ratio(a), binder_ratio(b), 1e-12);
}

TEST(Binder, UndefinedRatio) {
  MomentAccumulator acc;
  try {
    binder_ratio(acc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::undefined_ratio);
  }
  acc.add(0.0);
  EXPECT_THROW(binder_ratio(acc), Error);
}

TEST(Binder, MergeIsAssociative) {
  MomentAccumulator a, b, c, ab, all;
  for (int k = 0; k < 10; ++k) {
    const double m = 0.1 * k - 0.4;
    (k < 3 ? a : k < 7 ? b : c).add(m);
    all.add(m);
  }
  ab = a;
  ab.merge(b);
  ab.merge(c);
  EXPECT_EQ(ab.count, all.count);
  EXPECT_NEAR(binder_ratio(ab), binder_ratio(all), 1e-12);
}

TEST(RunningStats, MergeMatchesSequential) {
  RunningStats x, y, all;
  for (int k = 0; k < 50; ++k) {
    const double v = std::sin(k * 0.7);
    (k < 20 ? x : y).add(v);
    all.add(v);
  }
  x.merge(y);
  EXPECT_NEAR(x.mean, all.mean, 1e-14);
  EXPECT_NEAR(x.variance(), all.variance(), 1e-13);
}

TEST(BatchMeans, IidErrorMatchesNaive) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> g(1.0, 2.0);
  std::vector<double> v(20000);
  for (auto& x : v) x = g(gen);
  const auto bm = batch_means(v);
  EXPECT_NEAR(bm.mean, 1.0, 0.05);
  EXPECT_NEAR(bm.std_error, 2.0 / std::sqrt(20000.0), 0.003);
}

TEST(BatchMeans, CorrelatedSeriesGetsLargerError) {
  // AR(1) with phi = 0.9: the true error is sqrt((1+phi)/(1-phi)) ~ 4.4 times the naive one.
  std::mt19937_64 gen(6);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(1 << 16);
  double x = 0.0;
  for (auto& s : v) s = x = 0.9 * x + g(gen);
  RunningStats naive;
  for (double s : v) naive.add(s);
  const auto bm = batch_means(v);
  EXPECT_GT(bm.batch_size, 1u);
  EXPECT_LT(bm.batch_autocorrelation, 0.1 + 1e-12);
  EXPECT_GT(bm.std_error / naive.std_error(), 3.0);
}

TEST(Summary, CsvRowsAndEnsembleError) {
  std::vector<ObservableSeries> per(4);
  for (int t = 0; t < 4; ++t)
    for (int s = 0; s < 5; ++s) per[t].samples.emplace_back(s, t + 0.0);
  const auto row = summarize_ensemble("n_minus", 0.25, 16, per);
  EXPECT_DOUBLE_EQ(row.mean, 1.5);
  EXPECT_NEAR(row.std_error, std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 3.0 / 4.0), 1e-14);
  EXPECT_EQ(row.n_samples, 20u);
  std::ostringstream os;
  write_observable_csv(os, {row});
  EXPECT_EQ(os.str(), "observable,alpha,L,mean,std_error,n_samples\nn_minus,0.25,16,1.5," +
                          format_double(row.std_error) + ",20\n");
}
