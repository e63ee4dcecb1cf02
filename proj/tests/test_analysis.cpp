#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "specbias/analysis.hpp"

using namespace specbias;

namespace {

EpochSeries series(std::vector<double> v) { return EpochSeries{"s", std::move(v)}; }

SpectrumSeries rows_from(const std::vector<double>& f, std::size_t bins = 65) {
  std::vector<Vector> r(f.size(), Vector(bins));
  for (std::size_t t = 0; t < f.size(); ++t)
    for (std::size_t k = 0; k < bins; ++k) r[t][k] = f[t] - 0.01 * static_cast<double>(k);
  return SpectrumSeries::from_ratios(std::move(r));
}

}  // namespace

TEST_CASE("trailing mean filter") {
  const auto s = series({3, 1, 4, 1, 5});
  CHECK(mean_filter(s, 1).values == s.values);
  CHECK(mean_filter(series(std::vector<double>(7, 2.5)), 4).values == std::vector<double>(7, 2.5));

  std::vector<double> alt(20);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? 10.0 : 0.0;
  const auto m = mean_filter(series(alt), 2).values;
  CHECK(m[0] == 0.0);
  for (std::size_t i = 1; i < m.size(); ++i) CHECK(m[i] == 5.0);
  CHECK_THROWS_AS(mean_filter(s, 0), std::invalid_argument);
}

TEST_CASE("property: trailing mean equals the window average") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5 + trial * 7, w = 1 + trial % 12;
    const auto x = oracle::gaussian(rng, n);
    const auto m = mean_filter(series(x), w).values;
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t lo = t + 1 >= w ? t + 1 - w : 0;
      double s = 0.0;
      for (std::size_t i = lo; i <= t; ++i) s += x[i];
      CHECK(m[t] == doctest::Approx(s / static_cast<double>(t - lo + 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("short-time PCC") {
  std::vector<double> x(150);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.1 * static_cast<double>(i)) + 0.01 * static_cast<double>(i);
  std::vector<double> neg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i] + 5.0;
  const auto self = short_time_pcc(series(x), series(x), 100);
  const auto anti = short_time_pcc(series(x), series(neg), 100);
  REQUIRE(self.size() == 51);
  for (std::size_t t = 0; t < self.size(); ++t) {
    CHECK(*self[t] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*anti[t] == doctest::Approx(-1.0).epsilon(1e-12));
  }

  const auto five = short_time_pcc(series({1, 2, 3, 4, 5}), series({1, 2, 2, 4, 5}), 5);
  REQUIRE(five.size() == 1);
  CHECK(std::abs(*five[0] - oracle::pearson({1, 2, 3, 4, 5}, {1, 2, 2, 4, 5})) < 1e-12);
  CHECK(std::abs(*five[0] - 0.96225044864937626) < 1e-12);

  const auto flat = short_time_pcc(series({1, 1, 1, 2}), series({0, 1, 2, 3}), 3);
  CHECK_FALSE(flat[0].has_value());
  CHECK(flat[1].has_value());

  CHECK_THROWS_AS(short_time_pcc(series({1, 2, 3}), series({1, 2}), 2), std::invalid_argument);
  CHECK_THROWS_AS(short_time_pcc(series({1, 2}), series({1, 2}), 3), std::invalid_argument);
}

TEST_CASE("property: windowed PCC matches the pairwise oracle and stays in [-1, 1]") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 30 + trial, w = 2 + trial % 9;
    const auto x = oracle::gaussian(rng, n), y = oracle::gaussian(rng, n);
    const auto p = short_time_pcc(series(x), series(y), w);
    for (std::size_t t = 0; t < p.size(); ++t) {
      const std::vector<double> xs(x.begin() + t, x.begin() + t + w), ys(y.begin() + t, y.begin() + t + w);
      REQUIRE(p[t].has_value());
      CHECK(*p[t] >= -1.0);
      CHECK(*p[t] <= 1.0);
      CHECK(std::abs(*p[t] - oracle::pearson(xs, ys)) < 1e-10);
    }
  }
}

TEST_CASE("averaged spectrum PCC skips unweighted bins") {
  std::mt19937_64 rng(43);
  std::vector<Vector> a(40, Vector(5)), b(40, Vector(5));
  for (auto& r : a)
    for (auto& v : r) v = oracle::gaussian(rng, 1)[0];
  for (std::size_t t = 0; t < 40; ++t)
    for (std::size_t k = 0; k < 5; ++k) b[t][k] = k == 0 ? -a[t][k] : 2 * a[t][k];
  auto x = SpectrumSeries::from_ratios(a), y = SpectrumSeries::from_ratios(b);
  const auto p = averaged_spectrum_pcc(x, y, 10);
  REQUIRE(p.size() == 31);
  for (const auto& v : p) CHECK(*v == doctest::Approx(1.0));
  x.weights[0] = 1.0;
  y.weights[0] = 1.0;
  for (const auto& v : averaged_spectrum_pcc(x, y, 10)) CHECK(*v == doctest::Approx(0.6));
}

TEST_CASE("aggregate R_t") {
  SpectrumSeries s = SpectrumSeries::from_ratios({{-1, -2, -3, -4}, {-5, -6, -7, -8}});
  s.weights = {0, 0, 0, 1};
  CHECK(aggregate_rt(s).values == Vector{-4, -8});
  s.weights = {1, 1, 1, 1};
  CHECK(aggregate_rt(s).values == Vector{-10, -26});
  const auto def = SpectrumSeries::from_ratios({{-1, -2, -3}, {-4, -4, -4}});
  CHECK(def.weights == Vector{0, 1, 1});
  CHECK(aggregate_rt(def).values == Vector{-5, -8});
}

TEST_CASE("patience minimum search") {
  std::vector<double> up(50);
  for (std::size_t i = 0; i < up.size(); ++i) up[i] = static_cast<double>(i);
  CHECK(find_min_patience(series(up), 30).epoch == 0);

  std::vector<double> v(200);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(static_cast<double>(i) - 50.0);
  const auto vr = find_min_patience(series(v), 30);
  CHECK(vr.epoch == 50);
  CHECK_FALSE(vr.exhausted);
  CHECK(vr.trace.size() == 81);

  std::vector<double> trap(200, 0.0);
  trap[20] = -1.0;
  trap[45] = -2.0;
  for (std::size_t i = 46; i < trap.size(); ++i) trap[i] = 0.01 * static_cast<double>(i - 45);
  CHECK(find_min_patience(series(trap), 30).epoch == 45);
  CHECK(find_min_patience(series(trap), 20).epoch == 20);

  const auto short_run = find_min_patience(series({3, 2, 1}), 30);
  CHECK(short_run.epoch == 2);
  CHECK(short_run.exhausted);
  CHECK_THROWS_AS(find_min_patience(series({}), 3), std::invalid_argument);
  CHECK_THROWS_AS(find_min_patience(series({1, NAN}), 3), std::invalid_argument);
  CHECK_THROWS_AS(find_min_patience(series({1, 2}), 0), std::invalid_argument);
}

TEST_CASE("patience peak search") {
  std::vector<double> down(100);
  for (std::size_t i = 0; i < down.size(); ++i) down[i] = -static_cast<double>(i);
  CHECK(find_peak_after(series(down), 10, 30).epoch == 10);

  std::vector<double> bump(600);
  for (std::size_t i = 0; i < bump.size(); ++i) bump[i] = -std::abs(static_cast<double>(i) - 250.0);
  CHECK(find_peak_after(series(bump), 50, 30).epoch == 250);

  std::vector<double> plateau(100, 0.0);
  for (std::size_t i = 10; i < 20; ++i) plateau[i] = 3.0;
  CHECK(find_peak_after(series(plateau), 0, 30).epoch == 10);
  CHECK_THROWS_AS(find_peak_after(series(plateau), 100, 30), std::out_of_range);
}

TEST_CASE("property: patience results are extrema of the scanned prefix") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 40; ++trial) {
    auto x = oracle::gaussian(rng, 50 + trial * 5);
    for (std::size_t i = 1; i < x.size(); ++i) x[i] += x[i - 1] * 0.9;
    const std::size_t patience = 1 + trial % 15;
    const auto lo = find_min_patience(series(x), patience);
    const std::size_t scanned = lo.trace.back().first;
    for (std::size_t t = 0; t <= scanned; ++t) CHECK(x[t] >= x[lo.epoch]);
    for (std::size_t t = 0; t < lo.epoch; ++t) CHECK(x[t] > x[lo.epoch]);
    CHECK((lo.exhausted || scanned - lo.epoch == patience));
    const auto hi = find_peak_after(series(x), lo.epoch, patience);
    CHECK(hi.epoch >= lo.epoch);
    for (std::size_t t = lo.epoch; t <= hi.trace.back().first; ++t) CHECK(x[t] <= x[hi.epoch]);
  }
}

TEST_CASE("second-descent detection on constructed spectra") {
  std::vector<double> f(600);
  for (std::size_t t = 0; t < f.size(); ++t) {
    const double x = static_cast<double>(t);
    if (t < 100) f[t] = -0.001 * x;
    else if (t == 100) f[t] = -5.0;
    else if (t < 400) f[t] = 0.001 * (x - 100.0);
    else if (t == 400) f[t] = 5.0;
    else f[t] = -1.0;
  }
  const auto r = detect_second_descent(rows_from(f));
  CHECK(r.t_min == 100);
  CHECK(r.t_peak == 400);
  CHECK(r.patience == 30);
  CHECK(r.smooth_window == 10);
  CHECK_FALSE(r.min_exhausted);
  CHECK_FALSE(r.peak_exhausted);

  const auto flat_long = detect_second_descent(rows_from(std::vector<double>(100, -3.0)));
  CHECK(flat_long.t_min == 0);
  CHECK(flat_long.t_peak == 0);
  CHECK_FALSE(flat_long.min_exhausted);
  const auto flat_short = detect_second_descent(rows_from(std::vector<double>(20, -3.0)));
  CHECK(flat_short.t_min == 0);
  CHECK(flat_short.t_peak == 0);
  CHECK(flat_short.min_exhausted);
  CHECK(flat_short.peak_exhausted);

  CHECK_THROWS_AS(detect_second_descent(rows_from({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("second-descent detection agrees with smoothing then aggregating by hand") {
  std::mt19937_64 rng(45);
  std::vector<Vector> r(300, Vector(9));
  for (std::size_t t = 0; t < r.size(); ++t)
    for (std::size_t k = 0; k < 9; ++k)
      r[t][k] = -std::abs(static_cast<double>(t) - 150.0) * 0.01 * static_cast<double>(k) + oracle::gaussian(rng, 1)[0];
  const auto s = SpectrumSeries::from_ratios(r);
  const auto report = detect_second_descent(s, 30, 10);
  const auto direct = detect_extrema(mean_filter(aggregate_rt(s), 10), 30, 1);
  CHECK(report.t_min == direct.t_min);
  CHECK(report.t_peak == direct.t_peak);
}

TEST_CASE("perturbed-error rate peak") {
  const auto small = perturbed_rate_peak(series({1.0, 0.8, 0.5}), 0);
  REQUIRE(small.rate.size() == 2);
  CHECK(small.rate[0] == doctest::Approx(0.2));
  CHECK(small.rate[1] == doctest::Approx(0.3));
  CHECK(small.epoch == 2);

  std::vector<double> lin(30);
  for (std::size_t i = 0; i < lin.size(); ++i) lin[i] = 1.0 - static_cast<double>(i) / 32.0;
  CHECK(perturbed_rate_peak(series(lin)).epoch == 1);

  std::vector<double> sig(400);
  for (std::size_t t = 0; t < sig.size(); ++t) sig[t] = 1.0 / (1.0 + std::exp((static_cast<double>(t) - 150.0) / 10.0));
  const auto p = perturbed_rate_peak(series(sig));
  CHECK(p.epoch >= 149);
  CHECK(p.epoch <= 151);

  CHECK_THROWS_AS(perturbed_rate_peak(series({1, 0.5, 0.2}), 5), std::invalid_argument);
}
