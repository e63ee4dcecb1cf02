#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "specbias/smallnet.hpp"
#include "specbias/spectral.hpp"
#include "specbias/toytask.hpp"

using namespace specbias;

namespace {

LogitEvaluator constant_evaluator(Vector value) {
  return LogitEvaluator::pointwise([value](std::span<const double>) { return value; });
}

// Logit c is (c + 1) times the projection on `dir` measured from `origin`.
LogitEvaluator ramp_evaluator(Vector origin, Vector dir, std::size_t classes) {
  return LogitEvaluator::pointwise([=](std::span<const double> x) {
    double t = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) t += (x[i] - origin[i]) * dir[i];
    Vector out(classes);
    for (std::size_t c = 0; c < classes; ++c) out[c] = static_cast<double>(c + 1) * t;
    return out;
  });
}

}  // namespace

TEST_CASE("ray grid places N points symmetrically over [-h, h]") {
  const auto three = ray_grid(RayProbe({0, 0, 0}, {1, 0, 0}, 0.5, 3));
  REQUIRE(three.size() == 3);
  CHECK(three[0][0] == doctest::Approx(-0.5));
  CHECK(three[1][0] == doctest::Approx(0.0));
  CHECK(three[2][0] == doctest::Approx(0.5));

  const auto two = ray_grid(RayProbe({1, 1}, {0, 1}, 1.0, 2));
  CHECK(two[0] == Vector{1, 0});
  CHECK(two[1] == Vector{1, 2});

  const auto perp = ray_grid(RayProbe(Vector(toy::kR0.begin(), toy::kR0.end()), Vector(toy::kV1.begin(), toy::kV1.end()), 1.0, 201));
  REQUIRE(perp.size() == 201);
  for (std::size_t n = 0; n < perp.size(); ++n) {
    const double k = -1.0 + 2.0 * static_cast<double>(n) / 200.0;
    for (int i = 0; i < 3; ++i) CHECK(perp[n][i] == doctest::Approx(toy::kR0[i] + k * toy::kV1[i]).epsilon(1e-12));
  }
}

TEST_CASE("ray probe rejects bad construction") {
  CHECK_THROWS_AS(RayProbe({0, 0}, {1, 1}, 0.5, 8), std::invalid_argument);
  CHECK_THROWS_AS(RayProbe({0, 0}, {1, 0, 0}, 0.5, 8), std::invalid_argument);
  CHECK_THROWS_AS(RayProbe({0, 0}, {1, 0}, 0.0, 8), std::invalid_argument);
  CHECK_THROWS_AS(RayProbe({0, 0}, {1, 0}, 0.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(RayProbe({}, {}, 0.5, 8), std::invalid_argument);
}

TEST_CASE("dft matches the direct-sum oracle") {
  std::mt19937_64 rng(11);
  for (std::size_t n : {1u, 2u, 3u, 5u, 12u, 16u, 100u, 128u}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto x = oracle::gaussian(rng, n);
      const auto got = dft(x);
      const auto want = oracle::dft(x);
      REQUIRE(got.size() == n);
      for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(got[k] - want[k]) < 1e-9);
    }
  }
}

TEST_CASE("dft power special signals") {
  Vector c(16, 1.5);
  const auto dc = dft_power(c);
  REQUIRE(dc.size() == 9);
  CHECK(dc[0] == doctest::Approx(24.0 * 24.0));
  for (std::size_t k = 1; k < dc.size(); ++k) CHECK(dc[k] < 1e-20);

  Vector tone(128);
  for (std::size_t n = 0; n < tone.size(); ++n)
    tone[n] = std::cos(2.0 * std::numbers::pi * static_cast<double>(n + 1) / 128.0);
  const auto p = dft_power(tone);
  REQUIRE(p.size() == 65);
  CHECK(p[1] == doctest::Approx(4096.0).epsilon(1e-12));
  for (std::size_t k = 0; k < p.size(); ++k)
    if (k != 1) CHECK(p[k] < 1e-9);

  CHECK_THROWS_AS(dft_power(Vector{}), std::invalid_argument);
}

TEST_CASE("property: phase convention leaves power equal to the zero-based DFT") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial * 3;
    const auto x = oracle::gaussian(rng, n);
    const auto p = dft_power(x);
    for (std::size_t k = 0; k < p.size(); ++k) {
      std::complex<double> s = 0;
      for (std::size_t j = 0; j < n; ++j)
        s += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j * k) / static_cast<double>(n));
      CHECK(p[k] == doctest::Approx(std::norm(s)).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("class-averaged spectra of closed-form surfaces") {
  const RayProbe probe({0.2, -0.1}, {0.6, 0.8}, 0.5, 32);

  const auto flat = aggregate_spectrum(constant_evaluator({3.0, -1.0}), std::span(&probe, 1));
  CHECK(flat.values[0] == doctest::Approx((32 * 3.0) * (32 * 3.0) / 2 + (32.0 * 32.0) / 2));
  for (std::size_t k = 1; k < flat.values.size(); ++k) CHECK(flat.values[k] < 1e-18);

  // Along the ray the ramp is t_n * h, symmetric around zero.
  const auto ramp = ramp_evaluator({0.2, -0.1}, {0.6, 0.8}, 2);
  const auto spec = aggregate_spectrum(ramp, std::span(&probe, 1));
  Vector t(32);
  for (std::size_t n = 0; n < 32; ++n) t[n] = (2.0 * (n + 1) - 33.0) / 31.0 * 0.5;
  const auto base = oracle::half_power(t);
  double high = 0.0;
  for (std::size_t k = 0; k < base.size(); ++k) {
    CHECK(spec.values[k] == doctest::Approx(base[k] * (1.0 + 4.0) / 2.0).epsilon(1e-9).scale(1e-9));
    if (k > 0) high += spec.values[k];
  }
  CHECK(spec.values[0] < 1e-12 * high);
}

TEST_CASE("aggregate spectrum averages probes and matches single-class path") {
  std::mt19937_64 rng(13);
  const auto f = LogitEvaluator::pointwise([](std::span<const double> x) {
    return Vector{std::sin(5 * x[0]) + x[1] * x[1]};
  });
  const std::vector<Vector> anchors{{0.0, 0.0}, {0.3, -0.2}};
  const auto probes = make_probes(anchors, 0.5, 16, 5);
  const auto s0 = ray_class_spectrum(f, probes[0], 0);
  const auto s1 = ray_class_spectrum(f, probes[1], 0);
  const auto single = aggregate_spectrum(f, std::span(probes.data(), 1));
  const auto both = aggregate_spectrum(f, probes);
  for (std::size_t k = 0; k < s0.values.size(); ++k) {
    CHECK(single.values[k] == doctest::Approx(s0.values[k]));
    CHECK(both.values[k] == doctest::Approx((s0.values[k] + s1.values[k]) / 2));
  }
  CHECK_THROWS_AS(ray_class_spectrum(f, probes[0], 1), std::out_of_range);
  const std::vector<RayProbe> mixed{probes[0], RayProbe({0, 0}, {1, 0}, 0.5, 8)};
  CHECK_THROWS_AS(aggregate_spectrum(f, mixed), std::invalid_argument);
}

TEST_CASE("energy ratio") {
  const auto r = energy_ratio(PowerSpectrum{{1, 1, 2}, 4});
  CHECK(r.values[0] == doctest::Approx(std::log(0.25)));
  CHECK(r.values[1] == doctest::Approx(std::log(0.25)));
  CHECK(r.values[2] == doctest::Approx(std::log(0.5)));
  CHECK_FALSE(r.floored);

  const auto scaled = energy_ratio(PowerSpectrum{{7, 7, 14}, 4});
  for (std::size_t k = 0; k < 3; ++k) CHECK(scaled.values[k] == doctest::Approx(r.values[k]).epsilon(1e-15));

  const auto dc = energy_ratio(PowerSpectrum{{5, 0, 0}, 4});
  CHECK(dc.values[0] == 0.0);
  CHECK(dc.floored);
  CHECK(dc.values[1] == doctest::Approx(std::log(kEnergyFloor / 5.0)));

  CHECK_THROWS_AS(energy_ratio(PowerSpectrum{{0, 0}, 2}), std::invalid_argument);
  CHECK_THROWS_AS(energy_ratio(PowerSpectrum{{1, -1}, 2}), std::invalid_argument);
}

TEST_CASE("property: R_k are non-positive and exponentiate to one") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vector a(1 + trial % 40);
    for (auto& v : a) v = u(rng) * u(rng);
    const auto r = energy_ratio(PowerSpectrum{a, 2 * a.size()});
    double total = 0.0;
    for (double v : r.values) {
      CHECK(v <= 0.0);
      total += std::exp(v);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(band_share(r, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("scaling a trained net's logits multiplies A_k by alpha squared") {
  const auto data = toy::make_toy_dataset(1);
  NetConfig cfg;
  cfg.seed = 21;
  auto net = init_params(cfg);
  auto adam = AdamState::zeros_like(net);
  for (int s = 0; s < 300; ++s) adam_step(net, loss_and_grad(net, data.train).grad, adam);

  std::vector<Vector> anchors;
  for (Eigen::Index i = 0; i < data.train.inputs.rows(); ++i)
    anchors.push_back({data.train.inputs(i, 0), data.train.inputs(i, 1), data.train.inputs(i, 2)});
  std::vector<Vector> many;
  for (int rep = 0; rep < 5; ++rep) many.insert(many.end(), anchors.begin(), anchors.end());
  many.resize(500);
  const auto probes = make_probes(many, 0.5, 128, 3);

  const auto base = aggregate_spectrum(as_evaluator(net), probes);
  auto doubled = net;
  scale_output_layer(doubled, 2.0);
  const auto twice = aggregate_spectrum(as_evaluator(doubled), probes);
  for (std::size_t k = 0; k < base.values.size(); ++k)
    CHECK(twice.values[k] == doctest::Approx(4.0 * base.values[k]).epsilon(1e-10));
  const auto r1 = energy_ratio(base), r2 = energy_ratio(twice);
  for (std::size_t k = 0; k < r1.values.size(); ++k) CHECK(std::abs(r1.values[k] - r2.values[k]) < 1e-9);
}

TEST_CASE("line spectrum equals the centred ray and the direct oracle") {
  NetConfig cfg;
  cfg.layer_sizes = {3, 20, 20, 3};
  cfg.seed = 8;
  const auto net = init_params(cfg);
  const auto f = as_evaluator(net);

  const auto start = toy::line_point(toy::kR0, toy::kV0, -1.0);
  const auto end = toy::line_point(toy::kR0, toy::kV0, 1.0);
  const auto line = line_spectrum(f, start, end, 64);
  const RayProbe ray(Vector(toy::kR0.begin(), toy::kR0.end()), Vector(toy::kV0.begin(), toy::kV0.end()), 1.0, 64);
  const auto ray_spec = aggregate_spectrum(f, std::span(&ray, 1));
  for (std::size_t k = 0; k < line.values.size(); ++k)
    CHECK(line.values[k] == doctest::Approx(ray_spec.values[k]).epsilon(1e-12).scale(1e-12));

  std::mt19937_64 rng(15);
  const auto a = oracle::gaussian(rng, 3), b = oracle::gaussian(rng, 3);
  const auto seg = line_spectrum(f, a, b, 32);
  std::vector<std::vector<double>> per_class(3, std::vector<double>(32));
  for (std::size_t n = 0; n < 32; ++n) {
    const double s = static_cast<double>(n) / 31.0;
    const Vector x{a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])};
    const auto y = oracle::forward(net, x);
    for (std::size_t c = 0; c < 3; ++c) per_class[c][n] = y[c];
  }
  Vector want(17, 0.0);
  for (const auto& sig : per_class) {
    const auto p = oracle::half_power(sig);
    for (std::size_t k = 0; k < want.size(); ++k) want[k] += p[k] / 3.0;
  }
  for (std::size_t k = 0; k < want.size(); ++k) CHECK(std::abs(seg.values[k] - want[k]) < 1e-9);

  const auto flat = line_spectrum(constant_evaluator({2.0}), a, b, 16);
  for (std::size_t k = 1; k < flat.values.size(); ++k) CHECK(flat.values[k] < 1e-20);
  CHECK_THROWS_AS(line_spectrum(f, a, a, 16), std::invalid_argument);
}

TEST_CASE("unit directions") {
  std::mt19937_64 rng(16);
  for (int i = 0; i < 20; ++i) {
    const auto d = sample_unit_direction(rng, 1);
    CHECK(std::abs(d[0]) == 1.0);
  }
  std::mt19937_64 a(99), b(99);
  CHECK(sample_unit_direction(a, 7) == sample_unit_direction(b, 7));

  // Isotropy: the mean of many unit vectors concentrates near the origin.
  std::mt19937_64 big(17);
  Vector mean(3072, 0.0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto d = sample_unit_direction(big, 3072);
    double norm = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      mean[j] += d[j] / draws;
      norm += d[j] * d[j];
    }
    CHECK(std::abs(norm - 1.0) < 1e-12);
  }
  double mean_norm = 0.0;
  for (double v : mean) mean_norm += v * v;
  CHECK(std::sqrt(mean_norm) < 0.05);
}

TEST_CASE("make_probes is seeded per probe index") {
  const std::vector<Vector> anchors{{0, 0, 0}, {1, 2, 3}, {-1, 0, 1}};
  const auto p = make_probes(anchors, 0.5, 8, 42);
  const auto q = make_probes(anchors, 0.5, 8, 42);
  REQUIRE(p.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(p[i].direction() == q[i].direction());
  // Probe 1 depends only on (seed, 1), not on the other anchors.
  const std::vector<Vector> other{{5, 5, 5}, anchors[1]};
  CHECK(make_probes(other, 0.5, 8, 42)[1].direction() == p[1].direction());
  CHECK(p[0].direction() != make_probes(anchors, 0.5, 8, 43)[0].direction());
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(7, 0) == mix_seed(7, 0));
}

TEST_CASE("evaluator checks its class count") {
  int calls = 0;
  const auto f = LogitEvaluator::pointwise([&](std::span<const double>) {
    ++calls;
    return Vector(calls == 1 ? 2 : 3, 0.0);
  });
  CHECK(f.num_classes() == 0);
  f.evaluate({{0.0}});
  CHECK(f.num_classes() == 2);
  CHECK_THROWS_AS(f.evaluate({{0.0}}), std::runtime_error);

  const auto short_batch = LogitEvaluator::batched([](const std::vector<Vector>&) {
    return std::vector<Vector>{{1.0}};
  });
  CHECK_THROWS_AS(short_batch.evaluate({{0.0}, {1.0}}), std::runtime_error);
}
