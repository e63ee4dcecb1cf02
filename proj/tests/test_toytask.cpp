#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "specbias/smallnet.hpp"
#include "specbias/toytask.hpp"

using namespace specbias;
namespace fs = std::filesystem;

namespace {

// A linear net whose class-1 logit is -(x+y+z): class 0 exactly where x+y+z > 0.
NetParams plane_classifier() {
  NetConfig cfg;
  cfg.layer_sizes = {3, 2, 2};
  auto p = init_params(cfg);
  p.layers[0].weight << 1, 1, 1, -1, -1, -1;
  p.layers[0].bias.setZero();
  p.layers[1].weight << 1, 0, 0, 1;
  p.layers[1].bias.setZero();
  return p;
}

const toy::ToyRunRecord& short_run() {
  static const toy::ToyRunRecord rec = [] {
    toy::ToyOptions o;
    o.epochs = 3000;
    o.post_memorization = 0;
    return toy::run_toy_experiment(0, o);
  }();
  return rec;
}

}  // namespace

TEST_CASE("toy dataset geometry") {
  for (std::uint64_t seed : {0u, 1u, 17u}) {
    const auto d = toy::make_toy_dataset(seed);
    CHECK(d.train.size() == 102);
    CHECK(d.test.size() == 402);
    int zeros = 0;
    for (int l : d.train.labels) zeros += l == 0;
    CHECK(zeros == 50);
    CHECK(d.perturbed_index < 51);
    CHECK(d.train.labels[d.perturbed_index] == 1);
    for (int i = 0; i < 3; ++i) {
      CHECK(d.train.inputs(0, i) == doctest::Approx(toy::kR0[i] - toy::kV0[i]).epsilon(1e-15));
      CHECK(d.train.inputs(50, i) == doctest::Approx(toy::kR0[i] + toy::kV0[i]).epsilon(1e-15));
    }
    for (int l : d.test.labels) CHECK((l == 0 || l == 1));
  }
  CHECK(toy::make_toy_dataset(3).perturbed_index == toy::make_toy_dataset(3).perturbed_index);
}

TEST_CASE("toy direction vectors are orthonormal") {
  auto dot = [](const toy::Point3& a, const toy::Point3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; };
  CHECK(dot(toy::kV0, toy::kV0) == doctest::Approx(1.0));
  CHECK(dot(toy::kV1, toy::kV1) == doctest::Approx(1.0));
  CHECK(std::abs(dot(toy::kV0, toy::kV1)) < 1e-15);
}

TEST_CASE("on/off-manifold accuracy of reference classifiers") {
  const auto d = toy::make_toy_dataset(0);
  const auto plane = plane_classifier();
  CHECK(toy::on_manifold_accuracy(plane, d) == 1.0);
  CHECK(toy::off_manifold_accuracy(plane) == 1.0);
  CHECK(accuracy(plane, d.test) == 1.0);

  NetConfig cfg;
  auto zero = init_params(cfg);
  for (auto& l : zero.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  CHECK(toy::on_manifold_accuracy(zero, d) == 1.0);
  CHECK(toy::off_manifold_accuracy(zero) == 1.0);
}

TEST_CASE("untrained net spectra are DC dominated") {
  NetConfig cfg;
  cfg.seed = mix_seed(0, 1);
  const auto net = init_params(cfg);
  const auto f = as_evaluator(net);
  for (const auto& [a, b] : {toy::on_manifold_segment(), toy::off_manifold_segment()}) {
    const auto r = energy_ratio(line_spectrum(f, a, b, 128));
    for (std::size_t k = 8; k < r.values.size(); ++k) CHECK(r.values[0] > r.values[k]);
  }
}

TEST_CASE("short toy run records memorization") {
  const auto& rec = short_run();
  REQUIRE(rec.memorization_epoch.has_value());
  CHECK(*rec.memorization_epoch == 2321);
  CHECK(rec.perturbed_index == 45);
  CHECK(rec.epochs.size() == 3001);
  const auto& mem = rec.epochs[*rec.memorization_epoch];
  CHECK(mem.memorized);
  CHECK_FALSE(rec.epochs[*rec.memorization_epoch - 1].memorized);
  CHECK(rec.epochs.front().epoch == 0);
  CHECK(rec.epochs.back().epoch == 3000);

  // Points next to the flipped label go with it.
  CHECK(rec.epochs.back().on_accuracy < 1.0);
  const auto d = toy::make_toy_dataset(0);
  CHECK(accuracy(rec.final_params, d.train) == 1.0);
  int l1 = 0;
  const auto pred = predict(rec.final_params, d.test.inputs.bottomRows(201));
  for (int p : pred) l1 += p == 1;
  CHECK(l1 >= 201);

  const auto on = rec.on_manifold_series();
  CHECK(on.epochs() == 3001);
  CHECK(on.bins() == 65);
  CHECK(band_share(mem.on_manifold, toy::kHighBandStart) > 0.0);
}

TEST_CASE("observer sees every recorded epoch") {
  toy::ToyOptions o;
  o.epochs = 20;
  o.post_memorization = 0;
  std::vector<std::size_t> seen;
  const auto rec = toy::run_toy_experiment(4, o, [&](std::size_t t, const NetParams& p) {
    seen.push_back(t);
    CHECK(p.all_finite());
  });
  CHECK(seen.size() == rec.epochs.size());
  for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == i);
}

TEST_CASE("toy options are validated") {
  toy::ToyOptions o;
  o.epochs = 0;
  CHECK_THROWS_AS(toy::run_toy_experiment(0, o), std::invalid_argument);
  o = {};
  o.layer_sizes = {3, 10, 3};
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
  o = {};
  o.adam.learning_rate = 0.0;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
}

TEST_CASE("toy csv and metadata") {
  toy::ToyOptions o;
  o.epochs = 5;
  o.post_memorization = 0;
  o.samples = 16;
  const auto rec = toy::run_toy_experiment(2, o);
  const fs::path path = fs::temp_directory_path() / "specbias_toy_test.csv";
  toy::write_toy_csv(path, rec);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("epoch,loss,on_acc,off_acc,memorized,on_R_0,", 0) == 0);
  CHECK(header.find("off_R_8") != std::string::npos);
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 6);
  fs::remove(path);

  const auto meta = nlohmann::json::parse(toy::toy_metadata_json(rec));
  CHECK(meta["seed"] == 2);
  CHECK(meta["perturbed_index"] == rec.perturbed_index);
  CHECK(meta["config"]["samples"] == 16);
}
