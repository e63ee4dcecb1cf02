#include "specbias/toytask.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "specbias/dataio.hpp"

namespace specbias::toy {

namespace {

constexpr std::uint64_t kDatasetStream = 0;
constexpr std::uint64_t kNetStream = 1;

void fill_line(Dataset& d, Eigen::Index first_row, const Point3& origin, const Point3& direction,
               const Vector& params, int label) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto p = line_point(origin, direction, params[i]);
    const auto row = first_row + static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < 3; ++j) d.inputs(row, j) = p[static_cast<std::size_t>(j)];
    d.labels[static_cast<std::size_t>(row)] = label;
  }
}

Eigen::MatrixXd line_matrix(const Point3& origin, const Point3& direction, std::size_t count) {
  const auto ks = line_parameters(count);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(count), 3);
  for (std::size_t i = 0; i < count; ++i) {
    const auto p = line_point(origin, direction, ks[i]);
    for (Eigen::Index j = 0; j < 3; ++j) m(static_cast<Eigen::Index>(i), j) = p[static_cast<std::size_t>(j)];
  }
  return m;
}

double fraction_of_class(const NetParams& params, const Eigen::MatrixXd& points, int label) {
  const auto pred = predict(params, points);
  std::size_t hits = 0;
  for (int p : pred) hits += p == label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

SpectrumSeries series_of(const ToyRunRecord& r, bool on) {
  std::vector<Vector> ratios;
  ratios.reserve(r.epochs.size());
  for (const auto& e : r.epochs) ratios.push_back(on ? e.on_manifold.values : e.off_manifold.values);
  return SpectrumSeries::from_ratios(std::move(ratios));
}

}  // namespace

Vector line_point(const Point3& origin, const Point3& direction, double k) {
  return {origin[0] + k * direction[0], origin[1] + k * direction[1], origin[2] + k * direction[2]};
}

Vector line_parameters(std::size_t count) {
  if (count < 2) throw std::invalid_argument("line_parameters: need at least 2 points");
  Vector ks(count);
  const double denom = static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i)
    ks[i] = (2.0 * static_cast<double>(i) - denom) / denom;
  return ks;
}

ToyDataset make_toy_dataset(std::uint64_t seed) {
  ToyDataset d;
  const auto train_k = line_parameters(kTrainPerLine);
  const auto test_k = line_parameters(kTestPerLine);

  d.train.inputs.resize(2 * kTrainPerLine, 3);
  d.train.labels.resize(2 * kTrainPerLine);
  fill_line(d.train, 0, kR0, kV0, train_k, 0);
  fill_line(d.train, kTrainPerLine, kR1, kV1, train_k, 1);

  d.test.inputs.resize(2 * kTestPerLine, 3);
  d.test.labels.resize(2 * kTestPerLine);
  fill_line(d.test, 0, kR0, kV0, test_k, 0);
  fill_line(d.test, kTestPerLine, kR1, kV1, test_k, 1);

  std::mt19937_64 rng(mix_seed(seed, kDatasetStream));
  std::uniform_int_distribution<std::size_t> pick(0, kTrainPerLine - 1);
  d.perturbed_index = pick(rng);
  d.train.labels[d.perturbed_index] = 1;
  return d;
}

double on_manifold_accuracy(const NetParams& params, const ToyDataset& data) {
  return fraction_of_class(params, data.test.inputs.topRows(kTestPerLine), 0);
}

double off_manifold_accuracy(const NetParams& params) {
  static const Eigen::MatrixXd points = line_matrix(kR0, kV1, kTestPerLine);
  return fraction_of_class(params, points, 0);
}

std::pair<Vector, Vector> on_manifold_segment() {
  return {line_point(kR0, kV0, -1.0), line_point(kR0, kV0, 1.0)};
}

std::pair<Vector, Vector> off_manifold_segment() {
  return {line_point(kR0, kV1, -1.0), line_point(kR0, kV1, 1.0)};
}

void ToyOptions::validate() const {
  if (epochs < 1) throw std::invalid_argument("toy: epochs must be at least 1");
  if (samples < 2) throw std::invalid_argument("toy: samples must be at least 2");
  NetConfig{layer_sizes, 0}.validate();
  if (layer_sizes.front() != 3 || layer_sizes.back() != 2)
    throw std::invalid_argument("toy: network must map 3 inputs to 2 classes");
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("toy: learning rate must be positive");
}

SpectrumSeries ToyRunRecord::on_manifold_series() const { return series_of(*this, true); }
SpectrumSeries ToyRunRecord::off_manifold_series() const { return series_of(*this, false); }

ToyRunRecord run_toy_experiment(std::uint64_t seed, const ToyOptions& options,
                                const EpochObserver& observer) {
  options.validate();
  const ToyDataset data = make_toy_dataset(seed);

  ToyRunRecord rec;
  rec.seed = seed;
  rec.options = options;
  rec.perturbed_index = data.perturbed_index;

  NetParams params = init_params(NetConfig{options.layer_sizes, mix_seed(seed, kNetStream)});
  AdamState adam = AdamState::zeros_like(params, options.adam);
  const auto f = as_evaluator(params);
  const auto [on_start, on_end] = on_manifold_segment();
  const auto [off_start, off_end] = off_manifold_segment();
  const Eigen::MatrixXd perturbed_point = data.train.inputs.row(
      static_cast<Eigen::Index>(data.perturbed_index));

  bool seen_clean = false;
  for (std::size_t t = 0;; ++t) {
    auto lg = loss_and_grad(params, data.train);
    if (!std::isfinite(lg.loss) || !params.all_finite())
      throw std::runtime_error("toy: training diverged at epoch " + std::to_string(t));

    ToyEpoch e;
    e.epoch = t;
    e.loss = lg.loss;
    e.on_accuracy = on_manifold_accuracy(params, data);
    e.off_accuracy = off_manifold_accuracy(params);
    e.memorized = predict(params, perturbed_point).front() == 1;
    e.on_manifold = energy_ratio(line_spectrum(f, on_start, on_end, options.samples));
    e.off_manifold = energy_ratio(line_spectrum(f, off_start, off_end, options.samples));
    if (!e.memorized) seen_clean = true;
    if (e.memorized && seen_clean && !rec.memorization_epoch) rec.memorization_epoch = t;
    rec.epochs.push_back(std::move(e));
    if (observer) observer(t, params);

    std::size_t target = options.epochs;
    if (rec.memorization_epoch)
      target = std::max(target, *rec.memorization_epoch + options.post_memorization);
    if (t >= target) break;
    adam_step(params, lg.grad, adam);
  }
  rec.final_params = std::move(params);
  return rec;
}

void write_toy_csv(const std::filesystem::path& path, const ToyRunRecord& record) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::size_t bins = record.epochs.empty() ? 0 : record.epochs.front().on_manifold.values.size();
  std::string line = "epoch,loss,on_acc,off_acc,memorized";
  for (std::size_t k = 0; k < bins; ++k) line += ",on_R_" + std::to_string(k);
  for (std::size_t k = 0; k < bins; ++k) line += ",off_R_" + std::to_string(k);
  out << line << '\n';
  for (const auto& e : record.epochs) {
    line = std::to_string(e.epoch);
    line += ',' + format_number(e.loss);
    line += ',' + format_number(e.on_accuracy);
    line += ',' + format_number(e.off_accuracy);
    line += e.memorized ? ",1" : ",0";
    for (double v : e.on_manifold.values) line += ',' + format_number(v);
    for (double v : e.off_manifold.values) line += ',' + format_number(v);
    out << line << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string toy_metadata_json(const ToyRunRecord& record) {
  nlohmann::ordered_json j;
  j["tool"] = "specbias toy";
  j["seed"] = record.seed;
  j["perturbed_index"] = record.perturbed_index;
  j["memorization_epoch"] =
      record.memorization_epoch ? nlohmann::ordered_json(*record.memorization_epoch) : nullptr;
  j["recorded_epochs"] = record.epochs.size();
  const auto& o = record.options;
  j["config"] = {{"min_epochs", o.epochs},
                 {"post_memorization", o.post_memorization},
                 {"samples", o.samples},
                 {"layer_sizes", o.layer_sizes},
                 {"learning_rate", o.adam.learning_rate},
                 {"beta1", o.adam.beta1},
                 {"beta2", o.adam.beta2},
                 {"adam_epsilon", o.adam.epsilon}};
  j["conventions"] = {
      {"epoch", "one full-batch Adam step; row t is the network after t steps"},
      {"log_base", "e"},
      {"energy_floor", kEnergyFloor},
      {"initialization", "He normal weights, zero biases"},
      {"off_manifold_labels", "all l_perp points treated as class 0"},
      {"memorization", "first class-1 prediction of the perturbed point after a class-0 prediction"},
      {"high_band_start", kHighBandStart}};
  return j.dump(2) + "\n";
}

}  // namespace specbias::toy
