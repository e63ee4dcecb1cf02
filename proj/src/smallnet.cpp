#include "specbias/smallnet.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"

namespace specbias {

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'B', 'N', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<DenseLayer> zeros_like(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> out;
  out.reserve(layers.size());
  for (const auto& l : layers)
    out.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                   Eigen::VectorXd::Zero(l.bias.size())});
  return out;
}

// Activations of every layer, inputs included; the last entry holds logits.
std::vector<Eigen::MatrixXd> forward_trace(const NetParams& params, const Eigen::MatrixXd& x) {
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(params.layers.size() + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Eigen::MatrixXd z = acts.back() * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (l + 1 < params.layers.size()) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  return acts;
}

void check_input(const NetParams& params, Eigen::Index cols) {
  if (params.layers.empty()) throw std::invalid_argument("network has no layers");
  if (static_cast<std::size_t>(cols) != params.input_size())
    throw std::invalid_argument("input has dimension " + std::to_string(cols) + ", network expects " +
                                std::to_string(params.input_size()));
}

void write_layers(detail::ByteWriter& w, const std::vector<DenseLayer>& layers) {
  for (const auto& l : layers) {
    // Row-major weights.
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.put<double>(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.put<double>(l.bias(r));
  }
}

bool read_layers(detail::ByteReader& r, std::vector<DenseLayer>& layers) {
  for (auto& l : layers) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
        if (!r.get<double>(l.weight(i, j))) return false;
    for (Eigen::Index i = 0; i < l.bias.size(); ++i)
      if (!r.get<double>(l.bias(i))) return false;
  }
  return true;
}

}  // namespace

void NetConfig::validate() const {
  if (layer_sizes.size() < 3)
    throw std::invalid_argument("network needs input, at least one hidden layer, and output");
  for (auto s : layer_sizes)
    if (s == 0) throw std::invalid_argument("layer sizes must be positive");
}

std::size_t NetParams::input_size() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weight.cols());
}

std::size_t NetParams::num_classes() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weight.rows());
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool NetParams::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

AdamState AdamState::zeros_like(const NetParams& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  s.first_moment = specbias::zeros_like(params.layers);
  s.second_moment = specbias::zeros_like(params.layers);
  return s;
}

NetParams init_params(const NetConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  NetParams p;
  for (std::size_t l = 0; l + 1 < config.layer_sizes.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(config.layer_sizes[l]);
    const auto fan_out = static_cast<Eigen::Index>(config.layer_sizes[l + 1]);
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (Eigen::Index r = 0; r < fan_out; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weight(r, c) = scale * gauss(rng);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

Vector forward(const NetParams& params, std::span<const double> x) {
  check_input(params, static_cast<Eigen::Index>(x.size()));
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = x[i];
  const Eigen::MatrixXd logits = forward_batch(params, row);
  return Vector(logits.data(), logits.data() + logits.size());
}

Eigen::MatrixXd forward_batch(const NetParams& params, const Eigen::MatrixXd& inputs) {
  check_input(params, inputs.cols());
  Eigen::MatrixXd h = inputs;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Eigen::MatrixXd z = h * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (l + 1 < params.layers.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

LossAndGrad loss_and_grad(const NetParams& params, const Dataset& batch) {
  if (batch.size() == 0) throw std::invalid_argument("loss_and_grad: empty batch");
  if (static_cast<std::size_t>(batch.inputs.rows()) != batch.size())
    throw std::invalid_argument("loss_and_grad: label count does not match input rows");
  check_input(params, batch.inputs.cols());

  const auto acts = forward_trace(params, batch.inputs);
  const Eigen::MatrixXd& logits = acts.back();
  const auto n = static_cast<double>(batch.size());
  const auto classes = logits.cols();

  // delta = (softmax - onehot) / n, loss via a shifted log-sum-exp.
  Eigen::MatrixXd delta(logits.rows(), classes);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int label = batch.labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= classes)
      throw std::invalid_argument("loss_and_grad: label out of range");
    const double shift = logits.row(i).maxCoeff();
    double denom = 0.0;
    for (Eigen::Index c = 0; c < classes; ++c) denom += std::exp(logits(i, c) - shift);
    const double log_denom = std::log(denom);
    loss += log_denom - (logits(i, label) - shift);
    for (Eigen::Index c = 0; c < classes; ++c)
      delta(i, c) = std::exp(logits(i, c) - shift - log_denom) / n;
    delta(i, label) -= 1.0 / n;
  }

  LossAndGrad out;
  out.loss = loss / n;
  out.grad.layers.resize(params.layers.size());
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    auto& g = out.grad.layers[l];
    g.weight = delta.transpose() * acts[l];
    g.bias = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd back = delta * params.layers[l].weight;
      // ReLU gate: acts[l] is post-activation, positive exactly where the unit fired.
      delta = (acts[l].array() > 0.0).select(back, 0.0);
    }
  }
  return out;
}

void adam_step(NetParams& params, const NetParams& grads, AdamState& state) {
  if (grads.layers.size() != params.layers.size() ||
      state.first_moment.size() != params.layers.size())
    throw std::invalid_argument("adam_step: layer count mismatch");
  if (!grads.all_finite()) throw std::invalid_argument("adam_step: non-finite gradient");

  const auto& hp = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = hp.beta1 * m + (1.0 - hp.beta1) * grad;
    v = hp.beta2 * v + (1.0 - hp.beta2) * grad.cwiseProduct(grad);
    param.array() -= hp.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + hp.epsilon);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads.layers[l];
    if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() ||
        g.bias.size() != p.bias.size())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    update(p.weight, g.weight, state.first_moment[l].weight, state.second_moment[l].weight);
    update(p.bias, g.bias, state.first_moment[l].bias, state.second_moment[l].bias);
  }
}

std::size_t argmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("argmax: empty logits");
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c)
    if (logits[c] > logits[best]) best = c;
  return best;
}

std::vector<int> predict(const NetParams& params, const Eigen::MatrixXd& inputs) {
  const Eigen::MatrixXd logits = forward_batch(params, inputs);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  Vector row(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index c = 0; c < logits.cols(); ++c) row[static_cast<std::size_t>(c)] = logits(i, c);
    out[static_cast<std::size_t>(i)] = static_cast<int>(argmax(row));
  }
  return out;
}

double accuracy(const NetParams& params, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
  const auto pred = predict(params, data.inputs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data.labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

void scale_output_layer(NetParams& params, double alpha) {
  if (params.layers.empty()) return;
  params.layers.back().weight *= alpha;
  params.layers.back().bias *= alpha;
}

LogitEvaluator as_evaluator(const NetParams& params) {
  return LogitEvaluator::batched([&params](const std::vector<Vector>& points) {
    std::vector<Vector> out;
    if (points.empty()) return out;
    const auto dim = static_cast<Eigen::Index>(points.front().size());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(points.size()), dim);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (static_cast<Eigen::Index>(points[i].size()) != dim)
        throw std::invalid_argument("evaluator: ragged input points");
      for (Eigen::Index j = 0; j < dim; ++j)
        x(static_cast<Eigen::Index>(i), j) = points[i][static_cast<std::size_t>(j)];
    }
    const Eigen::MatrixXd logits = forward_batch(params, x);
    out.resize(points.size(), Vector(static_cast<std::size_t>(logits.cols())));
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
      for (Eigen::Index c = 0; c < logits.cols(); ++c)
        out[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = logits(i, c);
    return out;
  });
}

void save_checkpoint(const std::filesystem::path& path, const NetParams& params,
                     const AdamState* adam) {
  detail::ByteWriter w;
  w.put_bytes(kCheckpointMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(params.layers.size());
  for (const auto& l : params.layers) {
    w.put<std::uint64_t>(static_cast<std::uint64_t>(l.weight.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(l.weight.cols()));
  }
  write_layers(w, params.layers);
  w.put<std::uint8_t>(adam ? 1 : 0);
  if (adam) {
    w.put<std::uint64_t>(adam->step);
    w.put<double>(adam->config.learning_rate);
    w.put<double>(adam->config.beta1);
    w.put<double>(adam->config.beta2);
    w.put<double>(adam->config.epsilon);
    write_layers(w, adam->first_moment);
    write_layers(w, adam->second_moment);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader r(bytes);
  const auto fail = [&](const std::string& why) -> Checkpoint {
    throw std::runtime_error("checkpoint " + path.string() + ": " + why);
  };

  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t count = 0;
  if (!r.get_bytes(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) return fail("bad magic");
  if (!r.get(version) || version != kCheckpointVersion) return fail("unsupported version");
  if (!r.get(count) || count == 0 || count > 1024) return fail("bad layer count");

  Checkpoint ck;
  ck.params.layers.resize(count);
  for (auto& l : ck.params.layers) {
    std::uint64_t rows = 0, cols = 0;
    if (!r.get(rows) || !r.get(cols)) return fail("truncated shape table");
    if (rows == 0 || cols == 0 || rows * cols > r.remaining() / sizeof(double))
      return fail("implausible layer shape");
    l.weight.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    l.bias.resize(static_cast<Eigen::Index>(rows));
  }
  for (std::size_t i = 1; i < ck.params.layers.size(); ++i)
    if (ck.params.layers[i].weight.cols() != ck.params.layers[i - 1].weight.rows())
      return fail("inconsistent layer shapes");
  if (!read_layers(r, ck.params.layers)) return fail("truncated parameters");

  std::uint8_t has_adam = 0;
  if (!r.get(has_adam)) return fail("truncated adam flag");
  if (has_adam == 1) {
    AdamState s = AdamState::zeros_like(ck.params);
    if (!r.get(s.step) || !r.get(s.config.learning_rate) || !r.get(s.config.beta1) ||
        !r.get(s.config.beta2) || !r.get(s.config.epsilon))
      return fail("truncated adam header");
    if (!read_layers(r, s.first_moment) || !read_layers(r, s.second_moment))
      return fail("truncated adam moments");
    ck.adam = std::move(s);
  } else if (has_adam != 0) {
    return fail("bad adam flag");
  }
  if (r.remaining() != 0) return fail("trailing bytes");
  return ck;
}

}  // namespace specbias
