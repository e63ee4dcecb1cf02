// Fully connected ReLU classifier with softmax cross-entropy and Adam.
//
// Weights are stored output-major (rows = fan-out), inputs are batched as
// rows, so a layer computes Z = X W^T + 1 b^T. Hidden layers apply ReLU, the
// last layer emits raw logits.

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "specbias/spectral.hpp"

namespace specbias {

struct NetConfig {
  /// Input width, hidden widths, class count.
  std::vector<std::size_t> layer_sizes{3, 100, 100, 2};
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument without at least one hidden layer or with
  /// a zero-sized layer.
  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // fan_out x fan_in
  Eigen::VectorXd bias;    // fan_out
};

struct NetParams {
  std::vector<DenseLayer> layers;

  std::size_t input_size() const;
  std::size_t num_classes() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
};

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const NetParams& params, AdamConfig config = {});
};

/// Inputs as rows of `inputs`, one integer label per row.
struct Dataset {
  Eigen::MatrixXd inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

struct LossAndGrad {
  double loss = 0.0;
  NetParams grad;
};

/// He-normal weights (variance 2 / fan_in), zero biases. Bitwise
/// reproducible for a fixed seed.
NetParams init_params(const NetConfig& config);

/// Logits for one input. Throws std::invalid_argument on a dimension mismatch.
Vector forward(const NetParams& params, std::span<const double> x);

/// Logits for every row of `inputs`.
Eigen::MatrixXd forward_batch(const NetParams& params, const Eigen::MatrixXd& inputs);

/// Mean softmax cross-entropy over the dataset and its exact gradient.
LossAndGrad loss_and_grad(const NetParams& params, const Dataset& batch);

/// Bias-corrected Adam update. Throws std::invalid_argument on a non-finite
/// gradient, leaving params and state untouched.
void adam_step(NetParams& params, const NetParams& grads, AdamState& state);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> logits);

std::vector<int> predict(const NetParams& params, const Eigen::MatrixXd& inputs);

/// Fraction of rows whose argmax logit equals the label.
double accuracy(const NetParams& params, const Dataset& data);

/// Multiplies the output layer's weights and bias by alpha.
void scale_output_layer(NetParams& params, double alpha);

/// Batched evaluator over `params`. The parameters must outlive it.
LogitEvaluator as_evaluator(const NetParams& params);

/// Flat little-endian checkpoint; see docs/formats.md.
void save_checkpoint(const std::filesystem::path& path, const NetParams& params,
                     const AdamState* adam = nullptr);

struct Checkpoint {
  NetParams params;
  std::optional<AdamState> adam;
};

/// Throws std::runtime_error on a malformed or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace specbias
