// Directional Fourier spectrum of a classifier's logit surface.
//
// A RayProbe picks a 1-D slice [x - h v, x + h v] of input space, sampled at
// N evenly spaced points. Every class logit is evaluated along the slice and
// transformed with
//
//   F_c(k) = sum_{n=1..N} f_c(x + (2n - N - 1)/(N - 1) h v) exp(-i 2 pi n k / N)
//
// (1-based phase index, kept exactly as written even though the grid uses an
// (N - 1) spacing). Power spectra are averaged over probes and classes into
// A_k and summarized as the log energy ratio R_k = ln(A_k / sum_j A_j) over
// the half band k = 0..floor(N/2).

#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

namespace specbias {

using Vector = std::vector<double>;

/// Floor applied to A_k before taking the logarithm.
inline constexpr double kEnergyFloor = 1e-30;

/// Tolerance on ||direction|| - 1 accepted by RayProbe.
inline constexpr double kUnitTolerance = 1e-9;

/// A 1-D evenly sampled slice of input space centred on `anchor`.
class RayProbe {
 public:
  /// Throws std::invalid_argument unless direction is unit length, the
  /// dimensions agree, half_width > 0 and samples >= 2.
  RayProbe(Vector anchor, Vector direction, double half_width, std::size_t samples);

  const Vector& anchor() const { return anchor_; }
  const Vector& direction() const { return direction_; }
  double half_width() const { return half_width_; }
  std::size_t samples() const { return samples_; }
  std::size_t dimension() const { return anchor_.size(); }

 private:
  Vector anchor_;
  Vector direction_;
  double half_width_;
  std::size_t samples_;
};

/// Maps input points to logit vectors of a fixed length C.
///
/// Either wraps a per-point callable or a batched one; the batched form lets
/// a network push a whole ray through one matrix product. The class count is
/// latched on the first evaluation and checked on every later one.
class LogitEvaluator {
 public:
  using PointFn = std::function<Vector(std::span<const double>)>;
  using BatchFn = std::function<std::vector<Vector>(const std::vector<Vector>&)>;

  static LogitEvaluator pointwise(PointFn fn);
  static LogitEvaluator batched(BatchFn fn);

  /// Evaluates every point. Throws std::runtime_error if the callable
  /// returns a different number of rows or a logit vector whose length
  /// disagrees with earlier calls.
  std::vector<Vector> evaluate(const std::vector<Vector>& points) const;

  /// Number of classes seen so far, 0 before the first call.
  std::size_t num_classes() const { return *classes_; }

 private:
  PointFn point_;
  BatchFn batch_;
  std::shared_ptr<std::size_t> classes_ = std::make_shared<std::size_t>(0);
};

/// Power spectrum over the half band k = 0..floor(N/2).
struct PowerSpectrum {
  Vector values;
  std::size_t sample_count = 0;
};

/// Natural-log energy ratios R_k. `floored` is set when at least one A_k was
/// raised to kEnergyFloor before the logarithm.
struct EnergyRatio {
  Vector values;
  bool floored = false;
};

/// Grid point n (1-based) is anchor + ((2n - N - 1)/(N - 1)) h direction.
std::vector<Vector> ray_grid(const RayProbe& probe);

/// Full-band transform with the 1-based phase convention, k = 0..N-1.
/// Radix-2 FFT for power-of-two N, direct summation otherwise.
std::vector<std::complex<double>> dft(std::span<const double> signal);

/// |F(k)|^2 for k = 0..floor(N/2). Throws on an empty signal.
Vector dft_power(std::span<const double> signal);

/// Per-class power spectrum of already sampled logits, averaged over classes:
/// `logits[n][c]` is class c at grid point n.
PowerSpectrum class_averaged_power(const std::vector<Vector>& logits);

PowerSpectrum ray_class_spectrum(const LogitEvaluator& f, const RayProbe& probe,
                                 std::size_t class_index);

/// A_k: mean over probes, then over classes, of the per-ray power spectra.
/// All probes must share the same sample count.
PowerSpectrum aggregate_spectrum(const LogitEvaluator& f, std::span<const RayProbe> probes);

/// R_k = ln(A_k / sum_j A_j). Throws std::invalid_argument if the total
/// energy is not positive.
EnergyRatio energy_ratio(const PowerSpectrum& spectrum);

/// Exact spectrum of the segment [start, end], averaged over classes.
/// Equivalent to a RayProbe centred on the midpoint.
PowerSpectrum line_spectrum(const LogitEvaluator& f, const Vector& start, const Vector& end,
                            std::size_t samples);

/// Isotropic unit vector from normalized standard Gaussian draws.
Vector sample_unit_direction(std::mt19937_64& rng, std::size_t dimension);

/// Builds one probe per anchor. Probe i draws its direction from its own
/// stream seeded by mix_seed(root_seed, i), so the result does not depend on
/// evaluation order.
std::vector<RayProbe> make_probes(std::span<const Vector> anchors, double half_width,
                                  std::size_t samples, std::uint64_t root_seed);

/// SplitMix64 finalizer over (root, stream).
std::uint64_t mix_seed(std::uint64_t root, std::uint64_t stream);

/// Sum of exp(R_k) over k >= first_bin.
double band_share(const EnergyRatio& ratio, std::size_t first_bin);

}  // namespace specbias
