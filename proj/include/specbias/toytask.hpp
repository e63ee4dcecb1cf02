// Two-line toy task: separate l_0 = {r0 + k v0} (class 0) from
// l_1 = {r1 + k v1} (class 1), k in [-1, 1], with one l_0 training point
// relabelled as class 1. The off-manifold line l_perp = {r0 + k v1} crosses
// l_0 at r0 perpendicularly and lies entirely in the plane x + y + z = 0.3.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "specbias/analysis.hpp"
#include "specbias/smallnet.hpp"
#include "specbias/spectral.hpp"

namespace specbias::toy {

using Point3 = std::array<double, 3>;

inline const Point3 kR0{0.1, 0.1, 0.1};
inline const Point3 kR1{-0.1, -0.1, -0.1};
// (1/sqrt 2)[1, -1, 0] and (1/sqrt 6)[1, 1, -2].
inline const Point3 kV0{0.70710678118654752440, -0.70710678118654752440, 0.0};
inline const Point3 kV1{0.40824829046386301637, 0.40824829046386301637, -0.81649658092772603273};

inline constexpr std::size_t kTrainPerLine = 51;
inline constexpr std::size_t kTestPerLine = 201;
inline constexpr std::size_t kHighBandStart = 16;

/// origin + k * direction.
Vector line_point(const Point3& origin, const Point3& direction, double k);

/// `count` evenly spaced parameters from -1 to 1 inclusive.
Vector line_parameters(std::size_t count);

struct ToyDataset {
  /// Rows 0..50 lie on l_0, rows 51..101 on l_1.
  Dataset train;
  /// Rows 0..200 lie on l_0, rows 201..401 on l_1; labels unperturbed.
  Dataset test;
  /// Row of `train` whose label was flipped from 0 to 1.
  std::size_t perturbed_index = 0;
};

/// Perturbed index drawn uniformly from the 51 l_0 training points.
ToyDataset make_toy_dataset(std::uint64_t seed);

/// Accuracy over the unperturbed l_0 test points (all class 0).
double on_manifold_accuracy(const NetParams& params, const ToyDataset& data);

/// Fraction of 201 evenly spaced l_perp points predicted class 0.
double off_manifold_accuracy(const NetParams& params);

struct ToyOptions {
  /// Minimum number of full-batch Adam steps; one step is one epoch.
  std::size_t epochs = 20000;
  /// Training continues until this many steps past memorization.
  std::size_t post_memorization = 10000;
  std::size_t samples = 128;
  std::vector<std::size_t> layer_sizes{3, 100, 100, 2};
  AdamConfig adam{};

  void validate() const;
};

struct ToyEpoch {
  std::size_t epoch = 0;
  double loss = 0.0;
  double on_accuracy = 0.0;
  double off_accuracy = 0.0;
  bool memorized = false;
  EnergyRatio on_manifold;
  EnergyRatio off_manifold;
};

struct ToyRunRecord {
  std::uint64_t seed = 0;
  ToyOptions options;
  std::size_t perturbed_index = 0;
  /// Entry t describes the network after t Adam steps.
  std::vector<ToyEpoch> epochs;
  /// First epoch at which the perturbed point is predicted class 1, counted
  /// only after it has been predicted class 0 at least once.
  std::optional<std::size_t> memorization_epoch;
  NetParams final_params;

  SpectrumSeries on_manifold_series() const;
  SpectrumSeries off_manifold_series() const;
};

/// Called once per recorded epoch with the parameters of that epoch.
using EpochObserver = std::function<void(std::size_t epoch, const NetParams& params)>;

/// Trains with full-batch Adam and records both line spectra, accuracies and
/// the memorization flag before every step and after the last one. Throws
/// std::runtime_error naming the epoch if the loss becomes non-finite.
ToyRunRecord run_toy_experiment(std::uint64_t seed, const ToyOptions& options = {},
                                const EpochObserver& observer = {});

/// Endpoints of l_0 and l_perp.
std::pair<Vector, Vector> on_manifold_segment();
std::pair<Vector, Vector> off_manifold_segment();

/// One CSV row per epoch: epoch, loss, on_acc, off_acc, memorized, then
/// on_R_0..on_R_K and off_R_0..off_R_K.
void write_toy_csv(const std::filesystem::path& path, const ToyRunRecord& record);

/// Run metadata (seed, configuration, memorization epoch, decisions) as JSON text.
std::string toy_metadata_json(const ToyRunRecord& record);

}  // namespace specbias::toy
