// Epoch-indexed series analysis: smoothing, short-time correlation,
// aggregated spectrum series, and patience-based extremum search.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "specbias/spectral.hpp"

namespace specbias {

/// A scalar value per epoch, epochs counted from 0.
struct EpochSeries {
  std::string name;
  Vector values;

  std::size_t size() const { return values.size(); }
};

/// R_{k,t}: `ratios[t]` holds the energy ratios of epoch t over k = 0..K.
/// `weights` are the alpha_k used by aggregate_rt.
struct SpectrumSeries {
  std::vector<Vector> ratios;
  Vector weights;

  std::size_t epochs() const { return ratios.size(); }
  std::size_t bins() const { return ratios.empty() ? 0 : ratios.front().size(); }

  /// Unit weights on k in [first, last] clipped to the available bins, zero elsewhere.
  static Vector band_weights(std::size_t bins, std::size_t first = 1, std::size_t last = 64);

  /// Builds a series from per-epoch ratios with band_weights(bins).
  static SpectrumSeries from_ratios(std::vector<Vector> ratios);

  /// Frequency row k as an epoch series.
  EpochSeries row(std::size_t k) const;

  /// Throws std::invalid_argument if the matrix is ragged, the weights have
  /// the wrong length, are negative, or are all zero.
  void validate() const;
};

/// Short-time correlation values; std::nullopt marks a zero-variance window.
using PccSeries = std::vector<std::optional<double>>;

/// Trailing mean over [max(0, t - window + 1), t].
EpochSeries mean_filter(const EpochSeries& series, std::size_t window);

/// Pearson correlation in every window [t, t + window - 1]. Output length is
/// size - window + 1.
PccSeries short_time_pcc(const EpochSeries& x, const EpochSeries& y, std::size_t window);

/// Mean over k of short_time_pcc(row k of x, row k of y), restricted to bins
/// with a non-zero weight in x and skipping missing entries. A slot is missing
/// only when every bin is.
PccSeries averaged_spectrum_pcc(const SpectrumSeries& x, const SpectrumSeries& y,
                                std::size_t window);

/// R_t = sum_k alpha_k R_{k,t}.
EpochSeries aggregate_rt(const SpectrumSeries& spectrum);

/// Outcome of one patience scan.
struct PatienceResult {
  std::size_t epoch = 0;
  /// The series ended before `patience` non-improving epochs accumulated.
  bool exhausted = false;
  /// (epoch, best value so far) for every scanned epoch.
  std::vector<std::pair<std::size_t, double>> trace;
};

/// Early-stopping style minimum search from epoch 0. Only strict improvements
/// reset the counter, so ties resolve to the first epoch reaching the value.
PatienceResult find_min_patience(const EpochSeries& series, std::size_t patience);

/// Same scan maximizing, starting at `start`.
PatienceResult find_peak_after(const EpochSeries& series, std::size_t start, std::size_t patience);

struct PeakReport {
  std::size_t t_min = 0;
  std::size_t t_peak = 0;
  std::size_t patience = 0;
  std::size_t smooth_window = 0;
  bool min_exhausted = false;
  bool peak_exhausted = false;
  std::vector<std::pair<std::size_t, double>> min_trace;
  std::vector<std::pair<std::size_t, double>> peak_trace;
};

inline constexpr std::size_t kDefaultPatience = 30;
inline constexpr std::size_t kDefaultSmoothWindow = 10;
inline constexpr std::size_t kDefaultPccWindow = 100;
inline constexpr std::size_t kDefaultRateHalfWindow = 5;

/// Smooths a scalar series, then runs the minimum search followed by the
/// peak search from that minimum.
PeakReport detect_extrema(const EpochSeries& series, std::size_t patience = kDefaultPatience,
                          std::size_t smooth_window = 1);

/// Smooths every frequency row, aggregates to R_t, and runs detect_extrema.
PeakReport detect_second_descent(const SpectrumSeries& spectrum,
                                 std::size_t patience = kDefaultPatience,
                                 std::size_t smooth_window = kDefaultSmoothWindow);

struct RatePeak {
  std::size_t epoch = 0;
  /// rate[t - 1] = P_{t-1} - P_t for t = 1..T-1.
  Vector rate;
  /// Centred mean of `rate` over t +/- half_window, truncated at the ends.
  Vector smoothed;
};

/// Epoch of the fastest smoothed decrease of P. Ties go to the earliest epoch.
RatePeak perturbed_rate_peak(const EpochSeries& perturbed_error,
                             std::size_t half_window = kDefaultRateHalfWindow);

}  // namespace specbias
