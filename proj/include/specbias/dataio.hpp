// Label-noise injection, the logit-ray dump interchange format, CSV series
// files and SVG heatmaps.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "specbias/analysis.hpp"
#include "specbias/spectral.hpp"

namespace specbias {

// ---------------------------------------------------------------------------
// Label noise

struct LabelSet {
  std::vector<int> labels;
  int num_classes = 0;
  /// True where the label was changed by inject_label_noise. Empty means
  /// nothing perturbed yet.
  std::vector<bool> perturbed_mask;

  void validate() const;
};

/// Relabels exactly round(fraction * n) entries chosen uniformly without
/// replacement. Each chosen label is redrawn uniformly from the other
/// num_classes - 1 classes, so it always changes. Masks accumulate over
/// repeated calls.
LabelSet inject_label_noise(const LabelSet& labels, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Logit-ray dump

enum class RayPolicy : std::uint32_t { kFixed = 0, kResampled = 1 };

/// Logits sampled along M rays of N points for each of T epochs, C classes.
/// `logits` is laid out [t][m][n][c], c fastest.
struct LogitRayDump {
  std::uint64_t epochs = 0;
  std::uint64_t rays = 0;
  std::uint64_t samples = 0;
  std::uint64_t classes = 0;
  double half_width = 0.5;
  RayPolicy policy = RayPolicy::kFixed;
  Vector logits;

  std::size_t index(std::size_t t, std::size_t m, std::size_t n, std::size_t c) const {
    return ((t * rays + m) * samples + n) * classes + c;
  }
  std::size_t expected_size() const { return epochs * rays * samples * classes; }
};

class DumpError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kVersion, kTruncated, kChecksum, kInconsistent, kTrailingData };

  DumpError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kDumpVersion = 1;

std::vector<char> encode_dump(const LogitRayDump& dump);
LogitRayDump decode_dump(const std::vector<char>& bytes);

void write_dump(const std::filesystem::path& path, const LogitRayDump& dump);
LogitRayDump read_dump(const std::filesystem::path& path);

/// Appends one epoch of sampled logits (`per_ray[m][n][c]`) to a dump.
void append_epoch(LogitRayDump& dump, const std::vector<std::vector<Vector>>& per_ray);

/// Per epoch: A_k averaged over rays and classes, then R_k. Weights default
/// to unit weights on k = 1..64.
SpectrumSeries spectrum_from_dump(const LogitRayDump& dump);

// ---------------------------------------------------------------------------
// CSV

/// Shortest decimal text that parses back to the same double; "NA" for NaN.
std::string format_number(double value);

/// Parses a finite number or "NA" (returned as NaN). std::nullopt on junk.
std::optional<double> parse_number(std::string_view text);

class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Columns `epoch,<name>...`; every series must have the same length.
void write_series_csv(const std::filesystem::path& path, const std::vector<EpochSeries>& series);
std::vector<EpochSeries> read_series_csv(const std::filesystem::path& path);

/// Columns `epoch,R_0..R_K`, one row per epoch. Missing values are NaN in
/// memory and "NA" on disk.
void write_spectrum_csv(const std::filesystem::path& path, const SpectrumSeries& spectrum);
/// Weights are reset to SpectrumSeries::band_weights.
SpectrumSeries read_spectrum_csv(const std::filesystem::path& path);

/// Columns `epoch,pcc`; missing windows written as "NA".
void write_pcc_csv(const std::filesystem::path& path, const PccSeries& pcc);

/// Columns `index,label,original,perturbed`.
void write_labels_csv(const std::filesystem::path& path, const LabelSet& labels,
                      const std::vector<int>& original);
/// Reads either a bare `label` column or the four-column form written above.
/// The mask is taken from the `perturbed` column when present.
LabelSet read_labels_csv(const std::filesystem::path& path, int num_classes);

// ---------------------------------------------------------------------------
// Heatmap

struct HeatmapSpec {
  /// matrix[t][k]; NaN entries are drawn as missing.
  std::vector<Vector> matrix;
  /// X coordinate of each column; must be positive on a log axis.
  Vector epoch_values;
  Vector contour_levels;
  bool log_epoch_axis = true;
  /// Columns kept after stride downsampling; 0 keeps all.
  std::size_t max_columns = 400;
  std::string title;
};

/// Colormap from the unit interval to RGB, quantized to 256 levels.
struct Rgb {
  int r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};
Rgb colormap(double unit);
/// Inverse of colormap: the level index (0..255) of an exact palette colour.
std::optional<int> colormap_level(const Rgb& color);
inline constexpr Rgb kMissingColor{200, 200, 200};

/// Standalone SVG document text.
std::string render_heatmap(const HeatmapSpec& spec);
void emit_heatmap(const HeatmapSpec& spec, const std::filesystem::path& path);

/// Heatmap of a spectrum series with epochs plotted at t + 1 on a log axis.
HeatmapSpec heatmap_from_spectrum(const SpectrumSeries& spectrum, Vector contour_levels = {});

}  // namespace specbias
