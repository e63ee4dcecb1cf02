// Subcommand implementations behind the `specbias` executable. Each command
// takes a fully parsed configuration, writes its artifacts plus a JSON
// metadata sidecar, and throws one of the error types below on failure.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace specbias::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 2, kInputFormat = 3, kRuntime = 4 };

/// Invalid flag values or combinations.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable or malformed input files.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ToyCommand {
  std::uint64_t seed = 0;
  std::size_t epochs = 20000;
  std::size_t post_memorization = 10000;
  std::size_t samples = 128;
  double learning_rate = 5e-4;
  std::filesystem::path out_dir;
  bool svg = false;
  /// Write train/test logit-ray dumps every this many epochs; 0 disables.
  std::size_t dump_every = 0;
  std::size_t dump_rays = 16;
  double half_width = 0.5;
};

struct SpectrumCommand {
  std::filesystem::path dump;
  std::filesystem::path out;
};

struct AnalyzeCommand {
  std::filesystem::path spectrum;
  std::optional<std::filesystem::path> test_error;
  std::optional<std::string> test_error_column;
  std::optional<std::filesystem::path> perturbed_error;
  std::optional<std::string> perturbed_error_column;
  std::size_t patience = 30;
  std::size_t smooth_window = 10;
  std::size_t error_smooth_window = 1;
  std::size_t rate_half_window = 5;
  std::size_t k_first = 1;
  std::size_t k_last = 64;
  std::filesystem::path out;
};

struct PccCommand {
  std::filesystem::path x;
  std::filesystem::path y;
  std::size_t window = 100;
  /// Treat both inputs as spectrum files and average over k_first..k_last.
  bool matrix = false;
  std::optional<std::string> column;
  std::size_t k_first = 1;
  std::size_t k_last = 64;
  std::filesystem::path out;
};

struct NoiseCommand {
  std::filesystem::path labels;
  int classes = 10;
  double fraction = 0.1;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct HeatmapCommand {
  std::filesystem::path spectrum;
  std::filesystem::path out;
  std::vector<double> levels;
  bool linear_axis = false;
  std::size_t max_columns = 400;
  std::string title;
};

void cmd_toy(const ToyCommand& cfg);
void cmd_spectrum(const SpectrumCommand& cfg);
void cmd_analyze(const AnalyzeCommand& cfg);
void cmd_pcc(const PccCommand& cfg);
void cmd_noise(const NoiseCommand& cfg);
void cmd_heatmap(const HeatmapCommand& cfg);

/// Path of the JSON sidecar written next to an artifact.
std::filesystem::path sidecar_path(const std::filesystem::path& artifact);

}  // namespace specbias::cli
