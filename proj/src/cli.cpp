#include "specbias/cli.hpp"

#include <fstream>
#include <random>

#include "json.hpp"

#include "specbias/analysis.hpp"
#include "specbias/dataio.hpp"
#include "specbias/smallnet.hpp"
#include "specbias/spectral.hpp"
#include "specbias/toytask.hpp"

namespace specbias::cli {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void require_input(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw InputError("input file not found: " + p.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Json header(const char* command) {
  Json j;
  j["tool"] = "specbias";
  j["version"] = kVersion;
  j["command"] = command;
  return j;
}

void write_sidecar(const fs::path& artifact, const Json& j) {
  write_text(sidecar_path(artifact), j.dump(2) + "\n");
}

// Runs `fn`, turning parse and data errors from the library into InputError.
template <typename Fn>
auto reading(const fs::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const DumpError& e) {
    throw InputError(path.string() + ": " + e.what());
  } catch (const CsvError& e) {
    throw InputError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

EpochSeries pick_column(const fs::path& path, const std::optional<std::string>& column) {
  require_input(path);
  auto all = reading(path, [&] { return read_series_csv(path); });
  if (!column) return all.front();
  for (auto& s : all)
    if (s.name == *column) return s;
  throw InputError(path.string() + ": no column named '" + *column + "'");
}

SpectrumSeries load_spectrum(const fs::path& path, std::size_t k_first, std::size_t k_last) {
  require_input(path);
  auto s = reading(path, [&] { return read_spectrum_csv(path); });
  s.weights = SpectrumSeries::band_weights(s.bins(), k_first, k_last);
  reading(path, [&] {
    s.validate();
    return 0;
  });
  return s;
}

Json trace_json(const std::vector<std::pair<std::size_t, double>>& trace) {
  Json arr = Json::array();
  for (const auto& [t, v] : trace) arr.push_back(Json::array({t, v}));
  return arr;
}

Json report_json(const PeakReport& r) {
  Json j;
  j["t_min"] = r.t_min;
  j["t_peak"] = r.t_peak;
  j["min_exhausted"] = r.min_exhausted;
  j["peak_exhausted"] = r.peak_exhausted;
  j["patience"] = r.patience;
  j["smooth_window"] = r.smooth_window;
  j["min_trace"] = trace_json(r.min_trace);
  j["peak_trace"] = trace_json(r.peak_trace);
  return j;
}

void check_band(std::size_t first, std::size_t last) {
  if (first > last) throw UsageError("--k-first must not exceed --k-last");
}

// Rays through `count` rows of `points` picked without replacement, with
// directions fixed for the whole run.
std::vector<RayProbe> toy_rays(const Eigen::MatrixXd& points, std::size_t count, double half_width,
                               std::size_t samples, std::uint64_t seed) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(points.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  std::mt19937_64 rng(seed);
  count = std::min(count, rows.size());
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
    std::swap(rows[i], rows[pick(rng)]);
  }
  std::vector<Vector> anchors;
  for (std::size_t i = 0; i < count; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    anchors.push_back({points(r, 0), points(r, 1), points(r, 2)});
  }
  return make_probes(anchors, half_width, samples, mix_seed(seed, 1));
}

}  // namespace

fs::path sidecar_path(const fs::path& artifact) {
  auto p = artifact;
  p += ".meta.json";
  return p;
}

void cmd_toy(const ToyCommand& cfg) {
  if (cfg.epochs < 1) throw UsageError("--epochs must be at least 1");
  if (cfg.samples < 2) throw UsageError("--samples must be at least 2");
  if (!(cfg.learning_rate > 0.0)) throw UsageError("--lr must be positive");
  if (!(cfg.half_width > 0.0)) throw UsageError("--half-width must be positive");
  if (cfg.dump_every > 0 && cfg.dump_rays == 0) throw UsageError("--dump-rays must be positive");
  if (cfg.out_dir.empty()) throw UsageError("--out is required");
  fs::create_directories(cfg.out_dir);

  toy::ToyOptions opt;
  opt.epochs = cfg.epochs;
  opt.post_memorization = cfg.post_memorization;
  opt.samples = cfg.samples;
  opt.adam.learning_rate = cfg.learning_rate;

  const auto data = toy::make_toy_dataset(cfg.seed);
  const auto train_rays = toy_rays(data.train.inputs, cfg.dump_rays, cfg.half_width, cfg.samples,
                                   mix_seed(cfg.seed, 100));
  const auto test_rays = toy_rays(data.test.inputs, cfg.dump_rays, cfg.half_width, cfg.samples,
                                  mix_seed(cfg.seed, 200));
  auto new_dump = [&] {
    LogitRayDump d;
    d.rays = cfg.dump_rays;
    d.samples = cfg.samples;
    d.classes = 2;
    d.half_width = cfg.half_width;
    d.policy = RayPolicy::kFixed;
    return d;
  };
  LogitRayDump train_dump = new_dump(), test_dump = new_dump();
  std::vector<std::size_t> dumped_epochs;

  toy::EpochObserver observer;
  if (cfg.dump_every > 0) {
    observer = [&](std::size_t epoch, const NetParams& params) {
      if (epoch % cfg.dump_every != 0) return;
      const auto f = as_evaluator(params);
      auto sample = [&](const std::vector<RayProbe>& rays) {
        std::vector<std::vector<Vector>> per_ray;
        for (const auto& r : rays) per_ray.push_back(f.evaluate(ray_grid(r)));
        return per_ray;
      };
      append_epoch(train_dump, sample(train_rays));
      append_epoch(test_dump, sample(test_rays));
      dumped_epochs.push_back(epoch);
    };
  }

  const auto rec = toy::run_toy_experiment(cfg.seed, opt, observer);

  const auto csv = cfg.out_dir / "toy_record.csv";
  toy::write_toy_csv(csv, rec);
  write_text(sidecar_path(csv), toy::toy_metadata_json(rec));

  Json meta = header("toy");
  meta["seed"] = cfg.seed;
  meta["memorization_epoch"] = rec.memorization_epoch ? Json(*rec.memorization_epoch) : Json(nullptr);
  const auto on_csv = cfg.out_dir / "on_manifold_spectrum.csv";
  const auto off_csv = cfg.out_dir / "off_manifold_spectrum.csv";
  write_spectrum_csv(on_csv, rec.on_manifold_series());
  write_spectrum_csv(off_csv, rec.off_manifold_series());
  meta["series"] = "on-manifold line l_0";
  write_sidecar(on_csv, meta);
  meta["series"] = "off-manifold line l_perp";
  write_sidecar(off_csv, meta);

  if (cfg.svg) {
    for (const auto& [name, series] : {std::pair{"on_manifold.svg", rec.on_manifold_series()},
                                       std::pair{"off_manifold.svg", rec.off_manifold_series()}}) {
      auto spec = heatmap_from_spectrum(series, {-12.0, -8.0, -4.0});
      spec.title = std::string(name == std::string("on_manifold.svg") ? "on-manifold" : "off-manifold") +
                   " R_k, seed " + std::to_string(cfg.seed);
      const auto path = cfg.out_dir / name;
      emit_heatmap(spec, path);
      meta["series"] = spec.title;
      write_sidecar(path, meta);
    }
  }

  if (cfg.dump_every > 0) {
    meta.erase("series");
    meta["dump_every"] = cfg.dump_every;
    meta["dumped_epochs"] = dumped_epochs;
    meta["half_width"] = cfg.half_width;
    meta["ray_policy"] = "fixed";
    const auto train_path = cfg.out_dir / "train_rays.sprd";
    const auto test_path = cfg.out_dir / "test_rays.sprd";
    write_dump(train_path, train_dump);
    write_dump(test_path, test_dump);
    meta["anchors"] = "training points";
    write_sidecar(train_path, meta);
    meta["anchors"] = "test points";
    write_sidecar(test_path, meta);
  }
}

void cmd_spectrum(const SpectrumCommand& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  require_input(cfg.dump);
  const auto dump = reading(cfg.dump, [&] { return read_dump(cfg.dump); });
  const auto series = reading(cfg.dump, [&] { return spectrum_from_dump(dump); });
  if (series.epochs() == 0) throw InputError(cfg.dump.string() + ": dump holds no epochs");
  write_spectrum_csv(cfg.out, series);

  Json meta = header("spectrum");
  meta["dump"] = cfg.dump.filename().string();
  meta["epochs"] = dump.epochs;
  meta["rays"] = dump.rays;
  meta["samples"] = dump.samples;
  meta["classes"] = dump.classes;
  meta["half_width"] = dump.half_width;
  meta["ray_policy"] = dump.policy == RayPolicy::kFixed ? "fixed" : "resampled";
  meta["log_base"] = "e";
  meta["energy_floor"] = kEnergyFloor;
  write_sidecar(cfg.out, meta);
}

void cmd_analyze(const AnalyzeCommand& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  if (cfg.patience < 1) throw UsageError("--patience must be at least 1");
  if (cfg.smooth_window < 1 || cfg.error_smooth_window < 1)
    throw UsageError("smoothing windows must be at least 1");
  check_band(cfg.k_first, cfg.k_last);

  const auto spectrum = load_spectrum(cfg.spectrum, cfg.k_first, cfg.k_last);
  Json j = header("analyze");
  j["config"] = {{"patience", cfg.patience},
                 {"smooth_window", cfg.smooth_window},
                 {"k_first", cfg.k_first},
                 {"k_last", cfg.k_last}};
  const auto rep = reading(cfg.spectrum, [&] {
    return detect_second_descent(spectrum, cfg.patience, cfg.smooth_window);
  });
  j["spectrum"] = report_json(rep);
  j["T_R_min"] = rep.t_min;
  j["T_R_peak"] = rep.t_peak;

  if (cfg.test_error) {
    const auto e = pick_column(*cfg.test_error, cfg.test_error_column);
    const auto er = reading(*cfg.test_error, [&] {
      return detect_extrema(e, cfg.patience, cfg.error_smooth_window);
    });
    j["test_error"] = report_json(er);
    j["T_E_min"] = er.t_min;
    j["T_E_peak"] = er.t_peak;
  }
  if (cfg.perturbed_error) {
    const auto p = pick_column(*cfg.perturbed_error, cfg.perturbed_error_column);
    const auto rate = reading(*cfg.perturbed_error, [&] {
      return perturbed_rate_peak(p, cfg.rate_half_window);
    });
    j["T_dP_peak"] = rate.epoch;
    j["rate_half_window"] = cfg.rate_half_window;
  }
  write_text(cfg.out, j.dump(2) + "\n");
}

void cmd_pcc(const PccCommand& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  if (cfg.window < 2) throw UsageError("--window must be at least 2");
  check_band(cfg.k_first, cfg.k_last);

  PccSeries pcc;
  Json meta = header("pcc");
  meta["window"] = cfg.window;
  if (cfg.matrix) {
    const auto x = load_spectrum(cfg.x, cfg.k_first, cfg.k_last);
    const auto y = load_spectrum(cfg.y, cfg.k_first, cfg.k_last);
    if (x.epochs() != y.epochs() || x.bins() != y.bins())
      throw InputError("spectrum files differ in shape: " + cfg.x.string() + " vs " + cfg.y.string());
    if (x.epochs() < cfg.window) throw InputError("series shorter than the window");
    pcc = averaged_spectrum_pcc(x, y, cfg.window);
    meta["mode"] = "matrix";
    meta["k_first"] = cfg.k_first;
    meta["k_last"] = cfg.k_last;
  } else {
    const auto x = pick_column(cfg.x, cfg.column);
    const auto y = pick_column(cfg.y, cfg.column);
    if (x.size() != y.size())
      throw InputError("series lengths differ: " + std::to_string(x.size()) + " vs " +
                       std::to_string(y.size()));
    if (x.size() < cfg.window) throw InputError("series shorter than the window");
    pcc = short_time_pcc(x, y, cfg.window);
    meta["mode"] = "series";
  }
  write_pcc_csv(cfg.out, pcc);
  write_sidecar(cfg.out, meta);
}

void cmd_noise(const NoiseCommand& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  if (!(cfg.fraction >= 0.0 && cfg.fraction <= 1.0)) throw UsageError("--fraction must lie in [0, 1]");
  if (cfg.classes < 1) throw UsageError("--classes must be positive");
  if (cfg.classes < 2 && cfg.fraction > 0.0) throw UsageError("label noise needs at least two classes");
  require_input(cfg.labels);

  auto labels = reading(cfg.labels, [&] { return read_labels_csv(cfg.labels, cfg.classes); });
  const auto original = labels.labels;
  labels.perturbed_mask.assign(labels.labels.size(), false);
  const auto noisy = inject_label_noise(labels, cfg.fraction, cfg.seed);
  write_labels_csv(cfg.out, noisy, original);

  std::size_t changed = 0;
  for (bool b : noisy.perturbed_mask) changed += b ? 1 : 0;
  Json meta = header("noise");
  meta["seed"] = cfg.seed;
  meta["fraction"] = cfg.fraction;
  meta["classes"] = cfg.classes;
  meta["labels"] = noisy.labels.size();
  meta["perturbed"] = changed;
  meta["policy"] = "each selected label redrawn uniformly from the other classes";
  write_sidecar(cfg.out, meta);
}

void cmd_heatmap(const HeatmapCommand& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  require_input(cfg.spectrum);
  const auto s = reading(cfg.spectrum, [&] { return read_spectrum_csv(cfg.spectrum); });
  auto spec = heatmap_from_spectrum(s, cfg.levels);
  spec.log_epoch_axis = !cfg.linear_axis;
  spec.max_columns = cfg.max_columns;
  spec.title = cfg.title;
  emit_heatmap(spec, cfg.out);

  Json meta = header("heatmap");
  meta["spectrum"] = cfg.spectrum.filename().string();
  meta["levels"] = cfg.levels;
  meta["epoch_axis"] = cfg.linear_axis ? "linear" : "log";
  meta["max_columns"] = cfg.max_columns;
  write_sidecar(cfg.out, meta);
}

}  // namespace specbias::cli
