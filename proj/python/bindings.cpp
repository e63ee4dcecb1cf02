// Python bindings. Arrays cross the boundary as float64 numpy arrays; logit
// callables take an (n, d) array and return an (n, C) array.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "specbias/analysis.hpp"
#include "specbias/dataio.hpp"
#include "specbias/smallnet.hpp"
#include "specbias/spectral.hpp"
#include "specbias/toytask.hpp"

namespace py = pybind11;
using namespace specbias;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Vector to_vector(const Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return Vector(a.data(), a.data() + a.size());
}

std::vector<Vector> to_rows(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
  std::vector<Vector> out(rows, Vector(cols));
  for (std::size_t i = 0; i < rows; ++i) std::copy_n(a.data() + i * cols, cols, out[i].begin());
  return out;
}

Array from_vector(const Vector& v) {
  Array a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

Array from_rows(const std::vector<Vector>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Array a({static_cast<py::ssize_t>(rows.size()), static_cast<py::ssize_t>(cols)});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw py::value_error("ragged rows");
    std::copy(rows[i].begin(), rows[i].end(), a.mutable_data() + i * cols);
  }
  return a;
}

LogitEvaluator wrap(py::function f) {
  return LogitEvaluator::batched([f](const std::vector<Vector>& pts) {
    py::gil_scoped_acquire gil;
    Array out = f(from_rows(pts));
    if (out.ndim() == 1) out = out.reshape({out.shape(0), py::ssize_t{1}});
    return to_rows(out);
  });
}

SpectrumSeries spectrum_of(const Array& ratios, std::size_t k_first, std::size_t k_last) {
  auto s = SpectrumSeries::from_ratios(to_rows(ratios));
  s.weights = SpectrumSeries::band_weights(s.bins(), k_first, k_last);
  return s;
}

py::object pcc_to_py(const PccSeries& p) {
  Array a(static_cast<py::ssize_t>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) a.mutable_data()[i] = p[i] ? *p[i] : std::nan("");
  return std::move(a);
}

py::dict report_to_py(const PeakReport& r) {
  py::dict d;
  d["t_min"] = r.t_min;
  d["t_peak"] = r.t_peak;
  d["min_exhausted"] = r.min_exhausted;
  d["peak_exhausted"] = r.peak_exhausted;
  d["patience"] = r.patience;
  d["smooth_window"] = r.smooth_window;
  return d;
}

py::dict dump_to_py(const LogitRayDump& d) {
  Array logits({static_cast<py::ssize_t>(d.epochs), static_cast<py::ssize_t>(d.rays),
                static_cast<py::ssize_t>(d.samples), static_cast<py::ssize_t>(d.classes)});
  std::copy(d.logits.begin(), d.logits.end(), logits.mutable_data());
  py::dict out;
  out["logits"] = logits;
  out["half_width"] = d.half_width;
  out["policy"] = d.policy == RayPolicy::kFixed ? "fixed" : "resampled";
  return out;
}

LogitRayDump dump_from_py(const Array& logits, double half_width, const std::string& policy) {
  if (logits.ndim() != 4) throw py::value_error("logits must have shape (T, M, N, C)");
  if (policy != "fixed" && policy != "resampled") throw py::value_error("policy must be 'fixed' or 'resampled'");
  LogitRayDump d;
  d.epochs = static_cast<std::uint64_t>(logits.shape(0));
  d.rays = static_cast<std::uint64_t>(logits.shape(1));
  d.samples = static_cast<std::uint64_t>(logits.shape(2));
  d.classes = static_cast<std::uint64_t>(logits.shape(3));
  d.half_width = half_width;
  d.policy = policy == "fixed" ? RayPolicy::kFixed : RayPolicy::kResampled;
  d.logits.assign(logits.data(), logits.data() + logits.size());
  return d;
}

}  // namespace

PYBIND11_MODULE(_specbias, m) {
  m.doc() = "Directional Fourier spectra of classifier logits and training-curve analysis";

  py::register_exception<DumpError>(m, "DumpError", PyExc_ValueError);
  py::register_exception<CsvError>(m, "CsvError", PyExc_ValueError);

  m.def("dft", [](const Array& x) {
    const auto f = dft(to_vector(x));
    py::array_t<std::complex<double>> out(static_cast<py::ssize_t>(f.size()));
    std::copy(f.begin(), f.end(), out.mutable_data());
    return out;
  }, py::arg("signal"), "Full-band DFT with the 1-based phase convention.");
  m.def("dft_power", [](const Array& x) { return from_vector(dft_power(to_vector(x))); }, py::arg("signal"),
        "|F(k)|^2 for k = 0..N/2.");
  m.def("energy_ratio", [](const Array& a) {
    const auto r = energy_ratio(PowerSpectrum{to_vector(a), 2 * (static_cast<std::size_t>(a.size()) - 1)});
    return py::make_tuple(from_vector(r.values), r.floored);
  }, py::arg("power"), "R_k = ln(A_k / sum A) and whether any bin was floored.");
  m.def("ray_grid", [](const Array& anchor, const Array& direction, double h, std::size_t n) {
    return from_rows(ray_grid(RayProbe(to_vector(anchor), to_vector(direction), h, n)));
  }, py::arg("anchor"), py::arg("direction"), py::arg("half_width") = 0.5, py::arg("samples") = 128);
  m.def("line_spectrum", [](py::function f, const Array& start, const Array& end, std::size_t n) {
    return from_vector(line_spectrum(wrap(std::move(f)), to_vector(start), to_vector(end), n).values);
  }, py::arg("f"), py::arg("start"), py::arg("end"), py::arg("samples") = 128,
     "Class-averaged power spectrum of f sampled on the segment [start, end].");
  m.def("aggregate_spectrum", [](py::function f, const Array& anchors, double h, std::size_t n, std::uint64_t seed) {
    const auto rows = to_rows(anchors);
    const auto probes = make_probes(rows, h, n, seed);
    return from_vector(aggregate_spectrum(wrap(std::move(f)), probes).values);
  }, py::arg("f"), py::arg("anchors"), py::arg("half_width") = 0.5, py::arg("samples") = 128, py::arg("seed") = 0,
     "A_k over one random-direction ray per anchor.");

  m.def("mean_filter", [](const Array& x, std::size_t w) {
    return from_vector(mean_filter(EpochSeries{"x", to_vector(x)}, w).values);
  }, py::arg("series"), py::arg("window") = kDefaultSmoothWindow);
  m.def("short_time_pcc", [](const Array& x, const Array& y, std::size_t w) {
    return pcc_to_py(short_time_pcc(EpochSeries{"x", to_vector(x)}, EpochSeries{"y", to_vector(y)}, w));
  }, py::arg("x"), py::arg("y"), py::arg("window") = kDefaultPccWindow, "NaN where a window has zero variance.");
  m.def("averaged_spectrum_pcc", [](const Array& x, const Array& y, std::size_t w, std::size_t k0, std::size_t k1) {
    return pcc_to_py(averaged_spectrum_pcc(spectrum_of(x, k0, k1), spectrum_of(y, k0, k1), w));
  }, py::arg("x"), py::arg("y"), py::arg("window") = kDefaultPccWindow, py::arg("k_first") = 1,
     py::arg("k_last") = 64);
  m.def("detect_extrema", [](const Array& x, std::size_t patience, std::size_t smooth) {
    return report_to_py(detect_extrema(EpochSeries{"x", to_vector(x)}, patience, smooth));
  }, py::arg("series"), py::arg("patience") = kDefaultPatience, py::arg("smooth_window") = 1);
  m.def("detect_second_descent", [](const Array& ratios, std::size_t patience, std::size_t smooth, std::size_t k0,
                                    std::size_t k1) {
    return report_to_py(detect_second_descent(spectrum_of(ratios, k0, k1), patience, smooth));
  }, py::arg("ratios"), py::arg("patience") = kDefaultPatience, py::arg("smooth_window") = kDefaultSmoothWindow,
     py::arg("k_first") = 1, py::arg("k_last") = 64, "ratios has shape (epochs, bins).");
  m.def("perturbed_rate_peak", [](const Array& p, std::size_t half_window) {
    const auto r = perturbed_rate_peak(EpochSeries{"P", to_vector(p)}, half_window);
    py::dict d;
    d["epoch"] = r.epoch;
    d["rate"] = from_vector(r.rate);
    d["smoothed"] = from_vector(r.smoothed);
    return d;
  }, py::arg("perturbed_error"), py::arg("half_window") = kDefaultRateHalfWindow);

  m.def("run_toy", [](std::uint64_t seed, std::size_t epochs, std::size_t post, std::size_t samples, double lr) {
    toy::ToyOptions o;
    o.epochs = epochs;
    o.post_memorization = post;
    o.samples = samples;
    o.adam.learning_rate = lr;
    toy::ToyRunRecord rec;
    {
      py::gil_scoped_release release;
      rec = toy::run_toy_experiment(seed, o);
    }
    Vector loss, on_acc, off_acc, memorized;
    for (const auto& e : rec.epochs) {
      loss.push_back(e.loss);
      on_acc.push_back(e.on_accuracy);
      off_acc.push_back(e.off_accuracy);
      memorized.push_back(e.memorized ? 1.0 : 0.0);
    }
    py::dict d;
    d["seed"] = seed;
    d["perturbed_index"] = rec.perturbed_index;
    d["memorization_epoch"] = rec.memorization_epoch ? py::cast(*rec.memorization_epoch) : py::none();
    d["loss"] = from_vector(loss);
    d["on_accuracy"] = from_vector(on_acc);
    d["off_accuracy"] = from_vector(off_acc);
    d["memorized"] = from_vector(memorized);
    d["on_manifold"] = from_rows(rec.on_manifold_series().ratios);
    d["off_manifold"] = from_rows(rec.off_manifold_series().ratios);
    return d;
  }, py::arg("seed") = 0, py::arg("epochs") = 20000, py::arg("post_memorization") = 10000, py::arg("samples") = 128,
     py::arg("learning_rate") = 5e-4, "Runs the two-line toy task; spectra have shape (epochs, bins).");

  m.def("inject_label_noise", [](const std::vector<int>& labels, int classes, double fraction, std::uint64_t seed) {
    const auto out = inject_label_noise(LabelSet{labels, classes, {}}, fraction, seed);
    return py::make_tuple(out.labels, std::vector<bool>(out.perturbed_mask.begin(), out.perturbed_mask.end()));
  }, py::arg("labels"), py::arg("num_classes"), py::arg("fraction") = 0.1, py::arg("seed") = 0);

  m.def("write_dump", [](const std::filesystem::path& path, const Array& logits, double h, const std::string& policy) {
    write_dump(path, dump_from_py(logits, h, policy));
  }, py::arg("path"), py::arg("logits"), py::arg("half_width") = 0.5, py::arg("policy") = "fixed");
  m.def("read_dump", [](const std::filesystem::path& path) { return dump_to_py(read_dump(path)); }, py::arg("path"));
  m.def("spectrum_from_dump", [](const std::filesystem::path& path) {
    return from_rows(spectrum_from_dump(read_dump(path)).ratios);
  }, py::arg("path"), "R_k per epoch, shape (epochs, N/2 + 1).");

  m.attr("__version__") = "0.1.0";
}
