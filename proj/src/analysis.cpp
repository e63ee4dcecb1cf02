#include "specbias/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace specbias {

namespace {

void require_finite(const EpochSeries& s, const char* what) {
  if (s.values.empty()) throw std::invalid_argument(std::string(what) + ": empty series");
  for (double v : s.values)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

// Shared scan: `better(a, b)` is true when a strictly improves on b.
template <typename Better>
PatienceResult patience_scan(const EpochSeries& series, std::size_t start, std::size_t patience,
                             Better better) {
  if (patience == 0) throw std::invalid_argument("patience must be at least 1");
  PatienceResult r;
  r.epoch = start;
  double best = series.values[start];
  std::size_t waited = 0;
  r.trace.emplace_back(start, best);
  for (std::size_t t = start + 1; t < series.size(); ++t) {
    const double v = series.values[t];
    if (better(v, best)) {
      best = v;
      r.epoch = t;
      waited = 0;
    } else {
      ++waited;
    }
    r.trace.emplace_back(t, best);
    if (waited >= patience) return r;
  }
  r.exhausted = true;
  return r;
}

}  // namespace

Vector SpectrumSeries::band_weights(std::size_t bins, std::size_t first, std::size_t last) {
  Vector w(bins, 0.0);
  for (std::size_t k = first; k <= last && k < bins; ++k) w[k] = 1.0;
  return w;
}

SpectrumSeries SpectrumSeries::from_ratios(std::vector<Vector> ratios) {
  SpectrumSeries s;
  s.ratios = std::move(ratios);
  s.weights = band_weights(s.bins());
  return s;
}

EpochSeries SpectrumSeries::row(std::size_t k) const {
  if (k >= bins()) throw std::out_of_range("spectrum row out of range");
  EpochSeries out{"R_" + std::to_string(k), Vector(epochs())};
  for (std::size_t t = 0; t < epochs(); ++t) out.values[t] = ratios[t][k];
  return out;
}

void SpectrumSeries::validate() const {
  if (ratios.empty()) throw std::invalid_argument("spectrum series: no epochs");
  const std::size_t k = bins();
  if (k == 0) throw std::invalid_argument("spectrum series: no frequency bins");
  for (const auto& col : ratios)
    if (col.size() != k) throw std::invalid_argument("spectrum series: ragged matrix");
  if (weights.size() != k)
    throw std::invalid_argument("spectrum series: " + std::to_string(weights.size()) +
                                " weights for " + std::to_string(k) + " bins");
  bool any = false;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("spectrum series: weights must be finite and non-negative");
    any = any || w > 0.0;
  }
  if (!any) throw std::invalid_argument("spectrum series: all weights are zero");
}

EpochSeries mean_filter(const EpochSeries& series, std::size_t window) {
  if (window == 0) throw std::invalid_argument("mean_filter: window must be at least 1");
  EpochSeries out{series.name, Vector(series.size())};
  for (std::size_t t = 0; t < series.size(); ++t) {
    const std::size_t lo = t + 1 >= window ? t + 1 - window : 0;
    double s = 0.0;
    for (std::size_t i = lo; i <= t; ++i) s += series.values[i];
    out.values[t] = s / static_cast<double>(t - lo + 1);
  }
  return out;
}

PccSeries short_time_pcc(const EpochSeries& x, const EpochSeries& y, std::size_t window) {
  if (x.size() != y.size())
    throw std::invalid_argument("short_time_pcc: series lengths differ (" +
                                std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  if (window < 2) throw std::invalid_argument("short_time_pcc: window must be at least 2");
  if (x.size() < window)
    throw std::invalid_argument("short_time_pcc: series shorter than the window");

  PccSeries out(x.size() - window + 1);
  const double l = static_cast<double>(window);
  for (std::size_t t = 0; t < out.size(); ++t) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = t; i < t + window; ++i) {
      mx += x.values[i];
      my += y.values[i];
    }
    mx /= l;
    my /= l;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = t; i < t + window; ++i) {
      const double dx = x.values[i] - mx;
      const double dy = y.values[i] - my;
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
    if (sxx > 0.0 && syy > 0.0) out[t] = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  }
  return out;
}

PccSeries averaged_spectrum_pcc(const SpectrumSeries& x, const SpectrumSeries& y,
                                std::size_t window) {
  x.validate();
  y.validate();
  if (x.bins() != y.bins()) throw std::invalid_argument("averaged_spectrum_pcc: bin counts differ");
  if (x.epochs() != y.epochs())
    throw std::invalid_argument("averaged_spectrum_pcc: epoch counts differ");

  PccSeries out;
  std::vector<double> sum;
  std::vector<std::size_t> count;
  for (std::size_t k = 0; k < x.bins(); ++k) {
    if (x.weights[k] <= 0.0) continue;
    const auto p = short_time_pcc(x.row(k), y.row(k), window);
    if (sum.empty()) {
      sum.assign(p.size(), 0.0);
      count.assign(p.size(), 0);
    }
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (p[t]) {
        sum[t] += *p[t];
        ++count[t];
      }
    }
  }
  out.resize(sum.size());
  for (std::size_t t = 0; t < sum.size(); ++t)
    if (count[t] > 0) out[t] = sum[t] / static_cast<double>(count[t]);
  return out;
}

EpochSeries aggregate_rt(const SpectrumSeries& spectrum) {
  spectrum.validate();
  EpochSeries out{"R_t", Vector(spectrum.epochs(), 0.0)};
  for (std::size_t t = 0; t < spectrum.epochs(); ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < spectrum.bins(); ++k)
      if (spectrum.weights[k] != 0.0) s += spectrum.weights[k] * spectrum.ratios[t][k];
    out.values[t] = s;
  }
  return out;
}

PatienceResult find_min_patience(const EpochSeries& series, std::size_t patience) {
  require_finite(series, "find_min_patience");
  return patience_scan(series, 0, patience, [](double a, double b) { return a < b; });
}

PatienceResult find_peak_after(const EpochSeries& series, std::size_t start, std::size_t patience) {
  require_finite(series, "find_peak_after");
  if (start >= series.size())
    throw std::out_of_range("find_peak_after: start epoch " + std::to_string(start) +
                            " outside a series of length " + std::to_string(series.size()));
  return patience_scan(series, start, patience, [](double a, double b) { return a > b; });
}

PeakReport detect_extrema(const EpochSeries& series, std::size_t patience,
                          std::size_t smooth_window) {
  require_finite(series, "detect_extrema");
  if (series.size() < smooth_window)
    throw std::invalid_argument("detect_extrema: series shorter than the smoothing window");
  const auto smoothed = mean_filter(series, smooth_window);
  auto lo = find_min_patience(smoothed, patience);
  auto hi = find_peak_after(smoothed, lo.epoch, patience);

  PeakReport r;
  r.t_min = lo.epoch;
  r.t_peak = hi.epoch;
  r.patience = patience;
  r.smooth_window = smooth_window;
  r.min_exhausted = lo.exhausted;
  r.peak_exhausted = hi.exhausted;
  r.min_trace = std::move(lo.trace);
  r.peak_trace = std::move(hi.trace);
  return r;
}

PeakReport detect_second_descent(const SpectrumSeries& spectrum, std::size_t patience,
                                 std::size_t smooth_window) {
  spectrum.validate();
  if (spectrum.epochs() < smooth_window)
    throw std::invalid_argument("detect_second_descent: fewer epochs than the smoothing window");

  SpectrumSeries smoothed = spectrum;
  for (std::size_t k = 0; k < spectrum.bins(); ++k) {
    if (spectrum.weights[k] == 0.0) continue;
    const auto row = mean_filter(spectrum.row(k), smooth_window);
    for (std::size_t t = 0; t < spectrum.epochs(); ++t) smoothed.ratios[t][k] = row.values[t];
  }
  auto report = detect_extrema(aggregate_rt(smoothed), patience, 1);
  report.smooth_window = smooth_window;
  return report;
}

RatePeak perturbed_rate_peak(const EpochSeries& perturbed_error, std::size_t half_window) {
  require_finite(perturbed_error, "perturbed_rate_peak");
  if (perturbed_error.size() < 2 * half_window + 2)
    throw std::invalid_argument("perturbed_rate_peak: need at least " +
                                std::to_string(2 * half_window + 2) + " epochs");
  const auto& p = perturbed_error.values;
  RatePeak r;
  r.rate.resize(p.size() - 1);
  for (std::size_t t = 1; t < p.size(); ++t) r.rate[t - 1] = -(p[t] - p[t - 1]);

  const std::size_t n = r.rate.size();
  r.smoothed.resize(n);
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half_window ? i - half_window : 0;
    const std::size_t hi = std::min(n - 1, i + half_window);
    double s = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) s += r.rate[j];
    r.smoothed[i] = s / static_cast<double>(hi - lo + 1);
    if (r.smoothed[i] > r.smoothed[best]) best = i;
  }
  r.epoch = best + 1;
  return r;
}

}  // namespace specbias
