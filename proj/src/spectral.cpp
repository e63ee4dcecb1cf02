#include "specbias/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace specbias {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// exp(-i 2 pi j / n) for j = 0..n-1, each angle evaluated directly.
std::vector<std::complex<double>> twiddles(std::size_t n) {
  std::vector<std::complex<double>> w(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    w[j] = {std::cos(angle), std::sin(angle)};
  }
  return w;
}

// Zero-based transform X[k] = sum_m x[m] w^(m k), in place.
void fft_radix2(std::vector<std::complex<double>>& a,
                const std::vector<std::complex<double>>& w) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    const std::size_t half = len / 2;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        const auto u = a[start + j];
        const auto v = a[start + j + half] * w[j * stride];
        a[start + j] = u + v;
        a[start + j + half] = u - v;
      }
    }
  }
}

void check_class_count(std::size_t& latched, std::size_t got) {
  if (latched == 0) {
    if (got == 0) throw std::runtime_error("logit evaluator returned an empty vector");
    latched = got;
  } else if (got != latched) {
    throw std::runtime_error("logit evaluator returned " + std::to_string(got) +
                             " classes, expected " + std::to_string(latched));
  }
}

}  // namespace

RayProbe::RayProbe(Vector anchor, Vector direction, double half_width, std::size_t samples)
    : anchor_(std::move(anchor)),
      direction_(std::move(direction)),
      half_width_(half_width),
      samples_(samples) {
  if (anchor_.empty()) throw std::invalid_argument("ray probe: empty anchor");
  if (anchor_.size() != direction_.size())
    throw std::invalid_argument("ray probe: anchor and direction dimensions differ");
  if (std::abs(norm2(direction_) - 1.0) > kUnitTolerance)
    throw std::invalid_argument("ray probe: direction is not a unit vector");
  if (!(half_width_ > 0.0) || !std::isfinite(half_width_))
    throw std::invalid_argument("ray probe: half width must be positive");
  if (samples_ < 2) throw std::invalid_argument("ray probe: need at least 2 samples");
}

LogitEvaluator LogitEvaluator::pointwise(PointFn fn) {
  LogitEvaluator e;
  e.point_ = std::move(fn);
  return e;
}

LogitEvaluator LogitEvaluator::batched(BatchFn fn) {
  LogitEvaluator e;
  e.batch_ = std::move(fn);
  return e;
}

std::vector<Vector> LogitEvaluator::evaluate(const std::vector<Vector>& points) const {
  std::vector<Vector> out;
  if (batch_) {
    out = batch_(points);
    if (out.size() != points.size())
      throw std::runtime_error("logit evaluator returned the wrong number of rows");
  } else if (point_) {
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(point_(p));
  } else {
    throw std::logic_error("logit evaluator has no callable");
  }
  for (const auto& row : out) check_class_count(*classes_, row.size());
  return out;
}

std::vector<Vector> ray_grid(const RayProbe& probe) {
  const std::size_t n_samples = probe.samples();
  const double denom = static_cast<double>(n_samples - 1);
  const double h = probe.half_width();
  const auto& x = probe.anchor();
  const auto& v = probe.direction();

  std::vector<Vector> grid(n_samples, Vector(x.size()));
  for (std::size_t n = 1; n <= n_samples; ++n) {
    // Signed numerator is exact in double for any practical N.
    const double t = (2.0 * static_cast<double>(n) - static_cast<double>(n_samples) - 1.0) / denom;
    const double step = t * h;
    auto& point = grid[n - 1];
    for (std::size_t i = 0; i < x.size(); ++i) point[i] = x[i] + step * v[i];
  }
  return grid;
}

std::vector<std::complex<double>> dft(std::span<const double> signal) {
  const std::size_t n = signal.size();
  if (n == 0) throw std::invalid_argument("dft: empty signal");
  const auto w = twiddles(n);

  std::vector<std::complex<double>> out(n);
  if (is_power_of_two(n)) {
    std::vector<std::complex<double>> a(signal.begin(), signal.end());
    fft_radix2(a, w);
    // Shift from the zero-based index m = n - 1 to the 1-based phase n.
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * w[k];
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t i = 1; i <= n; ++i) acc += signal[i - 1] * w[(i * k) % n];
      out[k] = acc;
    }
  }
  return out;
}

Vector dft_power(std::span<const double> signal) {
  const auto full = dft(signal);
  Vector power(signal.size() / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(full[k]);
  return power;
}

PowerSpectrum class_averaged_power(const std::vector<Vector>& logits) {
  if (logits.size() < 2) throw std::invalid_argument("spectrum: need at least 2 samples");
  const std::size_t classes = logits.front().size();
  if (classes == 0) throw std::invalid_argument("spectrum: no classes");

  PowerSpectrum out;
  out.sample_count = logits.size();
  out.values.assign(logits.size() / 2 + 1, 0.0);
  Vector column(logits.size());
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t n = 0; n < logits.size(); ++n) {
      if (logits[n].size() != classes) throw std::invalid_argument("spectrum: ragged logits");
      column[n] = logits[n][c];
    }
    const auto p = dft_power(column);
    for (std::size_t k = 0; k < p.size(); ++k) out.values[k] += p[k];
  }
  for (double& a : out.values) a /= static_cast<double>(classes);
  return out;
}

PowerSpectrum ray_class_spectrum(const LogitEvaluator& f, const RayProbe& probe,
                                 std::size_t class_index) {
  const auto logits = f.evaluate(ray_grid(probe));
  Vector column(logits.size());
  for (std::size_t n = 0; n < logits.size(); ++n) {
    if (class_index >= logits[n].size())
      throw std::out_of_range("ray_class_spectrum: class index " + std::to_string(class_index) +
                              " out of range");
    column[n] = logits[n][class_index];
  }
  return {dft_power(column), logits.size()};
}

PowerSpectrum aggregate_spectrum(const LogitEvaluator& f, std::span<const RayProbe> probes) {
  if (probes.empty()) throw std::invalid_argument("aggregate_spectrum: no probes");
  const std::size_t n_samples = probes.front().samples();
  for (const auto& p : probes)
    if (p.samples() != n_samples)
      throw std::invalid_argument("aggregate_spectrum: probes disagree on sample count");

  PowerSpectrum out;
  out.sample_count = n_samples;
  out.values.assign(n_samples / 2 + 1, 0.0);
  for (const auto& p : probes) {
    const auto s = class_averaged_power(f.evaluate(ray_grid(p)));
    for (std::size_t k = 0; k < s.values.size(); ++k) out.values[k] += s.values[k];
  }
  for (double& a : out.values) a /= static_cast<double>(probes.size());
  return out;
}

EnergyRatio energy_ratio(const PowerSpectrum& spectrum) {
  double total = 0.0;
  for (double a : spectrum.values) {
    if (!(a >= 0.0) || !std::isfinite(a))
      throw std::invalid_argument("energy_ratio: spectrum has a negative or non-finite bin");
    total += a;
  }
  if (!(total > 0.0)) throw std::invalid_argument("energy_ratio: spectrum has no energy");

  EnergyRatio r;
  r.values.resize(spectrum.values.size());
  const double log_total = std::log(total);
  for (std::size_t k = 0; k < spectrum.values.size(); ++k) {
    double a = spectrum.values[k];
    if (a < kEnergyFloor) {
      a = kEnergyFloor;
      r.floored = true;
    }
    r.values[k] = std::min(0.0, std::log(a) - log_total);
  }
  return r;
}

PowerSpectrum line_spectrum(const LogitEvaluator& f, const Vector& start, const Vector& end,
                            std::size_t samples) {
  if (start.size() != end.size() || start.empty())
    throw std::invalid_argument("line_spectrum: endpoint dimensions differ");
  Vector mid(start.size());
  Vector dir(start.size());
  for (std::size_t i = 0; i < start.size(); ++i) {
    mid[i] = 0.5 * (start[i] + end[i]);
    dir[i] = end[i] - start[i];
  }
  const double length = norm2(dir);
  if (!(length > 0.0)) throw std::invalid_argument("line_spectrum: degenerate segment");
  for (double& d : dir) d /= length;

  const RayProbe probe(std::move(mid), std::move(dir), 0.5 * length, samples);
  return class_averaged_power(f.evaluate(ray_grid(probe)));
}

Vector sample_unit_direction(std::mt19937_64& rng, std::size_t dimension) {
  if (dimension == 0) throw std::invalid_argument("sample_unit_direction: dimension 0");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(dimension);
  double len = 0.0;
  do {
    for (double& x : v) x = gauss(rng);
    len = norm2(v);
  } while (!(len > 0.0));
  for (double& x : v) x /= len;
  return v;
}

std::uint64_t mix_seed(std::uint64_t root, std::uint64_t stream) {
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<RayProbe> make_probes(std::span<const Vector> anchors, double half_width,
                                  std::size_t samples, std::uint64_t root_seed) {
  std::vector<RayProbe> probes;
  probes.reserve(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    std::mt19937_64 rng(mix_seed(root_seed, i));
    probes.emplace_back(anchors[i], sample_unit_direction(rng, anchors[i].size()), half_width,
                        samples);
  }
  return probes;
}

double band_share(const EnergyRatio& ratio, std::size_t first_bin) {
  double s = 0.0;
  for (std::size_t k = first_bin; k < ratio.values.size(); ++k) s += std::exp(ratio.values[k]);
  return s;
}

}  // namespace specbias
