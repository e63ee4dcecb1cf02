#include "specbias/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "binary_io.hpp"

namespace specbias {

namespace {

constexpr char kDumpMagic[4] = {'S', 'P', 'R', 'D'};
// magic + version + T, M, N, C + half width + policy + reserved
constexpr std::size_t kDumpHeaderBytes = 4 + 4 + 4 * 8 + 8 + 4 + 4;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

long long parse_integer(const std::string& text, std::size_t line) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw CsvError(line, "expected an integer, got '" + text + "'");
  return v;
}

// Reads a numeric table with a header row; the first column must count epochs from 0.
struct Table {
  std::vector<std::string> header;
  std::vector<Vector> rows;
};

Table read_table(const std::filesystem::path& path) {
  auto in = open_in(path);
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (t.header.empty()) {
      if (cells.size() < 2 || cells.front() != "epoch")
        throw CsvError(line_no, "header must start with 'epoch' and name at least one column");
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw CsvError(line_no, "expected " + std::to_string(t.header.size()) + " fields, got " +
                                  std::to_string(cells.size()));
    if (parse_integer(cells.front(), line_no) != static_cast<long long>(t.rows.size()))
      throw CsvError(line_no, "epochs must count up from 0");
    Vector row(cells.size() - 1);
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const auto v = parse_number(cells[i]);
      if (!v) throw CsvError(line_no, "bad number '" + cells[i] + "'");
      row[i - 1] = *v;
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw CsvError(line_no, "missing header");
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Label noise

void LabelSet::validate() const {
  if (num_classes < 1) throw std::invalid_argument("label set: need at least one class");
  if (!perturbed_mask.empty() && perturbed_mask.size() != labels.size())
    throw std::invalid_argument("label set: mask length differs from label count");
  for (int l : labels)
    if (l < 0 || l >= num_classes)
      throw std::invalid_argument("label set: label " + std::to_string(l) + " out of range");
}

LabelSet inject_label_noise(const LabelSet& labels, double fraction, std::uint64_t seed) {
  labels.validate();
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw std::invalid_argument("label noise fraction must lie in [0, 1]");
  const std::size_t n = labels.labels.size();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (count > 0 && labels.num_classes < 2)
    throw std::invalid_argument("label noise needs at least two classes");

  LabelSet out = labels;
  out.perturbed_mask.resize(n, false);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::uniform_int_distribution<int> other(0, labels.num_classes - 2);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t idx = order[i];
    const int old = out.labels[idx];
    const int r = other(rng);
    out.labels[idx] = r >= old ? r + 1 : r;
    out.perturbed_mask[idx] = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dump

std::vector<char> encode_dump(const LogitRayDump& dump) {
  if (dump.logits.size() != dump.expected_size())
    throw DumpError(DumpError::Kind::kInconsistent,
                    "dump body holds " + std::to_string(dump.logits.size()) + " values, header implies " +
                        std::to_string(dump.expected_size()));
  detail::ByteWriter w;
  w.put_bytes(kDumpMagic, 4);
  w.put<std::uint32_t>(kDumpVersion);
  w.put<std::uint64_t>(dump.epochs);
  w.put<std::uint64_t>(dump.rays);
  w.put<std::uint64_t>(dump.samples);
  w.put<std::uint64_t>(dump.classes);
  w.put<double>(dump.half_width);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dump.policy));
  w.put<std::uint32_t>(0);
  w.put_bytes(dump.logits.data(), dump.logits.size() * sizeof(double));
  const auto sum = detail::fnv1a64(w.bytes().data(), w.bytes().size());
  w.put<std::uint64_t>(sum);
  return std::move(w.bytes());
}

LogitRayDump decode_dump(const std::vector<char>& bytes) {
  using Kind = DumpError::Kind;
  detail::ByteReader r(bytes);
  char magic[4];
  if (!r.get_bytes(magic, 4)) throw DumpError(Kind::kTruncated, "dump truncated before magic");
  if (std::memcmp(magic, kDumpMagic, 4) != 0) throw DumpError(Kind::kBadMagic, "not a logit-ray dump");
  std::uint32_t version = 0;
  if (!r.get(version)) throw DumpError(Kind::kTruncated, "dump truncated in header");
  if (version != kDumpVersion)
    throw DumpError(Kind::kVersion, "dump version " + std::to_string(version) + ", expected " +
                                        std::to_string(kDumpVersion));

  LogitRayDump d;
  std::uint32_t policy = 0, reserved = 0;
  if (!r.get(d.epochs) || !r.get(d.rays) || !r.get(d.samples) || !r.get(d.classes) ||
      !r.get(d.half_width) || !r.get(policy) || !r.get(reserved))
    throw DumpError(Kind::kTruncated, "dump truncated in header");
  if (policy > 1 || reserved != 0) throw DumpError(Kind::kInconsistent, "dump header has bad flags");
  d.policy = static_cast<RayPolicy>(policy);

  // Overflow-safe body size.
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max() / sizeof(double);
  std::uint64_t count = 1;
  for (std::uint64_t dim : {d.epochs, d.rays, d.samples, d.classes}) {
    if (dim != 0 && count > kMax / dim)
      throw DumpError(Kind::kInconsistent, "dump header dimensions overflow");
    count *= dim;
  }
  const std::uint64_t body = count * sizeof(double);
  if (r.remaining() < body + sizeof(std::uint64_t) || body > r.remaining())
    throw DumpError(Kind::kTruncated, "dump truncated: body needs " + std::to_string(body) +
                                          " bytes plus checksum, " + std::to_string(r.remaining()) +
                                          " available");
  if (r.remaining() > body + sizeof(std::uint64_t))
    throw DumpError(Kind::kTrailingData, "dump has trailing bytes after the checksum");

  d.logits.resize(static_cast<std::size_t>(count));
  r.get_bytes(d.logits.data(), static_cast<std::size_t>(body));
  const auto expect = detail::fnv1a64(bytes.data(), r.position());
  std::uint64_t stored = 0;
  r.get(stored);
  if (stored != expect) throw DumpError(Kind::kChecksum, "dump checksum mismatch");
  return d;
}

void write_dump(const std::filesystem::path& path, const LogitRayDump& dump) {
  const auto bytes = encode_dump(dump);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DumpError(DumpError::Kind::kIo, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DumpError(DumpError::Kind::kIo, "failed writing " + path.string());
}

LogitRayDump read_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DumpError(DumpError::Kind::kIo, "cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_dump(bytes);
}

void append_epoch(LogitRayDump& dump, const std::vector<std::vector<Vector>>& per_ray) {
  if (per_ray.size() != dump.rays)
    throw std::invalid_argument("append_epoch: expected " + std::to_string(dump.rays) + " rays");
  for (const auto& ray : per_ray) {
    if (ray.size() != dump.samples) throw std::invalid_argument("append_epoch: wrong sample count");
    for (const auto& logits : ray) {
      if (logits.size() != dump.classes) throw std::invalid_argument("append_epoch: wrong class count");
      dump.logits.insert(dump.logits.end(), logits.begin(), logits.end());
    }
  }
  ++dump.epochs;
}

SpectrumSeries spectrum_from_dump(const LogitRayDump& dump) {
  if (dump.logits.size() != dump.expected_size())
    throw std::invalid_argument("spectrum_from_dump: body size disagrees with header");
  if (dump.samples < 2) throw std::invalid_argument("spectrum_from_dump: need at least 2 samples per ray");
  if (dump.rays == 0 || dump.classes == 0)
    throw std::invalid_argument("spectrum_from_dump: dump has no rays or no classes");

  std::vector<Vector> ratios;
  ratios.reserve(dump.epochs);
  std::vector<Vector> ray(dump.samples, Vector(dump.classes));
  for (std::size_t t = 0; t < dump.epochs; ++t) {
    PowerSpectrum mean;
    mean.sample_count = dump.samples;
    mean.values.assign(dump.samples / 2 + 1, 0.0);
    for (std::size_t m = 0; m < dump.rays; ++m) {
      for (std::size_t n = 0; n < dump.samples; ++n)
        for (std::size_t c = 0; c < dump.classes; ++c) ray[n][c] = dump.logits[dump.index(t, m, n, c)];
      const auto p = class_averaged_power(ray);
      for (std::size_t k = 0; k < p.values.size(); ++k) mean.values[k] += p.values[k];
    }
    for (double& a : mean.values) a /= static_cast<double>(dump.rays);
    ratios.push_back(energy_ratio(mean).values);
  }
  auto s = SpectrumSeries::from_ratios(std::move(ratios));
  if (s.weights.empty()) s.weights = SpectrumSeries::band_weights(dump.samples / 2 + 1);
  return s;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_number(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, ptr);
}

std::optional<double> parse_number(std::string_view text) {
  if (text == "NA") return std::numeric_limits<double>::quiet_NaN();
  if (text.empty()) return std::nullopt;
  double v = 0.0;
  const char* begin = text.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

void write_series_csv(const std::filesystem::path& path, const std::vector<EpochSeries>& series) {
  if (series.empty()) throw std::invalid_argument("write_series_csv: no series");
  for (const auto& s : series) {
    if (s.size() != series.front().size())
      throw std::invalid_argument("write_series_csv: series lengths differ");
    if (s.name.empty() || s.name.find_first_of(",\n\r") != std::string::npos)
      throw std::invalid_argument("write_series_csv: series names must be non-empty without commas");
  }
  auto out = open_out(path);
  out << "epoch";
  for (const auto& s : series) out << ',' << s.name;
  out << '\n';
  for (std::size_t t = 0; t < series.front().size(); ++t) {
    out << t;
    for (const auto& s : series) out << ',' << format_number(s.values[t]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<EpochSeries> read_series_csv(const std::filesystem::path& path) {
  const auto table = read_table(path);
  std::vector<EpochSeries> out;
  for (std::size_t i = 1; i < table.header.size(); ++i) {
    EpochSeries s{table.header[i], Vector(table.rows.size())};
    for (std::size_t t = 0; t < table.rows.size(); ++t) s.values[t] = table.rows[t][i - 1];
    out.push_back(std::move(s));
  }
  return out;
}

void write_spectrum_csv(const std::filesystem::path& path, const SpectrumSeries& spectrum) {
  if (spectrum.epochs() == 0) throw std::invalid_argument("write_spectrum_csv: no epochs");
  auto out = open_out(path);
  out << "epoch";
  for (std::size_t k = 0; k < spectrum.bins(); ++k) out << ",R_" << k;
  out << '\n';
  for (std::size_t t = 0; t < spectrum.epochs(); ++t) {
    if (spectrum.ratios[t].size() != spectrum.bins())
      throw std::invalid_argument("write_spectrum_csv: ragged matrix");
    out << t;
    for (double v : spectrum.ratios[t]) out << ',' << format_number(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

SpectrumSeries read_spectrum_csv(const std::filesystem::path& path) {
  auto table = read_table(path);
  for (std::size_t i = 1; i < table.header.size(); ++i)
    if (table.header[i] != "R_" + std::to_string(i - 1))
      throw CsvError(1, "spectrum columns must be R_0..R_K in order");
  if (table.rows.empty()) throw CsvError(1, "spectrum file has no rows");
  return SpectrumSeries::from_ratios(std::move(table.rows));
}

void write_pcc_csv(const std::filesystem::path& path, const PccSeries& pcc) {
  auto out = open_out(path);
  out << "epoch,pcc\n";
  for (std::size_t t = 0; t < pcc.size(); ++t)
    out << t << ',' << (pcc[t] ? format_number(*pcc[t]) : std::string("NA")) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_labels_csv(const std::filesystem::path& path, const LabelSet& labels,
                      const std::vector<int>& original) {
  labels.validate();
  if (original.size() != labels.labels.size())
    throw std::invalid_argument("write_labels_csv: original label count differs");
  auto out = open_out(path);
  out << "index,label,original,perturbed\n";
  for (std::size_t i = 0; i < labels.labels.size(); ++i)
    out << i << ',' << labels.labels[i] << ',' << original[i] << ','
        << (i < labels.perturbed_mask.size() && labels.perturbed_mask[i] ? 1 : 0) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

LabelSet read_labels_csv(const std::filesystem::path& path, int num_classes) {
  auto in = open_in(path);
  LabelSet set;
  set.num_classes = num_classes;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::size_t label_col = 0;
  std::optional<std::size_t> mask_col;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (header.empty()) {
      header = cells;
      const auto it = std::find(header.begin(), header.end(), "label");
      if (it == header.end()) throw CsvError(line_no, "labels file needs a 'label' column");
      label_col = static_cast<std::size_t>(it - header.begin());
      const auto m = std::find(header.begin(), header.end(), "perturbed");
      if (m != header.end()) mask_col = static_cast<std::size_t>(m - header.begin());
      continue;
    }
    if (cells.size() != header.size())
      throw CsvError(line_no, "expected " + std::to_string(header.size()) + " fields");
    const auto label = parse_integer(cells[label_col], line_no);
    if (label < 0 || label >= num_classes)
      throw CsvError(line_no, "label " + std::to_string(label) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
    set.labels.push_back(static_cast<int>(label));
    set.perturbed_mask.push_back(mask_col ? parse_integer(cells[*mask_col], line_no) != 0 : false);
  }
  if (header.empty()) throw CsvError(line_no, "missing header");
  return set;
}

// ---------------------------------------------------------------------------
// Heatmap

namespace {

struct Stop {
  double at;
  double r, g, b;
};
// Each segment moves at least one channel by more than the 85 levels it spans.
constexpr Stop kStops[] = {{0.0, 20, 20, 140},
                           {1.0 / 3.0, 20, 180, 230},
                           {2.0 / 3.0, 250, 230, 40},
                           {1.0, 180, 20, 20}};

Rgb palette_entry(int level) {
  const double u = static_cast<double>(level) / 255.0;
  std::size_t s = 0;
  while (s + 2 < std::size(kStops) && u > kStops[s + 1].at) ++s;
  const auto& a = kStops[s];
  const auto& b = kStops[s + 1];
  const double f = (u - a.at) / (b.at - a.at);
  auto lerp = [f](double x, double y) { return static_cast<int>(std::lround(x + f * (y - x))); };
  return {lerp(a.r, b.r), lerp(a.g, b.g), lerp(a.b, b.b)};
}

const std::vector<Rgb>& palette() {
  static const std::vector<Rgb> lut = [] {
    std::vector<Rgb> v(256);
    for (int i = 0; i < 256; ++i) v[static_cast<std::size_t>(i)] = palette_entry(i);
    return v;
  }();
  return lut;
}

std::string hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

Rgb colormap(double unit) {
  const double u = std::clamp(unit, 0.0, 1.0);
  return palette()[static_cast<std::size_t>(std::lround(u * 255.0))];
}

std::optional<int> colormap_level(const Rgb& color) {
  const auto& lut = palette();
  for (std::size_t i = 0; i < lut.size(); ++i)
    if (lut[i] == color) return static_cast<int>(i);
  return std::nullopt;
}

HeatmapSpec heatmap_from_spectrum(const SpectrumSeries& spectrum, Vector contour_levels) {
  HeatmapSpec spec;
  spec.matrix = spectrum.ratios;
  spec.epoch_values.resize(spectrum.epochs());
  for (std::size_t t = 0; t < spectrum.epochs(); ++t) spec.epoch_values[t] = static_cast<double>(t + 1);
  spec.contour_levels = std::move(contour_levels);
  return spec;
}

std::string render_heatmap(const HeatmapSpec& spec) {
  if (spec.matrix.empty() || spec.matrix.front().empty())
    throw std::invalid_argument("heatmap: empty matrix");
  const std::size_t cols_all = spec.matrix.size();
  const std::size_t bins = spec.matrix.front().size();
  for (const auto& col : spec.matrix)
    if (col.size() != bins) throw std::invalid_argument("heatmap: ragged matrix");
  if (spec.epoch_values.size() != cols_all)
    throw std::invalid_argument("heatmap: one epoch value per column required");
  for (double e : spec.epoch_values) {
    if (!std::isfinite(e)) throw std::invalid_argument("heatmap: non-finite epoch value");
    if (spec.log_epoch_axis && e <= 0.0)
      throw std::invalid_argument("heatmap: epoch values must be positive on a log axis");
  }
  for (std::size_t i = 1; i < cols_all; ++i)
    if (!(spec.epoch_values[i] > spec.epoch_values[i - 1]))
      throw std::invalid_argument("heatmap: epoch values must increase");

  std::vector<std::size_t> cols;
  const std::size_t stride =
      spec.max_columns == 0 || cols_all <= spec.max_columns ? 1 : (cols_all + spec.max_columns - 1) / spec.max_columns;
  for (std::size_t t = 0; t < cols_all; t += stride) cols.push_back(t);

  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -vmin;
  for (std::size_t t : cols)
    for (double v : spec.matrix[t])
      if (std::isfinite(v)) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
      }
  const bool any_finite = std::isfinite(vmin);
  const auto unit_of = [&](double v) { return vmax > vmin ? (v - vmin) / (vmax - vmin) : 0.5; };

  constexpr double kLeft = 60, kTop = 30, kWidth = 720, kHeight = 360, kBar = 20;
  const auto axis = [&](double e) { return spec.log_epoch_axis ? std::log10(e) : e; };
  // Column boundaries at midpoints in axis space.
  std::vector<double> edges(cols.size() + 1);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const double here = axis(spec.epoch_values[cols[i]]);
    const double prev = i > 0 ? axis(spec.epoch_values[cols[i - 1]]) : here;
    const double next = i + 1 < cols.size() ? axis(spec.epoch_values[cols[i + 1]]) : here;
    if (i == 0) edges[0] = cols.size() > 1 ? here - 0.5 * (next - here) : here - 0.5;
    edges[i + 1] = i + 1 < cols.size() ? 0.5 * (here + next) : (cols.size() > 1 ? here + 0.5 * (here - prev) : here + 0.5);
  }
  const double x0 = edges.front(), x1 = edges.back();
  const auto sx = [&](double a) { return kLeft + (a - x0) / (x1 - x0) * kWidth; };
  const double cell_h = kHeight / static_cast<double>(bins);
  const auto sy_row = [&](std::size_t k) { return kTop + kHeight - static_cast<double>(k + 1) * cell_h; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kLeft + kWidth + 90 << "\" height=\""
      << kTop + kHeight + 50 << "\" data-vmin=\"" << (any_finite ? format_number(vmin) : "NA")
      << "\" data-vmax=\"" << (any_finite ? format_number(vmax) : "NA") << "\">\n";
  if (!spec.title.empty())
    svg << "<text x=\"" << kLeft << "\" y=\"18\" font-size=\"14\">" << escape_xml(spec.title) << "</text>\n";
  svg << "<g class=\"cells\" shape-rendering=\"crispEdges\">\n";
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const double xa = sx(edges[i]), xb = sx(edges[i + 1]);
    for (std::size_t k = 0; k < bins; ++k) {
      const double v = spec.matrix[cols[i]][k];
      const Rgb c = std::isfinite(v) ? colormap(unit_of(v)) : kMissingColor;
      svg << "<rect data-t=\"" << cols[i] << "\" data-k=\"" << k << "\" x=\"" << fixed(xa) << "\" y=\""
          << fixed(sy_row(k)) << "\" width=\"" << fixed(xb - xa) << "\" height=\"" << fixed(cell_h)
          << "\" fill=\"" << hex(c) << "\"" << (std::isfinite(v) ? "" : " class=\"missing\"") << "/>\n";
    }
  }
  svg << "</g>\n";

  // Marching squares over cell centres.
  if (cols.size() > 1 && bins > 1) {
    const auto cx = [&](std::size_t i) { return 0.5 * (sx(edges[i]) + sx(edges[i + 1])); };
    const auto cy = [&](std::size_t k) { return sy_row(k) + 0.5 * cell_h; };
    for (double level : spec.contour_levels) {
      std::ostringstream path;
      for (std::size_t i = 0; i + 1 < cols.size(); ++i) {
        for (std::size_t k = 0; k + 1 < bins; ++k) {
          const double v[4] = {spec.matrix[cols[i]][k], spec.matrix[cols[i + 1]][k],
                               spec.matrix[cols[i + 1]][k + 1], spec.matrix[cols[i]][k + 1]};
          if (!std::all_of(std::begin(v), std::end(v), [](double x) { return std::isfinite(x); })) continue;
          const double px[4] = {cx(i), cx(i + 1), cx(i + 1), cx(i)};
          const double py[4] = {cy(k), cy(k), cy(k + 1), cy(k + 1)};
          std::vector<std::pair<double, double>> hits;
          for (int e = 0; e < 4; ++e) {
            const int a = e, b = (e + 1) % 4;
            if ((v[a] < level) != (v[b] < level)) {
              const double f = (level - v[a]) / (v[b] - v[a]);
              hits.emplace_back(px[a] + f * (px[b] - px[a]), py[a] + f * (py[b] - py[a]));
            }
          }
          // Four crossings (saddle) pair up in edge order.
          for (std::size_t h = 0; h + 1 < hits.size(); h += 2)
            path << 'M' << fixed(hits[h].first) << ' ' << fixed(hits[h].second) << 'L'
                 << fixed(hits[h + 1].first) << ' ' << fixed(hits[h + 1].second);
        }
      }
      const std::string d = path.str();
      if (!d.empty())
        svg << "<path class=\"contour\" data-level=\"" << format_number(level) << "\" d=\"" << d
            << "\" fill=\"none\" stroke=\"black\" stroke-width=\"0.8\"/>\n";
    }
  }

  // Axes.
  svg << "<g class=\"axes\" font-size=\"10\">\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (spec.log_epoch_axis) {
    for (double decade = std::pow(10.0, std::ceil(x0)); std::log10(decade) <= x1; decade *= 10.0) {
      const double x = sx(std::log10(decade));
      svg << "<line x1=\"" << fixed(x) << "\" y1=\"" << kTop + kHeight << "\" x2=\"" << fixed(x) << "\" y2=\""
          << kTop + kHeight + 5 << "\" stroke=\"black\"/><text x=\"" << fixed(x) << "\" y=\""
          << kTop + kHeight + 17 << "\" text-anchor=\"middle\">" << format_number(decade) << "</text>\n";
    }
  }
  svg << "<text x=\"" << kLeft + kWidth / 2 << "\" y=\"" << kTop + kHeight + 35
      << "\" text-anchor=\"middle\">epoch" << (spec.log_epoch_axis ? " (log scale)" : "") << "</text>\n";
  const std::size_t kstep = std::max<std::size_t>(1, bins / 8);
  for (std::size_t k = 0; k < bins; k += kstep)
    svg << "<text x=\"" << kLeft - 5 << "\" y=\"" << fixed(sy_row(k) + 0.5 * cell_h + 3)
        << "\" text-anchor=\"end\">" << k << "</text>\n";
  svg << "<text x=\"15\" y=\"" << kTop + kHeight / 2 << "\" transform=\"rotate(-90 15 " << kTop + kHeight / 2
      << ")\" text-anchor=\"middle\">k</text>\n";
  // Colour bar.
  for (int i = 0; i < 256; i += 4) {
    const double y = kTop + kHeight - (i + 4) / 256.0 * kHeight;
    svg << "<rect x=\"" << kLeft + kWidth + 15 << "\" y=\"" << fixed(y) << "\" width=\"" << kBar
        << "\" height=\"" << fixed(kHeight * 4 / 256.0) << "\" fill=\"" << hex(palette()[static_cast<std::size_t>(i)])
        << "\"/>\n";
  }
  if (any_finite) {
    svg << "<text x=\"" << kLeft + kWidth + 40 << "\" y=\"" << kTop + 8 << "\">" << fixed(vmax) << "</text>\n";
    svg << "<text x=\"" << kLeft + kWidth + 40 << "\" y=\"" << kTop + kHeight << "\">" << fixed(vmin)
        << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

void emit_heatmap(const HeatmapSpec& spec, const std::filesystem::path& path) {
  const auto text = render_heatmap(spec);
  auto out = open_out(path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace specbias
