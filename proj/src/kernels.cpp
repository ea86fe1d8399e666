#include "kbcd/kernels.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "kbcd/error.hpp"
#include "kbcd/random.hpp"

namespace kbcd {

void KernelSpec::validate() const {
  if (family == KernelFamily::rbf && !(bandwidth > 0.0)) {
    throw std::invalid_argument("KernelSpec: rbf bandwidth must be positive");
  }
}

void FeatureMapSpec::validate() const {
  if (p < 1) throw std::invalid_argument("FeatureMapSpec: p must be >= 1");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("FeatureMapSpec: bandwidth must be positive");
}

void Dataset::validate() const {
  if (labels.size() != x.rows()) throw DimensionMismatch("Dataset: labels length != n");
  for (std::size_t y : labels)
    if (y >= k) throw IndexOutOfRange("Dataset: label " + std::to_string(y) + " >= k");
}

std::string to_string(KernelFamily family) {
  return family == KernelFamily::rbf ? "rbf" : "linear";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "rbf") return KernelFamily::rbf;
  if (name == "linear") return KernelFamily::linear;
  throw std::invalid_argument("unknown kernel family '" + name + "'");
}

namespace {

inline double kernel_value(const KernelSpec& spec, const double* x, const double* y,
                           std::size_t d) {
  if (spec.family == KernelFamily::linear) {
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) s += x[t] * y[t];
    return s;
  }
  double s = 0.0;
  for (std::size_t t = 0; t < d; ++t) {
    const double diff = x[t] - y[t];
    s += diff * diff;
  }
  return std::exp(-s / (2.0 * spec.bandwidth * spec.bandwidth));
}

void check_columns(const IndexSet& columns, std::size_t bound, const char* what) {
  for (std::size_t idx : columns)
    if (idx >= bound)
      throw IndexOutOfRange(std::string(what) + ": index " + std::to_string(idx) +
                            " outside [0, " + std::to_string(bound) + ")");
}

}  // namespace

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("kernel_eval: dimension mismatch");
  return kernel_value(spec, x.data(), y.data(), x.size());
}

Matrix cross_kernel_block(const Matrix& a, const Matrix& b, const IndexSet& columns,
                          const KernelSpec& spec) {
  if (a.cols() != b.cols()) throw DimensionMismatch("cross_kernel_block: dimension mismatch");
  check_columns(columns, b.rows(), "cross_kernel_block");
  const std::size_t n = a.rows(), w = columns.size(), d = a.cols();
  Matrix out(n, w);
#pragma omp parallel for schedule(static) if (n * w * d > 32768)
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.row(i).data();
    for (std::size_t j = 0; j < w; ++j) out(i, j) = kernel_value(spec, ai, b.row(columns[j]).data(), d);
  }
  return out;
}

Matrix kernel_block(const Matrix& x, const IndexSet& columns, const KernelSpec& spec) {
  return cross_kernel_block(x, x, columns, spec);
}

Matrix kernel_block_serial(const Matrix& x, const IndexSet& columns, const KernelSpec& spec) {
  check_columns(columns, x.rows(), "kernel_block");
  const std::size_t n = x.rows(), w = columns.size(), d = x.cols();
  Matrix out(n, w);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row(i).data();
    for (std::size_t j = 0; j < w; ++j) out(i, j) = kernel_value(spec, xi, x.row(columns[j]).data(), d);
  }
  return out;
}

FourierFeature fourier_feature(const FeatureMapSpec& spec, std::size_t d, std::size_t m) {
  Stream rng(derive_seed(spec.master_seed, m));
  FourierFeature f;
  f.omega.resize(d);
  for (double& w : f.omega) w = rng.normal() / spec.bandwidth;
  f.phase = 2.0 * std::numbers::pi * rng.uniform();
  return f;
}

namespace {

std::vector<FourierFeature> features_for(const FeatureMapSpec& spec, std::size_t d,
                                         const IndexSet& features) {
  check_columns(features, spec.p, "random_features_block");
  std::vector<FourierFeature> out(features.size());
  for (std::size_t j = 0; j < features.size(); ++j) out[j] = fourier_feature(spec, d, features[j]);
  return out;
}

inline double feature_value(const FourierFeature& f, const double* x, std::size_t d, double scale) {
  double s = f.phase;
  for (std::size_t t = 0; t < d; ++t) s += x[t] * f.omega[t];
  return scale * std::cos(s);
}

}  // namespace

Matrix random_features_block(const Matrix& x, const IndexSet& features,
                             const FeatureMapSpec& spec) {
  const std::size_t n = x.rows(), w = features.size(), d = x.cols();
  std::vector<FourierFeature> feats(w);
  check_columns(features, spec.p, "random_features_block");
#pragma omp parallel for schedule(static) if (w * d > 4096)
  for (std::size_t j = 0; j < w; ++j) feats[j] = fourier_feature(spec, d, features[j]);
  const double scale = std::sqrt(2.0 / static_cast<double>(spec.p));
  Matrix out(n, w);
#pragma omp parallel for schedule(static) if (n * w * d > 32768)
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row(i).data();
    for (std::size_t j = 0; j < w; ++j) out(i, j) = feature_value(feats[j], xi, d, scale);
  }
  return out;
}

Matrix random_features_block_serial(const Matrix& x, const IndexSet& features,
                                    const FeatureMapSpec& spec) {
  const std::size_t n = x.rows(), w = features.size(), d = x.cols();
  const auto feats = features_for(spec, d, features);
  const double scale = std::sqrt(2.0 / static_cast<double>(spec.p));
  Matrix out(n, w);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row(i).data();
    for (std::size_t j = 0; j < w; ++j) out(i, j) = feature_value(feats[j], xi, d, scale);
  }
  return out;
}

Matrix one_vs_all(const Dataset& data) {
  data.validate();
  Matrix y(data.n(), data.k, -1.0);
  for (std::size_t i = 0; i < data.n(); ++i) y(i, data.labels[i]) = 1.0;
  return y;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in, bool has_header) {
  std::vector<double> entries;
  std::vector<std::size_t> labels;
  std::size_t d = 0;
  bool have_width = false;
  bool header_pending = has_header;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    const auto fields = split_commas(line);
    if (fields.size() < 2) {
      throw ParseError("expected feature columns followed by a label column, got " +
                           std::to_string(fields.size()) + " field(s)",
                       line_no);
    }
    const std::size_t width = fields.size() - 1;
    if (!have_width) {
      d = width;
      have_width = true;
    } else if (width != d) {
      throw ParseError("expected " + std::to_string(d + 1) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    for (std::size_t c = 0; c < width; ++c) {
      double v = 0.0;
      const auto f = fields[c];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError("field " + std::to_string(c + 1) + " ('" + std::string(f) +
                             "') is not a finite number",
                         line_no);
      }
      entries.push_back(v);
    }
    const auto lf = fields.back();
    std::size_t label = 0;
    const auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (ec != std::errc() || ptr != lf.data() + lf.size()) {
      throw ParseError("label field ('" + std::string(lf) +
                           "') is not a non-negative integer; is the label column missing?",
                       line_no);
    }
    labels.push_back(label);
  }
  if (labels.empty()) throw ParseError("no data rows", line_no);
  Dataset data;
  data.x = Matrix::from_rows(labels.size(), d, std::move(entries));
  std::size_t k = 0;
  for (std::size_t y : labels) k = std::max(k, y + 1);
  data.labels = std::move(labels);
  data.k = k;
  return data;
}

Dataset read_dataset_csv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  return read_dataset_csv(in, has_header);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.d(); ++j) out << data.x(i, j) << ',';
    out << data.labels[i] << '\n';
  }
}

Dataset make_blobs(std::size_t n, std::size_t d, std::size_t k, double separation,
                   std::uint64_t seed) {
  Stream rng(seed);
  Matrix centers(k, d);
  for (double& c : centers.data()) c = separation * rng.normal();
  Dataset data;
  data.x = Matrix(n, d);
  data.labels.resize(n);
  data.k = k;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = rng.below(k);
    data.labels[i] = y;
    for (std::size_t j = 0; j < d; ++j) data.x(i, j) = centers(y, j) + rng.normal();
  }
  return data;
}

}  // namespace kbcd
