#include "kbcd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kbcd/error.hpp"

namespace kbcd {

namespace {

// Below this many multiply-adds the OpenMP fork costs more than it saves.
constexpr std::size_t kParallelThreshold = 1 << 15;

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(what) + ": shapes " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " and " + std::to_string(b.rows()) +
                            "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionMismatch("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::size_t rows, std::size_t cols, std::vector<double> entries) {
  if (entries.size() != rows * cols) throw DimensionMismatch("Matrix::from_rows: size");
  Matrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.data_ = std::move(entries);
  return m;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

IndexSet::IndexSet(std::vector<std::size_t> indices, std::size_t universe)
    : indices_(std::move(indices)), universe_(universe) {
  std::vector<bool> seen(universe_, false);
  for (std::size_t idx : indices_) {
    if (idx >= universe_) {
      throw IndexOutOfRange("IndexSet: index " + std::to_string(idx) + " outside [0, " +
                            std::to_string(universe_) + ")");
    }
    if (seen[idx]) throw IndexOutOfRange("IndexSet: duplicate index " + std::to_string(idx));
    seen[idx] = true;
  }
}

IndexSet IndexSet::all(std::size_t n) { return range(0, n, n); }

IndexSet IndexSet::range(std::size_t begin, std::size_t end, std::size_t universe) {
  std::vector<std::size_t> idx;
  idx.reserve(end > begin ? end - begin : 0);
  for (std::size_t i = begin; i < end; ++i) idx.push_back(i);
  return IndexSet(std::move(idx), universe);
}

SpdFactorization::SpdFactorization(const Matrix& a) : n_(a.rows()), l_(a.rows(), a.rows()) {
  if (!a.is_square()) throw DimensionMismatch("SpdFactorization: matrix not square");
  for (std::size_t j = 0; j < n_; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l_(j, k) * l_(j, k);
    if (!(diag > 0.0)) {
      throw NotSpd("SpdFactorization: non-positive pivot " + std::to_string(diag) +
                   " at column " + std::to_string(j));
    }
    const double ljj = std::sqrt(diag);
    l_(j, j) = ljj;
    for (std::size_t i = j + 1; i < n_; ++i) {
      double s = a(i, j);
      const double* li = &l_(i, 0);
      const double* lj = &l_(j, 0);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      l_(i, j) = s / ljj;
    }
  }
}

void SpdFactorization::solve_in_place(Matrix& b) const {
  if (b.rows() != n_) throw DimensionMismatch("SpdFactorization::solve: row count");
  const std::size_t k = b.cols();
  // Forward: L·y = b.
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double lij = l_(i, j);
      for (std::size_t c = 0; c < k; ++c) b(i, c) -= lij * b(j, c);
    }
    const double inv = 1.0 / l_(i, i);
    for (std::size_t c = 0; c < k; ++c) b(i, c) *= inv;
  }
  // Backward: Lᵀ·x = y.
  for (std::size_t ii = n_; ii-- > 0;) {
    for (std::size_t j = ii + 1; j < n_; ++j) {
      const double lji = l_(j, ii);
      for (std::size_t c = 0; c < k; ++c) b(ii, c) -= lji * b(j, c);
    }
    const double inv = 1.0 / l_(ii, ii);
    for (std::size_t c = 0; c < k; ++c) b(ii, c) *= inv;
  }
}

Matrix SpdFactorization::solve(const Matrix& b) const {
  Matrix x = b;
  solve_in_place(x);
  return x;
}

Matrix SpdFactorization::reconstruct() const {
  Matrix out(n_, n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k <= j; ++k) s += l_(i, k) * l_(j, k);
      out(i, j) = s;
      out(j, i) = s;
    }
  return out;
}

Matrix spd_solve(const Matrix& a, const Matrix& b) {
  if (!a.is_square() || a.cols() != b.rows()) throw DimensionMismatch("spd_solve: shapes");
  if (!is_symmetric(a)) throw NotSpd("spd_solve: matrix is not symmetric");
  return SpdFactorization(a).solve(b);
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("multiply: inner dimensions");
  Matrix c(a.rows(), b.cols());
  const std::size_t m = a.rows(), inner_dim = a.cols(), n = b.cols();
  const bool par = m * inner_dim * n > kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = &c(i, 0);
    for (std::size_t l = 0; l < inner_dim; ++l) {
      const double ail = a(i, l);
      const double* bl = b.row(l).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += ail * bl[j];
    }
  }
  return c;
}

Matrix multiply_at_b_rows(const Matrix& a, const Matrix& b, std::size_t row_begin,
                          std::size_t row_end) {
  if (a.rows() != b.rows()) throw DimensionMismatch("multiply_at_b: row counts");
  Matrix c(a.cols(), b.cols());
  const std::size_t m = a.cols(), n = b.cols();
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const double* ar = a.row(r).data();
    const double* br = b.row(r).data();
    for (std::size_t i = 0; i < m; ++i) {
      const double ari = ar[i];
      double* ci = &c(i, 0);
      for (std::size_t j = 0; j < n; ++j) ci[j] += ari * br[j];
    }
  }
  return c;
}

Matrix multiply_at_b_serial(const Matrix& a, const Matrix& b) {
  return multiply_at_b_rows(a, b, 0, a.rows());
}

Matrix multiply_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionMismatch("multiply_at_b: row counts");
  const std::size_t rows = a.rows(), m = a.cols(), n = b.cols();
  Matrix c(m, n);
  const bool par = rows * m * n > kParallelThreshold;
  // Each output row is owned by one thread and summed over r in order, so
  // the result is bit-identical to the serial twin.
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = &c(i, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double ari = a(r, i);
      const double* br = b.row(r).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += ari * br[j];
    }
  }
  return c;
}

Matrix gram_rows(const Matrix& zb, std::size_t row_begin, std::size_t row_end) {
  const std::size_t b = zb.cols();
  Matrix g(b, b);
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const double* zr = zb.row(r).data();
    for (std::size_t i = 0; i < b; ++i) {
      const double zri = zr[i];
      double* gi = &g(i, 0);
      for (std::size_t j = i; j < b; ++j) gi[j] += zri * zr[j];
    }
  }
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

Matrix gram_serial(const Matrix& zb) { return gram_rows(zb, 0, zb.rows()); }

Matrix gram(const Matrix& zb) {
  const std::size_t n = zb.rows(), b = zb.cols();
  Matrix g(b, b);
  const bool par = n * b * b / 2 > kParallelThreshold;
#pragma omp parallel for schedule(dynamic, 4) if (par)
  for (std::size_t i = 0; i < b; ++i) {
    double* gi = &g(i, 0);
    for (std::size_t r = 0; r < n; ++r) {
      const double* zr = zb.row(r).data();
      const double zri = zr[i];
      for (std::size_t j = i; j < b; ++j) gi[j] += zri * zr[j];
    }
  }
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

Matrix apply_selector(std::size_t n, const IndexSet& selected, const Matrix& a) {
  if (a.rows() != selected.size()) throw DimensionMismatch("apply_selector: |I| != A.rows");
  if (selected.universe() > n) {
    for (std::size_t idx : selected)
      if (idx >= n) throw IndexOutOfRange("apply_selector: index " + std::to_string(idx));
  }
  Matrix out(n, a.cols());
  for (std::size_t j = 0; j < selected.size(); ++j) {
    auto src = a.row(j);
    std::copy(src.begin(), src.end(), out.row(selected[j]).begin());
  }
  return out;
}

Matrix gather_rows(const Matrix& a, const IndexSet& selected) {
  Matrix out(selected.size(), a.cols());
  for (std::size_t j = 0; j < selected.size(); ++j) {
    if (selected[j] >= a.rows()) throw IndexOutOfRange("gather_rows: index out of range");
    auto src = a.row(selected[j]);
    std::copy(src.begin(), src.end(), out.row(j).begin());
  }
  return out;
}

Matrix gather_cols(const Matrix& a, const IndexSet& selected) {
  Matrix out(a.rows(), selected.size());
  for (std::size_t j = 0; j < selected.size(); ++j)
    if (selected[j] >= a.cols()) throw IndexOutOfRange("gather_cols: index out of range");
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < selected.size(); ++j) out(i, j) = a(i, selected[j]);
  return out;
}

Matrix principal_submatrix(const Matrix& a, const IndexSet& selected) {
  if (!a.is_square()) throw DimensionMismatch("principal_submatrix: not square");
  Matrix out(selected.size(), selected.size());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (selected[i] >= a.rows()) throw IndexOutOfRange("principal_submatrix: index");
    for (std::size_t j = 0; j < selected.size(); ++j) out(i, j) = a(selected[i], selected[j]);
  }
  return out;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double x : a.data()) s += x * x;
  return std::sqrt(s);
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "frobenius_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double inner(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "inner");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

double trace(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
  return s;
}

bool is_symmetric(const Matrix& a, double rel_tol) {
  if (!a.is_square()) return false;
  const double scale = std::max(1.0, max_abs(a));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(a(i, j) - a(j, i)) > rel_tol * scale) return false;
  return true;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double x) { return std::isfinite(x); });
}

namespace {

struct PowerResult {
  double value;
  bool converged;
  std::size_t iterations;
};

void symmetric_matvec(const Matrix& a, double shift, const std::vector<double>& v,
                      std::vector<double>& out) {
  // (shift·I − A)·v when shift is set, A·v otherwise.
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.row(i).data();
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += ai[j] * v[j];
    out[i] = shift != 0.0 ? shift * v[i] - s : s;
  }
}

PowerResult power_iteration(const Matrix& a, double shift, std::size_t iters) {
  const std::size_t n = a.rows();
  Stream rng(0x5eedULL + n);
  std::vector<double> v(n), w(n);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;

  double theta = 0.0, prev = 0.0;
  std::size_t stable = 0;
  for (std::size_t t = 1; t <= iters; ++t) {
    symmetric_matvec(a, shift, v, w);
    double rq = 0.0, wn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      rq += v[i] * w[i];
      wn += w[i] * w[i];
    }
    theta = rq;
    double res2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = w[i] - theta * v[i];
      res2 += r * r;
    }
    wn = std::sqrt(wn);
    if (wn == 0.0) return {0.0, true, t};
    const double scale = std::max(std::abs(theta), 1e-300);
    if (std::sqrt(res2) <= 1e-10 * scale) return {theta, true, t};
    stable = std::abs(theta - prev) <= 1e-15 * scale ? stable + 1 : 0;
    if (stable >= 20) return {theta, true, t};
    prev = theta;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wn;
  }
  return {theta, false, iters};
}

}  // namespace

EigenExtremes lambda_extremes(const Matrix& a, std::size_t iters) {
  if (!a.is_square()) throw DimensionMismatch("lambda_extremes: not square");
  if (a.rows() == 0) return {0.0, 0.0, true, 0};
  if (a.rows() == 1) return {a(0, 0), a(0, 0), true, 0};
  const PowerResult dom = power_iteration(a, 0.0, iters);
  EigenExtremes out;
  if (dom.value >= 0.0) {
    out.max = dom.value;
    // Power iteration on λmax·I − A, whose top eigenvalue is λmax − λmin.
    const double shift = dom.value > 0.0 ? dom.value : 1.0;
    const PowerResult low = power_iteration(a, shift, iters);
    out.min = shift - low.value;
    out.converged = dom.converged && low.converged;
    out.iterations = dom.iterations + low.iterations;
  } else {
    out.min = dom.value;
    // A − λmin·I = −(λmin·I − A); its top eigenvalue is λmax − λmin.
    const PowerResult high = power_iteration(-1.0 * a, -dom.value, iters);
    out.max = dom.value + high.value;
    out.converged = dom.converged && high.converged;
    out.iterations = dom.iterations + high.iterations;
  }
  return out;
}

double lambda_max(const Matrix& a, std::size_t iters) {
  if (!a.is_square()) throw DimensionMismatch("lambda_max: not square");
  if (a.rows() == 0) return 0.0;
  if (a.rows() == 1) return a(0, 0);
  const PowerResult dom = power_iteration(a, 0.0, iters);
  if (dom.value >= 0.0) return dom.value;
  return dom.value + power_iteration(-1.0 * a, -dom.value, iters).value;
}

Matrix random_orthogonal(std::size_t n, Stream& rng) {
  Matrix q(n, n);
  for (double& x : q.data()) x = rng.normal();
  // Modified Gram-Schmidt on columns, two passes for orthogonality to
  // machine precision.
  for (std::size_t j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += q(i, k) * q(i, j);
        for (std::size_t i = 0; i < n; ++i) q(i, j) -= dot * q(i, k);
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
  }
  return q;
}

}  // namespace kbcd
