#pragma once

// Dense row-major matrices and the handful of kernels the block solvers and
// rate checks are built from. Functions with a `_serial` twin run the
// OpenMP path by default; the serial twin is the reference the tests and
// benchmarks compare against.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "kbcd/random.hpp"

namespace kbcd {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::size_t rows, std::size_t cols, std::vector<double> entries);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

/// Ordered, duplicate-free positions within [0, universe).
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::vector<std::size_t> indices, std::size_t universe);

  static IndexSet all(std::size_t n);
  static IndexSet range(std::size_t begin, std::size_t end, std::size_t universe);

  std::size_t size() const noexcept { return indices_.size(); }
  std::size_t universe() const noexcept { return universe_; }
  std::size_t operator[](std::size_t j) const noexcept { return indices_[j]; }
  std::span<const std::size_t> indices() const noexcept { return indices_; }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }

  bool operator==(const IndexSet&) const = default;

 private:
  std::vector<std::size_t> indices_;
  std::size_t universe_ = 0;
};

/// Lower Cholesky factor of a symmetric positive definite matrix.
class SpdFactorization {
 public:
  /// Throws NotSpd on a non-positive pivot.
  explicit SpdFactorization(const Matrix& a);

  std::size_t dimension() const noexcept { return n_; }
  const Matrix& lower() const noexcept { return l_; }

  Matrix solve(const Matrix& b) const;
  void solve_in_place(Matrix& b) const;
  Matrix reconstruct() const;

 private:
  std::size_t n_;
  Matrix l_;
};

Matrix spd_solve(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);
Matrix multiply(const Matrix& a, const Matrix& b);
/// aᵀ·b without forming the transpose.
Matrix multiply_at_b(const Matrix& a, const Matrix& b);
Matrix multiply_at_b_serial(const Matrix& a, const Matrix& b);

/// Zbᵀ·Zb. The result is exactly symmetric.
Matrix gram(const Matrix& zb);
Matrix gram_serial(const Matrix& zb);
/// Partial gram over rows [row_begin, row_end), same summation order as gram().
Matrix gram_rows(const Matrix& zb, std::size_t row_begin, std::size_t row_end);
Matrix multiply_at_b_rows(const Matrix& a, const Matrix& b, std::size_t row_begin,
                          std::size_t row_end);

/// S·A with S the n×|I| column selector of I: rows of A scattered to I.
Matrix apply_selector(std::size_t n, const IndexSet& selected, const Matrix& a);
/// Sᵀ·A: rows of A gathered from I.
Matrix gather_rows(const Matrix& a, const IndexSet& selected);
Matrix gather_cols(const Matrix& a, const IndexSet& selected);
/// A(I, I).
Matrix principal_submatrix(const Matrix& a, const IndexSet& selected);

double frobenius_norm(const Matrix& a);
double frobenius_distance(const Matrix& a, const Matrix& b);
double inner(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);
double trace(const Matrix& a);
bool is_symmetric(const Matrix& a, double rel_tol = 1e-9);
bool all_finite(const Matrix& a);

struct EigenExtremes {
  double max = 0.0;
  double min = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Power iteration for the top eigenvalue, then on the shifted matrix
/// (λmax·I − A) for the bottom one. On non-convergence the last estimates
/// are returned with `converged == false`.
EigenExtremes lambda_extremes(const Matrix& a, std::size_t iters = 20000);
double lambda_max(const Matrix& a, std::size_t iters = 20000);

/// Haar-like random orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
Matrix random_orthogonal(std::size_t n, Stream& rng);

}  // namespace kbcd
