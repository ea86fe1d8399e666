#pragma once

// Kernel functions and column-block generators. Solvers never hold K or Z
// in full; they ask for one block of columns at a time.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kbcd/linalg.hpp"

namespace kbcd {

enum class KernelFamily { rbf, linear };

struct KernelSpec {
  KernelFamily family = KernelFamily::rbf;
  double bandwidth = 1.0;  // σ, rbf only

  /// Throws std::invalid_argument unless σ > 0 for rbf.
  void validate() const;
};

/// Random Fourier features targeting the rbf kernel of the same bandwidth.
/// Feature m is a pure function of (master_seed, m).
struct FeatureMapSpec {
  std::size_t p = 1;
  double bandwidth = 1.0;
  std::uint64_t master_seed = 0;

  void validate() const;
};

struct Dataset {
  Matrix x;                          // n×d
  std::vector<std::size_t> labels;   // class ids in [0, k)
  std::size_t k = 0;

  std::size_t n() const noexcept { return x.rows(); }
  std::size_t d() const noexcept { return x.cols(); }
  void validate() const;
};

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

/// K([n], I) for the rows of `x`; entry (i, j) = κ(x_i, x_{I(j)}).
Matrix kernel_block(const Matrix& x, const IndexSet& columns, const KernelSpec& spec);
Matrix kernel_block_serial(const Matrix& x, const IndexSet& columns, const KernelSpec& spec);

/// Cross-kernel between two point sets: entry (i, j) = κ(a_i, b_{I(j)}).
Matrix cross_kernel_block(const Matrix& a, const Matrix& b, const IndexSet& columns,
                          const KernelSpec& spec);

/// One sampled cosine feature: ω ~ N(0, σ⁻²·I_d), phase ~ Unif[0, 2π).
struct FourierFeature {
  std::vector<double> omega;
  double phase = 0.0;
};

FourierFeature fourier_feature(const FeatureMapSpec& spec, std::size_t d, std::size_t m);

/// Z([n], I); column j is √(2/p)·cos(X·ω_{I(j)} + phase_{I(j)}).
Matrix random_features_block(const Matrix& x, const IndexSet& features,
                             const FeatureMapSpec& spec);
Matrix random_features_block_serial(const Matrix& x, const IndexSet& features,
                                    const FeatureMapSpec& spec);

/// n×k matrix with +1 at the true class and −1 elsewhere.
Matrix one_vs_all(const Dataset& data);

/// Feature columns followed by an integer label column. Throws ParseError
/// carrying the 1-based line number of the first malformed row.
Dataset read_dataset_csv(std::istream& in, bool has_header);
Dataset read_dataset_csv(const std::string& path, bool has_header);
void write_dataset_csv(std::ostream& out, const Dataset& data);

/// Gaussian blobs: k class centers drawn at scale `separation`, points with
/// unit-variance noise. Deterministic in `seed`.
Dataset make_blobs(std::size_t n, std::size_t d, std::size_t k, double separation,
                   std::uint64_t seed);

}  // namespace kbcd
