#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "kbcd/error.hpp"
#include "kbcd/kernels.hpp"
#include "test_support.hpp"

namespace kbcd {
namespace {

using testing::gaussian;

const KernelSpec rbf1{KernelFamily::rbf, 1.0};

FeatureMapSpec features(std::size_t p, double sigma, std::uint64_t seed) {
  FeatureMapSpec f;
  f.p = p;
  f.bandwidth = sigma;
  f.master_seed = seed;
  return f;
}

TEST(KernelEval, RbfAtZeroDistance) {
  const std::vector<double> x{0.3, -1.2};
  EXPECT_DOUBLE_EQ(kernel_eval(rbf1, x, x), 1.0);
}

TEST(KernelEval, RbfUnitDistance) {
  const std::vector<double> x{0.0, 0.0}, y{1.0, 0.0};
  EXPECT_NEAR(kernel_eval(rbf1, x, y), 0.60653065971263342, 1e-15);
}

TEST(KernelEval, Linear) {
  const std::vector<double> x{1.0, 2.0}, y{3.0, 4.0};
  EXPECT_DOUBLE_EQ(kernel_eval({KernelFamily::linear, 0.0}, x, y), 11.0);
}

TEST(KernelEval, DimensionMismatch) {
  const std::vector<double> x{1.0}, y{1.0, 2.0};
  EXPECT_THROW(kernel_eval(rbf1, x, y), DimensionMismatch);
}

TEST(KernelSpec, Validation) {
  EXPECT_THROW((KernelSpec{KernelFamily::rbf, 0.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((KernelSpec{KernelFamily::linear, 0.0}.validate()));
  EXPECT_THROW(features(0, 1.0, 0).validate(), std::invalid_argument);
  EXPECT_THROW(kernel_family_from_string("poly"), std::invalid_argument);
}

TEST(KernelBlock, FullBlockIsSymmetric) {
  const Matrix x = gaussian(20, 3, 1);
  const Matrix k = kernel_block(x, IndexSet::all(20), rbf1);
  EXPECT_TRUE(is_symmetric(k, 0.0));
  for (std::size_t i = 0; i < 20; ++i) EXPECT_DOUBLE_EQ(k(i, i), 1.0);
}

TEST(KernelBlock, NarrowBandwidthLimit) {
  Matrix x(4, 1);
  for (std::size_t i = 0; i < 4; ++i) x(i, 0) = static_cast<double>(i);
  const Matrix k = kernel_block(x, IndexSet::all(4), {KernelFamily::rbf, 1e-3});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      if (i == j) EXPECT_EQ(k(i, j), 1.0);
      else EXPECT_LT(k(i, j), 1e-10);
    }
}

TEST(KernelBlock, MatchesEntrywiseOracle) {
  const Matrix x = gaussian(6, 4, 2);
  const IndexSet cols({2, 4}, 6);
  const Matrix k = kernel_block(x, cols, rbf1);
  ASSERT_EQ(k.rows(), 6u);
  ASSERT_EQ(k.cols(), 2u);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(k(i, j), kernel_eval(rbf1, x.row(i), x.row(cols[j])));
}

TEST(KernelBlock, OutOfRange) {
  const Matrix x = gaussian(5, 2, 3);
  EXPECT_THROW(kernel_block(x, IndexSet({7}, 9), rbf1), IndexOutOfRange);
}

TEST(KernelBlock, SubselectionOfFullKernel) {
  const Matrix x = gaussian(50, 3, 4);
  const Matrix full = kernel_block(x, IndexSet::all(50), rbf1);
  Stream rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const IndexSet cols(sample_without_replacement(50, 7, rng), 50);
    EXPECT_EQ(kernel_block(x, cols, rbf1), gather_cols(full, cols));
  }
}

TEST(KernelBlock, ParallelEqualsSerial) {
  const Matrix x = gaussian(700, 8, 6);
  const IndexSet cols = IndexSet::range(100, 164, 700);
  EXPECT_EQ(kernel_block(x, cols, rbf1), kernel_block_serial(x, cols, rbf1));
}

TEST(RandomFeatures, EntryMagnitudeAndRowNorm) {
  const Matrix x = gaussian(40, 5, 7);
  const auto spec = features(64, 1.5, 8);
  const Matrix z = random_features_block(x, IndexSet::all(64), spec);
  const double cap = std::sqrt(2.0 / 64.0);
  for (double v : z.data()) EXPECT_LE(std::abs(v), cap);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double s = 0.0;
    for (double v : z.row(i)) s += v * v;
    EXPECT_LE(s, 2.0 + 1e-12);
  }
}

TEST(RandomFeatures, DiagonalGramBound) {
  const Matrix x = gaussian(30, 3, 9);
  const auto spec = features(48, 0.7, 10);
  const Matrix g = gram(random_features_block(x, IndexSet::all(48), spec));
  for (std::size_t j = 0; j < 48; ++j) EXPECT_LE(g(j, j), 2.0 * 30.0 / 48.0 + 1e-12);
}

TEST(RandomFeatures, DeterministicAndOverlapConsistent) {
  const Matrix x = gaussian(25, 4, 11);
  const auto spec = features(100, 1.0, 12);
  const Matrix a = random_features_block(x, IndexSet({3, 50, 97}, 100), spec);
  const Matrix b = random_features_block(x, IndexSet({3, 50, 97}, 100), spec);
  EXPECT_EQ(a, b);
  const Matrix c = random_features_block(x, IndexSet({97, 10}, 100), spec);
  for (std::size_t i = 0; i < 25; ++i) EXPECT_EQ(a(i, 2), c(i, 0));
}

TEST(RandomFeatures, ParallelEqualsSerial) {
  const Matrix x = gaussian(600, 6, 13);
  const auto spec = features(256, 2.0, 14);
  const IndexSet cols = IndexSet::range(0, 128, 256);
  EXPECT_EQ(random_features_block(x, cols, spec), random_features_block_serial(x, cols, spec));
}

TEST(RandomFeatures, OutOfRange) {
  const Matrix x = gaussian(5, 2, 15);
  EXPECT_THROW(random_features_block(x, IndexSet({8}, 10), features(8, 1.0, 0)), IndexOutOfRange);
  EXPECT_THROW(random_features_block_serial(x, IndexSet({8}, 10), features(8, 1.0, 0)),
               IndexOutOfRange);
}

// Empirical mean of φ(x,ω_m)φ(y,ω_m) for features m in [begin, end).
double feature_average(const FeatureMapSpec& spec, const std::vector<double>& x,
                       const std::vector<double>& y, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t m = begin; m < end; ++m) {
    const auto f = fourier_feature(spec, x.size(), m);
    double ax = f.phase, ay = f.phase;
    for (std::size_t t = 0; t < x.size(); ++t) {
      ax += f.omega[t] * x[t];
      ay += f.omega[t] * y[t];
    }
    s += 2.0 * std::cos(ax) * std::cos(ay);
  }
  return s / static_cast<double>(end - begin);
}

TEST(RandomFeatures, MonteCarloMatchesRbf) {
  const auto spec = features(50000, 1.3, 16);
  const KernelSpec k{KernelFamily::rbf, 1.3};
  Stream rng(17);
  for (int pair = 0; pair < 5; ++pair) {
    std::vector<double> x(3), y(3);
    for (double& v : x) v = rng.normal();
    for (double& v : y) v = rng.normal();
    EXPECT_NEAR(feature_average(spec, x, y, 0, 50000), kernel_eval(k, x, y), 0.02);
  }
}

TEST(RandomFeatures, UnbiasednessRate) {
  const std::vector<double> x{0.4, -0.3}, y{-0.2, 0.5};
  const double target = kernel_eval({KernelFamily::rbf, 1.0}, x, y);
  constexpr int reps = 20;
  std::vector<double> log_m, log_err;
  for (std::size_t m : {100u, 1000u, 10000u, 100000u}) {
    double sq = 0.0;
    for (int r = 0; r < reps; ++r) {
      const auto spec = features(m, 1.0, derive_seed(18, static_cast<std::uint64_t>(r)));
      const double e = feature_average(spec, x, y, 0, m) - target;
      sq += e * e;
    }
    log_m.push_back(std::log(static_cast<double>(m)));
    log_err.push_back(0.5 * std::log(sq / reps));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    mx += log_m[i] / 4.0;
    my += log_err[i] / 4.0;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    sxy += (log_m[i] - mx) * (log_err[i] - my);
    sxx += (log_m[i] - mx) * (log_m[i] - mx);
  }
  const double slope = sxy / sxx;
  EXPECT_GE(slope, -0.65);
  EXPECT_LE(slope, -0.35);
}

TEST(OneVsAll, TwoClasses) {
  Dataset d;
  d.x = Matrix(2, 1);
  d.labels = {0, 1};
  d.k = 2;
  EXPECT_EQ(one_vs_all(d), (Matrix{{1.0, -1.0}, {-1.0, 1.0}}));
}

TEST(OneVsAll, SingleClass) {
  Dataset d;
  d.x = Matrix(3, 1);
  d.labels = {0, 0, 0};
  d.k = 1;
  EXPECT_EQ(one_vs_all(d), Matrix(3, 1, 1.0));
}

TEST(OneVsAll, ThreeClasses) {
  Dataset d;
  d.x = Matrix(3, 1);
  d.labels = {2, 0, 2};
  d.k = 3;
  EXPECT_EQ(one_vs_all(d), (Matrix{{-1.0, -1.0, 1.0}, {1.0, -1.0, -1.0}, {-1.0, -1.0, 1.0}}));
}

TEST(OneVsAll, RejectsBadLabels) {
  Dataset d;
  d.x = Matrix(2, 1);
  d.labels = {0, 3};
  d.k = 2;
  EXPECT_THROW(one_vs_all(d), IndexOutOfRange);
}

TEST(DatasetCsv, RoundTrip) {
  const Dataset d = make_blobs(30, 3, 4, 3.0, 19);
  std::stringstream s;
  write_dataset_csv(s, d);
  const Dataset back = read_dataset_csv(s, false);
  EXPECT_EQ(back.x, d.x);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ(back.d(), 3u);
}

TEST(DatasetCsv, HeaderAndBlankLines) {
  std::istringstream s("a,b,label\n\n1.5,2,0\n3,4.25,2\n");
  const Dataset d = read_dataset_csv(s, true);
  EXPECT_EQ(d.n(), 2u);
  EXPECT_EQ(d.k, 3u);
  EXPECT_DOUBLE_EQ(d.x(1, 1), 4.25);
}

TEST(DatasetCsv, MissingLabelColumnReportsLine) {
  std::istringstream s("1,2,0\n1.5,2.5\n");
  try {
    read_dataset_csv(s, false);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream single("1.5\n");
  EXPECT_THROW(read_dataset_csv(single, false), ParseError);
  std::istringstream fractional("1,0.5\n");
  EXPECT_THROW(read_dataset_csv(fractional, false), ParseError);
  std::istringstream junk("1,x,0\n");
  EXPECT_THROW(read_dataset_csv(junk, false), ParseError);
  std::istringstream empty("");
  EXPECT_THROW(read_dataset_csv(empty, false), ParseError);
}

TEST(MakeBlobs, DeterministicShape) {
  const Dataset a = make_blobs(40, 2, 3, 2.0, 20), b = make_blobs(40, 2, 3, 2.0, 20);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NO_THROW(a.validate());
}

}  // namespace
}  // namespace kbcd
