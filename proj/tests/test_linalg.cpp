#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "kbcd/error.hpp"
#include "kbcd/linalg.hpp"
#include "test_support.hpp"

namespace kbcd {
namespace {

using testing::gaussian;
using testing::random_spd;
using testing::relative_error;
using testing::to_eigen;

TEST(Matrix, ShapeAndFill) {
  Matrix m(2, 3, 1.5);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.size(), 6u);
  for (double v : m.data()) EXPECT_EQ(v, 1.5);
}

TEST(Matrix, InitializerListRejectsRaggedRows) {
  EXPECT_THROW((Matrix{{1.0, 2.0}, {3.0}}), DimensionMismatch);
}

TEST(Matrix, ArithmeticChecksShapes) {
  Matrix a(2, 2), b(2, 3);
  EXPECT_THROW(a += b, DimensionMismatch);
  EXPECT_THROW(a -= b, DimensionMismatch);
}

TEST(IndexSet, RejectsOutOfRangeAndDuplicates) {
  EXPECT_THROW(IndexSet({0, 3}, 3), IndexOutOfRange);
  EXPECT_THROW(IndexSet({1, 1}, 3), IndexOutOfRange);
  const IndexSet ok({2, 0}, 3);
  EXPECT_EQ(ok.size(), 2u);
  EXPECT_EQ(ok[0], 2u);
}

TEST(SpdSolve, Identity) {
  const Matrix x = spd_solve(Matrix::identity(2), Matrix{{1.0}, {2.0}});
  EXPECT_EQ(x, (Matrix{{1.0}, {2.0}}));
}

TEST(SpdSolve, TwoByTwo) {
  const Matrix x = spd_solve(Matrix{{2.0, 1.0}, {1.0, 2.0}}, Matrix{{3.0}, {3.0}});
  EXPECT_NEAR(x(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(x(1, 0), 1.0, 1e-15);
}

TEST(SpdSolve, RecoversPlantedSolution) {
  const Matrix a = random_spd(8, 1.0, 11);
  const Matrix x = gaussian(8, 3, 12);
  EXPECT_LT(relative_error(spd_solve(a, multiply(a, x)), x), 1e-10);
}

TEST(SpdSolve, ResidualWithinContract) {
  const Matrix a = random_spd(20, 0.5, 13);
  const Matrix b = gaussian(20, 4, 14);
  const Matrix x = spd_solve(a, b);
  EXPECT_LE(frobenius_distance(multiply(a, x), b), 1e-8 * (1.0 + frobenius_norm(b)));
}

TEST(SpdSolve, IllConditionedRecovery) {
  // Condition number 1e8 by construction.
  Stream rng(15);
  const Matrix q = random_orthogonal(12, rng);
  Matrix d(12, 12);
  for (std::size_t i = 0; i < 12; ++i) d(i, i) = std::pow(10.0, -8.0 * static_cast<double>(i) / 11.0);
  const Matrix a = multiply(multiply(q, d), transpose(q));
  const Matrix x = gaussian(12, 1, 16);
  EXPECT_LT(relative_error(spd_solve(a, multiply(a, x)), x), 1e-8);
}

TEST(SpdSolve, NonPositivePivotThrows) {
  EXPECT_THROW(spd_solve(Matrix{{1.0, 2.0}, {2.0, 1.0}}, Matrix{{1.0}, {1.0}}), NotSpd);
  EXPECT_THROW(SpdFactorization(Matrix(3, 3)), NotSpd);
}

TEST(SpdSolve, RejectsAsymmetricAndMismatched) {
  EXPECT_THROW(spd_solve(Matrix{{2.0, 1.0}, {0.0, 2.0}}, Matrix{{1.0}, {1.0}}), NotSpd);
  EXPECT_THROW(spd_solve(Matrix::identity(2), Matrix(3, 1)), DimensionMismatch);
}

TEST(SpdFactorization, ReconstructsInput) {
  const Matrix a = random_spd(10, 0.1, 17);
  const SpdFactorization f(a);
  EXPECT_EQ(f.dimension(), 10u);
  EXPECT_LT(relative_error(f.reconstruct(), a), 1e-10);
}

TEST(Gram, Identity) { EXPECT_EQ(gram(Matrix::identity(3)), Matrix::identity(3)); }

TEST(Gram, SingleColumn) { EXPECT_EQ(gram(Matrix{{1.0}, {2.0}, {2.0}}), Matrix{{9.0}}); }

TEST(Gram, MatchesDotProductOracle) {
  const Matrix z = gaussian(10, 3, 21);
  const Matrix g = gram(z);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (std::size_t r = 0; r < 10; ++r) dot += z(r, i) * z(r, j);
      EXPECT_NEAR(g(i, j), dot, 1e-12);
    }
}

TEST(Gram, SymmetricPsd) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix g = gram(gaussian(30, 12, 100 + seed));
    EXPECT_TRUE(is_symmetric(g, 0.0));
    const auto ex = lambda_extremes(g);
    EXPECT_GE(ex.min, -1e-10 * ex.max);
  }
}

TEST(Gram, ParallelEqualsSerialBitwise) {
  const Matrix z = gaussian(3000, 40, 22);
  EXPECT_EQ(gram(z), gram_serial(z));
  EXPECT_EQ(multiply_at_b(z, gaussian(3000, 3, 23)), multiply_at_b_serial(z, gaussian(3000, 3, 23)));
}

TEST(Gram, RowRangesSumToWhole) {
  const Matrix z = gaussian(50, 6, 24);
  Matrix parts = gram_rows(z, 0, 20);
  parts += gram_rows(z, 20, 50);
  EXPECT_LT(relative_error(parts, gram(z)), 1e-14);
}

TEST(Selector, SingleScatter) {
  EXPECT_EQ(apply_selector(3, IndexSet({1}, 3), Matrix{{5.0}}), (Matrix{{0.0}, {5.0}, {0.0}}));
}

TEST(Selector, IdentitySelector) {
  EXPECT_EQ(apply_selector(2, IndexSet({0, 1}, 2), Matrix::identity(2)), Matrix::identity(2));
}

TEST(Selector, ScatterPositions) {
  const Matrix s = apply_selector(5, IndexSet({4, 0}, 5), Matrix{{1.0}, {2.0}});
  EXPECT_EQ(s, (Matrix{{2.0}, {0.0}, {0.0}, {0.0}, {1.0}}));
}

TEST(Selector, Errors) {
  EXPECT_THROW(apply_selector(3, IndexSet({0, 4}, 5), Matrix(2, 1)), IndexOutOfRange);
  EXPECT_THROW(apply_selector(3, IndexSet({0, 1}, 3), Matrix(3, 1)), DimensionMismatch);
}

TEST(Selector, GatherInvertsScatter) {
  const IndexSet sel({6, 2, 9}, 10);
  const Matrix a = gaussian(3, 4, 25);
  EXPECT_EQ(gather_rows(apply_selector(10, sel, a), sel), a);
}

TEST(LambdaExtremes, Diagonal) {
  Matrix d(3, 3);
  d(0, 0) = 1.0;
  d(1, 1) = 2.0;
  d(2, 2) = 3.0;
  const auto ex = lambda_extremes(d);
  EXPECT_NEAR(ex.max, 3.0, 1e-9);
  EXPECT_NEAR(ex.min, 1.0, 1e-9);
  EXPECT_TRUE(ex.converged);
}

TEST(LambdaExtremes, Identity) {
  const auto ex = lambda_extremes(Matrix::identity(4));
  EXPECT_NEAR(ex.max, 1.0, 1e-12);
  EXPECT_NEAR(ex.min, 1.0, 1e-12);
}

TEST(LambdaExtremes, MatchesDenseEigensolve) {
  const Matrix a = random_spd(12, 0.5, 31);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(a));
  const auto ex = lambda_extremes(a);
  EXPECT_NEAR(ex.max, es.eigenvalues().maxCoeff(), 1e-6 * es.eigenvalues().maxCoeff());
  EXPECT_NEAR(ex.min, es.eigenvalues().minCoeff(), 1e-6 * es.eigenvalues().minCoeff());
  EXPECT_NEAR(lambda_max(a), ex.max, 1e-9 * ex.max);
}

TEST(LambdaExtremes, IndefiniteAndNegativeDominant) {
  Matrix d(3, 3);
  d(0, 0) = -5.0;
  d(1, 1) = 1.0;
  d(2, 2) = 2.0;
  const auto ex = lambda_extremes(d);
  EXPECT_NEAR(ex.max, 2.0, 1e-8);
  EXPECT_NEAR(ex.min, -5.0, 1e-8);
  EXPECT_NEAR(lambda_max(d), 2.0, 1e-8);
}

TEST(LambdaExtremes, FlagsNonConvergence) {
  const auto ex = lambda_extremes(random_spd(30, 0.0, 32), 2);
  EXPECT_FALSE(ex.converged);
  EXPECT_EQ(ex.iterations, 4u);
}

TEST(LambdaExtremes, ProjectionEqualsSubmatrix) {
  const Matrix a = random_spd(9, 0.2, 33);
  const IndexSet sel({1, 4, 7}, 9);
  const Matrix sub = principal_submatrix(a, sel);
  // P_I·A·P_I as a 9×9 matrix that is zero outside I.
  Matrix projected(9, 9);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) projected(sel[i], sel[j]) = a(sel[i], sel[j]);
  EXPECT_NEAR(lambda_max(projected), lambda_max(sub), 1e-9 * lambda_max(sub));
}

TEST(RandomOrthogonal, IsOrthogonal) {
  Stream rng(34);
  const Matrix q = random_orthogonal(16, rng);
  EXPECT_LT(frobenius_distance(multiply(transpose(q), q), Matrix::identity(16)), 1e-12);
}

TEST(Norms, Basics) {
  const Matrix a{{3.0, 4.0}};
  EXPECT_DOUBLE_EQ(frobenius_norm(a), 5.0);
  EXPECT_DOUBLE_EQ(inner(a, a), 25.0);
  EXPECT_DOUBLE_EQ(max_abs(Matrix{{-7.0, 2.0}}), 7.0);
  EXPECT_DOUBLE_EQ(trace(Matrix{{1.0, 9.0}, {9.0, 2.0}}), 3.0);
  EXPECT_FALSE(all_finite(Matrix{{std::nan("")}}));
}

}  // namespace
}  // namespace kbcd
