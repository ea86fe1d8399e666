#include <gtest/gtest.h>

#include <sstream>

#include "kbcd/distsim.hpp"
#include "kbcd/error.hpp"
#include "kbcd/solvers.hpp"
#include "test_support.hpp"

namespace kbcd {
namespace {

using testing::gaussian;
using testing::relative_error;

TEST(Partition, BalancedAndCovering) {
  for (std::size_t m : {1u, 3u, 7u, 16u}) {
    const Partition part(100, m);
    std::size_t next = 0, lo = 100, hi = 0;
    for (std::size_t w = 0; w < m; ++w) {
      const auto [a, b] = part.range(w);
      EXPECT_EQ(a, next);
      next = b;
      lo = std::min(lo, b - a);
      hi = std::max(hi, b - a);
    }
    EXPECT_EQ(next, 100u);
    EXPECT_LE(hi - lo, 1u);
  }
  EXPECT_THROW(Partition(10, 0), std::invalid_argument);
}

TEST(Partition, TreeDepth) {
  EXPECT_EQ(Partition(10, 1).tree_depth(), 0u);
  EXPECT_EQ(Partition(10, 2).tree_depth(), 1u);
  EXPECT_EQ(Partition(10, 4).tree_depth(), 2u);
  EXPECT_EQ(Partition(10, 5).tree_depth(), 3u);
}

TEST(DistributedGram, SingleWorkerIsSerial) {
  const Matrix z = gaussian(60, 4, 1);
  CostLedger ledger;
  ledger.begin_block(1, 0);
  EXPECT_EQ(distributed_gram(z, Partition(60, 1), &ledger), gram_serial(z));
  EXPECT_EQ(ledger.bytes(), 0u);
  EXPECT_EQ(ledger.flops(Phase::gram), 60u * 16u);
}

TEST(DistributedGram, FourWorkersBytes) {
  const Matrix z = gaussian(40, 3, 2);
  CostLedger ledger;
  ledger.begin_block(1, 0);
  distributed_gram(z, Partition(40, 4), &ledger);
  EXPECT_EQ(ledger.bytes(), 144u);
}

TEST(DistributedGram, SevenWorkersMatchSerial) {
  const Matrix z = gaussian(100, 5, 3);
  EXPECT_LT(relative_error(distributed_gram(z, Partition(100, 7), nullptr), gram_serial(z)), 1e-12);
}

TEST(DistributedGram, FixedTreeIsBitReproducible) {
  const Matrix z = gaussian(500, 8, 4);
  const Partition part(500, 6);
  const Matrix a = distributed_gram(z, part, nullptr);
  for (int rep = 0; rep < 3; ++rep) EXPECT_EQ(distributed_gram(z, part, nullptr), a);
  const Matrix arrival = distributed_gram(z, part, nullptr, Aggregation::arrival);
  EXPECT_LT(relative_error(arrival, a), 1e-10);
}

TEST(DistributedMatvec, IdentityBlockSelects) {
  const Matrix y = gaussian(4, 2, 5);
  EXPECT_EQ(distributed_matvec(Matrix::identity(4), y, Partition(4, 2), nullptr), y);
}

TEST(DistributedMatvec, SingleWorkerIsSerial) {
  const Matrix a = gaussian(30, 4, 6), y = gaussian(30, 3, 7);
  EXPECT_EQ(distributed_matvec(a, y, Partition(30, 1), nullptr), multiply_at_b_serial(a, y));
}

TEST(DistributedMatvec, RandomMatchesSerial) {
  const Matrix a = gaussian(90, 6, 8), y = gaussian(90, 2, 9);
  CostLedger ledger;
  ledger.begin_block(1, 0);
  const Matrix got = distributed_matvec(a, y, Partition(90, 5), &ledger);
  EXPECT_LT(relative_error(got, multiply_at_b_serial(a, y)), 1e-12);
  EXPECT_EQ(ledger.flops(Phase::residual), 90u * 6u * 2u);
  EXPECT_EQ(ledger.bytes(), 0u);
  EXPECT_EQ(ledger.aux_bytes(), 3u * 6u * 2u * 8u);
}

TEST(Distributed, ShapeErrors) {
  EXPECT_THROW(distributed_gram(Matrix(5, 2), Partition(6, 2), nullptr), DimensionMismatch);
  EXPECT_THROW(distributed_matvec(Matrix(5, 2), Matrix(4, 1), Partition(5, 2), nullptr),
               DimensionMismatch);
}

TEST(Distributed, EqualsSerialAcrossWorkerCounts) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Matrix z = gaussian(123, 7, 10 + seed), y = gaussian(123, 3, 20 + seed);
    for (std::size_t m : {1u, 2u, 4u, 8u, 16u}) {
      const Partition part(123, m);
      EXPECT_LT(relative_error(distributed_gram(z, part, nullptr), gram_serial(z)), 1e-10);
      EXPECT_LT(relative_error(distributed_matvec(z, y, part, nullptr), multiply_at_b_serial(z, y)),
                1e-10);
    }
  }
}

TEST(Distributed, BytesGrowByOneLevelPerDoubling) {
  const Matrix z = gaussian(64, 5, 30);
  std::uint64_t previous = 0;
  for (std::size_t m : {1u, 2u, 4u, 8u, 16u}) {
    CostLedger ledger;
    ledger.begin_block(1, 0);
    distributed_gram(z, Partition(64, m), &ledger);
    if (m > 1) EXPECT_EQ(ledger.bytes() - previous, 25u * 8u);
    previous = ledger.bytes();
  }
}

TEST(PredictCosts, FullKernelTable) {
  const auto c = predict_costs(Method::full, 100, 0, 10, 2, 5);
  EXPECT_DOUBLE_EQ(c.flops, 14000.0);
  EXPECT_EQ(c.blocks, 10u);
  EXPECT_EQ(c.bytes, 100u * 8u * 10u);
}

TEST(PredictCosts, RandomFeaturesTable) {
  const auto c = predict_costs(Method::rf, 100, 20, 10, 2, 5);
  EXPECT_DOUBLE_EQ(c.flops, 6800.0);
  EXPECT_EQ(c.bytes, 3u * 100u * 8u * 2u);
}

TEST(PredictCosts, SingleWorkerHasNoCommunication) {
  EXPECT_EQ(predict_costs(Method::nystrom, 100, 20, 10, 2, 1).bytes, 0u);
  EXPECT_EQ(predict_costs(Method::rf, 100, 20, 10, 2, 1).bytes, 0u);
  EXPECT_THROW(predict_costs(Method::rf, 100, 0, 10, 2, 1), std::invalid_argument);
}

struct EpochRun {
  CostLedger ledger;
  CostPrediction prediction;
};

EpochRun rf_epoch(std::size_t n, std::size_t p, std::size_t b, std::size_t m, std::size_t epochs) {
  const Dataset d = make_blobs(n, 3, 3, 2.0, 40);
  const Matrix y = one_vs_all(d);
  FeatureMapSpec f;
  f.p = p;
  f.bandwidth = 1.5;
  f.master_seed = 41;
  EpochRun r;
  SolverOptions o;
  o.epochs = epochs;
  o.workers = m;
  o.ledger = &r.ledger;
  solve_rf(d.x, y, f, 1e-3, BlockPlan(p, b, 42), o);
  r.prediction = predict_costs(Method::rf, n, p, b, 3, m);
  return r;
}

TEST(MeasuredVsPredicted, RandomFeaturesEpoch) {
  const EpochRun r = rf_epoch(256, 64, 16, 4, 1);
  for (const auto& rec : r.ledger.records())
    if (rec.phase == Phase::gram) EXPECT_EQ(rec.flops, 256u * 16u * 16u);
  EXPECT_EQ(r.ledger.bytes(), r.prediction.bytes);
  const auto report = measured_vs_predicted(r.ledger, r.prediction, 4, 1);
  EXPECT_TRUE(report.bytes_match);
  EXPECT_EQ(report.dominant, "gram");
  EXPECT_GE(report.dominant_ratio, 0.5);
  EXPECT_LE(report.dominant_ratio, 2.0);
}

TEST(MeasuredVsPredicted, ZeroEpochs) {
  const EpochRun r = rf_epoch(64, 32, 16, 2, 0);
  EXPECT_EQ(r.ledger.flops(), 0u);
  EXPECT_EQ(r.ledger.bytes(), 0u);
  EXPECT_TRUE(r.ledger.records().empty());
}

TEST(MeasuredVsPredicted, FullKernelHasNoGramPhase) {
  const Dataset d = make_blobs(128, 3, 2, 2.0, 43);
  CostLedger ledger;
  SolverOptions o;
  o.epochs = 1;
  o.workers = 4;
  o.ledger = &ledger;
  solve_full(d.x, one_vs_all(d), {KernelFamily::rbf, 1.5}, 1e-3, BlockPlan(128, 32, 44), o);
  for (const auto& rec : ledger.records()) EXPECT_NE(rec.phase, Phase::gram);
  const auto pred = predict_costs(Method::full, 128, 0, 32, 2, 4);
  EXPECT_EQ(ledger.bytes(), pred.bytes);
  const auto report = measured_vs_predicted(ledger, pred, 4, 1);
  EXPECT_GE(report.dominant_ratio, 0.5);
  EXPECT_LE(report.dominant_ratio, 2.0);
}

TEST(CostLedger, CsvSchema) {
  CostLedger ledger;
  ledger.begin_block(1, 3);
  ledger.charge(Phase::solve, 10, 0, 0.5);
  ledger.charge(Phase::solve, 5, 8, 0.25);
  std::ostringstream with, without;
  ledger.write_csv(with);
  ledger.write_csv(without, false);
  EXPECT_EQ(with.str(), "epoch,block,phase,flops,bytes,seconds\n1,3,solve,15,8,0.75\n");
  EXPECT_EQ(without.str(), "epoch,block,phase,flops,bytes,seconds\n1,3,solve,15,8,0\n");
}

}  // namespace
}  // namespace kbcd
