#pragma once

// Simulated multi-worker execution of the within-block reductions. Workers
// are OpenMP tasks over disjoint row ranges; the ledger counts the bytes a
// real cluster would move, using 8 bytes per double.
//
// Counting convention: one multiply-add is one unit, matching the abstract
// units of the per-epoch cost model (so a b×b gram over n rows is n·b²).

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "kbcd/linalg.hpp"

namespace kbcd {

enum class Method { full, nystrom, rf };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

/// Balanced row ranges for M workers; sizes differ by at most one.
class Partition {
 public:
  Partition(std::size_t n, std::size_t workers);

  std::size_t workers() const noexcept { return ranges_.size(); }
  std::size_t rows() const noexcept { return n_; }
  std::pair<std::size_t, std::size_t> range(std::size_t w) const { return ranges_.at(w); }
  /// ⌈log2 M⌉: depth of the aggregation tree.
  std::size_t tree_depth() const noexcept;

 private:
  std::size_t n_;
  std::vector<std::pair<std::size_t, std::size_t>> ranges_;
};

enum class Phase { generation, gram, residual, solve };
std::string to_string(Phase phase);

struct PhaseRecord {
  std::size_t epoch = 0;
  std::size_t block = 0;
  Phase phase = Phase::generation;
  std::uint64_t flops = 0;
  std::uint64_t bytes = 0;
  double seconds = 0.0;
};

/// Flop and byte counters with a per-block, per-phase breakdown. `bytes`
/// counts the traffic the cost model accounts for (b×b gram reductions, the
/// full-kernel diagonal block). The b×k right-hand-side reductions are
/// tracked separately in `aux_bytes` because the model omits them.
class CostLedger {
 public:
  void begin_block(std::size_t epoch, std::size_t block);
  void charge(Phase phase, std::uint64_t flops, std::uint64_t bytes, double seconds);
  void charge_aux_bytes(std::uint64_t bytes) { aux_bytes_ += bytes; }

  std::uint64_t flops() const noexcept;
  std::uint64_t bytes() const noexcept;
  std::uint64_t aux_bytes() const noexcept { return aux_bytes_; }
  std::uint64_t flops(Phase phase) const noexcept;
  std::uint64_t bytes(Phase phase) const noexcept;
  double seconds(Phase phase) const noexcept;
  std::size_t blocks_visited() const noexcept { return blocks_; }

  const std::vector<PhaseRecord>& records() const noexcept { return records_; }

  /// Columns: epoch,block,phase,flops,bytes,seconds. With `timing` off the
  /// seconds column is written as 0 so reruns compare byte for byte.
  void write_csv(std::ostream& out, bool timing = true) const;

 private:
  PhaseRecord& slot(Phase phase);

  std::vector<PhaseRecord> records_;
  std::size_t epoch_ = 0;
  std::size_t block_ = 0;
  std::size_t blocks_ = 0;
  std::size_t block_start_ = 0;
  std::uint64_t aux_bytes_ = 0;
};

enum class Aggregation {
  fixed_tree,  // balanced binary tree over worker ids; bit-reproducible
  arrival,     // partials summed as workers finish
};

/// Σ_w Zb(rows_w)ᵀ·Zb(rows_w). Charges n·b² flops (gram) and ⌈log2 M⌉·b²·8
/// bytes to the ledger when one is given.
Matrix distributed_gram(const Matrix& zb, const Partition& part, CostLedger* ledger,
                        Aggregation order = Aggregation::fixed_tree);

/// Σ_w A(rows_w)ᵀ·rhs(rows_w), a b×k result. Charges n·b·k flops to `phase`
/// and ⌈log2 M⌉·b·k·8 auxiliary bytes.
Matrix distributed_matvec(const Matrix& a, const Matrix& rhs, const Partition& part,
                          CostLedger* ledger, Phase phase = Phase::residual,
                          Aggregation order = Aggregation::fixed_tree);

/// Closed-form cost of one epoch. Terms are per block; totals multiply by
/// the block count.
struct CostPrediction {
  double residual_term = 0.0;  // nbk/M
  double gram_term = 0.0;      // nb²/M, zero for the full kernel
  double solve_term = 0.0;     // b³
  std::size_t blocks = 0;      // n/b (full) or p/b
  double flops = 0.0;          // (sum of terms)·blocks
  std::uint64_t bytes = 0;
};

CostPrediction predict_costs(Method method, std::size_t n, std::size_t p, std::size_t b,
                             std::size_t k, std::size_t workers);

struct CostComparison {
  std::string category;
  double measured = 0.0;   // per-worker critical path, per epoch
  double predicted = 0.0;
  double ratio = 0.0;
};

struct CostReport {
  std::vector<CostComparison> rows;
  std::string dominant;          // category with the largest predicted term
  double dominant_ratio = 0.0;
  std::uint64_t measured_bytes = 0;
  std::uint64_t predicted_bytes = 0;
  bool bytes_match = false;

  /// Columns: category,measured,predicted,ratio.
  void write_csv(std::ostream& out) const;
};

/// Compares ledger counters of `epochs` completed epochs against the model.
/// Distributed phases are divided by M to get the per-worker path.
CostReport measured_vs_predicted(const CostLedger& ledger, const CostPrediction& prediction,
                                 std::size_t workers, std::size_t epochs = 1);

}  // namespace kbcd
