#pragma once

// Block coordinate descent for kernel least squares: full kernel, Nyström
// and random features. All three regenerate one column block per update and
// never materialize K or Z.
//
// λ convention: every public entry point takes the statistical λ of the
// (1/n)‖·‖² objectives. The linear systems use λ_eff = n·λ.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kbcd/distsim.hpp"
#include "kbcd/kernels.hpp"
#include "kbcd/linalg.hpp"

namespace kbcd {

/// Fixed partition of a coordinate universe into blocks of size b, plus a
/// fresh visit order per epoch. Both derive from `seed`.
class BlockPlan {
 public:
  /// Throws ConfigError unless b ≥ 1 and b divides `universe`.
  BlockPlan(std::size_t universe, std::size_t b, std::uint64_t seed);

  std::size_t universe() const noexcept { return universe_; }
  std::size_t block_size() const noexcept { return b_; }
  std::size_t block_count() const noexcept { return blocks_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }
  const IndexSet& block(std::size_t id) const { return blocks_.at(id); }
  const std::vector<IndexSet>& blocks() const noexcept { return blocks_; }

  /// Permutation of block ids visited in `epoch` (0-based).
  std::vector<std::size_t> visit_order(std::size_t epoch) const;

 private:
  std::size_t universe_;
  std::size_t b_;
  std::uint64_t seed_;
  std::vector<IndexSet> blocks_;
};

struct TraceRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t block = 0;  // block id within the plan
  double seconds = 0.0;   // since solve start
  double objective = 0.0;
  /// Full kernel: the (1/n)‖Kα−Y‖² + λ⟨α,Kα⟩ value next to the surrogate.
  /// Nyström/RF: same as `objective` without the γ ridge.
  double original_objective = 0.0;
  std::optional<double> test_error;
};

struct ConvergenceTrace {
  double initial_objective = 0.0;
  std::vector<TraceRecord> records;

  /// Columns: epoch,block,seconds,objective,test_error.
  void write_csv(std::ostream& out) const;
};

enum class ErrorMetric { top1, rmse };

struct TestSet {
  Matrix x;
  std::vector<std::size_t> labels;  // top1
  Matrix targets;                   // rmse: m×k
  ErrorMetric metric = ErrorMetric::top1;
};

double test_error(const Matrix& scores, const TestSet& test);

struct MethodSpec {
  Method method = Method::rf;
  KernelSpec kernel;         // full, nystrom
  FeatureMapSpec features;   // rf: p, bandwidth, seed
  std::size_t p = 0;         // nystrom landmark count
  double gamma = 0.0;        // nystrom ridge on α
  std::uint64_t landmark_seed = 0;

  /// Size of the coordinate universe the block plan partitions.
  std::size_t universe(std::size_t n) const;
};

struct Model {
  Method method = Method::rf;
  KernelSpec kernel;
  FeatureMapSpec features;
  double lambda = 0.0;
  double gamma = 0.0;
  std::size_t input_dim = 0;
  Matrix coefficients;  // n×k (full) or p×k
  Matrix support;       // training rows (full) or landmark rows (nystrom)
  IndexSet landmarks;   // nystrom
};

struct BlockEvent {
  std::size_t epoch;
  std::size_t block;
  std::size_t lambda_index;
  double lambda;
  const Matrix& coefficients;
  const Matrix* residual;  // maintained R for nystrom/rf, nullptr for full
  double objective;
};

struct SolverOptions {
  std::size_t epochs = 10;
  std::size_t workers = 1;
  CostLedger* ledger = nullptr;
  const TestSet* test = nullptr;
  /// When positive, stop after the first epoch whose relative normal
  /// equation residual is below this (all λ for a path).
  double gradient_tol = 0.0;
  /// Allowed objective increase per block, relative to max(1, |f|).
  double descent_tol = 1e-9;
  bool timing = true;
  std::function<void(const BlockEvent&)> on_block;
};

struct SolveResult {
  double lambda = 0.0;
  Model model;
  ConvergenceTrace trace;
  std::size_t epochs_run = 0;
};

/// Landmarks for Nyström: p uniform draws without replacement from [0, n).
IndexSet draw_landmarks(std::size_t n, std::size_t p, std::uint64_t seed);

/// Shares every λ-independent block quantity (K_b, gram, generation) across
/// the λ list. Result i corresponds to lambdas[i].
std::vector<SolveResult> solve_path(const Matrix& x, const Matrix& y, const MethodSpec& spec,
                                    std::span<const double> lambdas, const BlockPlan& plan,
                                    const SolverOptions& options = {});

/// Gauss-Seidel on (K + nλI)α = Y.
SolveResult solve_full(const Matrix& x, const Matrix& y, const KernelSpec& kernel, double lambda,
                       const BlockPlan& plan, const SolverOptions& options = {});

/// Gauss-Seidel on (K_JᵀK_J + nλK_JJ + nλγI)α = K_JᵀY with p landmarks J.
SolveResult solve_nystrom(const Matrix& x, const Matrix& y, const KernelSpec& kernel,
                          std::size_t p, double lambda, double gamma, const BlockPlan& plan,
                          std::uint64_t landmark_seed, const SolverOptions& options = {});

/// Gauss-Seidel on (ZᵀZ + nλI)w = ZᵀY.
SolveResult solve_rf(const Matrix& x, const Matrix& y, const FeatureMapSpec& features,
                     double lambda, const BlockPlan& plan, const SolverOptions& options = {});

/// Minimizer of the method's objective by a dense solve of its normal
/// equation. Materializes K (full), K_J or Z; meant for evaluation only.
Matrix exact_coefficients(const Matrix& x, const Matrix& y, const MethodSpec& spec, double lambda);
/// Traced objective at exact_coefficients (the surrogate for the full kernel).
double optimal_objective(const Matrix& x, const Matrix& y, const MethodSpec& spec, double lambda);

/// First epoch whose last objective satisfies f − f* ≤ tol·(f⁰ − f*).
std::optional<std::size_t> epochs_to_tolerance(const ConvergenceTrace& trace, double fstar,
                                               double tol);

/// Relative residual of the method's normal equation at `model`.
double normal_equation_residual(const Matrix& x, const Matrix& y, const Model& model);

Matrix predict(const Model& model, const Matrix& x_test);
/// Row argmax; ties go to the lowest class id.
std::vector<std::size_t> classify(const Matrix& scores);

// Objectives over explicit matrices, for checks and reporting.

/// ½⟨α,Kα⟩ + (nλ/2)‖α‖² − ⟨Y,α⟩; the function block Gauss-Seidel descends.
double full_surrogate_objective(const Matrix& k, const Matrix& y, const Matrix& alpha,
                                double lambda);
/// (1/n)‖Kα − Y‖² + λ⟨α,Kα⟩.
double full_kernel_objective(const Matrix& k, const Matrix& y, const Matrix& alpha, double lambda);
/// (1/n)‖K_Jα − Y‖² + λ⟨α,K_JJα⟩ + λγ‖α‖².
double nystrom_objective(const Matrix& k_j, const Matrix& k_jj, const Matrix& y,
                         const Matrix& alpha, double lambda, double gamma);
/// (1/n)‖Zw − Y‖² + λ‖w‖².
double rf_objective(const Matrix& z, const Matrix& y, const Matrix& w, double lambda);

/// ‖w − (1/(nλ))·Zᵀα‖_F.
double primal_dual_check(const Matrix& z, const Matrix& alpha_dual, const Matrix& w,
                         std::size_t n, double lambda);
/// The dual point Y − Z·w paired with a primal w.
Matrix dual_from_primal(const Matrix& z, const Matrix& y, const Matrix& w);

/// Versioned text format; first line "KBCD-MODEL 1".
void write_model(std::ostream& out, const Model& model);
Model read_model(std::istream& in);

}  // namespace kbcd
