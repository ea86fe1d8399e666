#pragma once

// Convergence-rate theory for block coordinate descent on quadratics, plus
// Monte-Carlo checks of the matrix concentration lemmas behind it.
//
// Logs are natural. Order-of-magnitude entries use constants set to 1.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kbcd/distsim.hpp"
#include "kbcd/kernels.hpp"
#include "kbcd/linalg.hpp"

namespace kbcd {

/// f(w) = ½wᵀHw − gᵀw with minimizer w* = H⁻¹g and f* = −½gᵀw*.
struct QuadraticProblem {
  Matrix h;
  Matrix g;  // d×1
  Matrix minimizer;
  double fstar = 0.0;

  /// Solves for w* and f*; throws NotSpd when H is not positive definite.
  static QuadraticProblem from(Matrix h, Matrix g);

  std::size_t dimension() const noexcept { return h.rows(); }
  double value(const Matrix& w) const;
  double gap(const Matrix& w) const { return value(w) - fstar; }
};

/// Random SPD Hessian QΛQᵀ with eigenvalues log-uniform in [m, L] (both
/// endpoints attained) and a standard normal g.
QuadraticProblem random_spd_quadratic(std::size_t d, double m, double l, std::uint64_t seed);

enum class Decay { exponential, polynomial };

struct SpectrumModel {
  Decay decay = Decay::exponential;
  double rate = 1.0;  // ρ for exponential, β for polynomial
  std::size_t n = 0;

  /// Throws ConfigError unless ρ > 0, β > 1/2 and n ≥ 2.
  void validate() const;
  /// μ_ℓ for ℓ = 1..n.
  double mu(std::size_t ell) const;
};

/// e²·λmax(H) + (d·ln(2d²/b)/b)·max_i H_ii.
double l_eff(const Matrix& h, std::size_t b);

enum class LMaxMode { exact, sampled };

struct LMaxB {
  double value = 0.0;
  bool lower_bound = false;  // true in sampled mode
  std::size_t subsets = 0;   // subsets evaluated
};

/// Maximum of λmax(H(I,I)) over size-b subsets I. Exact mode enumerates and
/// throws CombinatorialBlowup past 10⁶ subsets.
LMaxB l_max_b(const Matrix& h, std::size_t b, LMaxMode mode = LMaxMode::exact,
              std::size_t trials = 10000, std::uint64_t seed = 0);

/// (d·L_max,b/(b·m))·ln(1/ε), with L_max,b computed exactly.
double standard_rate_iters(const Matrix& h, std::size_t b, double m, double eps);
/// Same with a precomputed L_max,b.
double standard_rate_iters(std::size_t d, double l_max_b, std::size_t b, double m, double eps);

/// gap0·(1 − m/(2·L_eff))^t for t = 0..tau. Throws InvalidRate when
/// m/(2·L_eff) falls outside (0, 1].
std::vector<double> theorem1_bound(const Matrix& h, std::size_t b, double m, double gap0,
                                   std::size_t tau);

/// gap0·(1 − b·m/(d·L_max,b))^t for t = 0..tau.
std::vector<double> eq7_bound(std::size_t d, double l_max_b, std::size_t b, double m, double gap0,
                              std::size_t tau);

/// Mean of f(w^t) − f* for t = 0..tau over `seeds` runs from w⁰ = 0. Each
/// step draws I uniformly from the size-b subsets and minimizes exactly
/// over w_I. Runs are parallel over seeds and summed in seed order.
std::vector<double> run_bcd_quadratic(const QuadraticProblem& prob, std::size_t b,
                                      std::size_t seeds, std::size_t tau,
                                      std::uint64_t master_seed = 0);

/// Per-seed step counts until gap ≤ tol·gap0. Throws Error when a run needs
/// more than max_iters steps.
std::vector<std::size_t> bcd_iterations_to_tolerance(const QuadraticProblem& prob, std::size_t b,
                                                     double tol, std::size_t seeds,
                                                     std::size_t max_iters,
                                                     std::uint64_t master_seed = 0);

/// λI + blockdiag(11ᵀ, ..., 11ᵀ) with √d blocks of size √d. Throws
/// NotPerfectSquare.
Matrix adversarial_hessian(std::size_t d, double lambda);

/// Three-sigma binomial slack.
double monte_carlo_slack(double delta, std::size_t trials);

/// Frequency of λmax(A_IᵀA_I) ≥ e²(b/p)λmax(AᵀA) + max diag(AᵀA)·ln(n/δ)
/// for I uniform of size b among the p columns of the n×p matrix A.
double chernoff_violation_rate(const Matrix& a, std::size_t b, double delta, std::size_t trials,
                               std::uint64_t seed = 0);

/// Frequency of λmax(Ψ_IΨ_Iᵀ) falling below (p/m)λ − (4/3)(λ/m)ln(n/δ) −
/// √(8(p/m)·λ·B·ln(n/δ)) for I uniform of size p among the m columns of the
/// n×m matrix Ψ, where λ = λmax(ΨΨᵀ) and B is the largest squared column norm.
double bernstein_lower_rate(const Matrix& psi, std::size_t p, double delta, std::size_t trials,
                            std::uint64_t seed = 0);

/// (2/α)(1/α + 2/3)(n·B²/‖K‖)·ln(2n/δ) with B = √2.
double rf_required_features(std::size_t n, double kernel_norm, double alpha, double delta);

struct RfConcentration {
  double kernel_norm = 0.0;
  double required_p = 0.0;
  double violation_rate = 0.0;
  double slack = 0.0;
  bool passed = false;
};

/// Draws `trials` independent feature maps (seeds derived from
/// spec.master_seed) and counts ‖ZZᵀ‖ outside [(1−α)‖K‖, (1+α)‖K‖]. Throws
/// ThresholdNotMet when spec.p is below rf_required_features.
RfConcentration rf_concentration_check(const FeatureMapSpec& spec, const Matrix& x, double alpha,
                                       double delta, std::size_t trials);

/// max_ij |(ZZᵀ)_ij − K_ij| for the rbf kernel of matching bandwidth.
double rf_max_entry_error(const FeatureMapSpec& spec, const Matrix& x);

struct Table1Entry {
  double lambda_minimax = 0.0;
  /// Empty for Nyström with γ = 0, where the rate divides by zero.
  std::optional<double> iterations;
  double min_block = 0.0;
  std::string note = "order-of-magnitude, constants 1";
};

/// `p` is the feature or landmark count; the full kernel ignores it.
Table1Entry table1_regime(const SpectrumModel& model, Method method, double gamma,
                          std::size_t p = 0);

/// QΛQᵀ with Λ_ℓℓ = n·μ_ℓ and Q a seeded random orthogonal matrix.
Matrix synthetic_spectrum_kernel(const SpectrumModel& model, std::uint64_t seed);

struct ConditionPair {
  double nystrom = 0.0;
  double rf = 0.0;
};

/// Condition numbers of K_JᵀK_J + nλK_JJ + nλγI (p landmarks drawn with
/// `landmark_seed`) and ZᵀZ + nλI (features.p must equal p).
ConditionPair conditioning_compare(const Matrix& x, const KernelSpec& kernel,
                                   const FeatureMapSpec& features, std::size_t p, double lambda,
                                   double gamma, std::uint64_t landmark_seed);

}  // namespace kbcd
