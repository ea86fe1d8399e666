#include "kbcd/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kbcd/error.hpp"
#include "kbcd/random.hpp"
#include "kbcd/solvers.hpp"

namespace kbcd {

QuadraticProblem QuadraticProblem::from(Matrix h, Matrix g) {
  if (!h.is_square() || g.rows() != h.rows() || g.cols() != 1)
    throw DimensionMismatch("QuadraticProblem: H must be d×d and g d×1");
  QuadraticProblem p;
  p.minimizer = spd_solve(h, g);
  p.fstar = -0.5 * inner(g, p.minimizer);
  p.h = std::move(h);
  p.g = std::move(g);
  return p;
}

double QuadraticProblem::value(const Matrix& w) const {
  return 0.5 * inner(w, multiply(h, w)) - inner(g, w);
}

QuadraticProblem random_spd_quadratic(std::size_t d, double m, double l, std::uint64_t seed) {
  if (d == 0 || !(m > 0.0) || l < m) throw ConfigError("random_spd_quadratic: need d ≥ 1, 0 < m ≤ L");
  Stream rng(seed);
  const Matrix q = random_orthogonal(d, rng);
  std::vector<double> eig(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double t = d == 1 ? 0.0 : (i == 0 ? 0.0 : (i == d - 1 ? 1.0 : rng.uniform()));
    eig[i] = m * std::pow(l / m, t);
  }
  Matrix h(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) s += q(i, t) * eig[t] * q(j, t);
      h(i, j) = h(j, i) = s;
    }
  Matrix g(d, 1);
  for (double& v : g.data()) v = rng.normal();
  return QuadraticProblem::from(std::move(h), std::move(g));
}

void SpectrumModel::validate() const {
  if (n < 2) throw ConfigError("SpectrumModel: n must be at least 2");
  if (decay == Decay::exponential && !(rate > 0.0))
    throw ConfigError("SpectrumModel: exponential rate must be positive");
  if (decay == Decay::polynomial && !(rate > 0.5))
    throw ConfigError("SpectrumModel: polynomial exponent must exceed 1/2");
}

double SpectrumModel::mu(std::size_t ell) const {
  const double l = static_cast<double>(ell);
  return decay == Decay::exponential ? std::exp(-rate * l) : std::pow(l, -2.0 * rate);
}

namespace {

double max_diagonal(const Matrix& h) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < h.rows(); ++i) m = std::max(m, h(i, i));
  return m;
}

void check_block(const Matrix& h, std::size_t b, const char* what) {
  if (!h.is_square()) throw DimensionMismatch(std::string(what) + ": H must be square");
  if (b == 0 || b > h.rows())
    throw ConfigError(std::string(what) + ": block size must lie in [1, d]");
}

// C(d, b), or cap + 1 once it exceeds cap.
std::size_t binomial_capped(std::size_t d, std::size_t b, std::size_t cap) {
  b = std::min(b, d - b);
  double c = 1.0;
  for (std::size_t i = 1; i <= b; ++i) {
    c = c * static_cast<double>(d - b + i) / static_cast<double>(i);
    if (c > static_cast<double>(cap)) return cap + 1;
  }
  return static_cast<std::size_t>(std::llround(c));
}

double block_lambda_max(const Matrix& h, const IndexSet& block) {
  return lambda_max(principal_submatrix(h, block));
}

}  // namespace

double l_eff(const Matrix& h, std::size_t b) {
  check_block(h, b, "l_eff");
  const double d = static_cast<double>(h.rows()), bd = static_cast<double>(b);
  return std::exp(2.0) * lambda_max(h) + (d * std::log(2.0 * d * d / bd) / bd) * max_diagonal(h);
}

LMaxB l_max_b(const Matrix& h, std::size_t b, LMaxMode mode, std::size_t trials,
              std::uint64_t seed) {
  check_block(h, b, "l_max_b");
  const std::size_t d = h.rows();
  LMaxB out;
  if (mode == LMaxMode::sampled) {
    Stream rng(seed);
    out.lower_bound = true;
    for (std::size_t t = 0; t < trials; ++t) {
      const IndexSet block(sample_without_replacement(d, b, rng), d);
      out.value = std::max(out.value, block_lambda_max(h, block));
    }
    out.subsets = trials;
    return out;
  }
  constexpr std::size_t cap = 1'000'000;
  if (binomial_capped(d, b, cap) > cap)
    throw CombinatorialBlowup("l_max_b: more than 10^6 subsets; use sampled mode");
  std::vector<std::size_t> idx(b);
  for (std::size_t i = 0; i < b; ++i) idx[i] = i;
  while (true) {
    out.value = std::max(out.value, block_lambda_max(h, IndexSet(idx, d)));
    ++out.subsets;
    std::size_t i = b;
    while (i > 0 && idx[i - 1] == d - b + i - 1) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < b; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

double standard_rate_iters(std::size_t d, double l_max_b_value, std::size_t b, double m,
                           double eps) {
  if (!(m > 0.0)) throw InvalidRate("standard_rate_iters: m must be positive");
  if (!(eps > 0.0 && eps < 1.0) && eps != 1.0)
    throw InvalidRate("standard_rate_iters: ε must lie in (0, 1]");
  return static_cast<double>(d) * l_max_b_value / (static_cast<double>(b) * m) * std::log(1.0 / eps);
}

double standard_rate_iters(const Matrix& h, std::size_t b, double m, double eps) {
  return standard_rate_iters(h.rows(), l_max_b(h, b).value, b, m, eps);
}

std::vector<double> theorem1_bound(const Matrix& h, std::size_t b, double m, double gap0,
                                   std::size_t tau) {
  const double rate = m / (2.0 * l_eff(h, b));
  if (!(rate > 0.0 && rate <= 1.0))
    throw InvalidRate("theorem1_bound: m/(2·L_eff) = " + std::to_string(rate) + " outside (0, 1]");
  std::vector<double> out(tau + 1);
  for (std::size_t t = 0; t <= tau; ++t) out[t] = gap0 * std::pow(1.0 - rate, static_cast<double>(t));
  return out;
}

std::vector<double> eq7_bound(std::size_t d, double l_max_b_value, std::size_t b, double m,
                              double gap0, std::size_t tau) {
  const double rate = static_cast<double>(b) * m / (static_cast<double>(d) * l_max_b_value);
  if (!(rate > 0.0 && rate <= 1.0))
    throw InvalidRate("eq7_bound: b·m/(d·L_max,b) = " + std::to_string(rate) + " outside (0, 1]");
  std::vector<double> out(tau + 1);
  for (std::size_t t = 0; t <= tau; ++t) out[t] = gap0 * std::pow(1.0 - rate, static_cast<double>(t));
  return out;
}

namespace {

// One BCD run on a quadratic. The gradient r = g − Hw is kept current so
// each step costs O(b³ + d·b) and the gap is ½(w* − w)·r.
class QuadraticRun {
 public:
  QuadraticRun(const QuadraticProblem& prob, std::size_t b, std::uint64_t seed)
      : p_(prob), b_(b), rng_(seed), w_(prob.dimension(), 0.0), r_(prob.g.data().begin(), prob.g.data().end()) {}

  double gap() const {
    double s = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) s += (p_.minimizer(i, 0) - w_[i]) * r_[i];
    return 0.5 * s;
  }

  void step() {
    const std::size_t d = w_.size();
    const IndexSet block(sample_without_replacement(d, b_, rng_), d);
    Matrix rhs(b_, 1);
    for (std::size_t j = 0; j < b_; ++j) rhs(j, 0) = r_[block[j]];
    SpdFactorization(principal_submatrix(p_.h, block)).solve_in_place(rhs);
    for (std::size_t j = 0; j < b_; ++j) {
      const std::size_t c = block[j];
      const double delta = rhs(j, 0);
      w_[c] += delta;
      for (std::size_t i = 0; i < d; ++i) r_[i] -= p_.h(i, c) * delta;
    }
  }

 private:
  const QuadraticProblem& p_;
  std::size_t b_;
  Stream rng_;
  std::vector<double> w_;
  std::vector<double> r_;
};

void check_run(const QuadraticProblem& prob, std::size_t b) {
  check_block(prob.h, b, "run_bcd_quadratic");
}

}  // namespace

std::vector<double> run_bcd_quadratic(const QuadraticProblem& prob, std::size_t b,
                                      std::size_t seeds, std::size_t tau,
                                      std::uint64_t master_seed) {
  check_run(prob, b);
  if (seeds == 0) throw ConfigError("run_bcd_quadratic: need at least one seed");
  std::vector<std::vector<double>> gaps(seeds, std::vector<double>(tau + 1));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t s = 0; s < seeds; ++s) {
    QuadraticRun run(prob, b, derive_seed(master_seed, s));
    gaps[s][0] = run.gap();
    for (std::size_t t = 1; t <= tau; ++t) {
      run.step();
      gaps[s][t] = run.gap();
    }
  }
  std::vector<double> mean(tau + 1, 0.0);
  for (std::size_t s = 0; s < seeds; ++s)
    for (std::size_t t = 0; t <= tau; ++t) mean[t] += gaps[s][t];
  for (double& v : mean) v /= static_cast<double>(seeds);
  return mean;
}

std::vector<std::size_t> bcd_iterations_to_tolerance(const QuadraticProblem& prob, std::size_t b,
                                                     double tol, std::size_t seeds,
                                                     std::size_t max_iters,
                                                     std::uint64_t master_seed) {
  check_run(prob, b);
  std::vector<std::size_t> out(seeds, 0);
  std::vector<char> failed(seeds, 0);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t s = 0; s < seeds; ++s) {
    QuadraticRun run(prob, b, derive_seed(master_seed, s));
    const double target = tol * run.gap();
    std::size_t t = 0;
    while (run.gap() > target && t < max_iters) {
      run.step();
      ++t;
    }
    out[s] = t;
    failed[s] = run.gap() > target;
  }
  for (std::size_t s = 0; s < seeds; ++s)
    if (failed[s])
      throw Error("bcd_iterations_to_tolerance: seed " + std::to_string(s) + " did not reach " +
                  std::to_string(tol) + " within " + std::to_string(max_iters) + " steps");
  return out;
}

Matrix adversarial_hessian(std::size_t d, double lambda) {
  const auto q = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
  if (d == 0 || q * q != d) throw NotPerfectSquare("adversarial_hessian: " + std::to_string(d));
  Matrix h = lambda * Matrix::identity(d);
  for (std::size_t blk = 0; blk < q; ++blk)
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = 0; j < q; ++j) h(blk * q + i, blk * q + j) += 1.0;
  return h;
}

double monte_carlo_slack(double delta, std::size_t trials) {
  return 3.0 * std::sqrt(delta / static_cast<double>(trials));
}

namespace {

template <class Event>
double violation_frequency(std::size_t trials, std::uint64_t seed, Event event) {
  if (trials == 0) throw ConfigError("Monte-Carlo check: need at least one trial");
  std::size_t hits = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits)
  for (std::size_t t = 0; t < trials; ++t) {
    Stream rng(derive_seed(seed, t));
    hits += event(rng) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace

double chernoff_violation_rate(const Matrix& a, std::size_t b, double delta, std::size_t trials,
                               std::uint64_t seed) {
  const std::size_t n = a.rows(), p = a.cols();
  if (b == 0 || b > p) throw ConfigError("chernoff_violation_rate: b must lie in [1, p]");
  const Matrix ata = gram(a);
  const double threshold =
      std::exp(2.0) * static_cast<double>(b) / static_cast<double>(p) * lambda_max(ata) +
      max_diagonal(ata) * std::log(static_cast<double>(n) / delta);
  return violation_frequency(trials, seed, [&](Stream& rng) {
    const IndexSet block(sample_without_replacement(p, b, rng), p);
    return block_lambda_max(ata, block) >= threshold;
  });
}

double bernstein_lower_rate(const Matrix& psi, std::size_t p, double delta, std::size_t trials,
                            std::uint64_t seed) {
  const std::size_t n = psi.rows(), m = psi.cols();
  if (p == 0 || p > m) throw ConfigError("bernstein_lower_rate: p must lie in [1, m]");
  const Matrix ptp = gram(psi);  // m×m; shares its nonzero spectrum with ΨΨᵀ
  const double lmax = lambda_max(ptp);
  const double big_b = max_diagonal(ptp);
  const double log_term = std::log(static_cast<double>(n) / delta);
  const double ratio = static_cast<double>(p) / static_cast<double>(m);
  const double threshold = ratio * lmax - (4.0 / 3.0) * (lmax / static_cast<double>(m)) * log_term -
                           std::sqrt(8.0 * ratio * lmax * big_b * log_term);
  return violation_frequency(trials, seed, [&](Stream& rng) {
    const IndexSet cols(sample_without_replacement(m, p, rng), m);
    return block_lambda_max(ptp, cols) < threshold;
  });
}

double rf_required_features(std::size_t n, double kernel_norm, double alpha, double delta) {
  const double b2 = 2.0;
  const double nd = static_cast<double>(n);
  return (2.0 / alpha) * (1.0 / alpha + 2.0 / 3.0) * (nd * b2 / kernel_norm) *
         std::log(2.0 * nd / delta);
}

namespace {

KernelSpec matching_rbf(const FeatureMapSpec& spec) {
  KernelSpec k;
  k.family = KernelFamily::rbf;
  k.bandwidth = spec.bandwidth;
  return k;
}

Matrix feature_matrix(const FeatureMapSpec& spec, const Matrix& x) {
  return random_features_block(x, IndexSet::all(spec.p), spec);
}

}  // namespace

RfConcentration rf_concentration_check(const FeatureMapSpec& spec, const Matrix& x, double alpha,
                                       double delta, std::size_t trials) {
  spec.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("rf_concentration_check: α must lie in (0, 1)");
  const std::size_t n = x.rows();
  RfConcentration out;
  out.kernel_norm = lambda_max(kernel_block(x, IndexSet::all(n), matching_rbf(spec)));
  out.required_p = rf_required_features(n, out.kernel_norm, alpha, delta);
  if (static_cast<double>(spec.p) < out.required_p) {
    throw ThresholdNotMet("rf_concentration_check: p = " + std::to_string(spec.p) +
                          " is below the required " + std::to_string(out.required_p));
  }
  out.slack = monte_carlo_slack(delta, trials);
  const double lo = (1.0 - alpha) * out.kernel_norm, hi = (1.0 + alpha) * out.kernel_norm;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    FeatureMapSpec draw = spec;
    draw.master_seed = derive_seed(spec.master_seed, 0x5246ULL + t);
    const double norm = lambda_max(gram(feature_matrix(draw, x)));
    hits += (norm < lo || norm > hi) ? 1 : 0;
  }
  out.violation_rate = static_cast<double>(hits) / static_cast<double>(trials);
  out.passed = out.violation_rate <= delta + out.slack;
  return out;
}

double rf_max_entry_error(const FeatureMapSpec& spec, const Matrix& x) {
  spec.validate();
  const std::size_t n = x.rows();
  const Matrix z = feature_matrix(spec, x);
  const Matrix k = kernel_block(x, IndexSet::all(n), matching_rbf(spec));
  double worst = 0.0;
#pragma omp parallel for schedule(dynamic) reduction(max : worst)
  for (std::size_t i = 0; i < n; ++i) {
    const double* zi = z.row(i).data();
    for (std::size_t j = i; j < n; ++j) {
      const double* zj = z.row(j).data();
      double s = 0.0;
      for (std::size_t t = 0; t < spec.p; ++t) s += zi[t] * zj[t];
      worst = std::max(worst, std::abs(s - k(i, j)));
    }
  }
  return worst;
}

Table1Entry table1_regime(const SpectrumModel& model, Method method, double gamma, std::size_t p) {
  model.validate();
  if (method != Method::full && p == 0) throw ConfigError("table1_regime: p must be positive");
  if (gamma < 0.0) throw ConfigError("table1_regime: γ must be non-negative");
  const double n = static_cast<double>(model.n), pd = static_cast<double>(p);
  const double ln = std::log(n);
  const bool expo = model.decay == Decay::exponential;
  const double beta = model.rate;
  const double poly_iters = std::pow(n, 2.0 * beta / (2.0 * beta + 1.0));

  Table1Entry e;
  e.lambda_minimax = expo ? ln / n : std::pow(n, -2.0 * beta / (2.0 * beta + 1.0));
  switch (method) {
    case Method::full:
      e.iterations = expo ? n : poly_iters;
      e.min_block = expo ? ln * ln : std::pow(n, 1.0 / (2.0 * beta + 1.0)) * ln;
      break;
    case Method::nystrom:
      if (gamma > 0.0) e.iterations = (expo ? n * pd : pd * poly_iters) / gamma;
      else e.note += "; iteration count undefined for gamma = 0";
      e.min_block = (1.0 + gamma) * ln;
      break;
    case Method::rf:
      e.iterations = expo ? n : poly_iters;
      e.min_block = ln;
      break;
  }
  return e;
}

Matrix synthetic_spectrum_kernel(const SpectrumModel& model, std::uint64_t seed) {
  model.validate();
  const std::size_t n = model.n;
  Stream rng(seed);
  const Matrix q = random_orthogonal(n, rng);
  std::vector<double> eig(n);
  for (std::size_t l = 0; l < n; ++l) eig[l] = static_cast<double>(n) * model.mu(l + 1);
  Matrix k(n, n);
#pragma omp parallel for schedule(dynamic) if (n > 64)
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += q(i, t) * eig[t] * q(j, t);
      k(i, j) = s;
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) k(i, j) = k(j, i);
  return k;
}

namespace {

double condition_number(const Matrix& a) {
  const auto ex = lambda_extremes(a);
  if (!(ex.min > 0.0)) return std::numeric_limits<double>::infinity();
  return ex.max / ex.min;
}

}  // namespace

ConditionPair conditioning_compare(const Matrix& x, const KernelSpec& kernel,
                                   const FeatureMapSpec& features, std::size_t p, double lambda,
                                   double gamma, std::uint64_t landmark_seed) {
  if (features.p != p) throw ConfigError("conditioning_compare: feature count must equal p");
  const std::size_t n = x.rows();
  const double nl = static_cast<double>(n) * lambda;
  const IndexSet landmarks = draw_landmarks(n, p, landmark_seed);
  const Matrix kj = kernel_block(x, landmarks, kernel);
  Matrix a = gram(kj);
  const Matrix kjj = gather_rows(kj, landmarks);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) a(i, j) += nl * kjj(i, j);
    a(i, i) += nl * gamma;
  }
  Matrix r = gram(feature_matrix(features, x));
  for (std::size_t i = 0; i < p; ++i) r(i, i) += nl;
  ConditionPair out;
  out.nystrom = p == 1 ? 1.0 : condition_number(a);
  out.rf = p == 1 ? 1.0 : condition_number(r);
  return out;
}

}  // namespace kbcd
