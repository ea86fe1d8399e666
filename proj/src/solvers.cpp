#include "kbcd/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "kbcd/error.hpp"
#include "kbcd/random.hpp"

namespace kbcd {

BlockPlan::BlockPlan(std::size_t universe, std::size_t b, std::uint64_t seed)
    : universe_(universe), b_(b), seed_(seed) {
  if (b == 0 || universe == 0) throw ConfigError("BlockPlan: block size and universe must be positive");
  if (universe % b != 0) {
    throw ConfigError("BlockPlan: block size " + std::to_string(b) + " does not divide " +
                      std::to_string(universe));
  }
  Stream rng(derive_seed(seed, 0));
  const auto perm = random_permutation(universe, rng);
  for (std::size_t start = 0; start < universe; start += b) {
    blocks_.emplace_back(std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                                  perm.begin() + static_cast<std::ptrdiff_t>(start + b)),
                         universe);
  }
}

std::vector<std::size_t> BlockPlan::visit_order(std::size_t epoch) const {
  Stream rng(derive_seed(seed_, epoch + 1));
  return random_permutation(blocks_.size(), rng);
}

void ConvergenceTrace::write_csv(std::ostream& out) const {
  out << "epoch,block,seconds,objective,test_error\n";
  for (const auto& r : records) {
    out << r.epoch << ',' << r.block << ',' << std::setprecision(9) << r.seconds << ','
        << std::setprecision(17) << r.objective << ',';
    if (r.test_error) out << std::setprecision(17) << *r.test_error;
    out << '\n';
  }
}

std::vector<std::size_t> classify(const Matrix& scores) {
  std::vector<std::size_t> out(scores.rows(), 0);
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.cols(); ++j)
      if (scores(i, j) > scores(i, best)) best = j;
    out[i] = best;
  }
  return out;
}

double test_error(const Matrix& scores, const TestSet& test) {
  if (test.metric == ErrorMetric::rmse) {
    if (scores.rows() != test.targets.rows() || scores.cols() != test.targets.cols())
      throw DimensionMismatch("test_error: scores and targets differ in shape");
    if (scores.empty()) return 0.0;
    return frobenius_distance(scores, test.targets) / std::sqrt(static_cast<double>(scores.size()));
  }
  if (scores.rows() != test.labels.size()) throw DimensionMismatch("test_error: label count");
  if (scores.rows() == 0) return 0.0;
  const auto predicted = classify(scores);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) wrong += predicted[i] != test.labels[i];
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

std::size_t MethodSpec::universe(std::size_t n) const {
  switch (method) {
    case Method::full: return n;
    case Method::nystrom: return p;
    case Method::rf: return features.p;
  }
  return 0;
}

IndexSet draw_landmarks(std::size_t n, std::size_t p, std::uint64_t seed) {
  if (p == 0 || p > n) throw ConfigError("draw_landmarks: need 1 <= p <= n");
  Stream rng(derive_seed(seed, 0x4c414e44ULL));
  return IndexSet(sample_without_replacement(n, p, rng), n);
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

// out += sign·a·m, rows in parallel; bit-identical to the serial loop.
void add_product(Matrix& out, const Matrix& a, const Matrix& m, double sign) {
  const std::size_t n = a.rows(), b = a.cols(), k = m.cols();
#pragma omp parallel for schedule(static) if (n * b * k > 32768)
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.row(i).data();
    double* oi = &out(i, 0);
    for (std::size_t l = 0; l < b; ++l) {
      const double s = sign * ai[l];
      const double* ml = m.row(l).data();
      for (std::size_t c = 0; c < k; ++c) oi[c] += s * ml[c];
    }
  }
}

void scatter_rows(Matrix& dst, const IndexSet& rows, const Matrix& src) {
  for (std::size_t j = 0; j < rows.size(); ++j) {
    auto s = src.row(j);
    std::copy(s.begin(), s.end(), dst.row(rows[j]).begin());
  }
}

void add_scaled_rows(Matrix& dst, const IndexSet& rows, const Matrix& src, double scale) {
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t c = 0; c < src.cols(); ++c) dst(rows[j], c) += scale * src(j, c);
}

void add_to_diagonal(Matrix& a, double value) {
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += value;
}

double squared_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

double squared_distance(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return s;
}

struct LambdaState {
  double lambda = 0.0;
  double lambda_eff = 0.0;
  Matrix coef;
  Matrix residual;     // nystrom/rf: maintained R
  Matrix kernel_coef;  // full: K·α, kept for objective reporting
  Matrix test_scores;
  ConvergenceTrace trace;
  double objective = 0.0;
};

class PathRunner {
 public:
  PathRunner(const Matrix& x, const Matrix& y, const MethodSpec& spec,
             std::span<const double> lambdas, const BlockPlan& plan, const SolverOptions& options)
      : x_(x), y_(y), spec_(spec), plan_(plan), opt_(options), part_(x.rows(), options.workers) {
    validate(lambdas);
    if (spec_.method == Method::nystrom) {
      landmarks_ = draw_landmarks(n(), spec_.p, spec_.landmark_seed);
      landmark_pos_.assign(n(), npos);
      for (std::size_t j = 0; j < landmarks_.size(); ++j) landmark_pos_[landmarks_[j]] = j;
    }
    const std::size_t k = y_.cols();
    const std::size_t coef_rows = spec_.universe(n());
    for (double lambda : lambdas) {
      LambdaState s;
      s.lambda = lambda;
      s.lambda_eff = static_cast<double>(n()) * lambda;
      s.coef = Matrix(coef_rows, k);
      if (spec_.method == Method::full) {
        s.kernel_coef = Matrix(n(), k);
      } else {
        s.residual = Matrix(n(), k);
      }
      if (opt_.test) s.test_scores = Matrix(opt_.test->x.rows(), k);
      s.objective = spec_.method == Method::full ? 0.0 : squared_norm(y_) / static_cast<double>(n());
      s.trace.initial_objective = s.objective;
      states_.push_back(std::move(s));
    }
  }

  std::vector<SolveResult> run() {
    start_ = Clock::now();
    std::size_t epochs_run = 0;
    for (std::size_t epoch = 0; epoch < opt_.epochs; ++epoch) {
      for (std::size_t id : plan_.visit_order(epoch)) {
        if (opt_.ledger) opt_.ledger->begin_block(epoch + 1, id);
        switch (spec_.method) {
          case Method::full: visit_full(epoch + 1, id); break;
          case Method::nystrom: visit_nystrom(epoch + 1, id); break;
          case Method::rf: visit_rf(epoch + 1, id); break;
        }
      }
      epochs_run = epoch + 1;
      if (opt_.gradient_tol > 0.0 && all_converged()) break;
    }
    std::vector<SolveResult> out;
    for (auto& s : states_) {
      SolveResult r;
      r.lambda = s.lambda;
      r.model = make_model(s);
      r.trace = std::move(s.trace);
      r.epochs_run = epochs_run;
      out.push_back(std::move(r));
    }
    return out;
  }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  std::size_t n() const { return x_.rows(); }

  void validate(std::span<const double> lambdas) const {
    if (lambdas.empty()) throw ConfigError("solve: empty lambda list");
    for (double l : lambdas)
      if (!(l > 0.0)) throw ConfigError("solve: lambda must be positive");
    if (y_.rows() != x_.rows()) throw DimensionMismatch("solve: X and Y row counts differ");
    if (plan_.universe() != spec_.universe(n())) {
      throw ConfigError("solve: block plan covers " + std::to_string(plan_.universe()) +
                        " coordinates, method needs " + std::to_string(spec_.universe(n())));
    }
    if (spec_.method == Method::nystrom && spec_.gamma < 0.0) throw ConfigError("solve: gamma < 0");
    if (spec_.method == Method::rf) spec_.features.validate();
    else spec_.kernel.validate();
    if (opt_.test && opt_.test->x.cols() != x_.cols())
      throw DimensionMismatch("solve: test set feature dimension differs");
  }

  Model make_model(const LambdaState& s) const {
    Model m;
    m.method = spec_.method;
    m.kernel = spec_.kernel;
    m.features = spec_.features;
    m.lambda = s.lambda;
    m.gamma = spec_.gamma;
    m.input_dim = x_.cols();
    m.coefficients = s.coef;
    if (spec_.method == Method::full) m.support = x_;
    if (spec_.method == Method::nystrom) {
      m.landmarks = landmarks_;
      m.support = gather_rows(x_, landmarks_);
    }
    return m;
  }

  bool all_converged() const {
    return std::all_of(states_.begin(), states_.end(), [&](const LambdaState& s) {
      return normal_equation_residual(x_, y_, make_model(s)) <= opt_.gradient_tol;
    });
  }

  void charge(Phase phase, std::uint64_t flops, std::uint64_t bytes, Clock::time_point since) {
    if (opt_.ledger) opt_.ledger->charge(phase, flops, bytes, elapsed(since));
  }

  void finish_update(LambdaState& s, std::size_t epoch, std::size_t id, std::size_t index,
                     double objective, double original) {
    const double tol = opt_.descent_tol * std::max(1.0, std::abs(s.objective));
    if (!std::isfinite(objective) || objective > s.objective + tol) {
      std::ostringstream msg;
      msg << std::setprecision(17) << "objective rose from " << s.objective << " to " << objective
          << " (lambda " << s.lambda << ", epoch " << epoch << ", block " << id << ")";
      throw Divergence(msg.str());
    }
    s.objective = objective;
    TraceRecord rec;
    rec.epoch = epoch;
    rec.block = id;
    rec.seconds = opt_.timing ? elapsed(start_) : 0.0;
    rec.objective = objective;
    rec.original_objective = original;
    if (opt_.test) rec.test_error = test_error(s.test_scores, *opt_.test);
    s.trace.records.push_back(rec);
    if (opt_.on_block) {
      opt_.on_block(BlockEvent{epoch, id, index, s.lambda, s.coef,
                               spec_.method == Method::full ? nullptr : &s.residual, objective});
    }
  }

  void visit_full(std::size_t epoch, std::size_t id) {
    const IndexSet& rows = plan_.block(id);
    const std::size_t b = rows.size(), k = y_.cols();
    auto t0 = Clock::now();
    const Matrix kb = kernel_block(x_, rows, spec_.kernel);
    charge(Phase::generation, static_cast<std::uint64_t>(n()) * b * x_.cols(), 0, t0);
    const Matrix kbb = gather_rows(kb, rows);
    const Matrix y_b = gather_rows(y_, rows);
    Matrix test_block;
    if (opt_.test) test_block = cross_kernel_block(opt_.test->x, x_, rows, spec_.kernel);

    for (std::size_t li = 0; li < states_.size(); ++li) {
      LambdaState& s = states_[li];
      // R_I = K(I,:)·α − K(I,I)·α_I from the fresh column block.
      t0 = Clock::now();
      const Matrix old = gather_rows(s.coef, rows);
      Matrix r = distributed_matvec(kb, s.coef, part_, opt_.ledger, Phase::residual);
      add_product(r, kbb, old, -1.0);
      charge(Phase::residual, static_cast<std::uint64_t>(b) * b * k, 0, t0);

      t0 = Clock::now();
      Matrix a = kbb;
      add_to_diagonal(a, s.lambda_eff);
      Matrix fresh = y_b - r;
      SpdFactorization(a).solve_in_place(fresh);
      // The b×b diagonal block travels to the solver once per visit.
      charge(Phase::solve, static_cast<std::uint64_t>(b) * b * b,
             li == 0 ? static_cast<std::uint64_t>(b) * b * sizeof(double) : 0, t0);

      const Matrix delta = fresh - old;
      scatter_rows(s.coef, rows, fresh);
      add_product(s.kernel_coef, kb, delta, 1.0);
      if (opt_.test) add_product(s.test_scores, test_block, delta, 1.0);

      const double a_ka = inner(s.coef, s.kernel_coef);
      const double surrogate =
          0.5 * a_ka + 0.5 * s.lambda_eff * squared_norm(s.coef) - inner(y_, s.coef);
      const double original =
          squared_distance(s.kernel_coef, y_) / static_cast<double>(n()) + s.lambda * a_ka;
      finish_update(s, epoch, id, li, surrogate, original);
    }
  }

  void visit_nystrom(std::size_t epoch, std::size_t id) {
    const IndexSet& positions = plan_.block(id);
    const std::size_t b = positions.size();
    std::vector<std::size_t> cols_idx(b);
    for (std::size_t j = 0; j < b; ++j) cols_idx[j] = landmarks_[positions[j]];
    const IndexSet cols(std::move(cols_idx), n());

    auto t0 = Clock::now();
    const Matrix kb = kernel_block(x_, cols, spec_.kernel);
    charge(Phase::generation, static_cast<std::uint64_t>(n()) * b * x_.cols(), 0, t0);
    const Matrix kbb = gather_rows(kb, cols);
    const Matrix g = distributed_gram(kb, part_, opt_.ledger);
    Matrix test_block;
    if (opt_.test) test_block = cross_kernel_block(opt_.test->x, x_, cols, spec_.kernel);

    for (std::size_t li = 0; li < states_.size(); ++li) {
      LambdaState& s = states_[li];
      const double nl = s.lambda_eff;
      const Matrix old = gather_rows(s.coef, positions);

      t0 = Clock::now();
      // R ← R − (K_b + nλ·S_b)·α_b
      add_product(s.residual, kb, old, -1.0);
      add_scaled_rows(s.residual, cols, old, -nl);
      charge(Phase::residual, static_cast<std::uint64_t>(n()) * b * old.cols(), 0, t0);
      const Matrix rhs = distributed_matvec(kb, y_ - s.residual, part_, opt_.ledger, Phase::residual);

      t0 = Clock::now();
      Matrix a = g;
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) a(i, j) += nl * kbb(i, j);
      add_to_diagonal(a, nl * spec_.gamma);
      const Matrix fresh = SpdFactorization(a).solve(rhs);
      charge(Phase::solve, static_cast<std::uint64_t>(b) * b * b, 0, t0);

      t0 = Clock::now();
      // R ← R + (K_b + nλ·S_b)·α_b′
      add_product(s.residual, kb, fresh, 1.0);
      add_scaled_rows(s.residual, cols, fresh, nl);
      charge(Phase::residual, static_cast<std::uint64_t>(n()) * b * old.cols(), 0, t0);
      scatter_rows(s.coef, positions, fresh);
      if (opt_.test) add_product(s.test_scores, test_block, fresh - old, 1.0);

      // K_J·α = R − nλ·S_J·α.
      double fit = 0.0, quad = 0.0;
      for (std::size_t i = 0; i < n(); ++i) {
        const std::size_t pos = landmark_pos_[i];
        for (std::size_t c = 0; c < y_.cols(); ++c) {
          double kj_alpha = s.residual(i, c);
          if (pos != npos) {
            kj_alpha -= nl * s.coef(pos, c);
            quad += s.coef(pos, c) * kj_alpha;
          }
          const double d = kj_alpha - y_(i, c);
          fit += d * d;
        }
      }
      const double original = fit / static_cast<double>(n()) + s.lambda * quad;
      const double objective = original + s.lambda * spec_.gamma * squared_norm(s.coef);
      finish_update(s, epoch, id, li, objective, original);
    }
  }

  void visit_rf(std::size_t epoch, std::size_t id) {
    const IndexSet& feats = plan_.block(id);
    const std::size_t b = feats.size();
    auto t0 = Clock::now();
    const Matrix zb = random_features_block(x_, feats, spec_.features);
    charge(Phase::generation, static_cast<std::uint64_t>(n()) * b * x_.cols(), 0, t0);
    const Matrix g = distributed_gram(zb, part_, opt_.ledger);
    Matrix test_block;
    if (opt_.test) test_block = random_features_block(opt_.test->x, feats, spec_.features);

    for (std::size_t li = 0; li < states_.size(); ++li) {
      LambdaState& s = states_[li];
      const Matrix old = gather_rows(s.coef, feats);

      t0 = Clock::now();
      add_product(s.residual, zb, old, -1.0);
      charge(Phase::residual, static_cast<std::uint64_t>(n()) * b * old.cols(), 0, t0);
      const Matrix rhs = distributed_matvec(zb, y_ - s.residual, part_, opt_.ledger, Phase::residual);

      t0 = Clock::now();
      Matrix a = g;
      add_to_diagonal(a, s.lambda_eff);
      const Matrix fresh = SpdFactorization(a).solve(rhs);
      charge(Phase::solve, static_cast<std::uint64_t>(b) * b * b, 0, t0);

      t0 = Clock::now();
      add_product(s.residual, zb, fresh, 1.0);
      charge(Phase::residual, static_cast<std::uint64_t>(n()) * b * old.cols(), 0, t0);
      scatter_rows(s.coef, feats, fresh);
      if (opt_.test) add_product(s.test_scores, test_block, fresh - old, 1.0);

      const double objective = squared_distance(s.residual, y_) / static_cast<double>(n()) +
                               s.lambda * squared_norm(s.coef);
      finish_update(s, epoch, id, li, objective, objective);
    }
  }

  const Matrix& x_;
  const Matrix& y_;
  const MethodSpec& spec_;
  const BlockPlan& plan_;
  const SolverOptions& opt_;
  Partition part_;
  IndexSet landmarks_;
  std::vector<std::size_t> landmark_pos_;
  std::vector<LambdaState> states_;
  Clock::time_point start_;
};

}  // namespace

std::vector<SolveResult> solve_path(const Matrix& x, const Matrix& y, const MethodSpec& spec,
                                    std::span<const double> lambdas, const BlockPlan& plan,
                                    const SolverOptions& options) {
  return PathRunner(x, y, spec, lambdas, plan, options).run();
}

SolveResult solve_full(const Matrix& x, const Matrix& y, const KernelSpec& kernel, double lambda,
                       const BlockPlan& plan, const SolverOptions& options) {
  MethodSpec spec;
  spec.method = Method::full;
  spec.kernel = kernel;
  const double lambdas[] = {lambda};
  return std::move(solve_path(x, y, spec, lambdas, plan, options).front());
}

SolveResult solve_nystrom(const Matrix& x, const Matrix& y, const KernelSpec& kernel,
                          std::size_t p, double lambda, double gamma, const BlockPlan& plan,
                          std::uint64_t landmark_seed, const SolverOptions& options) {
  MethodSpec spec;
  spec.method = Method::nystrom;
  spec.kernel = kernel;
  spec.p = p;
  spec.gamma = gamma;
  spec.landmark_seed = landmark_seed;
  const double lambdas[] = {lambda};
  return std::move(solve_path(x, y, spec, lambdas, plan, options).front());
}

SolveResult solve_rf(const Matrix& x, const Matrix& y, const FeatureMapSpec& features,
                     double lambda, const BlockPlan& plan, const SolverOptions& options) {
  MethodSpec spec;
  spec.method = Method::rf;
  spec.features = features;
  const double lambdas[] = {lambda};
  return std::move(solve_path(x, y, spec, lambdas, plan, options).front());
}

double normal_equation_residual(const Matrix& x, const Matrix& y, const Model& model) {
  const std::size_t n = x.rows();
  const double nl = static_cast<double>(n) * model.lambda;
  const Matrix& c = model.coefficients;
  Matrix lhs, rhs;
  switch (model.method) {
    case Method::full: {
      lhs = Matrix(n, c.cols());
      constexpr std::size_t chunk = 256;
      for (std::size_t start = 0; start < n; start += chunk) {
        const IndexSet cols = IndexSet::range(start, std::min(n, start + chunk), n);
        add_product(lhs, kernel_block(x, cols, model.kernel), gather_rows(c, cols), 1.0);
      }
      lhs += nl * c;
      rhs = y;
      break;
    }
    case Method::nystrom: {
      const Matrix kj = kernel_block(x, model.landmarks, model.kernel);
      const Matrix kjj = gather_rows(kj, model.landmarks);
      lhs = multiply_at_b(kj, multiply(kj, c));
      lhs += nl * multiply(kjj, c);
      lhs += (nl * model.gamma) * c;
      rhs = multiply_at_b(kj, y);
      break;
    }
    case Method::rf: {
      const Matrix z = random_features_block(x, IndexSet::all(model.features.p), model.features);
      lhs = multiply_at_b(z, multiply(z, c));
      lhs += nl * c;
      rhs = multiply_at_b(z, y);
      break;
    }
  }
  const double denom = frobenius_norm(rhs);
  return frobenius_distance(lhs, rhs) / (denom > 0.0 ? denom : 1.0);
}

namespace {

struct DenseSystem {
  Matrix a;
  Matrix rhs;
  Matrix basis;  // K, K_J or Z
  Matrix k_jj;   // nystrom
};

DenseSystem dense_system(const Matrix& x, const Matrix& y, const MethodSpec& spec,
                         double lambda) {
  const std::size_t n = x.rows();
  const double nl = static_cast<double>(n) * lambda;
  DenseSystem s;
  switch (spec.method) {
    case Method::full:
      s.basis = kernel_block(x, IndexSet::all(n), spec.kernel);
      s.a = s.basis;
      add_to_diagonal(s.a, nl);
      s.rhs = y;
      break;
    case Method::nystrom: {
      const IndexSet landmarks = draw_landmarks(n, spec.p, spec.landmark_seed);
      s.basis = kernel_block(x, landmarks, spec.kernel);
      s.k_jj = gather_rows(s.basis, landmarks);
      s.a = gram(s.basis);
      for (std::size_t i = 0; i < spec.p; ++i)
        for (std::size_t j = 0; j < spec.p; ++j) s.a(i, j) += nl * s.k_jj(i, j);
      add_to_diagonal(s.a, nl * spec.gamma);
      s.rhs = multiply_at_b(s.basis, y);
      break;
    }
    case Method::rf:
      s.basis = random_features_block(x, IndexSet::all(spec.features.p), spec.features);
      s.a = gram(s.basis);
      add_to_diagonal(s.a, nl);
      s.rhs = multiply_at_b(s.basis, y);
      break;
  }
  return s;
}

}  // namespace

Matrix exact_coefficients(const Matrix& x, const Matrix& y, const MethodSpec& spec, double lambda) {
  const DenseSystem s = dense_system(x, y, spec, lambda);
  return spd_solve(s.a, s.rhs);
}

double optimal_objective(const Matrix& x, const Matrix& y, const MethodSpec& spec, double lambda) {
  const DenseSystem s = dense_system(x, y, spec, lambda);
  const Matrix c = spd_solve(s.a, s.rhs);
  switch (spec.method) {
    case Method::full: return full_surrogate_objective(s.basis, y, c, lambda);
    case Method::nystrom: return nystrom_objective(s.basis, s.k_jj, y, c, lambda, spec.gamma);
    case Method::rf: return rf_objective(s.basis, y, c, lambda);
  }
  return 0.0;
}

std::optional<std::size_t> epochs_to_tolerance(const ConvergenceTrace& trace, double fstar,
                                               double tol) {
  const double initial = trace.initial_objective - fstar;
  if (initial <= 0.0) return 0;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const bool epoch_end =
        i + 1 == trace.records.size() || trace.records[i + 1].epoch != trace.records[i].epoch;
    if (epoch_end && trace.records[i].objective - fstar <= tol * initial) return trace.records[i].epoch;
  }
  return std::nullopt;
}

Matrix predict(const Model& model, const Matrix& x_test) {
  if (x_test.cols() != model.input_dim) {
    throw DimensionMismatch("predict: model expects " + std::to_string(model.input_dim) +
                            " features, got " + std::to_string(x_test.cols()));
  }
  switch (model.method) {
    case Method::full:
    case Method::nystrom: {
      const Matrix kt = cross_kernel_block(x_test, model.support,
                                           IndexSet::all(model.support.rows()), model.kernel);
      return multiply(kt, model.coefficients);
    }
    case Method::rf: {
      const Matrix zt = random_features_block(x_test, IndexSet::all(model.features.p), model.features);
      return multiply(zt, model.coefficients);
    }
  }
  return {};
}

double full_surrogate_objective(const Matrix& k, const Matrix& y, const Matrix& alpha,
                                double lambda) {
  const double n = static_cast<double>(k.rows());
  return 0.5 * inner(alpha, multiply(k, alpha)) + 0.5 * n * lambda * squared_norm(alpha) -
         inner(y, alpha);
}

double full_kernel_objective(const Matrix& k, const Matrix& y, const Matrix& alpha, double lambda) {
  const Matrix ka = multiply(k, alpha);
  return squared_distance(ka, y) / static_cast<double>(k.rows()) + lambda * inner(alpha, ka);
}

double nystrom_objective(const Matrix& k_j, const Matrix& k_jj, const Matrix& y,
                         const Matrix& alpha, double lambda, double gamma) {
  const Matrix fit = multiply(k_j, alpha);
  return squared_distance(fit, y) / static_cast<double>(k_j.rows()) +
         lambda * inner(alpha, multiply(k_jj, alpha)) + lambda * gamma * squared_norm(alpha);
}

double rf_objective(const Matrix& z, const Matrix& y, const Matrix& w, double lambda) {
  return squared_distance(multiply(z, w), y) / static_cast<double>(z.rows()) +
         lambda * squared_norm(w);
}

double primal_dual_check(const Matrix& z, const Matrix& alpha_dual, const Matrix& w,
                         std::size_t n, double lambda) {
  Matrix implied = multiply_at_b(z, alpha_dual);
  implied *= 1.0 / (static_cast<double>(n) * lambda);
  return frobenius_distance(w, implied);
}

Matrix dual_from_primal(const Matrix& z, const Matrix& y, const Matrix& w) {
  return y - multiply(z, w);
}

namespace {

void write_matrix(std::ostream& out, const char* tag, const Matrix& m) {
  out << tag << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
    out << '\n';
  }
}

Matrix read_matrix(std::istream& in, const std::string& tag) {
  std::string got;
  std::size_t rows = 0, cols = 0;
  if (!(in >> got >> rows >> cols) || got != tag)
    throw Error("read_model: expected section '" + tag + "'");
  std::vector<double> entries(rows * cols);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!(in >> entries[i])) throw Error("read_model: truncated section '" + tag + "'");
    if ((i + 1) % cols != 0 || cols == 0) {
      char comma = 0;
      in >> comma;
      if (comma != ',') throw Error("read_model: malformed row in '" + tag + "'");
    }
  }
  return Matrix::from_rows(rows, cols, std::move(entries));
}

}  // namespace

void write_model(std::ostream& out, const Model& model) {
  out << "KBCD-MODEL 1\n" << std::setprecision(17);
  out << "method " << to_string(model.method) << '\n';
  out << "kernel " << to_string(model.kernel.family) << '\n';
  out << "sigma " << model.kernel.bandwidth << '\n';
  out << "features " << model.features.p << '\n';
  out << "feature_sigma " << model.features.bandwidth << '\n';
  out << "feature_seed " << model.features.master_seed << '\n';
  out << "lambda " << model.lambda << '\n';
  out << "gamma " << model.gamma << '\n';
  out << "input_dim " << model.input_dim << '\n';
  out << "landmarks " << model.landmarks.size() << ' ' << model.landmarks.universe() << '\n';
  for (std::size_t j = 0; j < model.landmarks.size(); ++j)
    out << (j ? "," : "") << model.landmarks[j];
  out << '\n';
  write_matrix(out, "coefficients", model.coefficients);
  write_matrix(out, "support", model.support);
  out << "end\n";
}

Model read_model(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "KBCD-MODEL") throw Error("read_model: bad magic");
  if (version != 1) throw Error("read_model: unsupported version " + std::to_string(version));
  auto field = [&](const std::string& key) {
    std::string got, value;
    if (!(in >> got >> value) || got != key) throw Error("read_model: expected '" + key + "'");
    return value;
  };
  Model m;
  m.method = method_from_string(field("method"));
  m.kernel.family = kernel_family_from_string(field("kernel"));
  m.kernel.bandwidth = std::stod(field("sigma"));
  m.features.p = std::stoull(field("features"));
  m.features.bandwidth = std::stod(field("feature_sigma"));
  m.features.master_seed = std::stoull(field("feature_seed"));
  m.lambda = std::stod(field("lambda"));
  m.gamma = std::stod(field("gamma"));
  m.input_dim = std::stoull(field("input_dim"));
  std::string tag;
  std::size_t count = 0, universe = 0;
  if (!(in >> tag >> count >> universe) || tag != "landmarks") throw Error("read_model: landmarks");
  std::vector<std::size_t> idx(count);
  for (std::size_t j = 0; j < count; ++j) {
    if (j) {
      char comma = 0;
      in >> comma;
    }
    if (!(in >> idx[j])) throw Error("read_model: truncated landmarks");
  }
  m.landmarks = IndexSet(std::move(idx), universe);
  m.coefficients = read_matrix(in, "coefficients");
  m.support = read_matrix(in, "support");
  if (!(in >> tag) || tag != "end") throw Error("read_model: missing end marker");
  return m;
}

}  // namespace kbcd
