#include "commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kbcd/distsim.hpp"
#include "kbcd/error.hpp"
#include "kbcd/kernels.hpp"
#include "kbcd/random.hpp"
#include "kbcd/rates.hpp"
#include "kbcd/solvers.hpp"

namespace kbcd::cli {
namespace {

namespace fs = std::filesystem;

struct Config {
  std::string command;
  std::string method = "rf";
  std::string kernel = "rbf";
  double sigma = 1.0;
  std::vector<double> lambdas;
  double gamma = 0.0;
  std::vector<std::size_t> ps;
  std::size_t b = 64;
  std::size_t epochs = 10;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::string train;
  std::string test;
  std::string out;
  bool rmse = false;
  bool header = false;
  bool no_timing = false;
  double tol = 1e-3;
  // rates-check
  std::size_t dim = 64;
  std::size_t rates_block = 8;
  std::size_t seeds = 50;
  std::size_t iters = 200;
  std::size_t trials = 10000;
  double delta = 0.1;
  double slack = 1.05;
};

// Files are staged in memory and only land on disk once the command has
// finished, each through a temporary name and a rename.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::string content) {
    files_.emplace_back(name, std::move(content));
  }

  void commit() const {
    fs::create_directories(dir_);
    for (const auto& [name, content] : files_) {
      const fs::path target = dir_ / name;
      const fs::path tmp = dir_ / ("." + name + ".tmp");
      {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write '" + tmp.string() + "'");
        f << content;
        if (!f.flush()) throw Error("short write to '" + tmp.string() + "'");
      }
      fs::rename(tmp, target);
    }
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

fs::path output_dir(const Config& cfg) {
  if (!cfg.out.empty()) return cfg.out;
  if (const char* env = std::getenv("KBCD_OUT_DIR"); env && *env) return env;
  return ".";
}

template <class Writer>
std::string render(Writer&& write) {
  std::ostringstream s;
  write(s);
  return s.str();
}

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

struct Data {
  Dataset train;
  Matrix y;
  std::optional<TestSet> test;
};

Data load_data(const Config& cfg) {
  if (cfg.train.empty()) throw ConfigError("--train is required");
  Data d;
  d.train = read_dataset_csv(cfg.train, cfg.header);
  d.y = one_vs_all(d.train);
  if (!cfg.test.empty()) {
    Dataset t = read_dataset_csv(cfg.test, cfg.header);
    if (t.d() != d.train.d()) {
      throw DimensionMismatch("test set has " + std::to_string(t.d()) + " features, training set " +
                              std::to_string(d.train.d()));
    }
    TestSet ts;
    ts.metric = cfg.rmse ? ErrorMetric::rmse : ErrorMetric::top1;
    if (cfg.rmse) {
      t.k = d.train.k;
      ts.targets = one_vs_all(t);
    }
    ts.x = std::move(t.x);
    ts.labels = std::move(t.labels);
    d.test = std::move(ts);
  }
  return d;
}

std::vector<double> lambdas_or_default(const Config& cfg) {
  std::vector<double> l = cfg.lambdas.empty() ? std::vector<double>{1e-3} : cfg.lambdas;
  for (double v : l)
    if (!(v > 0.0)) throw ConfigError("--lambda entries must be positive");
  return l;
}

// Largest multiple of b not above p; warns when that changes p.
std::size_t fit_to_block(std::size_t p, std::size_t b, std::ostream& err) {
  const std::size_t fitted = p - p % b;
  if (fitted == 0) {
    throw ConfigError("--p " + std::to_string(p) + " is smaller than --b " + std::to_string(b));
  }
  if (fitted != p)
    err << "warning: p = " << p << " truncated to " << fitted << " (a multiple of b = " << b << ")\n";
  return fitted;
}

MethodSpec method_spec(const Config& cfg, Method method, std::size_t p, std::size_t n,
                       std::ostream& err) {
  MethodSpec spec;
  spec.method = method;
  spec.kernel.family = kernel_family_from_string(cfg.kernel);
  spec.kernel.bandwidth = cfg.sigma;
  spec.kernel.validate();
  spec.gamma = cfg.gamma;
  spec.landmark_seed = derive_seed(cfg.seed, 2);
  if (cfg.gamma < 0.0) throw ConfigError("--gamma must be non-negative");
  if (method == Method::full) return spec;
  if (p == 0) throw ConfigError("--p is required for method " + to_string(method));
  p = fit_to_block(p, cfg.b, err);
  if (method == Method::nystrom) {
    if (p > n) throw ConfigError("nystrom needs p <= n (p = " + std::to_string(p) + ")");
    spec.p = p;
  } else {
    if (spec.kernel.family != KernelFamily::rbf)
      throw ConfigError("random features are defined for the rbf kernel only");
    spec.features.p = p;
    spec.features.bandwidth = cfg.sigma;
    spec.features.master_seed = derive_seed(cfg.seed, 3);
  }
  return spec;
}

std::size_t single_p(const Config& cfg) {
  if (cfg.ps.size() > 1) throw ConfigError("--p takes one value for this command");
  return cfg.ps.empty() ? 0 : cfg.ps.front();
}

BlockPlan plan_for(const Config& cfg, const MethodSpec& spec, std::size_t n) {
  return BlockPlan(spec.universe(n), cfg.b, derive_seed(cfg.seed, 1));
}

SolverOptions solver_options(const Config& cfg, const Data& data) {
  SolverOptions o;
  o.epochs = cfg.epochs;
  o.workers = cfg.workers;
  o.timing = !cfg.no_timing;
  o.test = data.test ? &*data.test : nullptr;
  return o;
}

std::string final_error(const SolveResult& r) {
  if (r.trace.records.empty() || !r.trace.records.back().test_error) return "";
  return format_double(*r.trace.records.back().test_error);
}

double final_objective(const SolveResult& r) {
  return r.trace.records.empty() ? r.trace.initial_objective : r.trace.records.back().objective;
}

int cmd_solve(const Config& cfg, Outputs& files, std::ostream& out, std::ostream& err) {
  const auto lambdas = lambdas_or_default(cfg);
  if (lambdas.size() != 1) throw ConfigError("solve takes one --lambda; use 'path' for a list");
  const Data data = load_data(cfg);
  const Method method = method_from_string(cfg.method);
  const MethodSpec spec = method_spec(cfg, method, single_p(cfg), data.train.n(), err);
  const BlockPlan plan = plan_for(cfg, spec, data.train.n());
  const auto results = solve_path(data.train.x, data.y, spec, lambdas, plan, solver_options(cfg, data));
  const SolveResult& r = results.front();
  files.add("trace.csv", render([&](std::ostream& s) { r.trace.write_csv(s); }));
  files.add("model.txt", render([&](std::ostream& s) { write_model(s, r.model); }));
  out << "final objective " << format_double(final_objective(r)) << '\n';
  if (data.test) out << "test error " << final_error(r) << '\n';
  return ok;
}

int cmd_path(const Config& cfg, Outputs& files, std::ostream& out, std::ostream& err) {
  const auto lambdas = lambdas_or_default(cfg);
  const Data data = load_data(cfg);
  const Method method = method_from_string(cfg.method);
  const MethodSpec spec = method_spec(cfg, method, single_p(cfg), data.train.n(), err);
  const BlockPlan plan = plan_for(cfg, spec, data.train.n());
  const auto results = solve_path(data.train.x, data.y, spec, lambdas, plan, solver_options(cfg, data));
  std::ostringstream summary;
  summary << "index,lambda,final_objective,test_error,epochs_run\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const SolveResult& r = results[i];
    files.add("trace_" + std::to_string(i) + ".csv",
              render([&](std::ostream& s) { r.trace.write_csv(s); }));
    files.add("model_" + std::to_string(i) + ".txt",
              render([&](std::ostream& s) { write_model(s, r.model); }));
    summary << i << ',' << format_double(r.lambda) << ',' << format_double(final_objective(r)) << ','
            << final_error(r) << ',' << r.epochs_run << '\n';
    out << "lambda " << format_double(r.lambda) << " objective "
        << format_double(final_objective(r)) << '\n';
  }
  files.add("path.csv", summary.str());
  return ok;
}

int cmd_compare(const Config& cfg, Outputs& files, std::ostream& out, std::ostream& err) {
  if (cfg.ps.empty()) throw ConfigError("compare needs at least one --p");
  const auto lambdas = lambdas_or_default(cfg);
  if (lambdas.size() != 1) throw ConfigError("compare takes one --lambda");
  const Data data = load_data(cfg);
  if (!data.test) throw ConfigError("compare needs --test");
  std::ostringstream csv;
  csv << "p,method,test_error,epochs_to_tolerance\n";
  for (std::size_t p : cfg.ps) {
    for (Method method : {Method::nystrom, Method::rf}) {
      const MethodSpec spec = method_spec(cfg, method, p, data.train.n(), err);
      const BlockPlan plan = plan_for(cfg, spec, data.train.n());
      const auto r = std::move(
          solve_path(data.train.x, data.y, spec, lambdas, plan, solver_options(cfg, data)).front());
      const double fstar = optimal_objective(data.train.x, data.y, spec, lambdas.front());
      const auto epochs = epochs_to_tolerance(r.trace, fstar, cfg.tol);
      csv << spec.universe(data.train.n()) << ',' << to_string(method) << ',' << final_error(r) << ','
          << (epochs ? std::to_string(*epochs) : "") << '\n';
      out << to_string(method) << " p=" << spec.universe(data.train.n()) << " test error "
          << final_error(r) << '\n';
    }
  }
  files.add("compare.csv", csv.str());
  return ok;
}

int cmd_costs(const Config& cfg, Outputs& files, std::ostream& out, std::ostream& err) {
  const auto lambdas = lambdas_or_default(cfg);
  const Data data = load_data(cfg);
  const Method method = method_from_string(cfg.method);
  const std::size_t n = data.train.n();
  const MethodSpec spec = method_spec(cfg, method, single_p(cfg), n, err);
  const BlockPlan plan = plan_for(cfg, spec, n);
  CostLedger ledger;
  SolverOptions opts = solver_options(cfg, data);
  opts.epochs = 1;
  opts.ledger = &ledger;
  opts.test = nullptr;
  solve_path(data.train.x, data.y, spec, lambdas, plan, opts);
  const auto prediction = predict_costs(method, n, spec.universe(n), cfg.b, data.y.cols(), cfg.workers);
  const auto report = measured_vs_predicted(ledger, prediction, cfg.workers, 1);
  files.add("ledger.csv", render([&](std::ostream& s) { ledger.write_csv(s, !cfg.no_timing); }));
  files.add("cost_report.csv", render([&](std::ostream& s) { report.write_csv(s); }));
  out << "dominant " << report.dominant << " ratio " << format_double(report.dominant_ratio) << '\n';
  out << "bytes measured " << report.measured_bytes << " predicted " << report.predicted_bytes
      << (report.bytes_match ? " match" : " MISMATCH") << '\n';
  return ok;
}

int cmd_rates_check(const Config& cfg, Outputs& files, std::ostream& out, std::ostream&) {
  constexpr double m = 1.0, l = 10.0;
  const double slack = cfg.slack;
  if (!(slack >= 0.0)) throw ConfigError("--slack must be non-negative");
  if (!(cfg.delta > 0.0 && cfg.delta <= 1.0)) throw ConfigError("--delta must lie in (0, 1]");
  const QuadraticProblem prob = random_spd_quadratic(cfg.dim, m, l, derive_seed(cfg.seed, 4));
  const double gap0 = prob.gap(Matrix(cfg.dim, 1));
  const auto empirical = run_bcd_quadratic(prob, cfg.rates_block, cfg.seeds, cfg.iters,
                                           derive_seed(cfg.seed, 5));
  const auto thm1 = theorem1_bound(prob.h, cfg.rates_block, m, gap0, cfg.iters);
  LMaxB lmax;
  try {
    lmax = l_max_b(prob.h, cfg.rates_block);
  } catch (const CombinatorialBlowup&) {
    lmax = l_max_b(prob.h, cfg.rates_block, LMaxMode::sampled, 2000, derive_seed(cfg.seed, 6));
  }
  const auto eq7 = eq7_bound(cfg.dim, lmax.value, cfg.rates_block, m, gap0, cfg.iters);

  std::ostringstream csv;
  csv << "t,empirical_mean_gap,theorem1_bound,eq7_bound\n" << std::setprecision(17);
  bool thm1_ok = true;
  for (std::size_t t = 0; t <= cfg.iters; ++t) {
    csv << t << ',' << empirical[t] << ',' << thm1[t] << ',' << eq7[t] << '\n';
    thm1_ok = thm1_ok && empirical[t] <= slack * thm1[t];
  }
  files.add("rates.csv", csv.str());

  Stream rng(derive_seed(cfg.seed, 7));
  Matrix a(50, 100);
  for (double& v : a.data()) v = rng.normal();
  const double limit = cfg.delta + monte_carlo_slack(cfg.delta, cfg.trials);
  const double chernoff = chernoff_violation_rate(a, 10, cfg.delta, cfg.trials, derive_seed(cfg.seed, 8));
  const double bernstein = bernstein_lower_rate(a, 50, cfg.delta, cfg.trials, derive_seed(cfg.seed, 9));
  const bool pass = thm1_ok && chernoff <= limit && bernstein <= limit;

  std::ostringstream verdict;
  verdict << "check,value,limit,pass\n" << std::setprecision(17);
  verdict << "theorem1,," << slack << ',' << (thm1_ok ? 1 : 0) << '\n';
  verdict << "chernoff," << chernoff << ',' << limit << ',' << (chernoff <= limit ? 1 : 0) << '\n';
  verdict << "bernstein," << bernstein << ',' << limit << ',' << (bernstein <= limit ? 1 : 0) << '\n';
  files.add("rates_verdict.csv", verdict.str());

  out << "verdict: " << (pass ? "PASS" : "FAIL") << " theorem1=" << (thm1_ok ? "pass" : "fail")
      << " chernoff=" << chernoff << " bernstein=" << bernstein << " limit=" << limit
      << (lmax.lower_bound ? " (eq7 uses a sampled L_max,b lower bound)" : "") << '\n';
  return pass ? ok : bound_violation;
}

void add_options(CLI::App& app, Config& cfg) {
  app.add_option("command", cfg.command, "solve | path | compare | rates-check | costs")
      ->required()
      ->check(CLI::IsMember({"solve", "path", "compare", "rates-check", "costs"}));
  app.set_config("--config", "", "key=value file; command-line flags override it");
  app.add_option("--method", cfg.method, "full | nystrom | rf")
      ->check(CLI::IsMember({"full", "nystrom", "rf"}));
  app.add_option("--kernel", cfg.kernel, "rbf | linear")->check(CLI::IsMember({"rbf", "linear"}));
  app.add_option("--sigma", cfg.sigma, "rbf bandwidth");
  app.add_option("--lambda", cfg.lambdas, "regularization; repeatable");
  app.add_option("--gamma", cfg.gamma, "Nyström ridge on the coefficients");
  app.add_option("--p", cfg.ps, "feature or landmark count; repeatable for compare");
  app.add_option("--b", cfg.b, "block size")->check(CLI::PositiveNumber);
  app.add_option("--epochs", cfg.epochs, "passes over the blocks");
  app.add_option("--workers", cfg.workers, "simulated workers M")->check(CLI::PositiveNumber);
  app.add_option("--seed", cfg.seed, "master seed");
  app.add_option("--train", cfg.train, "training CSV");
  app.add_option("--test", cfg.test, "test CSV");
  app.add_option("--out", cfg.out, "output directory (default $KBCD_OUT_DIR or .)");
  app.add_flag("--rmse", cfg.rmse, "report RMSE against ±1 targets instead of top-1 error");
  app.add_flag("--header", cfg.header, "CSV files start with a header row");
  app.add_flag("--no-timing", cfg.no_timing, "write 0 for timing columns");
  app.add_option("--tol", cfg.tol, "compare: relative suboptimality for epochs_to_tolerance");
  app.add_option("--dim", cfg.dim, "rates-check: quadratic dimension");
  app.add_option("--rates-b", cfg.rates_block, "rates-check: block size");
  app.add_option("--seeds", cfg.seeds, "rates-check: runs averaged");
  app.add_option("--iters", cfg.iters, "rates-check: iterations");
  app.add_option("--trials", cfg.trials, "rates-check: Monte-Carlo trials");
  app.add_option("--delta", cfg.delta, "rates-check: failure probability");
  app.add_option("--slack", cfg.slack, "rates-check: multiplicative slack on the effective-Lipschitz bound");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Block coordinate descent for large-scale kernel least squares", "kbcd"};
  Config cfg;
  add_options(app, cfg);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : config_error;
  }
  try {
    Outputs files(output_dir(cfg));
    int code = ok;
    if (cfg.command == "solve") code = cmd_solve(cfg, files, out, err);
    else if (cfg.command == "path") code = cmd_path(cfg, files, out, err);
    else if (cfg.command == "compare") code = cmd_compare(cfg, files, out, err);
    else if (cfg.command == "costs") code = cmd_costs(cfg, files, out, err);
    else code = cmd_rates_check(cfg, files, out, err);
    files.commit();
    return code;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return parse_error;
  } catch (const DimensionMismatch& e) {
    err << "error: " << e.what() << '\n';
    return parse_error;
  } catch (const IndexOutOfRange& e) {
    err << "error: " << e.what() << '\n';
    return parse_error;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return config_error;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return config_error;
  } catch (const Divergence& e) {
    err << "error: solver diverged: " << e.what() << '\n';
    return divergence;
  } catch (const NotSpd& e) {
    err << "error: block system not positive definite: " << e.what() << '\n';
    return divergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return failure;
  }
}

}  // namespace kbcd::cli
