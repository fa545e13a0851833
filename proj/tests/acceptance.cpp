// Acceptance suite: one PASS/FAIL/SKIP line per criterion.
// Exit status: 1 if anything failed, 77 if something was skipped, else 0.

#include "nagqn/bench.hpp"
#include "nagqn/dense_qn.hpp"
#include "nagqn/limited_qn.hpp"
#include "nagqn/mlp.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

namespace {

using namespace nagqn;
namespace fs = std::filesystem;

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

Outcome pass(std::string d) { return {Verdict::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Verdict::fail, std::move(d)}; }
Outcome check(bool ok, std::string d) { return {ok ? Verdict::pass : Verdict::fail, std::move(d)}; }

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

std::string epochs_text(std::optional<double> e) { return e ? fmt("%g", *e) : std::string("none"); }

const fs::path kSource = NAGQN_SOURCE_DIR;
const MiniBatch kNoBatch{};

// 1 ------------------------------------------------------------------------
Outcome secant_invariant() {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = static_cast<Eigen::Index>(1 + trial % 20);
    DenseInverseHessian h(static_cast<std::size_t>(d), 1e-2);
    // a few earlier updates so H is not just a multiple of I
    for (int warm = 0; warm < trial % 4; ++warm) {
      const auto p = testing::random_positive_pair(rng, d);
      h.update({p.s, p.y});
    }
    const auto p = testing::random_positive_pair(rng, d);
    h.update({p.s, p.y});
    const double err = (h.values() * p.y - p.s).lpNorm<Eigen::Infinity>() / (1.0 + p.s.lpNorm<Eigen::Infinity>());
    worst = std::max(worst, err);
    if (err > 1e-9) return fail(fmt("trial %d: scaled secant residual %.3e", trial, err));
    if (!testing::cholesky_ok(h.values())) return fail(fmt("trial %d: Cholesky failed", trial));
  }
  return pass(fmt("1000 updates, worst scaled secant residual %.2e, all Cholesky OK", worst));
}

// 2 ------------------------------------------------------------------------
Outcome dense_limited_equivalence() {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = static_cast<std::size_t>(2 + rng() % 19);
    const std::size_t m = 1 + rng() % 8;
    const QuadraticObjective obj(random_spd(d, 1.0 + static_cast<double>(rng() % 100), rng()),
                                 testing::random_vector(rng, static_cast<Eigen::Index>(d)));
    const ParamVector w0 = testing::random_vector(rng, static_cast<Eigen::Index>(d));
    QnConfig cfg;
    cfg.lambda = 0.2;
    cfg.epsilon = 1.0;
    QnConfig nesterov = cfg;
    nesterov.mu = 0.8;

    DenseQnState bfgs(w0, 1.0), naq(w0, 1.0);
    LimitedQnState lbfgs(w0, m), lnaq(w0, m);
    // k <= m: the limited memory has not evicted anything yet.
    for (std::size_t k = 1; k <= m; ++k) {
      obfgs_step(bfgs, obj, kNoBatch, cfg);
      olbfgs_step(lbfgs, obj, kNoBatch, cfg, InitialScaling::unit());
      onaq_step(naq, obj, kNoBatch, nesterov);
      olnaq_step(lnaq, obj, kNoBatch, nesterov, InitialScaling::unit());
      const double e1 = (bfgs.w - lbfgs.w).lpNorm<Eigen::Infinity>() / bfgs.w.lpNorm<Eigen::Infinity>();
      const double e2 = (naq.w - lnaq.w).lpNorm<Eigen::Infinity>() / naq.w.lpNorm<Eigen::Infinity>();
      worst = std::max({worst, e1, e2});
      if (e1 > 1e-10 || e2 > 1e-10)
        return fail(fmt("trial %d (d=%zu, m=%zu) step %zu: relative gaps %.2e / %.2e", trial, d, m, k, e1, e2));
    }
  }
  return pass(fmt("100 trials, worst relative trajectory gap %.2e", worst));
}

// 3 ------------------------------------------------------------------------
Outcome gradient_oracle() {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  int losses[2] = {0, 0}, activations[2] = {0, 0};
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = testing::random_gradient_case(rng);
    ++losses[c.spec.loss == LossKind::softmax_cross_entropy];
    ++activations[c.spec.hidden_activation == Activation::relu];
    const MlpObjective obj(c.spec);
    const double err =
        relative_gradient_error(obj.evaluate(c.w, c.batch).grad, finite_diff_grad(obj, c.w, c.batch, 1e-5));
    worst = std::max(worst, err);
  }
  const bool covered = losses[0] && losses[1] && activations[0] && activations[1];
  return check(worst <= 1e-5 && covered,
               fmt("200 networks (%d CE / %d MSE, %d relu / %d sigmoid), max relative error %.2e", losses[1],
                   losses[0], activations[1], activations[0], worst));
}

// 4 ------------------------------------------------------------------------
Outcome parameter_counts() {
  const std::size_t got[] = {param_count(default_config(DatasetKind::digits8x8, OptimizerKind::sgd).model),
                             param_count(default_config(DatasetKind::mnist28, OptimizerKind::sgd).model),
                             param_count(default_config(DatasetKind::wine, OptimizerKind::sgd).model),
                             param_count(default_config(DatasetKind::casp, OptimizerKind::sgd).model)};
  const bool ok = got[0] == 1620 && got[1] == 84060 && got[2] == 169 && got[3] == 173;
  return check(ok, fmt("%zu, %zu, %zu, %zu", got[0], got[1], got[2], got[3]));
}

// 5 ------------------------------------------------------------------------
Outcome deterministic_convergence() {
  std::string detail;
  bool ok = true;
  for (auto opt : {OptimizerKind::obfgs, OptimizerKind::onaq}) {
    std::size_t worst_iter = 0;
    for (std::uint64_t q = 0; q < 5; ++q) {
      RunConfig cfg = default_config(DatasetKind::quadratic, opt);
      if (opt == OptimizerKind::onaq) cfg.mu = 0.5;
      cfg.schedule = ScheduleSpec::sqrt_decay(1.0);
      cfg.lambda = 0.0;
      cfg.quadratic_dim = 10;
      cfg.quadratic_condition = 100.0;
      cfg.split_seed = q;
      cfg.max_epochs = 200;
      const auto records = run_experiment(cfg).records;
      std::optional<std::size_t> hit;
      for (const auto& r : records)
        if (r.test_metric <= 1e-6) {
          hit = r.iteration;
          break;
        }
      if (!hit) {
        ok = false;
        detail += fmt("%s quadratic %llu: final |grad| %.2e; ", to_string(opt).c_str(),
                      static_cast<unsigned long long>(q), records.back().test_metric);
      } else {
        worst_iter = std::max(worst_iter, *hit);
      }
    }
    detail += fmt("%s reaches 1e-6 by iteration %zu on all 5 quadratics; ", to_string(opt).c_str(), worst_iter);
  }
  return check(ok, detail.substr(0, detail.size() - 2));
}

// 6, 7 ---------------------------------------------------------------------
// Schedules are each method's best median from a grid over
// {sqrt: a0 0.5, 1; gain tau=100: a0 0.25, 0.5, 1} with lambda = 1, eps = 1.
RunConfig digits_setup(OptimizerKind opt) {
  RunConfig cfg = default_config(DatasetKind::digits8x8, opt);
  cfg.data_path = kSource / "data" / "optdigits.csv";
  cfg.lambda = 1.0;
  cfg.epsilon = 1.0;
  const double alpha0 = opt == OptimizerKind::onaq ? 0.25 : opt == OptimizerKind::olnaq ? 0.5 : 1.0;
  cfg.schedule = ScheduleSpec::gain(100.0, alpha0);
  return cfg;
}

struct SeedSummary {
  std::optional<double> median_epochs;
  double median_accuracy = 0.0;
  std::string per_seed;
  double seconds = 0.0;
};

SeedSummary run_seeds(OptimizerKind opt, const Problem& problem) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = digits_setup(opt);
  std::vector<std::optional<std::size_t>> epochs;
  std::vector<double> accuracy;
  SeedSummary s;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const auto records = run_experiment(cfg, problem).records;
    epochs.push_back(epochs_to_threshold(records, cfg.loss_threshold));
    accuracy.push_back(records.back().test_metric);
    s.per_seed += (s.per_seed.empty() ? "" : " ") + (epochs.back() ? std::to_string(*epochs.back()) : "none");
  }
  s.median_epochs = median_epochs(epochs);
  s.median_accuracy = median(accuracy);
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

struct DigitsResults {
  SeedSummary obfgs, onaq, olbfgs, olnaq;
};

const DigitsResults& digits_results() {
  static const DigitsResults results = [] {
    const Problem problem = load_problem(digits_setup(OptimizerKind::onaq));
    return DigitsResults{run_seeds(OptimizerKind::obfgs, problem), run_seeds(OptimizerKind::onaq, problem),
                         run_seeds(OptimizerKind::olbfgs, problem), run_seeds(OptimizerKind::olnaq, problem)};
  }();
  return results;
}

Outcome digits_reproduction() {
  const auto& r = digits_results();
  const auto ok = [](const SeedSummary& s) { return s.median_epochs && *s.median_epochs <= 80 && s.median_accuracy >= 0.90; };
  return check(ok(r.onaq) && ok(r.olnaq),
               fmt("oNAQ median epochs %s [%s], accuracy %.3f; oLNAQ median epochs %s [%s], accuracy %.3f; "
                   "%.0f s for all four methods",
                   epochs_text(r.onaq.median_epochs).c_str(), r.onaq.per_seed.c_str(), r.onaq.median_accuracy,
                   epochs_text(r.olnaq.median_epochs).c_str(), r.olnaq.per_seed.c_str(), r.olnaq.median_accuracy,
                   r.obfgs.seconds + r.onaq.seconds + r.olbfgs.seconds + r.olnaq.seconds));
}

// never-reached sorts after every count; both never-reached is no evidence
bool not_worse(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a) return false;
  return !b || *a <= *b;
}

Outcome digits_ordering() {
  const auto& r = digits_results();
  return check(not_worse(r.onaq.median_epochs, r.obfgs.median_epochs) &&
                   not_worse(r.olnaq.median_epochs, r.olbfgs.median_epochs),
               fmt("oNAQ %s vs oBFGS %s [%s]; oLNAQ %s vs oLBFGS %s [%s]", epochs_text(r.onaq.median_epochs).c_str(),
                   epochs_text(r.obfgs.median_epochs).c_str(), r.obfgs.per_seed.c_str(),
                   epochs_text(r.olnaq.median_epochs).c_str(), epochs_text(r.olbfgs.median_epochs).c_str(),
                   r.olbfgs.per_seed.c_str()));
}

// 8 ------------------------------------------------------------------------
std::optional<fs::path> find_wine() {
  if (const char* root = std::getenv("NAGQN_DATA_DIR"); root && *root)
    if (fs::exists(fs::path(root) / "winequality-white.csv")) return fs::path(root) / "winequality-white.csv";
  if (fs::exists(kSource / "data" / "winequality-white.csv")) return kSource / "data" / "winequality-white.csv";
  return std::nullopt;
}

Outcome wine_regression() {
  const auto path = find_wine();
  if (!path) return {Verdict::skip, "winequality-white.csv not found in NAGQN_DATA_DIR or data/"};
  auto setup = [&](OptimizerKind opt) {
    RunConfig cfg = default_config(DatasetKind::wine, opt);
    cfg.data_path = *path;
    cfg.lambda = 1.0;
    cfg.epsilon = 1.0;
    cfg.schedule = ScheduleSpec::gain(100.0, 0.5);
    return cfg;
  };
  const Problem problem = load_problem(setup(OptimizerKind::olnaq));
  std::vector<double> final_lnaq, final_lbfgs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunConfig lnaq = setup(OptimizerKind::olnaq);
    RunConfig lbfgs = setup(OptimizerKind::olbfgs);
    lnaq.seed = lbfgs.seed = seed;
    const auto a = run_experiment(lnaq, problem).records;
    const auto b = run_experiment(lbfgs, problem).records;
    if (a.size() != 21) return fail(fmt("seed %llu: expected 21 records", static_cast<unsigned long long>(seed)));
    std::vector<double> avg;
    for (std::size_t e = 1; e < a.size(); ++e) {
      if (!std::isfinite(a[e].test_metric))
        return fail(fmt("seed %llu epoch %zu: non-finite RMSE", static_cast<unsigned long long>(seed), e));
      if (e >= 5) {
        double sum = 0.0;
        for (std::size_t j = e - 4; j <= e; ++j) sum += a[j].test_metric;
        avg.push_back(sum / 5.0);
      }
    }
    // averages end at epochs 5..20; the final 15 epochs give 15 comparisons
    for (std::size_t i = 1; i < avg.size(); ++i)
      if (avg[i] > avg[i - 1] * (1.0 + 1e-12))
        return fail(fmt("seed %llu: 5-epoch RMSE average rises at epoch %zu (%.6f -> %.6f)",
                        static_cast<unsigned long long>(seed), i + 5, avg[i - 1], avg[i]));
    final_lnaq.push_back(a.back().test_metric);
    final_lbfgs.push_back(b.back().test_metric);
  }
  const double m1 = median(final_lnaq), m2 = median(final_lbfgs);
  return check(m1 <= m2, fmt("median final RMSE oLNAQ %.4f vs oLBFGS %.4f", m1, m2));
}

// 9 ------------------------------------------------------------------------
Outcome cost_accounting() {
  std::string detail;
  bool ok = true;
  for (auto opt : {OptimizerKind::obfgs, OptimizerKind::onaq, OptimizerKind::olbfgs, OptimizerKind::olnaq}) {
    RunConfig cfg = digits_setup(opt);
    cfg.max_epochs = 2;
    const Problem problem = load_problem(cfg);

    // per-step count through an independent counter
    CountingObjective counted(*problem.objective);
    auto optimizer = make_optimizer(cfg, problem.initial_params(0));
    BatchSampler sampler(problem.train, cfg.batch_size, 0);
    const auto hessians_before = DenseInverseHessian::constructed();
    for (int step = 0; step < 40; ++step) {
      const auto before = counted.gradient_evaluations();
      optimizer->step(counted, sampler.next_batch());
      if (counted.gradient_evaluations() - before != 2) {
        ok = false;
        detail += fmt("%s step %d used %zu evaluations; ", to_string(opt).c_str(), step,
                      counted.gradient_evaluations() - before);
        break;
      }
    }
    const auto dense_in_steps = DenseInverseHessian::constructed() - hessians_before;

    const RunResult run = run_experiment(cfg, problem);
    const bool evals_ok = run.gradient_evaluations == 2 * run.steps;
    const bool alloc_ok = is_limited_memory(opt) ? run.dense_hessians_constructed == 0 && dense_in_steps == 0
                                                 : run.dense_hessians_constructed == 1;
    ok = ok && evals_ok && alloc_ok;
    detail += fmt("%s %llu evals / %llu steps, %zu dense H; ", to_string(opt).c_str(),
                  static_cast<unsigned long long>(run.gradient_evaluations),
                  static_cast<unsigned long long>(run.steps), run.dense_hessians_constructed);
  }
  return check(ok, detail.substr(0, detail.size() - 2));
}

// 10 -----------------------------------------------------------------------
std::string csv_without_wall(const RunConfig& cfg) {
  const auto records = run_experiment(cfg).records;
  std::ostringstream out;
  write_records_csv(out, records, run_metadata(cfg));
  std::istringstream in(out.str());
  std::string line, stripped;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') {
      // drop the third field
      const auto a = line.find(',', line.find(',') + 1);
      const auto b = line.find(',', a + 1);
      line = line.substr(0, a + 1) + line.substr(b + 1);
    }
    stripped += line + '\n';
  }
  return stripped;
}

Outcome determinism() {
  std::vector<RunConfig> configs;
  for (auto opt : {OptimizerKind::sgd, OptimizerKind::adam, OptimizerKind::obfgs, OptimizerKind::onaq,
                   OptimizerKind::olbfgs, OptimizerKind::olnaq}) {
    RunConfig cfg = is_quasi_newton(opt) ? digits_setup(opt) : default_config(DatasetKind::digits8x8, opt);
    cfg.data_path = kSource / "data" / "optdigits.csv";
    cfg.max_epochs = 3;
    cfg.seed = 11;
    configs.push_back(cfg);
  }
  RunConfig quad = default_config(DatasetKind::quadratic, OptimizerKind::onaq);
  configs.push_back(quad);
  for (const auto& cfg : configs) {
    const std::string a = csv_without_wall(cfg);
    const std::string b = csv_without_wall(cfg);
    if (a.find("\nepoch,iteration,train_loss,test_metric\n") == std::string::npos)
      return fail("wall_ms column not isolated");
    if (a != b) return fail(to_string(cfg.optimizer) + " on " + to_string(cfg.dataset) + ": CSV differs");
  }
  return pass(fmt("%zu configurations, repeated runs byte-identical apart from wall_ms", configs.size()));
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const Criterion criteria[] = {
      {1, "secant invariant", secant_invariant},
      {2, "dense/limited equivalence", dense_limited_equivalence},
      {3, "gradient oracle", gradient_oracle},
      {4, "parameter counts", parameter_counts},
      {5, "deterministic convergence", deterministic_convergence},
      {6, "digits reproduction", digits_reproduction},
      {7, "digits epoch ordering", digits_ordering},
      {8, "wine regression smoke", wine_regression},
      {9, "cost accounting", cost_accounting},
      {10, "determinism", determinism},
  };
  bool failed = false, skipped = false;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
    std::printf("%s criterion %d (%s, %.2f s): %s\n", tag, c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
    failed = failed || o.verdict == Verdict::fail;
    skipped = skipped || o.verdict == Verdict::skip;
  }
  return failed ? 1 : skipped ? 77 : 0;
}
