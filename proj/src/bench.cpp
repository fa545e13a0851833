#include "nagqn/bench.hpp"

#include "nagqn/dense_qn.hpp"
#include "nagqn/first_order.hpp"
#include "nagqn/limited_qn.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace nagqn {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return ec == std::errc{} ? std::string(buf, end) : std::string("nan");
}

double parse_real(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size())
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(text) + "'");
  return v;
}

std::uint64_t parse_count(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size())
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" + std::string(text) + "'");
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("'" + std::string(key) + "' expects true/false");
}

std::filesystem::path resolve_data_path(const std::filesystem::path& configured, std::string_view fallback) {
  std::filesystem::path p = configured.empty() ? std::filesystem::path(fallback) : configured;
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("NAGQN_DATA_DIR"); root && *root) return std::filesystem::path(root) / p;
  return p;
}

template <typename Fn>
auto rethrow_as_config(Fn&& fn) {
  try {
    return fn();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Optimizer adapters

class SgdOptimizer final : public Optimizer {
 public:
  SgdOptimizer(ParamVector w0, ScheduleSpec schedule) : w_(std::move(w0)), schedule_(schedule) {}

  StepReport step(const StochasticObjective& obj, const MiniBatch& batch) override {
    StepReport r;
    const LossAndGrad e = obj.evaluate(w_, batch);
    r.gradient_evaluations = 1;
    r.loss_first = r.loss_second = e.loss;
    r.step_size = step_size(schedule_, k_++);
    w_ = sgd_step(w_, e.grad, r.step_size);
    return r;
  }
  const ParamVector& params() const override { return w_; }

 private:
  ParamVector w_;
  ScheduleSpec schedule_;
  std::uint64_t k_ = 1;
};

class AdamOptimizer final : public Optimizer {
 public:
  AdamOptimizer(ParamVector w0, ScheduleSpec schedule, AdamConfig cfg)
      : w_(std::move(w0)), schedule_(schedule), state_(static_cast<std::size_t>(w_.size()), cfg) {}

  StepReport step(const StochasticObjective& obj, const MiniBatch& batch) override {
    StepReport r;
    const LossAndGrad e = obj.evaluate(w_, batch);
    r.gradient_evaluations = 1;
    r.loss_first = r.loss_second = e.loss;
    state_.config.alpha = r.step_size = step_size(schedule_, state_.k + 1);
    w_ = adam_step(state_, w_, e.grad);
    return r;
  }
  const ParamVector& params() const override { return w_; }

 private:
  ParamVector w_;
  ScheduleSpec schedule_;
  AdamState state_;
};

class DenseOptimizer final : public Optimizer {
 public:
  DenseOptimizer(ParamVector w0, QnConfig cfg, bool nesterov)
      : state_(std::move(w0), cfg.epsilon), cfg_(cfg), nesterov_(nesterov) {}

  StepReport step(const StochasticObjective& obj, const MiniBatch& batch) override {
    return nesterov_ ? onaq_step(state_, obj, batch, cfg_) : obfgs_step(state_, obj, batch, cfg_);
  }
  const ParamVector& params() const override { return state_.w; }

 private:
  DenseQnState state_;
  QnConfig cfg_;
  bool nesterov_;
};

class LimitedOptimizer final : public Optimizer {
 public:
  LimitedOptimizer(ParamVector w0, std::size_t memory, QnConfig cfg, bool nesterov)
      : state_(std::move(w0), memory), cfg_(cfg), nesterov_(nesterov) {}

  StepReport step(const StochasticObjective& obj, const MiniBatch& batch) override {
    return nesterov_ ? olnaq_step(state_, obj, batch, cfg_) : olbfgs_step(state_, obj, batch, cfg_);
  }
  const ParamVector& params() const override { return state_.w; }

 private:
  LimitedQnState state_;
  QnConfig cfg_;
  bool nesterov_;
};

QnConfig qn_config(const RunConfig& cfg) {
  QnConfig q;
  q.mu = cfg.mu.value_or(0.0);
  q.lambda = cfg.lambda;
  q.epsilon = cfg.epsilon;
  q.schedule = cfg.schedule;
  q.normalize_direction = cfg.normalize_direction;
  return q;
}

}  // namespace

// ---------------------------------------------------------------------------
// Enums

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "digits8x8") return DatasetKind::digits8x8;
  if (name == "mnist28") return DatasetKind::mnist28;
  if (name == "wine") return DatasetKind::wine;
  if (name == "casp") return DatasetKind::casp;
  if (name == "quadratic") return DatasetKind::quadratic;
  if (name == "rosenbrock") return DatasetKind::rosenbrock;
  throw ConfigError("unknown dataset '" + std::string(name) + "'");
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::digits8x8: return "digits8x8";
    case DatasetKind::mnist28: return "mnist28";
    case DatasetKind::wine: return "wine";
    case DatasetKind::casp: return "casp";
    case DatasetKind::quadratic: return "quadratic";
    case DatasetKind::rosenbrock: return "rosenbrock";
  }
  return "?";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  if (name == "obfgs") return OptimizerKind::obfgs;
  if (name == "onaq") return OptimizerKind::onaq;
  if (name == "olbfgs") return OptimizerKind::olbfgs;
  if (name == "olnaq") return OptimizerKind::olnaq;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::obfgs: return "obfgs";
    case OptimizerKind::onaq: return "onaq";
    case OptimizerKind::olbfgs: return "olbfgs";
    case OptimizerKind::olnaq: return "olnaq";
  }
  return "?";
}

bool is_quasi_newton(OptimizerKind kind) { return kind != OptimizerKind::sgd && kind != OptimizerKind::adam; }
bool is_limited_memory(OptimizerKind kind) { return kind == OptimizerKind::olbfgs || kind == OptimizerKind::olnaq; }
bool uses_momentum(OptimizerKind kind) { return kind == OptimizerKind::onaq || kind == OptimizerKind::olnaq; }

// ---------------------------------------------------------------------------
// Configuration

void RunConfig::validate() const {
  const bool synthetic = dataset == DatasetKind::quadratic || dataset == DatasetKind::rosenbrock;
  if (!synthetic) rethrow_as_config([&] { model.validate(); return 0; });
  if (uses_momentum(optimizer)) {
    if (!mu) throw ConfigError(to_string(optimizer) + " requires 'mu'");
    if (!(*mu > 0.0 && *mu < 1.0)) throw ConfigError("'mu' must lie in (0, 1)");
  } else if (mu) {
    throw ConfigError("'mu' only applies to onaq and olnaq");
  }
  if (is_limited_memory(optimizer)) {
    if (!memory) throw ConfigError(to_string(optimizer) + " requires 'memory'");
    if (*memory == 0) throw ConfigError("'memory' must be positive");
  } else if (memory) {
    throw ConfigError("'memory' only applies to olbfgs and olnaq");
  }
  if (batch_size == 0) throw ConfigError("'batch_size' must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("'lambda' must be non-negative");
  if (!(epsilon > 0.0)) throw ConfigError("'epsilon' must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("'train_fraction' must lie in (0, 1)");
  if (std::isnan(loss_threshold)) throw ConfigError("'loss_threshold' must be a number");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("Adam decay rates must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("'adam_epsilon' must be positive");
  if (quadratic_dim == 0 || !(quadratic_condition >= 1.0)) throw ConfigError("invalid quadratic testbed size");
  rethrow_as_config([&] { schedule.validate(); return 0; });
  if (!synthetic) {
    const bool regression = dataset == DatasetKind::wine || dataset == DatasetKind::casp;
    const auto want = regression ? LossKind::mean_squared_error : LossKind::softmax_cross_entropy;
    if (model.loss != want) throw ConfigError("loss does not match the dataset task");
    const std::size_t in = dataset == DatasetKind::digits8x8 ? 64
                           : dataset == DatasetKind::mnist28 ? 784
                           : dataset == DatasetKind::wine    ? 11
                                                             : 9;
    if (model.inputs() != in) throw ConfigError("model input width must be " + std::to_string(in));
    if (model.outputs() != (regression ? 1u : 10u)) throw ConfigError("model output width does not match dataset");
  }
}

namespace {

// Dataset-level defaults, without the optimizer-specific mu/memory.
RunConfig dataset_defaults(DatasetKind dataset, OptimizerKind optimizer) {
  RunConfig cfg;
  cfg.dataset = dataset;
  cfg.optimizer = optimizer;
  switch (dataset) {
    case DatasetKind::digits8x8:
      cfg.model = {{64, 20, 10, 10}, Activation::relu, LossKind::softmax_cross_entropy};
      cfg.batch_size = 64;
      cfg.train_fraction = 2.0 / 3.0;
      cfg.max_epochs = 80;
      break;
    case DatasetKind::mnist28:
      cfg.model = {{784, 100, 50, 10}, Activation::relu, LossKind::softmax_cross_entropy};
      cfg.batch_size = 64;
      cfg.max_epochs = 20;
      break;
    case DatasetKind::wine:
      cfg.model = {{11, 10, 4, 1}, Activation::relu, LossKind::mean_squared_error};
      cfg.batch_size = 32;
      cfg.train_fraction = 0.8;
      cfg.max_epochs = 20;
      cfg.loss_threshold = 0.0;
      break;
    case DatasetKind::casp:
      cfg.model = {{9, 10, 6, 1}, Activation::relu, LossKind::mean_squared_error};
      cfg.batch_size = 64;
      cfg.train_fraction = 0.8;
      cfg.max_epochs = 20;
      cfg.loss_threshold = 0.0;
      break;
    case DatasetKind::quadratic:
    case DatasetKind::rosenbrock:
      cfg.batch_size = 1;
      cfg.max_epochs = 200;
      // The quadratic can go negative; run the full budget unless asked otherwise.
      cfg.loss_threshold = -std::numeric_limits<double>::infinity();
      cfg.lambda = 0.0;
      cfg.epsilon = 0.1;
      cfg.normalize_direction = false;
      break;
  }
  if (optimizer == OptimizerKind::sgd) cfg.schedule = ScheduleSpec::constant(0.01);
  if (optimizer == OptimizerKind::adam) cfg.schedule = ScheduleSpec::constant(0.001);
  return cfg;
}

}  // namespace

RunConfig default_config(DatasetKind dataset, OptimizerKind optimizer) {
  RunConfig cfg = dataset_defaults(dataset, optimizer);
  if (uses_momentum(optimizer)) {
    switch (dataset) {
      case DatasetKind::digits8x8: cfg.mu = 0.8; break;
      case DatasetKind::mnist28: cfg.mu = 0.85; break;
      case DatasetKind::wine:
      case DatasetKind::casp: cfg.mu = 0.95; break;
      default: cfg.mu = 0.8; break;
    }
  }
  if (is_limited_memory(optimizer)) cfg.memory = 4;
  return cfg;
}

RunConfig parse_config(std::string_view text) {
  std::map<std::string, std::string, std::less<>> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(trim(view.substr(0, eq)));
    const std::string value(trim(view.substr(eq + 1)));
    if (key.empty() || value.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
    if (!entries.emplace(key, value).second) throw ConfigError("duplicate key '" + key + "'");
  }

  auto take = [&](std::string_view key) -> std::optional<std::string> {
    auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    std::string v = it->second;
    entries.erase(it);
    return v;
  };

  const auto dataset = take("dataset");
  const auto optimizer = take("optimizer");
  if (!dataset) throw ConfigError("missing required key 'dataset'");
  if (!optimizer) throw ConfigError("missing required key 'optimizer'");
  RunConfig cfg = dataset_defaults(parse_dataset_kind(*dataset), parse_optimizer_kind(*optimizer));

  if (auto v = take("data_path")) cfg.data_path = *v;
  if (auto v = take("model")) cfg.model.layer_sizes = rethrow_as_config([&] { return parse_layer_sizes(*v); });
  if (auto v = take("activation")) cfg.model.hidden_activation = rethrow_as_config([&] { return parse_activation(*v); });
  if (auto v = take("loss")) cfg.model.loss = rethrow_as_config([&] { return parse_loss(*v); });
  if (auto v = take("mu")) cfg.mu = parse_real("mu", *v);
  if (auto v = take("lambda")) cfg.lambda = parse_real("lambda", *v);
  if (auto v = take("batch_size")) cfg.batch_size = parse_count("batch_size", *v);
  if (auto v = take("memory")) cfg.memory = parse_count("memory", *v);
  if (auto v = take("epsilon")) cfg.epsilon = parse_real("epsilon", *v);
  if (auto v = take("schedule")) cfg.schedule.kind = rethrow_as_config([&] { return parse_schedule_kind(*v); });
  if (auto v = take("alpha0")) cfg.schedule.alpha0 = parse_real("alpha0", *v);
  if (auto v = take("tau")) cfg.schedule.tau = parse_real("tau", *v);
  if (auto v = take("normalize_direction")) cfg.normalize_direction = parse_bool("normalize_direction", *v);
  if (auto v = take("adam_beta1")) cfg.adam_beta1 = parse_real("adam_beta1", *v);
  if (auto v = take("adam_beta2")) cfg.adam_beta2 = parse_real("adam_beta2", *v);
  if (auto v = take("adam_epsilon")) cfg.adam_epsilon = parse_real("adam_epsilon", *v);
  if (auto v = take("seed")) cfg.seed = parse_count("seed", *v);
  if (auto v = take("split_seed")) cfg.split_seed = parse_count("split_seed", *v);
  if (auto v = take("max_epochs")) cfg.max_epochs = parse_count("max_epochs", *v);
  if (auto v = take("loss_threshold")) cfg.loss_threshold = parse_real("loss_threshold", *v);
  if (auto v = take("train_fraction")) cfg.train_fraction = parse_real("train_fraction", *v);
  if (auto v = take("quadratic_dim")) cfg.quadratic_dim = parse_count("quadratic_dim", *v);
  if (auto v = take("quadratic_condition")) cfg.quadratic_condition = parse_real("quadratic_condition", *v);

  if (!entries.empty()) throw ConfigError("unknown key '" + entries.begin()->first + "'");
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string format_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "dataset = " << to_string(cfg.dataset) << '\n' << "optimizer = " << to_string(cfg.optimizer) << '\n';
  if (!cfg.data_path.empty()) out << "data_path = " << cfg.data_path.string() << '\n';
  if (cfg.dataset != DatasetKind::quadratic && cfg.dataset != DatasetKind::rosenbrock) {
    out << "model = " << format_layer_sizes(cfg.model.layer_sizes) << '\n'
        << "activation = " << (cfg.model.hidden_activation == Activation::relu ? "relu" : "sigmoid") << '\n'
        << "loss = "
        << (cfg.model.loss == LossKind::softmax_cross_entropy ? "softmax_cross_entropy" : "mean_squared_error")
        << '\n';
  }
  if (cfg.mu) out << "mu = " << format_double(*cfg.mu) << '\n';
  if (cfg.memory) out << "memory = " << *cfg.memory << '\n';
  out << "lambda = " << format_double(cfg.lambda) << '\n'
      << "batch_size = " << cfg.batch_size << '\n'
      << "epsilon = " << format_double(cfg.epsilon) << '\n'
      << "schedule = " << to_string(cfg.schedule.kind) << '\n'
      << "alpha0 = " << format_double(cfg.schedule.alpha0) << '\n'
      << "tau = " << format_double(cfg.schedule.tau) << '\n'
      << "normalize_direction = " << (cfg.normalize_direction ? "true" : "false") << '\n'
      << "adam_beta1 = " << format_double(cfg.adam_beta1) << '\n'
      << "adam_beta2 = " << format_double(cfg.adam_beta2) << '\n'
      << "adam_epsilon = " << format_double(cfg.adam_epsilon) << '\n'
      << "seed = " << cfg.seed << '\n'
      << "split_seed = " << cfg.split_seed << '\n'
      << "max_epochs = " << cfg.max_epochs << '\n'
      << "loss_threshold = " << format_double(cfg.loss_threshold) << '\n'
      << "train_fraction = " << format_double(cfg.train_fraction) << '\n'
      << "quadratic_dim = " << cfg.quadratic_dim << '\n'
      << "quadratic_condition = " << format_double(cfg.quadratic_condition) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Problems

ParamVector Problem::initial_params(std::uint64_t seed) const {
  if (model) return init_params(*model, seed);
  if (kind == DatasetKind::rosenbrock) return ParamVector{{-1.2, 1.0}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector w(static_cast<Eigen::Index>(objective->dimension()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = normal(rng);
  return w;
}

double Problem::train_loss(const ParamVector& w) const { return objective->loss(w, train.full_batch()); }

double Problem::test_metric(const ParamVector& w) const {
  if (!model) return objective->evaluate(w, train.full_batch()).grad.norm();
  if (test.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  if (test.kind == Dataset::Kind::classification)
    return classification_accuracy(*model, w, test.features, test.labels);
  return regression_rmse(*model, w, test.features, test.targets);
}

Problem load_problem(const RunConfig& cfg) {
  cfg.validate();
  Problem p;
  p.kind = cfg.dataset;
  switch (cfg.dataset) {
    case DatasetKind::quadratic:
    case DatasetKind::rosenbrock: {
      // A single placeholder sample: one batch per epoch, one step per epoch.
      p.train.kind = Dataset::Kind::regression;
      p.train.features = Matrix::Zero(1, 1);
      p.train.targets = Matrix::Zero(1, 1);
      p.test = p.train;
      if (cfg.dataset == DatasetKind::rosenbrock) {
        p.objective = std::make_unique<RosenbrockObjective>();
      } else {
        std::mt19937_64 rng(cfg.split_seed ^ 0x9e3779b97f4a7c15ULL);
        std::normal_distribution<double> normal(0.0, 1.0);
        ParamVector c(static_cast<Eigen::Index>(cfg.quadratic_dim));
        for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = normal(rng);
        p.objective = std::make_unique<QuadraticObjective>(
            random_spd(cfg.quadratic_dim, cfg.quadratic_condition, cfg.split_seed), std::move(c));
      }
      return p;
    }
    case DatasetKind::digits8x8: {
      const Dataset all = load_digits_csv(resolve_data_path(cfg.data_path, "optdigits.csv"));
      std::tie(p.train, p.test) = split_train_test(all, cfg.train_fraction, cfg.split_seed);
      break;
    }
    case DatasetKind::mnist28: {
      const auto dir = resolve_data_path(cfg.data_path, "mnist");
      Dataset train = load_idx_mnist(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
      p.test = load_idx_mnist(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
      // The first 55000 training images; the rest is the customary validation block.
      const std::size_t keep = std::min<std::size_t>(train.size(), 55000);
      std::vector<std::size_t> rows(keep);
      for (std::size_t i = 0; i < keep; ++i) rows[i] = i;
      p.train = train.subset(rows);
      break;
    }
    case DatasetKind::wine:
    case DatasetKind::casp: {
      const Dataset all = cfg.dataset == DatasetKind::wine
                              ? load_wine_quality(resolve_data_path(cfg.data_path, "winequality-white.csv"))
                              : load_casp(resolve_data_path(cfg.data_path, "CASP.csv"));
      auto [train, test] = split_train_test(all, cfg.train_fraction, cfg.split_seed);
      auto normalized = z_normalize(train, test);
      p.train = std::move(normalized.train);
      p.test = std::move(normalized.test);
      break;
    }
  }
  p.model = cfg.model;
  p.objective = std::make_unique<MlpObjective>(cfg.model);
  return p;
}

std::unique_ptr<Optimizer> make_optimizer(const RunConfig& cfg, ParamVector w0) {
  switch (cfg.optimizer) {
    case OptimizerKind::sgd:
      return std::make_unique<SgdOptimizer>(std::move(w0), cfg.schedule);
    case OptimizerKind::adam:
      return std::make_unique<AdamOptimizer>(std::move(w0), cfg.schedule,
                                             AdamConfig{cfg.schedule.alpha0, cfg.adam_beta1, cfg.adam_beta2,
                                                        cfg.adam_epsilon});
    case OptimizerKind::obfgs:
    case OptimizerKind::onaq:
      return std::make_unique<DenseOptimizer>(std::move(w0), qn_config(cfg), cfg.optimizer == OptimizerKind::onaq);
    case OptimizerKind::olbfgs:
    case OptimizerKind::olnaq:
      return std::make_unique<LimitedOptimizer>(std::move(w0), cfg.memory.value_or(0), qn_config(cfg),
                                                cfg.optimizer == OptimizerKind::olnaq);
  }
  throw ConfigError("unsupported optimizer");
}

// ---------------------------------------------------------------------------
// Training loop

RunResult run_experiment(const RunConfig& cfg, const Problem& problem) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;
  RunResult result;
  const std::size_t hessians_before = DenseInverseHessian::constructed();

  CountingObjective counted(*problem.objective);
  auto optimizer = make_optimizer(cfg, problem.initial_params(cfg.seed));
  BatchSampler sampler(problem.train, std::min(cfg.batch_size, problem.train.size()), cfg.seed);

  double wall_ms = 0.0;
  auto record_epoch = [&](std::size_t epoch) {
    TrainingRecord r;
    r.epoch = epoch;
    r.iteration = result.steps;
    r.wall_ms = wall_ms;
    r.train_loss = problem.train_loss(optimizer->params());
    r.test_metric = problem.test_metric(optimizer->params());
    result.records.push_back(r);
    if (!std::isfinite(r.train_loss))
      throw DivergenceError("non-finite train loss at epoch " + std::to_string(epoch), result.records);
  };

  record_epoch(0);
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (result.records.back().train_loss < cfg.loss_threshold) break;
    const std::size_t batches = sampler.batches_per_epoch();
    for (std::size_t b = 0; b < batches; ++b) {
      const MiniBatch batch = sampler.next_batch();
      const auto start = Clock::now();
      optimizer->step(counted, batch);
      wall_ms += std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      ++result.steps;
    }
    record_epoch(epoch);
  }

  result.final_params = optimizer->params();
  result.gradient_evaluations = counted.gradient_evaluations();
  result.dense_hessians_constructed = DenseInverseHessian::constructed() - hessians_before;
  return result;
}

RunResult run_experiment(const RunConfig& cfg) {
  const Problem problem = load_problem(cfg);
  return run_experiment(cfg, problem);
}

std::optional<std::size_t> epochs_to_threshold(const std::vector<TrainingRecord>& records, double threshold) {
  if (records.empty()) throw ContractViolation("epochs_to_threshold needs at least one record");
  std::optional<std::size_t> best;
  for (const auto& r : records)
    if (r.train_loss < threshold && (!best || r.epoch < *best)) best = r.epoch;
  return best;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractViolation("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::optional<double> median_epochs(const std::vector<std::optional<std::size_t>>& epochs) {
  std::vector<double> values;
  for (const auto& e : epochs)
    values.push_back(e ? static_cast<double>(*e) : std::numeric_limits<double>::infinity());
  const double m = median(std::move(values));
  if (!std::isfinite(m)) return std::nullopt;
  return m;
}

// ---------------------------------------------------------------------------
// CSV logs and comparison

void write_records_csv(std::ostream& out, const std::vector<TrainingRecord>& records,
                       const std::map<std::string, std::string>& metadata) {
  for (const auto& [key, value] : metadata) out << "# " << key << " = " << value << '\n';
  out << "epoch,iteration,wall_ms,train_loss,test_metric\n";
  for (const auto& r : records)
    out << r.epoch << ',' << r.iteration << ',' << format_double(r.wall_ms) << ',' << format_double(r.train_loss)
        << ',' << format_double(r.test_metric) << '\n';
}

RunLog read_records_csv(std::istream& in, std::string label) {
  RunLog log;
  log.label = std::move(label);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      view.remove_prefix(1);
      const auto eq = view.find('=');
      if (eq != std::string_view::npos)
        log.metadata[std::string(trim(view.substr(0, eq)))] = std::string(trim(view.substr(eq + 1)));
      continue;
    }
    if (!header_seen) {
      if (view != "epoch,iteration,wall_ms,train_loss,test_metric")
        throw DataFormatError("line " + std::to_string(line_no) + ": unexpected CSV header");
      header_seen = true;
      continue;
    }
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = view.find(',', start);
      fields.push_back(view.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 5) throw DataFormatError("line " + std::to_string(line_no) + ": expected 5 fields");
    TrainingRecord r;
    try {
      r.epoch = parse_count("epoch", fields[0]);
      r.iteration = parse_count("iteration", fields[1]);
      r.wall_ms = parse_real("wall_ms", fields[2]);
      r.train_loss = parse_real("train_loss", fields[3]);
      r.test_metric = parse_real("test_metric", fields[4]);
    } catch (const ConfigError& e) {
      throw DataFormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
    log.records.push_back(r);
  }
  if (!header_seen) throw DataFormatError("missing CSV header");
  return log;
}

RunLog load_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataFormatError("cannot open '" + path.string() + "'");
  return read_records_csv(in, path.stem().string());
}

std::map<std::string, std::string> run_metadata(const RunConfig& cfg) {
  return {{"dataset", to_string(cfg.dataset)},
          {"optimizer", to_string(cfg.optimizer)},
          {"seed", std::to_string(cfg.seed)},
          {"loss_threshold", format_double(cfg.loss_threshold)}};
}

ComparisonReport compare_runs(const std::vector<RunLog>& runs, double threshold) {
  if (runs.size() < 2) throw ConfigError("comparison needs at least two runs");
  std::optional<std::string> dataset;
  for (const auto& run : runs) {
    const auto it = run.metadata.find("dataset");
    if (it == run.metadata.end()) continue;
    if (dataset && *dataset != it->second)
      throw ConfigError("runs cover different datasets ('" + *dataset + "' and '" + it->second + "')");
    dataset = it->second;
  }
  ComparisonReport report;
  report.threshold = threshold;
  for (const auto& run : runs) {
    if (run.records.empty()) throw ConfigError("run '" + run.label + "' has no records");
    ComparisonRow row;
    row.label = run.label;
    row.epochs_to_threshold = epochs_to_threshold(run.records, threshold);
    row.final_test_metric = run.records.back().test_metric;
    row.total_wall_ms = run.records.back().wall_ms;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string ComparisonReport::to_table() const {
  std::size_t width = 3;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "run" << "  " << std::right << std::setw(10) << "epochs"
      << "  " << std::setw(14) << "test_metric" << "  " << std::setw(12) << "wall_ms" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.label << "  " << std::right << std::setw(10)
        << (r.epochs_to_threshold ? std::to_string(*r.epochs_to_threshold) : std::string("—")) << "  "
        << std::setw(14) << std::setprecision(6) << r.final_test_metric << "  " << std::setw(12) << std::fixed
        << std::setprecision(1) << r.total_wall_ms << std::defaultfloat << '\n';
  }
  return out.str();
}

std::string ComparisonReport::to_csv() const {
  std::ostringstream out;
  out << "run,epochs_to_threshold,final_test_metric,total_wall_ms\n";
  for (const auto& r : rows)
    out << r.label << ',' << (r.epochs_to_threshold ? std::to_string(*r.epochs_to_threshold) : std::string()) << ','
        << format_double(r.final_test_metric) << ',' << format_double(r.total_wall_ms) << '\n';
  return out.str();
}

}  // namespace nagqn
