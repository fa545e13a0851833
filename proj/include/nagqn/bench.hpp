#pragma once

#include "nagqn/curvature.hpp"
#include "nagqn/data.hpp"
#include "nagqn/mlp.hpp"
#include "nagqn/schedule.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nagqn {

/// Bad or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DatasetKind { digits8x8, mnist28, wine, casp, quadratic, rosenbrock };
enum class OptimizerKind { sgd, adam, obfgs, onaq, olbfgs, olnaq };

DatasetKind parse_dataset_kind(std::string_view name);
std::string to_string(DatasetKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);
std::string to_string(OptimizerKind kind);

bool is_quasi_newton(OptimizerKind kind);
bool is_limited_memory(OptimizerKind kind);
bool uses_momentum(OptimizerKind kind);

struct RunConfig {
  DatasetKind dataset = DatasetKind::digits8x8;
  /// Data file (digits, wine, casp) or directory holding the four IDX files
  /// (mnist28). Relative paths resolve against NAGQN_DATA_DIR.
  std::filesystem::path data_path;
  MlpSpec model;
  OptimizerKind optimizer = OptimizerKind::onaq;

  std::optional<double> mu;
  double lambda = 0.2;
  std::size_t batch_size = 64;
  std::optional<std::size_t> memory;
  double epsilon = 1e-2;
  ScheduleSpec schedule = ScheduleSpec::sqrt_decay(1.0);
  bool normalize_direction = true;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  std::uint64_t seed = 0;        // initial weights and batch order
  std::uint64_t split_seed = 0;  // train/test split
  std::size_t max_epochs = 80;
  double loss_threshold = 1e-3;
  double train_fraction = 0.8;

  std::size_t quadratic_dim = 10;
  double quadratic_condition = 100.0;

  /// Throws ConfigError for optimizer/dataset inconsistencies.
  void validate() const;
};

/// Defaults for a dataset: architecture, loss, split and the benchmark setup
/// (momentum, batch size, memory).
RunConfig default_config(DatasetKind dataset, OptimizerKind optimizer);

/// `key = value` lines, `#` comments. Keys mirror RunConfig field names;
/// `model` takes a width list such as 64-20-10-10.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
std::string format_config(const RunConfig& cfg);

struct TrainingRecord {
  std::size_t epoch = 0;
  std::uint64_t iteration = 0;
  double wall_ms = 0.0;
  double train_loss = 0.0;
  double test_metric = 0.0;  // accuracy, RMSE, or gradient norm (synthetic)
};

/// A loaded problem: objective, splits and the metric definition.
struct Problem {
  DatasetKind kind = DatasetKind::digits8x8;
  Dataset train;
  Dataset test;
  std::unique_ptr<StochasticObjective> objective;
  std::optional<MlpSpec> model;  // absent for synthetic objectives

  ParamVector initial_params(std::uint64_t seed) const;
  double train_loss(const ParamVector& w) const;
  double test_metric(const ParamVector& w) const;
};

Problem load_problem(const RunConfig& cfg);

/// Uniform driver over the six optimizers.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual StepReport step(const StochasticObjective& obj, const MiniBatch& batch) = 0;
  virtual const ParamVector& params() const = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const RunConfig& cfg, ParamVector w0);

struct RunResult {
  std::vector<TrainingRecord> records;
  ParamVector final_params;
  std::uint64_t steps = 0;
  std::uint64_t gradient_evaluations = 0;
  std::size_t dense_hessians_constructed = 0;
};

/// Non-finite loss during a run. Carries the records up to and including
/// the diverged epoch.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::string what, std::vector<TrainingRecord> records)
      : std::runtime_error(std::move(what)), records_(std::move(records)) {}
  const std::vector<TrainingRecord>& records() const { return records_; }

 private:
  std::vector<TrainingRecord> records_;
};

RunResult run_experiment(const RunConfig& cfg, const Problem& problem);
RunResult run_experiment(const RunConfig& cfg);

/// Smallest epoch with train_loss < threshold.
std::optional<std::size_t> epochs_to_threshold(const std::vector<TrainingRecord>& records, double threshold);

/// Median with "never reached" ordered after every finite count.
std::optional<double> median_epochs(const std::vector<std::optional<std::size_t>>& epochs);
double median(std::vector<double> values);

/// CSV with header epoch,iteration,wall_ms,train_loss,test_metric. Leading
/// `# key = value` lines carry run metadata.
struct RunLog {
  std::string label;
  std::map<std::string, std::string> metadata;
  std::vector<TrainingRecord> records;
};

void write_records_csv(std::ostream& out, const std::vector<TrainingRecord>& records,
                       const std::map<std::string, std::string>& metadata = {});
RunLog read_records_csv(std::istream& in, std::string label = {});
RunLog load_records_csv(const std::filesystem::path& path);
std::map<std::string, std::string> run_metadata(const RunConfig& cfg);

struct ComparisonRow {
  std::string label;
  std::optional<std::size_t> epochs_to_threshold;
  double final_test_metric = 0.0;
  double total_wall_ms = 0.0;
};

struct ComparisonReport {
  double threshold = 1e-3;
  std::vector<ComparisonRow> rows;

  std::string to_table() const;
  std::string to_csv() const;
};

/// Needs >= 2 runs, all tagged with the same `dataset` metadata (untagged runs
/// are accepted).
ComparisonReport compare_runs(const std::vector<RunLog>& runs, double threshold);

}  // namespace nagqn
