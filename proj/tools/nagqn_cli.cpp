// nagqn: run optimizer benchmarks, check MLP gradients, compare run logs.

#include "nagqn/bench.hpp"
#include "nagqn/mlp.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <random>

namespace {

using namespace nagqn;

std::filesystem::path seeded_path(const std::filesystem::path& base, std::uint64_t seed) {
  auto out = base;
  out.replace_filename(base.stem().string() + "_seed" + std::to_string(seed) + base.extension().string());
  return out;
}

void write_log(const std::filesystem::path& path, const RunConfig& cfg, const std::vector<TrainingRecord>& records) {
  if (path.empty()) {
    write_records_csv(std::cout, records, run_metadata(cfg));
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_records_csv(out, records, run_metadata(cfg));
}

int run_command(const std::string& config_path, const std::string& out_path, std::optional<std::uint64_t> seed,
                std::size_t seeds) {
  RunConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;

  if (seeds <= 1) {
    try {
      const RunResult result = run_experiment(cfg);
      write_log(out_path, cfg, result.records);
    } catch (const DivergenceError& e) {
      write_log(out_path, cfg, e.records());
      std::cerr << "error: " << e.what() << '\n';
      return 3;
    }
    return 0;
  }

  // Several seeds: one log per seed plus a median summary on stdout.
  const Problem problem = load_problem(cfg);
  std::vector<std::optional<std::size_t>> epochs;
  std::vector<double> metrics;
  std::vector<double> walls;
  const std::uint64_t first = cfg.seed;
  int status = 0;
  for (std::uint64_t s = first; s < first + seeds; ++s) {
    cfg.seed = s;
    std::vector<TrainingRecord> records;
    try {
      records = run_experiment(cfg, problem).records;
    } catch (const DivergenceError& e) {
      std::cerr << "seed " << s << ": " << e.what() << '\n';
      records = e.records();
      status = 3;
    }
    if (!out_path.empty()) write_log(seeded_path(out_path, s), cfg, records);
    epochs.push_back(epochs_to_threshold(records, cfg.loss_threshold));
    metrics.push_back(records.back().test_metric);
    walls.push_back(records.back().wall_ms);
    std::cout << "seed " << s << ": epochs_to_threshold="
              << (epochs.back() ? std::to_string(*epochs.back()) : std::string("none"))
              << " final_test_metric=" << metrics.back() << " wall_ms=" << walls.back() << '\n';
  }
  const auto med = median_epochs(epochs);
  std::cout << "median over " << seeds << " seeds: epochs_to_threshold="
            << (med ? std::to_string(*med) : std::string("none")) << " final_test_metric=" << median(metrics)
            << " wall_ms=" << median(walls) << '\n';
  return status;
}

int check_grad_command(const std::string& layers, std::size_t trials, const std::string& activation,
                       const std::string& loss, std::uint64_t seed, double h, double tolerance) {
  MlpSpec spec{parse_layer_sizes(layers), parse_activation(activation), parse_loss(loss)};
  spec.validate();
  const MlpObjective objective(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, static_cast<int>(spec.outputs()) - 1);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t b = 1 + t % 4;
    MiniBatch batch;
    batch.inputs = Matrix::NullaryExpr(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(spec.inputs()),
                                       [&] { return normal(rng); });
    if (spec.loss == LossKind::softmax_cross_entropy)
      for (std::size_t i = 0; i < b; ++i) batch.labels.push_back(label(rng));
    else
      batch.targets = Matrix::NullaryExpr(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(spec.outputs()),
                                          [&] { return normal(rng); });
    ParamVector w = init_params(spec, rng());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] += 0.1 * normal(rng);
    const double err = relative_gradient_error(objective.evaluate(w, batch).grad,
                                               finite_diff_grad(objective, w, batch, h));
    worst = std::max(worst, err);
  }
  std::cout << "spec " << layers << " (" << param_count(spec) << " parameters), " << trials
            << " trials: max relative error " << worst << '\n';
  return worst <= tolerance ? 0 : 1;
}

int compare_command(const std::vector<std::string>& paths, std::optional<double> threshold, bool csv) {
  std::vector<RunLog> logs;
  for (const auto& p : paths) logs.push_back(load_records_csv(p));
  double t = 1e-3;
  if (threshold) {
    t = *threshold;
  } else if (auto it = logs.front().metadata.find("loss_threshold"); it != logs.front().metadata.end()) {
    t = std::stod(it->second);
  }
  const ComparisonReport report = compare_runs(logs, t);
  std::cout << (csv ? report.to_csv() : report.to_table());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic quasi-Newton optimizer benchmarks"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Train one configuration and write the per-epoch CSV log");
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::size_t seeds = 1;
  run->add_option("--config", config_path, "Run configuration (key = value lines)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_path, "CSV output path (stdout if omitted; suffixed per seed with --seeds)");
  run->add_option("--seed", seed, "Override the configured seed");
  run->add_option("--seeds", seeds, "Run this many consecutive seeds and report medians")->check(CLI::PositiveNumber);

  auto* grad = app.add_subcommand("check-grad", "Compare backprop against central finite differences");
  std::string layers;
  std::size_t trials = 20;
  std::string activation = "relu";
  std::string loss = "softmax_cross_entropy";
  std::uint64_t grad_seed = 0;
  double h = 1e-5;
  double tolerance = 1e-5;
  grad->add_option("--spec", layers, "Layer widths, e.g. 8-5-3")->required();
  grad->add_option("--trials", trials, "Number of random trials")->check(CLI::PositiveNumber);
  grad->add_option("--activation", activation, "relu or sigmoid");
  grad->add_option("--loss", loss, "softmax_cross_entropy or mean_squared_error");
  grad->add_option("--seed", grad_seed, "Random seed");
  grad->add_option("--step", h, "Finite difference step");
  grad->add_option("--tolerance", tolerance, "Maximum accepted relative error");

  auto* cmp = app.add_subcommand("compare", "Tabulate epochs-to-threshold, final metric and time");
  std::vector<std::string> csvs;
  std::optional<double> threshold;
  bool as_csv = false;
  cmp->add_option("logs", csvs, "Run logs written by 'run'")->required()->check(CLI::ExistingFile);
  cmp->add_option("--threshold", threshold, "Train-loss threshold (default: from the first log, else 1e-3)");
  cmp->add_flag("--csv", as_csv, "Emit CSV instead of an aligned table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config_path, out_path, seed, seeds);
    if (*grad) return check_grad_command(layers, trials, activation, loss, grad_seed, h, tolerance);
    if (*cmp) return compare_command(csvs, threshold, as_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
