#pragma once

#include "nagqn/objective.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace nagqn {

enum class Activation { relu, sigmoid };
enum class LossKind { softmax_cross_entropy, mean_squared_error };

/// Fully connected network: layer widths [n0, ..., nL], a hidden activation
/// and an output loss. The output layer is linear (logits or regression values).
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;
  Activation hidden_activation = Activation::relu;
  LossKind loss = LossKind::softmax_cross_entropy;

  std::size_t inputs() const { return layer_sizes.front(); }
  std::size_t outputs() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }

  /// Throws ContractViolation unless there are >= 2 positive widths.
  void validate() const;
};

/// Parses "64-20-10-10" into widths.
std::vector<std::size_t> parse_layer_sizes(std::string_view text);
std::string format_layer_sizes(const std::vector<std::size_t>& sizes);

Activation parse_activation(std::string_view name);
LossKind parse_loss(std::string_view name);

/// Where each layer lives in the flat vector: a row-major n_l x n_{l-1}
/// weight block immediately followed by the n_l biases.
struct MlpParamLayout {
  struct Layer {
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
  };
  std::vector<Layer> layers;
  std::size_t total = 0;

  explicit MlpParamLayout(const MlpSpec& spec);
};

/// sum_l (n_{l-1} * n_l + n_l)
std::size_t param_count(const MlpSpec& spec);

/// Weights uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)); biases zero.
ParamVector init_params(const MlpSpec& spec, unsigned long long seed);

/// Per-layer (weights, biases) in unpacked form.
struct LayerParams {
  Matrix weights;  // fan_out x fan_in
  Eigen::VectorXd biases;
};
std::vector<LayerParams> unpack_params(const MlpSpec& spec, const ParamVector& w);
ParamVector pack_params(const MlpSpec& spec, const std::vector<LayerParams>& layers);

/// Network outputs for every row of `inputs` (logits for classification).
Matrix mlp_forward(const MlpSpec& spec, const ParamVector& w, const Matrix& inputs);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

/// Batch-mean loss and its exact backpropagated gradient.
LossAndGrad mlp_loss_and_grad(const MlpSpec& spec, const ParamVector& w, const MiniBatch& batch);

class MlpObjective final : public StochasticObjective {
 public:
  explicit MlpObjective(MlpSpec spec);

  std::size_t dimension() const override { return dimension_; }
  LossAndGrad evaluate(const ParamVector& w, const MiniBatch& batch) const override {
    return mlp_loss_and_grad(spec_, w, batch);
  }
  double loss(const ParamVector& w, const MiniBatch& batch) const override;

  const MlpSpec& spec() const { return spec_; }

 private:
  MlpSpec spec_;
  std::size_t dimension_;
};

/// Fraction of rows whose arg-max logit equals the label.
double classification_accuracy(const MlpSpec& spec, const ParamVector& w, const Matrix& inputs,
                               const std::vector<int>& labels);

/// sqrt of the mean squared residual over all rows and outputs.
double regression_rmse(const MlpSpec& spec, const ParamVector& w, const Matrix& inputs,
                       const Matrix& targets);

/// Norm-wise relative gradient error ||a - b||_inf / max(||a||_inf, ||b||_inf).
/// Returns the absolute error when both vectors are below 1e-12.
double relative_gradient_error(const ParamVector& a, const ParamVector& b);

}  // namespace nagqn
