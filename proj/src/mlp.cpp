#include "nagqn/mlp.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

namespace nagqn {
namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeightMap = Eigen::Map<const RowMajorMatrix>;
using WeightMap = Eigen::Map<RowMajorMatrix>;

void check_dimension(const MlpSpec& spec, const ParamVector& w) {
  if (static_cast<std::size_t>(w.size()) != param_count(spec))
    throw ContractViolation("parameter vector has length " + std::to_string(w.size()) + ", network needs " +
                            std::to_string(param_count(spec)));
}

void activate(Activation act, Matrix& z) {
  switch (act) {
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::sigmoid:
      z = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      break;
  }
}

// Multiplies `delta` in place by the activation derivative, expressed through
// the activation output `a`.
void scale_by_derivative(Activation act, const Matrix& a, Matrix& delta) {
  switch (act) {
    case Activation::relu:
      delta = (a.array() > 0.0).select(delta, 0.0);
      break;
    case Activation::sigmoid:
      delta = delta.cwiseProduct((a.array() * (1.0 - a.array())).matrix());
      break;
  }
}

// Forward pass keeping every layer's activation; acts[0] is the input.
std::vector<Matrix> forward_all(const MlpSpec& spec, const MlpParamLayout& layout, const ParamVector& w,
                                const Matrix& inputs) {
  std::vector<Matrix> acts;
  acts.reserve(layout.layers.size() + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& L = layout.layers[l];
    ConstWeightMap weights(w.data() + L.weight_offset, static_cast<Eigen::Index>(L.fan_out),
                           static_cast<Eigen::Index>(L.fan_in));
    Eigen::Map<const Eigen::VectorXd> bias(w.data() + L.bias_offset, static_cast<Eigen::Index>(L.fan_out));
    Matrix z = acts.back() * weights.transpose();
    z.rowwise() += bias.transpose();
    if (l + 1 < layout.layers.size()) activate(spec.hidden_activation, z);
    acts.push_back(std::move(z));
  }
  return acts;
}

void check_batch(const MlpSpec& spec, const MiniBatch& batch) {
  batch.validate();
  if (static_cast<std::size_t>(batch.inputs.cols()) != spec.inputs())
    throw ContractViolation("batch input width does not match the network input layer");
  if (spec.loss == LossKind::softmax_cross_entropy) {
    if (batch.labels.empty()) throw ContractViolation("cross-entropy loss needs class labels");
    for (int label : batch.labels)
      if (label < 0 || static_cast<std::size_t>(label) >= spec.outputs())
        throw ContractViolation("class label out of range for the output layer");
  } else if (static_cast<std::size_t>(batch.targets.cols()) != spec.outputs()) {
    throw ContractViolation("regression targets do not match the output layer width");
  }
}

// Loss and dLoss/dOutput for the batch mean.
double output_loss(const MlpSpec& spec, const Matrix& out, const MiniBatch& batch, Matrix* delta) {
  const double b = static_cast<double>(out.rows());
  double total = 0.0;
  if (spec.loss == LossKind::softmax_cross_entropy) {
    if (delta) delta->resize(out.rows(), out.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double top = out.row(r).maxCoeff();
      const Eigen::RowVectorXd shifted = out.row(r).array() - top;
      const double sum = shifted.array().exp().sum();
      const double log_sum = std::log(sum);
      const int label = batch.labels[static_cast<std::size_t>(r)];
      total += log_sum - shifted[label];
      if (delta) {
        delta->row(r) = (shifted.array() - log_sum).exp().matrix() / b;
        (*delta)(r, label) -= 1.0 / b;
      }
    }
  } else {
    const Matrix resid = out - batch.targets;
    const double per_output = static_cast<double>(out.cols());
    total = resid.squaredNorm() / per_output;
    if (delta) *delta = resid * (2.0 / (b * per_output));
  }
  return total / b;
}

}  // namespace

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) throw ContractViolation("network needs at least an input and an output layer");
  for (auto n : layer_sizes)
    if (n == 0) throw ContractViolation("layer widths must be positive");
}

std::vector<std::size_t> parse_layer_sizes(std::string_view text) {
  std::vector<std::size_t> sizes;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto dash = text.find_first_of("-x,", pos);
    const auto token = text.substr(pos, dash == std::string_view::npos ? std::string_view::npos : dash - pos);
    std::size_t value = 0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || end != token.data() + token.size() || value == 0)
      throw ContractViolation("invalid layer specification '" + std::string(text) + "'");
    sizes.push_back(value);
    if (dash == std::string_view::npos) break;
    pos = dash + 1;
  }
  if (sizes.size() < 2) throw ContractViolation("layer specification needs at least two widths");
  return sizes;
}

std::string format_layer_sizes(const std::vector<std::size_t>& sizes) {
  std::ostringstream out;
  for (std::size_t i = 0; i < sizes.size(); ++i) out << (i ? "-" : "") << sizes[i];
  return out.str();
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ContractViolation("unknown activation '" + std::string(name) + "'");
}

LossKind parse_loss(std::string_view name) {
  if (name == "softmax_cross_entropy" || name == "cross_entropy") return LossKind::softmax_cross_entropy;
  if (name == "mean_squared_error" || name == "mse") return LossKind::mean_squared_error;
  throw ContractViolation("unknown loss '" + std::string(name) + "'");
}

MlpParamLayout::MlpParamLayout(const MlpSpec& spec) {
  spec.validate();
  std::size_t offset = 0;
  for (std::size_t l = 1; l < spec.layer_sizes.size(); ++l) {
    Layer layer;
    layer.fan_in = spec.layer_sizes[l - 1];
    layer.fan_out = spec.layer_sizes[l];
    layer.weight_offset = offset;
    offset += layer.fan_in * layer.fan_out;
    layer.bias_offset = offset;
    offset += layer.fan_out;
    layers.push_back(layer);
  }
  total = offset;
}

std::size_t param_count(const MlpSpec& spec) { return MlpParamLayout(spec).total; }

ParamVector init_params(const MlpSpec& spec, unsigned long long seed) {
  const MlpParamLayout layout(spec);
  ParamVector w = ParamVector::Zero(static_cast<Eigen::Index>(layout.total));
  std::mt19937_64 rng(seed);
  for (const auto& L : layout.layers) {
    const double a = std::sqrt(6.0 / static_cast<double>(L.fan_in + L.fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (std::size_t i = 0; i < L.fan_in * L.fan_out; ++i) w[static_cast<Eigen::Index>(L.weight_offset + i)] = dist(rng);
  }
  return w;
}

std::vector<LayerParams> unpack_params(const MlpSpec& spec, const ParamVector& w) {
  check_dimension(spec, w);
  const MlpParamLayout layout(spec);
  std::vector<LayerParams> out;
  for (const auto& L : layout.layers) {
    LayerParams p;
    p.weights = ConstWeightMap(w.data() + L.weight_offset, static_cast<Eigen::Index>(L.fan_out),
                               static_cast<Eigen::Index>(L.fan_in));
    p.biases = w.segment(static_cast<Eigen::Index>(L.bias_offset), static_cast<Eigen::Index>(L.fan_out));
    out.push_back(std::move(p));
  }
  return out;
}

ParamVector pack_params(const MlpSpec& spec, const std::vector<LayerParams>& layers) {
  const MlpParamLayout layout(spec);
  if (layers.size() != layout.layers.size()) throw ContractViolation("layer count does not match network");
  ParamVector w(static_cast<Eigen::Index>(layout.total));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layout.layers[l];
    if (static_cast<std::size_t>(layers[l].weights.rows()) != L.fan_out ||
        static_cast<std::size_t>(layers[l].weights.cols()) != L.fan_in ||
        static_cast<std::size_t>(layers[l].biases.size()) != L.fan_out)
      throw ContractViolation("layer shape does not match network");
    WeightMap(w.data() + L.weight_offset, static_cast<Eigen::Index>(L.fan_out), static_cast<Eigen::Index>(L.fan_in)) =
        layers[l].weights;
    w.segment(static_cast<Eigen::Index>(L.bias_offset), static_cast<Eigen::Index>(L.fan_out)) = layers[l].biases;
  }
  return w;
}

Matrix mlp_forward(const MlpSpec& spec, const ParamVector& w, const Matrix& inputs) {
  check_dimension(spec, w);
  if (static_cast<std::size_t>(inputs.cols()) != spec.inputs())
    throw ContractViolation("input width does not match the network input layer");
  const MlpParamLayout layout(spec);
  return std::move(forward_all(spec, layout, w, inputs).back());
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Eigen::RowVectorXd e = (logits.row(r).array() - logits.row(r).maxCoeff()).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

LossAndGrad mlp_loss_and_grad(const MlpSpec& spec, const ParamVector& w, const MiniBatch& batch) {
  check_dimension(spec, w);
  check_batch(spec, batch);
  const MlpParamLayout layout(spec);
  const auto acts = forward_all(spec, layout, w, batch.inputs);

  LossAndGrad out;
  Matrix delta;
  out.loss = output_loss(spec, acts.back(), batch, &delta);
  out.grad.resize(static_cast<Eigen::Index>(layout.total));

  for (std::size_t l = layout.layers.size(); l-- > 0;) {
    const auto& L = layout.layers[l];
    const auto rows = static_cast<Eigen::Index>(L.fan_out);
    const auto cols = static_cast<Eigen::Index>(L.fan_in);
    WeightMap(out.grad.data() + L.weight_offset, rows, cols).noalias() = delta.transpose() * acts[l];
    out.grad.segment(static_cast<Eigen::Index>(L.bias_offset), rows) = delta.colwise().sum().transpose();
    if (l == 0) break;
    ConstWeightMap weights(w.data() + L.weight_offset, rows, cols);
    Matrix upstream = delta * weights;
    scale_by_derivative(spec.hidden_activation, acts[l], upstream);
    delta = std::move(upstream);
  }
  return out;
}

MlpObjective::MlpObjective(MlpSpec spec) : spec_(std::move(spec)), dimension_(param_count(spec_)) {}

double MlpObjective::loss(const ParamVector& w, const MiniBatch& batch) const {
  check_dimension(spec_, w);
  check_batch(spec_, batch);
  const MlpParamLayout layout(spec_);
  const auto acts = forward_all(spec_, layout, w, batch.inputs);
  return output_loss(spec_, acts.back(), batch, nullptr);
}

double classification_accuracy(const MlpSpec& spec, const ParamVector& w, const Matrix& inputs,
                               const std::vector<int>& labels) {
  if (static_cast<std::size_t>(inputs.rows()) != labels.size())
    throw ContractViolation("label count does not match input rows");
  if (labels.empty()) return 0.0;
  const Matrix logits = mlp_forward(spec, w, inputs);
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    logits.row(r).maxCoeff(&best);
    if (best == labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double regression_rmse(const MlpSpec& spec, const ParamVector& w, const Matrix& inputs, const Matrix& targets) {
  if (inputs.rows() != targets.rows()) throw ContractViolation("target rows do not match input rows");
  if (targets.size() == 0) return 0.0;
  const Matrix out = mlp_forward(spec, w, inputs);
  if (out.cols() != targets.cols()) throw ContractViolation("target width does not match the output layer");
  return std::sqrt((out - targets).squaredNorm() / static_cast<double>(targets.size()));
}

double relative_gradient_error(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw ContractViolation("gradient lengths differ");
  const double diff = (a - b).lpNorm<Eigen::Infinity>();
  const double scale = std::max(a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>());
  return scale < 1e-12 ? diff : diff / scale;
}

}  // namespace nagqn
