#pragma once

// Test-only reference computations. Nothing here calls into the code paths
// it is used to check.

#include "nagqn/mlp.hpp"
#include "nagqn/objective.hpp"

#include <random>
#include <vector>

namespace nagqn::testing {

/// Textbook product form (I - rho s y') H (I - rho y s') + rho s s'.
inline Matrix bfgs_product_form(const Matrix& h, const ParamVector& s, const ParamVector& y) {
  const double rho = 1.0 / y.dot(s);
  const Matrix id = Matrix::Identity(h.rows(), h.cols());
  const Matrix left = id - rho * s * y.transpose();
  const Matrix right = id - rho * y * s.transpose();
  return left * h * right + rho * s * s.transpose();
}

inline bool cholesky_ok(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

inline ParamVector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  ParamVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

/// (s, y) with y = A s for a random SPD A, so y's > 0.
struct PositivePair {
  ParamVector s;
  ParamVector y;
};

inline PositivePair random_positive_pair(std::mt19937_64& rng, Eigen::Index n) {
  const Matrix g = Matrix::NullaryExpr(n, n, [&] { return std::normal_distribution<double>(0.0, 1.0)(rng); });
  const Matrix a = g * g.transpose() + 0.1 * Matrix::Identity(n, n);
  PositivePair p;
  p.s = random_vector(rng, n);
  p.y = a * p.s;
  return p;
}

/// Hand-rolled Fisher-Yates used to cross-check permutation properties.
inline bool is_permutation_of_range(std::vector<std::size_t> v, std::size_t n) {
  if (v.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (auto i : v) {
    if (i >= n || seen[i]) return false;
    seen[i] = true;
  }
  return true;
}

/// A random small network, parameter vector and batch for gradient checks:
/// widths in [1, 8], depth 1-3, batch size 1-4, both losses and activations.
struct GradientCase {
  MlpSpec spec;
  ParamVector w;
  MiniBatch batch;
};

inline GradientCase random_gradient_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> width(1, 8);
  std::uniform_int_distribution<std::size_t> depth(1, 3);
  std::uniform_int_distribution<std::size_t> batch_size(1, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  GradientCase c;
  const std::size_t layers = depth(rng);
  for (std::size_t i = 0; i <= layers; ++i) c.spec.layer_sizes.push_back(width(rng));
  c.spec.hidden_activation = rng() % 2 ? Activation::relu : Activation::sigmoid;
  c.spec.loss = rng() % 2 ? LossKind::softmax_cross_entropy : LossKind::mean_squared_error;
  if (c.spec.loss == LossKind::softmax_cross_entropy && c.spec.layer_sizes.back() < 2) c.spec.layer_sizes.back() = 2;
  const auto b = static_cast<Eigen::Index>(batch_size(rng));
  c.batch.inputs = Matrix::NullaryExpr(b, static_cast<Eigen::Index>(c.spec.inputs()), [&] { return normal(rng); });
  if (c.spec.loss == LossKind::softmax_cross_entropy) {
    std::uniform_int_distribution<int> label(0, static_cast<int>(c.spec.outputs()) - 1);
    for (Eigen::Index i = 0; i < b; ++i) c.batch.labels.push_back(label(rng));
  } else {
    c.batch.targets = Matrix::NullaryExpr(b, static_cast<Eigen::Index>(c.spec.outputs()), [&] { return normal(rng); });
  }
  c.w = random_vector(rng, static_cast<Eigen::Index>(param_count(c.spec)));
  return c;
}

}  // namespace nagqn::testing
