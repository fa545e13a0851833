#include "nagqn/objective.hpp"

#include <cmath>
#include <random>

namespace nagqn {

void MiniBatch::validate() const {
  if (inputs.rows() == 0) throw ContractViolation("minibatch is empty");
  const auto b = static_cast<std::size_t>(inputs.rows());
  if (!labels.empty()) {
    if (labels.size() != b) throw ContractViolation("label count does not match input rows");
  } else if (static_cast<std::size_t>(targets.rows()) != b) {
    throw ContractViolation("target rows do not match input rows");
  }
}

double StochasticObjective::loss(const ParamVector& w, const MiniBatch& batch) const {
  return evaluate(w, batch).loss;
}

ParamVector finite_diff_grad(const StochasticObjective& obj, const ParamVector& w,
                             const MiniBatch& batch, double h) {
  if (!(h > 0.0)) throw ContractViolation("finite difference step must be positive");
  if (static_cast<std::size_t>(w.size()) != obj.dimension())
    throw ContractViolation("parameter vector length does not match objective dimension");
  ParamVector grad(w.size());
  ParamVector probe = w;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    probe[i] = w[i] + h;
    const double up = obj.loss(probe, batch);
    probe[i] = w[i] - h;
    const double down = obj.loss(probe, batch);
    probe[i] = w[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

QuadraticObjective::QuadraticObjective(Matrix a, ParamVector c) : a_(std::move(a)), c_(std::move(c)) {
  if (a_.rows() != a_.cols() || a_.rows() != c_.size() || c_.size() == 0)
    throw ContractViolation("quadratic objective: A must be square and match c");
  for (Eigen::Index i = 0; i < a_.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(a_(i, j) - a_(j, i)) > 1e-12 * std::max(1.0, std::abs(a_(i, j))))
        throw ContractViolation("quadratic objective: A is not symmetric");
  Eigen::LLT<Matrix> llt(a_);
  if (llt.info() != Eigen::Success)
    throw ContractViolation("quadratic objective: A is not positive definite");
}

LossAndGrad QuadraticObjective::evaluate(const ParamVector& w, const MiniBatch&) const {
  if (w.size() != c_.size()) throw ContractViolation("quadratic objective: dimension mismatch");
  LossAndGrad out;
  const ParamVector aw = a_ * w;
  out.loss = 0.5 * w.dot(aw) - c_.dot(w);
  out.grad = aw - c_;
  return out;
}

ParamVector QuadraticObjective::minimizer() const { return a_.llt().solve(c_); }

LossAndGrad RosenbrockObjective::evaluate(const ParamVector& w, const MiniBatch&) const {
  if (w.size() != 2) throw ContractViolation("rosenbrock objective is two-dimensional");
  const double x = w[0];
  const double y = w[1];
  const double r = y - x * x;
  LossAndGrad out;
  out.loss = (1.0 - x) * (1.0 - x) + 100.0 * r * r;
  out.grad.resize(2);
  out.grad[0] = -2.0 * (1.0 - x) - 400.0 * x * r;
  out.grad[1] = 200.0 * r;
  return out;
}

Matrix random_spd(std::size_t dim, double condition, unsigned long long seed) {
  if (dim == 0 || !(condition >= 1.0)) throw ContractViolation("random_spd: need dim > 0, condition >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(dim, dim);
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = normal(rng);
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  Eigen::VectorXd eig(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double t = dim == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(dim - 1);
    eig[static_cast<Eigen::Index>(i)] = std::pow(condition, t);
  }
  Matrix a = q * eig.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());
}

}  // namespace nagqn
