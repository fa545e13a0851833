#include "nagqn/dense_qn.hpp"

#include <atomic>
#include <cmath>

namespace nagqn {
namespace {

std::atomic<std::size_t> g_constructed{0};

}  // namespace

bool curvature_accepted(const CurvaturePair& pair, double tolerance) {
  if (pair.s.size() != pair.y.size()) throw ContractViolation("curvature pair lengths differ");
  const double ys = pair.y.dot(pair.s);
  return std::isfinite(ys) && ys > tolerance * pair.y.norm() * pair.s.norm();
}

ParamVector direction_normalize(const ParamVector& g) {
  const double norm = g.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw ZeroDirection();
  return g / norm;
}

void QnConfig::validate(bool needs_momentum) const {
  if (needs_momentum && !(mu > 0.0 && mu < 1.0)) throw ContractViolation("momentum mu must lie in (0, 1)");
  if (!(lambda >= 0.0)) throw ContractViolation("lambda must be non-negative");
  if (!(epsilon > 0.0)) throw ContractViolation("epsilon must be positive");
  if (!(curvature_tolerance >= 0.0)) throw ContractViolation("curvature tolerance must be non-negative");
  schedule.validate();
}

DenseInverseHessian::DenseInverseHessian(std::size_t dim, double epsilon)
    : h_(epsilon * Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {
  ++g_constructed;
}

DenseInverseHessian::DenseInverseHessian(Matrix values) : h_(std::move(values)) {
  if (h_.rows() != h_.cols()) throw ContractViolation("inverse Hessian must be square");
  ++g_constructed;
}

DenseInverseHessian::DenseInverseHessian(const DenseInverseHessian& other) : h_(other.h_) { ++g_constructed; }

std::size_t DenseInverseHessian::constructed() { return g_constructed.load(); }

ParamVector DenseInverseHessian::direction(const ParamVector& grad) const {
  if (grad.size() != h_.rows()) throw ContractViolation("gradient length does not match inverse Hessian");
  ParamVector out(grad.size());
  out.noalias() = -(h_.selfadjointView<Eigen::Upper>() * grad);
  return out;
}

void DenseInverseHessian::update(const CurvaturePair& pair, double tolerance) {
  if (pair.s.size() != h_.rows()) throw ContractViolation("curvature pair length does not match inverse Hessian");
  if (!curvature_accepted(pair, tolerance)) throw CurvatureRejected();
  const ParamVector& s = pair.s;
  const double rho = 1.0 / pair.y.dot(s);
  ParamVector hy(s.size());
  hy.noalias() = h_.selfadjointView<Eigen::Upper>() * pair.y;
  const double ss_coeff = rho * rho * pair.y.dot(hy) + rho;

  // Expanded rank-two form; upper triangle computed, lower mirrored.
  const Eigen::Index n = h_.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double sj = s[j];
    const double hyj = hy[j];
    for (Eigen::Index i = 0; i <= j; ++i)
      h_(i, j) += ss_coeff * (s[i] * sj) - rho * (s[i] * hyj + hy[i] * sj);
  }
  h_.triangularView<Eigen::StrictlyLower>() = h_.transpose();
}

DenseInverseHessian bfgs_update(const DenseInverseHessian& h, const CurvaturePair& pair, double tolerance) {
  DenseInverseHessian out(h);
  out.update(pair, tolerance);
  return out;
}

DenseQnState::DenseQnState(ParamVector w0, double epsilon)
    : w(std::move(w0)), v(ParamVector::Zero(w.size())), h(static_cast<std::size_t>(w.size()), epsilon) {}

StepReport obfgs_step(DenseQnState& state, const StochasticObjective& obj, const MiniBatch& batch,
                      const QnConfig& cfg) {
  return detail::quasi_newton_step(
      state, obj, batch, cfg, 0.0, [&](const ParamVector& grad) { return state.h.direction(grad); },
      [&](CurvaturePair pair) { state.h.update(pair, cfg.curvature_tolerance); });
}

StepReport onaq_step(DenseQnState& state, const StochasticObjective& obj, const MiniBatch& batch,
                     const QnConfig& cfg) {
  if (!(cfg.mu >= 0.0 && cfg.mu < 1.0)) throw ContractViolation("momentum mu must lie in [0, 1)");
  return detail::quasi_newton_step(
      state, obj, batch, cfg, cfg.mu, [&](const ParamVector& grad) { return state.h.direction(grad); },
      [&](CurvaturePair pair) { state.h.update(pair, cfg.curvature_tolerance); });
}

}  // namespace nagqn
