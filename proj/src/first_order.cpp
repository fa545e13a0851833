#include "nagqn/first_order.hpp"

#include <cmath>

namespace nagqn {

ParamVector sgd_step(const ParamVector& w, const ParamVector& grad, double alpha) {
  if (w.size() != grad.size()) throw ContractViolation("sgd_step: length mismatch");
  return w - alpha * grad;
}

void AdamConfig::validate() const {
  if (!(alpha > 0.0)) throw ContractViolation("adam: alpha must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ContractViolation("adam: decay rates must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ContractViolation("adam: epsilon must be positive");
}

AdamState::AdamState(std::size_t dim, AdamConfig cfg)
    : first_moment(ParamVector::Zero(static_cast<Eigen::Index>(dim))),
      second_moment(ParamVector::Zero(static_cast<Eigen::Index>(dim))),
      config(cfg) {
  config.validate();
}

ParamVector adam_step(AdamState& state, const ParamVector& w, const ParamVector& grad) {
  if (w.size() != grad.size() || w.size() != state.first_moment.size())
    throw ContractViolation("adam_step: length mismatch");
  const auto& c = state.config;
  ++state.k;
  state.first_moment = c.beta1 * state.first_moment + (1.0 - c.beta1) * grad;
  state.second_moment = c.beta2 * state.second_moment + (1.0 - c.beta2) * grad.cwiseAbs2();
  const double k = static_cast<double>(state.k);
  const double bias1 = 1.0 - std::pow(c.beta1, k);
  const double bias2 = 1.0 - std::pow(c.beta2, k);
  const ParamVector m_hat = state.first_moment / bias1;
  const ParamVector v_hat = state.second_moment / bias2;
  return w.array() - c.alpha * m_hat.array() / (v_hat.array().sqrt() + c.epsilon);
}

}  // namespace nagqn
