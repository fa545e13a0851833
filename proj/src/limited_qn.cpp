#include "nagqn/limited_qn.hpp"

#include <vector>

namespace nagqn {

CurvatureMemory::CurvatureMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ContractViolation("curvature memory needs capacity >= 1");
}

void CurvatureMemory::push(CurvaturePair pair) {
  if (pair.s.size() != pair.y.size()) throw ContractViolation("curvature pair lengths differ");
  if (!pairs_.empty() && pair.s.size() != pairs_.front().s.size())
    throw ContractViolation("curvature pair length differs from stored pairs");
  if (pairs_.size() == capacity_) pairs_.pop_front();
  pairs_.push_back(std::move(pair));
}

std::size_t CurvatureMemory::stored_reals() const {
  std::size_t total = 0;
  for (const auto& p : pairs_) total += static_cast<std::size_t>(p.s.size() + p.y.size());
  return total;
}

double initial_scaling_factor(const CurvatureMemory& memory, const InitialScaling& scaling) {
  if (scaling.kind == InitialScaling::Kind::unit) return 1.0;
  if (memory.empty()) return scaling.epsilon;
  double sum = 0.0;
  for (const auto& p : memory.pairs()) sum += p.s.dot(p.y) / p.y.squaredNorm();
  return sum / static_cast<double>(memory.size());
}

ParamVector two_loop_direction(const ParamVector& grad, const CurvatureMemory& memory,
                               const InitialScaling& scaling) {
  if (!memory.empty() && memory[0].s.size() != grad.size())
    throw ContractViolation("gradient length does not match curvature memory");
  const std::size_t m = memory.size();
  std::vector<double> rho(m);
  std::vector<double> alpha(m);

  ParamVector q = grad;
  for (std::size_t i = m; i-- > 0;) {
    const auto& p = memory[i];
    rho[i] = 1.0 / p.y.dot(p.s);
    alpha[i] = rho[i] * p.s.dot(q);
    q.noalias() -= alpha[i] * p.y;
  }
  q *= initial_scaling_factor(memory, scaling);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& p = memory[i];
    const double beta = rho[i] * p.y.dot(q);
    q.noalias() += (alpha[i] - beta) * p.s;
  }
  return -q;
}

LimitedQnState::LimitedQnState(ParamVector w0, std::size_t memory_size)
    : w(std::move(w0)), v(ParamVector::Zero(w.size())), memory(memory_size) {}

StepReport olbfgs_step(LimitedQnState& state, const StochasticObjective& obj, const MiniBatch& batch,
                       const QnConfig& cfg, const InitialScaling& scaling) {
  return detail::quasi_newton_step(
      state, obj, batch, cfg, 0.0,
      [&](const ParamVector& grad) { return two_loop_direction(grad, state.memory, scaling); },
      [&](CurvaturePair pair) { state.memory.push(std::move(pair)); });
}

StepReport olnaq_step(LimitedQnState& state, const StochasticObjective& obj, const MiniBatch& batch,
                      const QnConfig& cfg, const InitialScaling& scaling) {
  if (!(cfg.mu >= 0.0 && cfg.mu < 1.0)) throw ContractViolation("momentum mu must lie in [0, 1)");
  return detail::quasi_newton_step(
      state, obj, batch, cfg, cfg.mu,
      [&](const ParamVector& grad) { return two_loop_direction(grad, state.memory, scaling); },
      [&](CurvaturePair pair) { state.memory.push(std::move(pair)); });
}

}  // namespace nagqn
