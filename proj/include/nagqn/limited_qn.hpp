#pragma once

#include "nagqn/curvature.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>

namespace nagqn {

/// Bounded FIFO of the most recent curvature pairs, oldest first.
class CurvatureMemory {
 public:
  explicit CurvatureMemory(std::size_t capacity);

  /// Appends, evicting the oldest pair when full.
  void push(CurvaturePair pair);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const CurvaturePair& operator[](std::size_t i) const { return pairs_[i]; }
  const std::deque<CurvaturePair>& pairs() const { return pairs_; }

  /// Reals held for curvature data (2 per stored coordinate).
  std::size_t stored_reals() const;

 private:
  std::size_t capacity_;
  std::deque<CurvaturePair> pairs_;
};

/// Initial matrix H0 = gamma I of the two-loop recursion.
/// `unit`: gamma = 1. `stochastic`: gamma = epsilon for an empty memory,
/// otherwise the mean of s'y / y'y over the stored pairs.
struct InitialScaling {
  enum class Kind { unit, stochastic };
  Kind kind = Kind::stochastic;
  double epsilon = 1e-2;

  static InitialScaling unit() { return {Kind::unit, 1.0}; }
  static InitialScaling stochastic(double epsilon) { return {Kind::stochastic, epsilon}; }
};

double initial_scaling_factor(const CurvatureMemory& memory, const InitialScaling& scaling);

/// -H grad for the implicit L-BFGS matrix built from `memory` in O(m d).
ParamVector two_loop_direction(const ParamVector& grad, const CurvatureMemory& memory,
                               const InitialScaling& scaling);

struct LimitedQnState {
  ParamVector w;
  ParamVector v;
  CurvatureMemory memory;
  std::uint64_t k = 1;

  LimitedQnState(ParamVector w0, std::size_t memory_size);
};

/// oBFGS with the dense matrix replaced by the two-loop recursion.
StepReport olbfgs_step(LimitedQnState& state, const StochasticObjective& obj, const MiniBatch& batch,
                       const QnConfig& cfg, const InitialScaling& scaling);

/// oNAQ with the dense matrix replaced by the two-loop recursion over (p, q).
StepReport olnaq_step(LimitedQnState& state, const StochasticObjective& obj, const MiniBatch& batch,
                      const QnConfig& cfg, const InitialScaling& scaling);

/// Noise-averaged scaling using `cfg.epsilon` for the empty-memory case.
inline StepReport olbfgs_step(LimitedQnState& state, const StochasticObjective& obj, const MiniBatch& batch,
                              const QnConfig& cfg) {
  return olbfgs_step(state, obj, batch, cfg, InitialScaling::stochastic(cfg.epsilon));
}
inline StepReport olnaq_step(LimitedQnState& state, const StochasticObjective& obj, const MiniBatch& batch,
                             const QnConfig& cfg) {
  return olnaq_step(state, obj, batch, cfg, InitialScaling::stochastic(cfg.epsilon));
}

}  // namespace nagqn
