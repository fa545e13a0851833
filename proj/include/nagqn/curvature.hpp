#pragma once

#include "nagqn/objective.hpp"
#include "nagqn/schedule.hpp"

#include <cstdint>
#include <stdexcept>

namespace nagqn {

/// Search direction had zero norm: the minibatch gradient vanished.
class ZeroDirection : public std::runtime_error {
 public:
  ZeroDirection() : std::runtime_error("search direction has zero norm") {}
};

/// Pair failed the curvature guard y's > tol * |y| |s|.
class CurvatureRejected : public std::runtime_error {
 public:
  CurvatureRejected() : std::runtime_error("curvature pair rejected: y's is not sufficiently positive") {}
};

/// (s, y) for the BFGS family, (p, q) for the NAQ family.
struct CurvaturePair {
  ParamVector s;
  ParamVector y;
};

inline constexpr double kDefaultCurvatureTolerance = 1e-12;

/// y's > tolerance * ||y||_2 * ||s||_2
bool curvature_accepted(const CurvaturePair& pair, double tolerance = kDefaultCurvatureTolerance);

/// g / ||g||_2. Throws ZeroDirection for a zero (or non-finite norm) vector.
ParamVector direction_normalize(const ParamVector& g);

/// Hyperparameters shared by the four quasi-Newton steppers.
struct QnConfig {
  double mu = 0.0;       // momentum; ignored by oBFGS/oLBFGS
  double lambda = 0.2;   // q = dgrad + lambda * p
  double epsilon = 1e-2; // H0 = epsilon * I, and the empty-memory scaling
  ScheduleSpec schedule = ScheduleSpec::sqrt_decay(1.0);
  bool normalize_direction = true;
  double curvature_tolerance = kDefaultCurvatureTolerance;

  /// `needs_momentum` selects the NAQ range check 0 < mu < 1.
  void validate(bool needs_momentum) const;
};

struct StepReport {
  double loss_first = 0.0;   // E at the first gradient point (w, or w + mu v)
  double loss_second = 0.0;  // E(w_{k+1}) on the same batch
  double step_size = 0.0;
  bool pair_accepted = false;
  bool zero_direction = false;
  std::size_t gradient_evaluations = 0;
};

namespace detail {

/// One online quasi-Newton iteration around the momentum-shifted point
/// w + mu v; mu = 0 gives the oBFGS form. `direction(grad)` returns -H grad,
/// `update(pair)` feeds an accepted pair to the curvature model.
template <typename State, typename Direction, typename Update>
StepReport quasi_newton_step(State& state, const StochasticObjective& obj, const MiniBatch& batch,
                             const QnConfig& cfg, double mu, Direction&& direction, Update&& update) {
  if (static_cast<std::size_t>(state.w.size()) != obj.dimension())
    throw ContractViolation("optimizer state dimension does not match objective");
  StepReport report;

  const ParamVector shifted = state.w + mu * state.v;
  const LossAndGrad first = obj.evaluate(shifted, batch);
  ++report.gradient_evaluations;
  report.loss_first = first.loss;

  ParamVector g = direction(first.grad);
  if (cfg.normalize_direction) {
    try {
      g = direction_normalize(g);
    } catch (const ZeroDirection&) {
      report.zero_direction = true;
      report.loss_second = first.loss;
      ++state.k;
      return report;
    }
  }

  report.step_size = step_size(cfg.schedule, state.k);
  ParamVector v_next = mu * state.v + report.step_size * g;
  ParamVector w_next = state.w + v_next;
  const LossAndGrad second = obj.evaluate(w_next, batch);
  ++report.gradient_evaluations;
  report.loss_second = second.loss;

  CurvaturePair pair;
  pair.s = w_next - shifted;
  pair.y = second.grad - first.grad + cfg.lambda * pair.s;
  if (curvature_accepted(pair, cfg.curvature_tolerance)) {
    update(std::move(pair));
    report.pair_accepted = true;
  }

  state.w = std::move(w_next);
  state.v = std::move(v_next);
  ++state.k;
  return report;
}

}  // namespace detail
}  // namespace nagqn
