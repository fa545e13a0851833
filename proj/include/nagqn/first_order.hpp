#pragma once

#include "nagqn/objective.hpp"

#include <cstdint>

namespace nagqn {

/// w - alpha * grad
ParamVector sgd_step(const ParamVector& w, const ParamVector& grad, double alpha);

struct AdamConfig {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Moment estimates for Adam. `k` counts completed steps.
struct AdamState {
  ParamVector first_moment;
  ParamVector second_moment;
  std::uint64_t k = 0;
  AdamConfig config;

  AdamState(std::size_t dim, AdamConfig cfg);
};

/// One bias-corrected Adam step; updates `state` in place and returns the new w.
ParamVector adam_step(AdamState& state, const ParamVector& w, const ParamVector& grad);

}  // namespace nagqn
