#include "nagqn/schedule.hpp"

#include "nagqn/objective.hpp"

#include <cmath>

namespace nagqn {

void ScheduleSpec::validate() const {
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw ContractViolation("schedule step size must be positive");
  if (kind == Kind::gain && (!(tau > 0.0) || !std::isfinite(tau)))
    throw ContractViolation("gain schedule tau must be positive");
}

double step_size(const ScheduleSpec& spec, std::uint64_t k) {
  if (k == 0) throw ContractViolation("schedule iterations start at k = 1");
  const double kk = static_cast<double>(k);
  switch (spec.kind) {
    case ScheduleSpec::Kind::gain:
      return spec.tau * spec.alpha0 / (spec.tau + kk);
    case ScheduleSpec::Kind::sqrt_decay:
      return spec.alpha0 / std::sqrt(kk);
    case ScheduleSpec::Kind::constant:
      return spec.alpha0;
  }
  return spec.alpha0;
}

ScheduleSpec::Kind parse_schedule_kind(std::string_view name) {
  if (name == "gain") return ScheduleSpec::Kind::gain;
  if (name == "sqrt" || name == "sqrt_decay") return ScheduleSpec::Kind::sqrt_decay;
  if (name == "constant") return ScheduleSpec::Kind::constant;
  throw ContractViolation("unknown schedule '" + std::string(name) + "'");
}

std::string to_string(ScheduleSpec::Kind kind) {
  switch (kind) {
    case ScheduleSpec::Kind::gain: return "gain";
    case ScheduleSpec::Kind::sqrt_decay: return "sqrt_decay";
    case ScheduleSpec::Kind::constant: return "constant";
  }
  return "?";
}

}  // namespace nagqn
