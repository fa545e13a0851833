#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace nagqn {

/// Step-size schedule alpha_k for k = 1, 2, ...
struct ScheduleSpec {
  enum class Kind { gain, sqrt_decay, constant };

  Kind kind = Kind::sqrt_decay;
  double alpha0 = 1.0;  // initial step (alpha itself for `constant`)
  double tau = 1.0;     // only used by `gain`

  /// tau * alpha0 / (tau + k)
  static ScheduleSpec gain(double tau, double alpha0) { return {Kind::gain, alpha0, tau}; }
  /// alpha0 / sqrt(k)
  static ScheduleSpec sqrt_decay(double alpha0) { return {Kind::sqrt_decay, alpha0, 1.0}; }
  static ScheduleSpec constant(double alpha) { return {Kind::constant, alpha, 1.0}; }

  void validate() const;
};

double step_size(const ScheduleSpec& spec, std::uint64_t k);

ScheduleSpec::Kind parse_schedule_kind(std::string_view name);
std::string to_string(ScheduleSpec::Kind kind);

}  // namespace nagqn
