#include "nagqn/first_order.hpp"
#include "nagqn/schedule.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace nagqn {
namespace {

TEST(StepSize, SqrtDecay) {
  const auto s = ScheduleSpec::sqrt_decay(1.0);
  EXPECT_DOUBLE_EQ(step_size(s, 1), 1.0);
  EXPECT_DOUBLE_EQ(step_size(s, 4), 0.5);
  EXPECT_DOUBLE_EQ(step_size(s, 100), 0.1);
}

TEST(StepSize, Gain) { EXPECT_DOUBLE_EQ(step_size(ScheduleSpec::gain(10.0, 1.0), 1), 10.0 / 11.0); }

TEST(StepSize, Constant) {
  for (std::uint64_t k : {1u, 7u, 1000000u}) EXPECT_DOUBLE_EQ(step_size(ScheduleSpec::constant(0.01), k), 0.01);
}

TEST(StepSize, ZeroIterationIsContractViolation) {
  EXPECT_THROW(step_size(ScheduleSpec::sqrt_decay(1.0), 0), ContractViolation);
}

TEST(StepSize, PositiveAndNonIncreasingProperty) {
  const ScheduleSpec specs[] = {ScheduleSpec::sqrt_decay(1.0), ScheduleSpec::sqrt_decay(0.3),
                                ScheduleSpec::gain(10.0, 1.0), ScheduleSpec::gain(1000.0, 2.0),
                                ScheduleSpec::constant(0.5)};
  for (const auto& s : specs) {
    double prev = step_size(s, 1);
    for (std::uint64_t k = 2; k <= 1000000; k += (k < 1000 ? 1 : 997)) {
      const double a = step_size(s, k);
      ASSERT_GT(a, 0.0);
      ASSERT_LE(a, prev);
      prev = a;
    }
  }
}

TEST(StepSize, RejectsNonPositiveParameters) {
  EXPECT_THROW(ScheduleSpec::gain(0.0, 1.0).validate(), ContractViolation);
  EXPECT_THROW(ScheduleSpec::sqrt_decay(-1.0).validate(), ContractViolation);
}

TEST(Sgd, Examples) {
  EXPECT_EQ(sgd_step(ParamVector{{1.0, 1.0}}, ParamVector{{1.0, 0.0}}, 0.5), (ParamVector{{0.5, 1.0}}));
  const ParamVector w{{0.3, -2.0}};
  EXPECT_EQ(sgd_step(w, ParamVector::Zero(2), 0.5), w);
}

TEST(Sgd, TwoStepsOnHalfSquaredNorm) {
  ParamVector w{{1.0, 0.0}};
  for (int i = 0; i < 2; ++i) w = sgd_step(w, w, 0.5);  // grad of 1/2|w|^2 is w
  EXPECT_EQ(w, (ParamVector{{0.25, 0.0}}));
}

TEST(Sgd, ConvergesOnSpdQuadraticsBelowStabilityLimit) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = static_cast<std::size_t>(2 + trial % 9);
    const Matrix a = random_spd(d, 1.0 + 10.0 * trial, rng());
    const double lmax = Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues().maxCoeff();
    const double alpha = 1.0 / lmax;
    ParamVector w = testing::random_vector(rng, static_cast<Eigen::Index>(d));
    double prev = (a * w).norm();
    for (int it = 0; it < 100; ++it) {
      w = sgd_step(w, a * w, alpha);
      const double g = (a * w).norm();
      ASSERT_LE(g, prev * (1.0 + 1e-12));
      prev = g;
    }
  }
}

TEST(Adam, FirstStepIsSignTimesAlpha) {
  AdamState state(3, AdamConfig{});
  const ParamVector g{{5.0, -0.2, 1e-3}};
  const ParamVector w = adam_step(state, ParamVector::Zero(3), g);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_LE(std::abs(w[i]), 0.001);
    // epsilon matters once |g| is comparable to it
    EXPECT_NEAR(w[i], -0.001 * (g[i] > 0 ? 1.0 : -1.0), 0.001 * 1e-8 / std::abs(g[i]) * 1.01);
  }
}

TEST(Adam, ZeroGradientNeverMoves) {
  AdamState state(2, AdamConfig{});
  ParamVector w{{0.4, -0.7}};
  for (int i = 0; i < 10; ++i) w = adam_step(state, w, ParamVector::Zero(2));
  EXPECT_EQ(w, (ParamVector{{0.4, -0.7}}));
}

TEST(Adam, ThreeUnitGradientStepsMatchRecurrence) {
  const AdamConfig cfg;
  AdamState state(1, cfg);
  ParamVector w = ParamVector::Zero(1);
  double m = 0.0, v = 0.0, ref = 0.0;
  for (int k = 1; k <= 3; ++k) {
    const double before = w[0];
    w = adam_step(state, w, ParamVector::Ones(1));
    m = cfg.beta1 * m + (1 - cfg.beta1);
    v = cfg.beta2 * v + (1 - cfg.beta2);
    ref -= cfg.alpha * (m / (1 - std::pow(cfg.beta1, k))) / (std::sqrt(v / (1 - std::pow(cfg.beta2, k))) + cfg.epsilon);
    EXPECT_LE(std::abs(w[0] - before), cfg.alpha);
    EXPECT_NEAR(w[0], ref, 1e-15);
  }
  EXPECT_LT(-w[0], 3 * cfg.alpha);
  EXPECT_GT(-w[0], 0.0);
}

TEST(Adam, UpdateMagnitudeBoundedProperty) {
  std::mt19937_64 rng(9);
  AdamState state(50, AdamConfig{});
  ParamVector w = ParamVector::Zero(50);
  for (int step = 0; step < 500; ++step) {
    const ParamVector g = testing::random_vector(rng, 50, step % 7 == 0 ? 100.0 : 0.01);
    const ParamVector next = adam_step(state, w, g);
    ASSERT_LE((next - w).cwiseAbs().maxCoeff(), 2 * state.config.alpha);
    w = next;
  }
}

}  // namespace
}  // namespace nagqn
