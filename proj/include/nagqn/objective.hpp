#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nagqn {

/// Flat vector of all trainable parameters.
using ParamVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a caller breaks an operation's preconditions (sizes, ranges).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A minibatch of samples. Classification batches carry `labels`, regression
/// batches carry `targets`; the other member is left empty.
struct MiniBatch {
  Matrix inputs;              // b x n0
  std::vector<int> labels;    // b class indices
  Matrix targets;             // b x nL

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
  bool is_classification() const { return !labels.empty(); }

  /// Throws ContractViolation if row counts disagree or the batch is empty.
  void validate() const;
};

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// E(w; X): batch-mean loss and its gradient. Implementations are pure:
/// the same (w, batch) always gives bit-identical results.
class StochasticObjective {
 public:
  virtual ~StochasticObjective() = default;

  virtual std::size_t dimension() const = 0;
  virtual LossAndGrad evaluate(const ParamVector& w, const MiniBatch& batch) const = 0;

  /// Loss only. The default forwards to evaluate().
  virtual double loss(const ParamVector& w, const MiniBatch& batch) const;
};

/// Central-difference gradient: (E(w + h e_i) - E(w - h e_i)) / 2h.
ParamVector finite_diff_grad(const StochasticObjective& obj, const ParamVector& w,
                             const MiniBatch& batch, double h);

/// f(w) = 1/2 w'Aw - c'w. The batch argument is ignored.
class QuadraticObjective final : public StochasticObjective {
 public:
  /// Throws ContractViolation if A is not square, not symmetric, or fails Cholesky.
  QuadraticObjective(Matrix a, ParamVector c);

  std::size_t dimension() const override { return static_cast<std::size_t>(c_.size()); }
  LossAndGrad evaluate(const ParamVector& w, const MiniBatch& batch) const override;

  const Matrix& hessian() const { return a_; }
  /// Unique minimiser A^{-1} c.
  ParamVector minimizer() const;

 private:
  Matrix a_;
  ParamVector c_;
};

/// f(x, y) = (1 - x)^2 + 100 (y - x^2)^2. The batch argument is ignored.
class RosenbrockObjective final : public StochasticObjective {
 public:
  std::size_t dimension() const override { return 2; }
  LossAndGrad evaluate(const ParamVector& w, const MiniBatch& batch) const override;
};

/// Random symmetric positive definite matrix with eigenvalues spread
/// log-uniformly over [1, condition].
Matrix random_spd(std::size_t dim, double condition, unsigned long long seed);

/// Wraps an objective and counts evaluate() calls. Not thread-safe.
class CountingObjective final : public StochasticObjective {
 public:
  explicit CountingObjective(const StochasticObjective& inner) : inner_(inner) {}

  std::size_t dimension() const override { return inner_.dimension(); }
  LossAndGrad evaluate(const ParamVector& w, const MiniBatch& batch) const override {
    ++gradient_evaluations_;
    return inner_.evaluate(w, batch);
  }
  double loss(const ParamVector& w, const MiniBatch& batch) const override {
    return inner_.loss(w, batch);
  }

  std::size_t gradient_evaluations() const { return gradient_evaluations_; }
  void reset() { gradient_evaluations_ = 0; }

 private:
  const StochasticObjective& inner_;
  mutable std::size_t gradient_evaluations_ = 0;
};

}  // namespace nagqn
