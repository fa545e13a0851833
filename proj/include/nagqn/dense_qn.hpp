#pragma once

#include "nagqn/curvature.hpp"

#include <cstddef>
#include <cstdint>

namespace nagqn {

/// Symmetric d x d inverse-Hessian approximation.
///
/// Every instance counts towards `constructed()`, which lets the cost
/// accounting tests prove that limited-memory runs never build one.
class DenseInverseHessian {
 public:
  /// epsilon * I
  DenseInverseHessian(std::size_t dim, double epsilon);
  explicit DenseInverseHessian(Matrix values);
  DenseInverseHessian(const DenseInverseHessian& other);
  DenseInverseHessian(DenseInverseHessian&&) noexcept = default;
  DenseInverseHessian& operator=(const DenseInverseHessian&) = default;
  DenseInverseHessian& operator=(DenseInverseHessian&&) noexcept = default;

  const Matrix& values() const { return h_; }
  std::size_t dimension() const { return static_cast<std::size_t>(h_.rows()); }

  /// -H g
  ParamVector direction(const ParamVector& grad) const;

  /// In-place BFGS update
  ///   H' = (I - rho s y') H (I - rho y s') + rho s s',  rho = 1 / y's.
  /// Throws CurvatureRejected (leaving H untouched) if the pair fails the guard.
  void update(const CurvaturePair& pair, double tolerance = kDefaultCurvatureTolerance);

  static std::size_t constructed();

 private:
  Matrix h_;
};

/// Functional form of DenseInverseHessian::update.
DenseInverseHessian bfgs_update(const DenseInverseHessian& h, const CurvaturePair& pair,
                                double tolerance = kDefaultCurvatureTolerance);

struct DenseQnState {
  ParamVector w;
  ParamVector v;
  DenseInverseHessian h;
  std::uint64_t k = 1;

  DenseQnState(ParamVector w0, double epsilon);
};

/// Online BFGS: both gradients at w_k and w_{k+1} on the same batch.
StepReport obfgs_step(DenseQnState& state, const StochasticObjective& obj, const MiniBatch& batch,
                      const QnConfig& cfg);

/// Online Nesterov-accelerated quasi-Newton: the first gradient is taken at
/// w_k + mu v_k and the curvature pair is (p, q) around that point.
StepReport onaq_step(DenseQnState& state, const StochasticObjective& obj, const MiniBatch& batch,
                     const QnConfig& cfg);

}  // namespace nagqn
