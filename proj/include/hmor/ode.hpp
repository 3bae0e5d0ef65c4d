#pragma once

#include <functional>

#include <Eigen/Core>

namespace hmor {

// Adaptive Dormand-Prince 5(4) integrator with per-component absolute
// tolerances. The step size persists across calls so piecewise forcing can
// be integrated interval by interval without restarting the controller.
class DormandPrince {
public:
  using Rhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt)>;

  DormandPrince(double rtol, Eigen::VectorXd atol);

  // Advances y from t0 to t1. Throws NumericalError with the failure time
  // when the step size underflows or the step budget is exhausted.
  void advance(const Rhs& f, double t0, double t1, Eigen::VectorXd& y);

  long steps_taken() const noexcept { return accepted_; }
  long steps_rejected() const noexcept { return rejected_; }

private:
  double rtol_;
  Eigen::VectorXd atol_;
  double h_ = 0.0;
  long accepted_ = 0;
  long rejected_ = 0;
  Eigen::VectorXd k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, ynew_, err_;
};

}  // namespace hmor
