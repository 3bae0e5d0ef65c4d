#include "hmor/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hmor/error.hpp"

namespace hmor {

namespace {

// Dormand & Prince (1980) coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr long max_steps_per_call = 5'000'000;

}  // namespace

DormandPrince::DormandPrince(double rtol, Eigen::VectorXd atol)
    : rtol_(rtol), atol_(std::move(atol)) {}

void DormandPrince::advance(const Rhs& f, double t0, double t1, Eigen::VectorXd& y) {
  const double span = t1 - t0;
  if (!(span > 0.0)) return;
  const auto n = y.size();
  for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &ynew_, &err_}) v->resize(n);

  if (h_ <= 0.0) h_ = span;
  double t = t0;
  f(t, y, k1_);
  long budget = max_steps_per_call;
  while (t < t1) {
    if (--budget < 0) {
      std::ostringstream msg;
      msg << "integrator exceeded step budget at t=" << t;
      throw NumericalError(msg.str());
    }
    bool last = false;
    double h = h_;
    if (t + h >= t1 || t + 1.01 * h >= t1) {
      h = t1 - t;
      last = true;
    }
    tmp_ = y + h * a21 * k1_;
    f(t + c2 * h, tmp_, k2_);
    tmp_ = y + h * (a31 * k1_ + a32 * k2_);
    f(t + c3 * h, tmp_, k3_);
    tmp_ = y + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    f(t + c4 * h, tmp_, k4_);
    tmp_ = y + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    f(t + c5 * h, tmp_, k5_);
    tmp_ = y + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    f(t + h, tmp_, k6_);
    ynew_ = y + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
    const double tnew = last ? t1 : t + h;
    f(tnew, ynew_, k7_);
    err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = atol_[i] + rtol_ * std::max(std::abs(y[i]), std::abs(ynew_[i]));
      err = std::max(err, std::abs(err_[i]) / sc);
    }
    if (!std::isfinite(err)) err = 1e10;

    if (err <= 1.0) {
      t = tnew;
      y = ynew_;
      k1_ = k7_;
      ++accepted_;
      const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      // keep the controller's step when the final step was truncated to hit t1
      if (!last || h >= h_) h_ = h * fac;
    } else {
      ++rejected_;
      h_ = h * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
      if (h_ < 1e-14 * std::max(std::abs(t), std::abs(span))) {
        std::ostringstream msg;
        msg.precision(12);
        msg << "integrator step size underflow at t=" << t;
        throw NumericalError(msg.str());
      }
    }
  }
}

}  // namespace hmor
