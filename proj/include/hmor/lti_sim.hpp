#pragma once

// Linear block of the Hammerstein model,
//   dx/dt = A x + B u,   y = C x + D u,   u in R^6, y in R^3,
// simulated exactly between samples under a first-order-hold input, with
// discrete-adjoint gradients of a weighted mean-squared output error.
//
// Two routes share every public entry point:
//  * modal: A = V diag(lambda) V^-1; per-step propagators and their
//    derivatives reduce to scalar functions of h*lambda. Used whenever V is
//    well conditioned.
//  * dense: per-step augmented matrix exponential (and its Frechet
//    derivative through a doubled block matrix), cached per distinct step.
//    Always exact; kept as the reference implementation.

#include <array>
#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hmor/time_series.hpp"

namespace hmor {

inline constexpr Eigen::Index kPhiWidth = 6;
inline constexpr Eigen::Index kPorts = 3;

struct StateSpace {
  Eigen::MatrixXd a;  // n x n, 1/s
  Eigen::MatrixXd b;  // n x 6
  Eigen::MatrixXd c;  // 3 x n
  Eigen::MatrixXd d;  // 3 x 6

  Eigen::Index order() const noexcept { return a.rows(); }
  void validate() const;

  static StateSpace zeros(Eigen::Index n);
};

double spectral_abscissa(const Eigen::MatrixXd& a);

struct DiscretizedStep {
  double dt = 0.0;
  Eigen::MatrixXd phi;     // e^{A dt}
  Eigen::MatrixXd gamma0;  // weight of u_k
  Eigen::MatrixXd gamma1;  // weight of u_{k+1}
};

// x_{k+1} = phi x_k + gamma0 u_k + gamma1 u_{k+1}, exact for inputs linear
// between samples. One augmented exponential per call.
DiscretizedStep discretize_foh(const StateSpace& ss, double dt);

// Discretizations keyed by dt rounded to 12 significant digits. Safe for
// concurrent use.
class FohCache {
public:
  explicit FohCache(const StateSpace& ss) : ss_(ss) {}
  const DiscretizedStep& get(double dt);
  std::size_t size() const;
  static double key(double dt);

private:
  StateSpace ss_;
  mutable std::mutex mu_;
  std::map<double, DiscretizedStep> steps_;
};

// Dense, column-per-sample view of a simulation problem.
struct LtiData {
  std::vector<double> t;
  Eigen::MatrixXd u;       // 6 x N
  Eigen::MatrixXd target;  // 3 x N (may be empty for pure simulation)

  std::size_t size() const noexcept { return t.size(); }
  static LtiData from_series(const TimeSeries& inputs, const TimeSeries* targets);
};

struct LossGradient {
  double loss = 0.0;
  Eigen::MatrixXd da, db, dc, dd;
};

enum class SimRoute { automatic, modal, dense };

// Outputs y (3 x N). x0 empty means zero initial state.
Eigen::MatrixXd simulate_outputs(const StateSpace& ss, const LtiData& data,
                                 const Eigen::VectorXd& x0 = {},
                                 SimRoute route = SimRoute::automatic);

// States x (n x N) under the same recurrence.
Eigen::MatrixXd simulate_states(const StateSpace& ss, const LtiData& data,
                                const Eigen::VectorXd& x0 = {},
                                SimRoute route = SimRoute::automatic);

// loss = 1/(2N) sum_k sum_j w_j (y_kj - target_kj)^2 and its gradient with
// respect to every entry of (A, B, C, D).
LossGradient loss_and_gradient(const StateSpace& ss, const LtiData& data,
                               const std::array<double, 3>& weights,
                               const Eigen::VectorXd& x0 = {},
                               SimRoute route = SimRoute::automatic);

double loss_only(const StateSpace& ss, const LtiData& data, const std::array<double, 3>& weights,
                 const Eigen::VectorXd& x0 = {}, SimRoute route = SimRoute::automatic);

// TimeSeries front ends. Inputs must carry exactly six channels; outputs are
// named y1, y2, y3.
TimeSeries simulate(const StateSpace& ss, const TimeSeries& u, const Eigen::VectorXd& x0 = {});
TimeSeries simulate_reference(const StateSpace& ss, const TimeSeries& u,
                              const Eigen::VectorXd& x0 = {});
LossGradient simulate_with_grad(const StateSpace& ss, const TimeSeries& u,
                                const Eigen::VectorXd& x0, const TimeSeries& target,
                                const std::array<double, 3>& weights);

using TransferMatrix = Eigen::Matrix<std::complex<double>, 3, 6>;

// H(j w) = C (j w I - A)^-1 B + D for each frequency in Hz.
std::vector<TransferMatrix> frequency_response(const StateSpace& ss,
                                               std::span<const double> freqs_hz);

namespace detail {

// e^z, phi1(z) = (e^z - 1)/z, phi2(z) = (e^z - 1 - z)/z^2.
struct PhiFunctions {
  std::complex<double> e, p1, p2;
};
PhiFunctions phi_functions(std::complex<double> z);

// Divided differences of exp: e[a,b], e[a,b,0], e[a,b,0,0]. The last two are
// the divided differences of phi1 and phi2 over {a, b}.
struct ExpDivided {
  std::complex<double> e, p1, p2;
};
ExpDivided exp_divided(std::complex<double> a, std::complex<double> b);

struct Modal {
  Eigen::VectorXcd lambda;
  Eigen::MatrixXcd v, v_inv;
  double condition = 0.0;
};
// Empty when A is (numerically) defective.
std::optional<Modal> modal_decompose(const Eigen::MatrixXd& a, double max_condition = 1e7);

}  // namespace detail

}  // namespace hmor
