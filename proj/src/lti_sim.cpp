#include "hmor/lti_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

#include "hmor/error.hpp"

namespace hmor {

using cd = std::complex<double>;
using Eigen::Index;

void StateSpace::validate() const {
  const Index n = a.rows();
  auto fail = [](const std::string& m) { throw ValidationError("StateSpace: " + m); };
  if (n < 1) fail("order must be >= 1");
  if (a.cols() != n) fail("A must be square");
  if (b.rows() != n || b.cols() != kPhiWidth) fail("B must be n x 6");
  if (c.rows() != kPorts || c.cols() != n) fail("C must be 3 x n");
  if (d.rows() != kPorts || d.cols() != kPhiWidth) fail("D must be 3 x 6");
  if (!a.allFinite() || !b.allFinite() || !c.allFinite() || !d.allFinite()) {
    fail("non-finite entries");
  }
}

StateSpace StateSpace::zeros(Index n) {
  return {Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, kPhiWidth),
          Eigen::MatrixXd::Zero(kPorts, n), Eigen::MatrixXd::Zero(kPorts, kPhiWidth)};
}

double spectral_abscissa(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

// ---------------------------------------------------------------------------
// Dense route

namespace {

Eigen::MatrixXd augmented(const StateSpace& ss, double dt) {
  const Index n = ss.order(), m = kPhiWidth;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + 2 * m, n + 2 * m);
  M.topLeftCorner(n, n) = ss.a * dt;
  M.block(0, n, n, m) = ss.b * dt;
  M.block(n, n + m, m, m) = Eigen::MatrixXd::Identity(m, m);
  return M;
}

}  // namespace

DiscretizedStep discretize_foh(const StateSpace& ss, double dt) {
  if (!(dt > 0.0)) throw ValidationError("discretize_foh: dt must be > 0");
  const Index n = ss.order(), m = kPhiWidth;
  const Eigen::MatrixXd E = augmented(ss, dt).exp();
  if (!E.allFinite()) {
    std::ostringstream msg;
    msg << "discretize_foh: matrix exponential overflow for dt=" << dt;
    throw NumericalError(msg.str());
  }
  DiscretizedStep s;
  s.dt = dt;
  s.phi = E.topLeftCorner(n, n);
  const Eigen::MatrixXd f0 = E.block(0, n, n, m);
  const Eigen::MatrixXd f1 = E.block(0, n + m, n, m);
  s.gamma0 = f0 - f1;
  s.gamma1 = f1;
  return s;
}

double FohCache::key(double dt) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.11e", dt);
  return std::strtod(buf, nullptr);
}

const DiscretizedStep& FohCache::get(double dt) {
  const double k = key(dt);
  std::lock_guard lock(mu_);
  auto it = steps_.find(k);
  if (it == steps_.end()) it = steps_.emplace(k, discretize_foh(ss_, dt)).first;
  return it->second;
}

std::size_t FohCache::size() const {
  std::lock_guard lock(mu_);
  return steps_.size();
}

LtiData LtiData::from_series(const TimeSeries& inputs, const TimeSeries* targets) {
  inputs.validate();
  if (inputs.channel_count() != static_cast<std::size_t>(kPhiWidth)) {
    throw ValidationError("LTI input must have 6 channels, got " +
                          std::to_string(inputs.channel_count()));
  }
  LtiData d;
  d.t = inputs.time();
  const auto n = static_cast<Index>(inputs.size());
  d.u.resize(kPhiWidth, n);
  for (Index c = 0; c < kPhiWidth; ++c) {
    auto ch = inputs.channel(static_cast<std::size_t>(c));
    for (Index k = 0; k < n; ++k) d.u(c, k) = ch[static_cast<std::size_t>(k)];
  }
  if (targets) {
    targets->validate();
    if (targets->channel_count() != static_cast<std::size_t>(kPorts)) {
      throw ValidationError("LTI target must have 3 channels");
    }
    if (targets->time() != inputs.time()) {
      throw ValidationError("LTI target timestamps differ from input timestamps");
    }
    d.target.resize(kPorts, n);
    for (Index c = 0; c < kPorts; ++c) {
      auto ch = targets->channel(static_cast<std::size_t>(c));
      for (Index k = 0; k < n; ++k) d.target(c, k) = ch[static_cast<std::size_t>(k)];
    }
  }
  return d;
}

namespace {

void check_data(const StateSpace& ss, const LtiData& data, const Eigen::VectorXd& x0,
                bool need_target) {
  ss.validate();
  const auto n = static_cast<Index>(data.size());
  if (n < 2) throw ValidationError("LTI data needs at least 2 samples");
  if (data.u.rows() != kPhiWidth || data.u.cols() != n) {
    throw ValidationError("LTI input must be 6 x N");
  }
  if (need_target && (data.target.rows() != kPorts || data.target.cols() != n)) {
    throw ValidationError("LTI target must be 3 x N with the input's timestamps");
  }
  if (x0.size() != 0 && x0.size() != ss.order()) {
    throw ValidationError("initial state has wrong dimension");
  }
}

Eigen::VectorXd initial_state(const StateSpace& ss, const Eigen::VectorXd& x0) {
  return x0.size() == 0 ? Eigen::VectorXd::Zero(ss.order()) : x0;
}

struct DenseRun {
  Eigen::MatrixXd x;  // n x N
  Eigen::MatrixXd y;  // 3 x N
  std::vector<const DiscretizedStep*> steps;
};

DenseRun dense_forward(const StateSpace& ss, const LtiData& data, const Eigen::VectorXd& x0,
                       FohCache& cache) {
  const auto N = static_cast<Index>(data.size());
  DenseRun run;
  run.x.resize(ss.order(), N);
  run.x.col(0) = initial_state(ss, x0);
  run.steps.resize(data.size() - 1);
  for (Index k = 0; k + 1 < N; ++k) {
    const auto& s = cache.get(data.t[static_cast<std::size_t>(k + 1)] -
                              data.t[static_cast<std::size_t>(k)]);
    run.steps[static_cast<std::size_t>(k)] = &s;
    run.x.col(k + 1) = s.phi * run.x.col(k) + s.gamma0 * data.u.col(k) + s.gamma1 * data.u.col(k + 1);
  }
  run.y = ss.c * run.x + ss.d * data.u;
  return run;
}

Eigen::MatrixXd weighted_residual(const Eigen::MatrixXd& y, const LtiData& data,
                                  const std::array<double, 3>& w, double& loss) {
  const auto N = static_cast<double>(data.size());
  Eigen::MatrixXd r = y - data.target;
  loss = 0.0;
  for (Index j = 0; j < kPorts; ++j) loss += w[static_cast<std::size_t>(j)] * r.row(j).squaredNorm();
  loss /= 2.0 * N;
  for (Index j = 0; j < kPorts; ++j) r.row(j) *= w[static_cast<std::size_t>(j)] / N;
  return r;
}

LossGradient dense_gradient(const StateSpace& ss, const LtiData& data,
                            const std::array<double, 3>& w, const Eigen::VectorXd& x0) {
  const Index n = ss.order(), m = kPhiWidth;
  const auto N = static_cast<Index>(data.size());
  FohCache cache(ss);
  DenseRun run = dense_forward(ss, data, x0, cache);
  LossGradient g;
  const Eigen::MatrixXd e = weighted_residual(run.y, data, w, g.loss);
  g.dc = e * run.x.transpose();
  g.dd = e * data.u.transpose();

  struct Cot {
    Eigen::MatrixXd phi, g0, g1;
  };
  std::map<const DiscretizedStep*, Cot> cot;
  Eigen::VectorXd lam = ss.c.transpose() * e.col(N - 1);
  for (Index k = N - 2; k >= 0; --k) {
    const DiscretizedStep* s = run.steps[static_cast<std::size_t>(k)];
    auto [it, fresh] = cot.try_emplace(s);
    if (fresh) {
      it->second = {Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, m),
                    Eigen::MatrixXd::Zero(n, m)};
    }
    it->second.phi.noalias() += lam * run.x.col(k).transpose();
    it->second.g0.noalias() += lam * data.u.col(k).transpose();
    it->second.g1.noalias() += lam * data.u.col(k + 1).transpose();
    lam = ss.c.transpose() * e.col(k) + s->phi.transpose() * lam;
  }

  g.da = Eigen::MatrixXd::Zero(n, n);
  g.db = Eigen::MatrixXd::Zero(n, m);
  const Index sz = n + 2 * m;
  for (const auto& [s, c] : cot) {
    // adjoint of the exponential's Frechet derivative: upper-right block of
    // exp([[M^T, Ebar], [0, M^T]])
    const Eigen::MatrixXd Mt = augmented(ss, s->dt).transpose();
    Eigen::MatrixXd Ebar = Eigen::MatrixXd::Zero(sz, sz);
    Ebar.topLeftCorner(n, n) = c.phi;
    Ebar.block(0, n, n, m) = c.g0;
    Ebar.block(0, n + m, n, m) = c.g1 - c.g0;
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(2 * sz, 2 * sz);
    big.topLeftCorner(sz, sz) = Mt;
    big.bottomRightCorner(sz, sz) = Mt;
    big.topRightCorner(sz, sz) = Ebar;
    const Eigen::MatrixXd Mbar = big.exp().topRightCorner(sz, sz);
    g.da += s->dt * Mbar.topLeftCorner(n, n);
    g.db += s->dt * Mbar.block(0, n, n, m);
  }
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// Modal route

namespace detail {

PhiFunctions phi_functions(cd z) {
  if (std::abs(z) < 1.0) {
    // p1 = sum z^k/(k+1)!, p2 = sum z^k/(k+2)!
    cd p1 = 0.0, p2 = 0.0;
    cd zk = 1.0;
    double f1 = 1.0, f2 = 0.5;  // 1/(k+1)!, 1/(k+2)!
    for (int k = 0; k < 40; ++k) {
      p1 += zk * f1;
      p2 += zk * f2;
      zk *= z;
      f1 /= static_cast<double>(k + 2);
      f2 /= static_cast<double>(k + 3);
      if (std::abs(zk) * f1 < 1e-18 * std::abs(p1)) break;
    }
    return {std::exp(z), p1, p2};
  }
  const cd e = std::exp(z);
  const cd p1 = (e - 1.0) / z;
  return {e, p1, (p1 - 1.0) / z};
}

ExpDivided exp_divided(cd a, cd b) {
  if (std::max(std::abs(a), std::abs(b)) < 1.0) {
    // e[a,b,0^j] = sum_m h_m(a,b)/(m+1+j)! with h_m the complete
    // homogeneous symmetric polynomial of degree m.
    cd de = 0.0, d1 = 0.0, d2 = 0.0;
    cd h = 1.0, bm = 1.0;
    double f0 = 1.0, f1 = 0.5, f2 = 1.0 / 6.0;  // 1/(m+1)!, 1/(m+2)!, 1/(m+3)!
    for (int m = 0; m < 60; ++m) {
      de += h * f0;
      d1 += h * f1;
      d2 += h * f2;
      bm *= b;
      h = a * h + bm;
      f0 /= static_cast<double>(m + 2);
      f1 /= static_cast<double>(m + 3);
      f2 /= static_cast<double>(m + 4);
      if (std::abs(h) * f0 < 1e-18 * std::abs(de)) break;
    }
    return {de, d1, d2};
  }
  if (std::abs(a) < std::abs(b)) std::swap(a, b);
  // e[a,b] = e^p phi1(q - p) with Re p >= Re q keeps the exponent bounded
  const cd p = a.real() >= b.real() ? a : b;
  const cd q = a.real() >= b.real() ? b : a;
  const cd de = std::exp(p) * phi_functions(q - p).p1;
  const PhiFunctions pb = phi_functions(b);
  const cd d1 = (de - pb.p1) / a;
  const cd d2 = (d1 - pb.p2) / a;
  return {de, d1, d2};
}

std::optional<Modal> modal_decompose(const Eigen::MatrixXd& a, double max_condition) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, true);
  if (es.info() != Eigen::Success) return std::nullopt;
  Modal m;
  m.lambda = es.eigenvalues();
  m.v = es.eigenvectors();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m.v);
  m.v_inv = lu.inverse();
  if (!m.v_inv.allFinite()) return std::nullopt;
  const auto norm1 = [](const Eigen::MatrixXcd& x) {
    return x.cwiseAbs().colwise().sum().maxCoeff();
  };
  m.condition = norm1(m.v) * norm1(m.v_inv);
  if (!(m.condition <= max_condition)) return std::nullopt;
  return m;
}

}  // namespace detail

namespace {

using detail::Modal;

struct ModalRun {
  Eigen::MatrixXcd xi;    // n x N modal states
  Eigen::MatrixXcd bu;    // n x N, V^-1 B u_k
  Eigen::MatrixXcd ct;    // 3 x n, C V
  Eigen::MatrixXd y;      // 3 x N
  std::vector<detail::PhiFunctions> pf;  // (N-1) * n, step-major
};

ModalRun modal_forward(const StateSpace& ss, const Modal& md, const LtiData& data,
                       const Eigen::VectorXd& x0) {
  const Index n = ss.order();
  const auto N = static_cast<Index>(data.size());
  ModalRun run;
  run.bu = (md.v_inv * ss.b.cast<cd>()) * data.u.cast<cd>();
  run.ct = ss.c.cast<cd>() * md.v;
  run.xi.resize(n, N);
  run.xi.col(0) = md.v_inv * initial_state(ss, x0).cast<cd>();
  run.pf.resize(static_cast<std::size_t>((N - 1) * n));
  for (Index k = 0; k + 1 < N; ++k) {
    const double h = data.t[static_cast<std::size_t>(k + 1)] - data.t[static_cast<std::size_t>(k)];
    for (Index i = 0; i < n; ++i) {
      const auto pf = detail::phi_functions(h * md.lambda[i]);
      run.pf[static_cast<std::size_t>(k * n + i)] = pf;
      run.xi(i, k + 1) = pf.e * run.xi(i, k) + h * (pf.p1 - pf.p2) * run.bu(i, k) +
                         h * pf.p2 * run.bu(i, k + 1);
    }
  }
  run.y = (run.ct * run.xi).real() + ss.d * data.u;
  return run;
}

LossGradient modal_gradient(const StateSpace& ss, const Modal& md, const LtiData& data,
                            const std::array<double, 3>& w, const Eigen::VectorXd& x0) {
  const Index n = ss.order();
  const auto N = static_cast<Index>(data.size());
  ModalRun run = modal_forward(ss, md, data, x0);
  LossGradient g;
  const Eigen::MatrixXd e = weighted_residual(run.y, data, w, g.loss);
  const Eigen::MatrixXcd ec = e.cast<cd>();
  g.dd = e * data.u.transpose();
  g.dc = ((ec * run.xi.transpose()) * md.v.transpose()).real();

  Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(n, n);
  Eigen::MatrixXcd r0(n, N), r1(n, N);  // B cotangent weights for u_k and u_{k+1}
  r0.col(N - 1).setZero();
  r1.col(0).setZero();
  const Eigen::MatrixXcd ctt = run.ct.transpose();
  Eigen::VectorXcd a = ctt * ec.col(N - 1);
  for (Index k = N - 2; k >= 0; --k) {
    const double h = data.t[static_cast<std::size_t>(k + 1)] - data.t[static_cast<std::size_t>(k)];
    const auto* pf = &run.pf[static_cast<std::size_t>(k * n)];
    for (Index i = 0; i < n; ++i) {
      r0(i, k) = h * (pf[i].p1 - pf[i].p2) * a[i];
      r1(i, k + 1) = h * pf[i].p2 * a[i];
    }
    for (Index i = 0; i < n; ++i) {
      const cd zi = h * md.lambda[i];
      for (Index j = 0; j < n; ++j) {
        const auto dd = detail::exp_divided(zi, h * md.lambda[j]);
        S(i, j) += h * a[i] *
                   (dd.e * run.xi(j, k) +
                    h * ((dd.p1 - dd.p2) * run.bu(j, k) + dd.p2 * run.bu(j, k + 1)));
      }
    }
    for (Index i = 0; i < n; ++i) a[i] *= pf[i].e;
    a += ctt * ec.col(k);
  }
  const Eigen::MatrixXcd vit = md.v_inv.transpose();
  g.da = (vit * S * md.v.transpose()).real();
  const Eigen::MatrixXcd uc = data.u.cast<cd>();
  g.db = (vit * (r0 * uc.transpose() + r1 * uc.transpose())).real();
  return g;
}

}  // namespace

Eigen::MatrixXd simulate_outputs(const StateSpace& ss, const LtiData& data,
                                 const Eigen::VectorXd& x0, SimRoute route) {
  check_data(ss, data, x0, false);
  if (route != SimRoute::dense) {
    if (auto md = detail::modal_decompose(ss.a)) return modal_forward(ss, *md, data, x0).y;
    if (route == SimRoute::modal) throw NumericalError("simulate: A is not diagonalizable");
  }
  FohCache cache(ss);
  return dense_forward(ss, data, x0, cache).y;
}

Eigen::MatrixXd simulate_states(const StateSpace& ss, const LtiData& data,
                                const Eigen::VectorXd& x0, SimRoute route) {
  check_data(ss, data, x0, false);
  if (route != SimRoute::dense) {
    if (auto md = detail::modal_decompose(ss.a)) {
      return (md->v * modal_forward(ss, *md, data, x0).xi).real();
    }
    if (route == SimRoute::modal) throw NumericalError("simulate: A is not diagonalizable");
  }
  FohCache cache(ss);
  return dense_forward(ss, data, x0, cache).x;
}

LossGradient loss_and_gradient(const StateSpace& ss, const LtiData& data,
                               const std::array<double, 3>& weights, const Eigen::VectorXd& x0,
                               SimRoute route) {
  check_data(ss, data, x0, true);
  if (route != SimRoute::dense) {
    if (auto md = detail::modal_decompose(ss.a)) return modal_gradient(ss, *md, data, weights, x0);
    if (route == SimRoute::modal) throw NumericalError("gradient: A is not diagonalizable");
  }
  return dense_gradient(ss, data, weights, x0);
}

double loss_only(const StateSpace& ss, const LtiData& data, const std::array<double, 3>& weights,
                 const Eigen::VectorXd& x0, SimRoute route) {
  check_data(ss, data, x0, true);
  const Eigen::MatrixXd y = simulate_outputs(ss, data, x0, route);
  double loss = 0.0;
  weighted_residual(y, data, weights, loss);
  return loss;
}

namespace {

TimeSeries outputs_to_series(const std::vector<double>& t, const Eigen::MatrixXd& y) {
  std::vector<std::vector<double>> cols(3, std::vector<double>(static_cast<std::size_t>(y.cols())));
  for (Index j = 0; j < kPorts; ++j) {
    Eigen::Map<Eigen::RowVectorXd>(cols[static_cast<std::size_t>(j)].data(), y.cols()) = y.row(j);
  }
  return TimeSeries(t, {"y1", "y2", "y3"}, std::move(cols));
}

}  // namespace

TimeSeries simulate(const StateSpace& ss, const TimeSeries& u, const Eigen::VectorXd& x0) {
  const LtiData data = LtiData::from_series(u, nullptr);
  return outputs_to_series(data.t, simulate_outputs(ss, data, x0));
}

TimeSeries simulate_reference(const StateSpace& ss, const TimeSeries& u,
                              const Eigen::VectorXd& x0) {
  const LtiData data = LtiData::from_series(u, nullptr);
  return outputs_to_series(data.t, simulate_outputs(ss, data, x0, SimRoute::dense));
}

LossGradient simulate_with_grad(const StateSpace& ss, const TimeSeries& u,
                                const Eigen::VectorXd& x0, const TimeSeries& target,
                                const std::array<double, 3>& weights) {
  const LtiData data = LtiData::from_series(u, &target);
  return loss_and_gradient(ss, data, weights, x0);
}

std::vector<TransferMatrix> frequency_response(const StateSpace& ss,
                                               std::span<const double> freqs_hz) {
  ss.validate();
  const Index n = ss.order();
  std::vector<TransferMatrix> out(freqs_hz.size());
  const Eigen::MatrixXcd A = ss.a.cast<cd>();
  const Eigen::MatrixXcd B = ss.b.cast<cd>();
  const Eigen::MatrixXcd C = ss.c.cast<cd>();
  const Eigen::MatrixXcd D = ss.d.cast<cd>();
  for (std::size_t k = 0; k < freqs_hz.size(); ++k) {
    const cd jw(0.0, 2.0 * std::numbers::pi * freqs_hz[k]);
    Eigen::MatrixXcd R = jw * Eigen::MatrixXcd::Identity(n, n) - A;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(R);
    if (!(lu.rcond() > 1e-14)) {
      std::ostringstream msg;
      msg << "frequency_response: singular resolvent at f=" << freqs_hz[k] << " Hz";
      throw NumericalError(msg.str());
    }
    out[k] = C * lu.solve(B) + D;
  }
  return out;
}

}  // namespace hmor
