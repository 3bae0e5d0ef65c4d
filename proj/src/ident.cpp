#include "hmor/ident.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/QR>

#include "hmor/error.hpp"
#include "hmor/parallel.hpp"

namespace hmor {

using Eigen::Index;

void TrainingSet::validate() const {
  phi_inputs.validate();
  targets.validate();
  if (phi_inputs.channel_count() != 6) throw ValidationError("training inputs need 6 channels");
  if (targets.channel_count() != 3) throw ValidationError("training targets need 3 channels");
  if (phi_inputs.time() != targets.time()) {
    throw ValidationError("training inputs and targets have different timestamps");
  }
}

TrainingSet assemble_training(const DcTable& table, const TimeSeries& recorded, BoxMode mode,
                              nlohmann::json provenance) {
  if (recorded.size() == 0) throw ValidationError("assemble_training: empty record");
  recorded.validate();
  auto v1 = recorded.channel("v1");
  auto v2 = recorded.channel("v2");
  auto v3 = recorded.channel("v3");
  if (mode == BoxMode::strict) {
    for (std::size_t k = 0; k < recorded.size(); ++k) {
      const PortVoltages v{v1[k], v2[k], v3[k]};
      if (!table.contains(v)) {
        try {
          locate_cell(table, v);
        } catch (const DomainError& e) {
          std::ostringstream msg;
          msg.precision(17);
          msg << "assemble_training: sample at t=" << recorded.time()[k]
              << " s is outside the table box: " << e.what();
          throw DomainError(msg.str(), e.port(), e.value(), e.bound());
        }
      }
    }
  }
  auto phi = eval_phi_batch(table, v1, v2, v3, mode);
  std::vector<std::vector<double>> cols(phi.begin(), phi.end());
  TrainingSet ts;
  ts.phi_inputs = TimeSeries(recorded.time(), {"phi1", "phi2", "phi3", "phi4", "phi5", "phi6"},
                             std::move(cols));
  ts.targets = recorded.select({"i1", "i2", "i3"});
  ts.provenance = std::move(provenance);
  return ts;
}

namespace {

double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

std::array<double, 3> default_weights(const TimeSeries& targets) {
  std::array<double, 3> r{};
  double top = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    r[j] = rms(targets.channel(j));
    top = std::max(top, r[j]);
  }
  if (!(top > 0.0)) return {1.0, 1.0, 1.0};
  std::array<double, 3> w{};
  for (std::size_t j = 0; j < 3; ++j) {
    const double s = r[j] > 0.0 ? r[j] : top;
    w[j] = 1.0 / (s * s);
  }
  return w;
}

StateSpace initial_guess(Index n, double f0, double f1, std::uint64_t seed) {
  if (n < 1) throw ValidationError("initial_guess: n must be >= 1");
  if (!(f0 > 0.0) || !(f1 >= f0)) throw ValidationError("initial_guess: need 0 < f0 <= f1");
  StateSpace ss = StateSpace::zeros(n);
  auto rng = make_rng(seed, 0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    const double frac = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    const double f = f0 * std::pow(f1 / f0, frac);
    ss.a(i, i) = -2.0 * std::numbers::pi * f;
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < kPhiWidth; ++j) ss.b(i, j) = 0.1 * std::abs(ss.a(i, i)) * unif(rng);
  }
  return ss;
}

void fit_output_map(StateSpace& ss, const LtiData& data) {
  const Index n = ss.order();
  const auto N = static_cast<Index>(data.size());
  const Eigen::MatrixXd x = simulate_states(ss, data);
  Eigen::MatrixXd z(N, n + kPhiWidth);
  z.leftCols(n) = x.transpose();
  z.rightCols(kPhiWidth) = data.u.transpose();
  Eigen::VectorXd scale(n + kPhiWidth);
  for (Index c = 0; c < z.cols(); ++c) {
    const double s = z.col(c).norm();
    scale[c] = s > 0.0 ? s : 1.0;
    z.col(c) /= scale[c];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  qr.setThreshold(1e-13);
  Eigen::MatrixXd theta = qr.solve(data.target.transpose());
  for (Index c = 0; c < theta.rows(); ++c) theta.row(c) /= scale[c];
  ss.c = theta.topRows(n).transpose();
  ss.d = theta.bottomRows(kPhiWidth).transpose();
}

void FitConfig::validate() const {
  if (n < 1) throw ValidationError("FitConfig: n must be >= 1");
  if (restarts < 1) throw ValidationError("FitConfig: restarts must be >= 1");
  if (max_iterations < 0) throw ValidationError("FitConfig: max_iterations must be >= 0");
  if (!(gradient_tol >= 0.0) || !(loss_tol >= 0.0)) {
    throw ValidationError("FitConfig: tolerances must be >= 0");
  }
  if (weights) {
    for (double w : *weights) {
      if (!std::isfinite(w) || w < 0.0) throw ValidationError("FitConfig: weights must be >= 0");
    }
  }
  if (!(f_lo >= 0.0) || !(f_hi >= 0.0) || (f_lo > 0.0 && f_hi > 0.0 && f_hi < f_lo)) {
    throw ValidationError("FitConfig: invalid pole band");
  }
}

nlohmann::json fit_config_to_json(const FitConfig& cfg) {
  nlohmann::json j;
  j["n"] = cfg.n;
  j["restarts"] = cfg.restarts;
  j["max_iterations"] = cfg.max_iterations;
  j["gradient_tol"] = cfg.gradient_tol;
  j["loss_tol"] = cfg.loss_tol;
  j["seed"] = cfg.seed;
  j["stability"] = cfg.stability == StabilityMode::reject ? "reject" : "keep";
  j["weights"] = cfg.weights ? nlohmann::json(*cfg.weights) : nlohmann::json(nullptr);
  j["f_lo"] = cfg.f_lo;
  j["f_hi"] = cfg.f_hi;
  return j;
}

FitConfig fit_config_from_json(const nlohmann::json& j) {
  try {
    FitConfig c;
    c.n = j.value("n", c.n);
    c.restarts = j.value("restarts", c.restarts);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.gradient_tol = j.value("gradient_tol", c.gradient_tol);
    c.loss_tol = j.value("loss_tol", c.loss_tol);
    c.seed = j.value("seed", c.seed);
    const std::string st = j.value("stability", std::string("reject"));
    if (st == "reject") {
      c.stability = StabilityMode::reject;
    } else if (st == "keep") {
      c.stability = StabilityMode::keep;
    } else {
      throw ValidationError("FitConfig: stability must be \"reject\" or \"keep\"");
    }
    if (j.contains("weights") && !j["weights"].is_null()) {
      c.weights = j["weights"].get<std::array<double, 3>>();
    }
    c.f_lo = j.value("f_lo", c.f_lo);
    c.f_hi = j.value("f_hi", c.f_hi);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("FitConfig: ") + e.what());
  }
}

nlohmann::json fit_result_to_json(const FitResult& r) {
  nlohmann::json j;
  j["n"] = r.n;
  j["seed"] = r.seed;
  j["best_restart"] = r.best_restart;
  j["loss"] = r.loss;
  j["normalized_loss"] = r.normalized_loss;
  j["spectral_abscissa"] = r.spectral_abscissa;
  j["rejected_unstable"] = r.rejected_unstable;
  j["status"] = to_string(r.status);
  j["weights"] = r.weights;
  auto& rs = j["restarts"] = nlohmann::json::array();
  for (const auto& s : r.restarts) {
    rs.push_back({{"loss", s.finite ? nlohmann::json(s.loss) : nlohmann::json(nullptr)},
                  {"iterations", s.iterations},
                  {"evaluations", s.evaluations},
                  {"status", to_string(s.status)},
                  {"spectral_abscissa", s.spectral_abscissa}});
  }
  return j;
}

namespace {

double weighted_power(const LtiData& data, const std::array<double, 3>& w) {
  double p = 0.0;
  for (Index j = 0; j < kPorts; ++j) p += w[static_cast<std::size_t>(j)] * data.target.row(j).squaredNorm();
  return p / (2.0 * static_cast<double>(data.size()));
}

// Optimization runs on dimensionless parameters: time in units of t_s, inputs
// and outputs in units of their RMS.
//   A = At / ts,  B = Bt Su^-1 / ts,  C = Sy Ct,  D = Sy Dt Su^-1
struct Scaling {
  Index n = 0;
  double ts = 1.0;
  Eigen::VectorXd su;  // 6
  Eigen::VectorXd sy;  // 3

  Index size() const { return n * n + n * kPhiWidth + kPorts * n + kPorts * kPhiWidth; }

  StateSpace physical(const Eigen::VectorXd& th) const {
    StateSpace ss = StateSpace::zeros(n);
    Index o = 0;
    auto take = [&](Eigen::MatrixXd& m) {
      m = Eigen::Map<const Eigen::MatrixXd>(th.data() + o, m.rows(), m.cols());
      o += m.size();
    };
    take(ss.a);
    take(ss.b);
    take(ss.c);
    take(ss.d);
    ss.a /= ts;
    ss.b = ss.b * su.cwiseInverse().asDiagonal() / ts;
    ss.c = sy.asDiagonal() * ss.c;
    ss.d = sy.asDiagonal() * ss.d * su.cwiseInverse().asDiagonal();
    return ss;
  }

  Eigen::VectorXd scaled(const StateSpace& ss) const {
    Eigen::VectorXd th(size());
    Index o = 0;
    auto put = [&](const Eigen::MatrixXd& m) {
      Eigen::Map<Eigen::MatrixXd>(th.data() + o, m.rows(), m.cols()) = m;
      o += m.size();
    };
    put(ss.a * ts);
    put(ss.b * su.asDiagonal() * ts);
    put(sy.cwiseInverse().asDiagonal() * ss.c);
    put(sy.cwiseInverse().asDiagonal() * ss.d * su.asDiagonal());
    return th;
  }

  Eigen::VectorXd scaled_gradient(const LossGradient& g) const {
    Eigen::VectorXd out(size());
    Index o = 0;
    auto put = [&](const Eigen::MatrixXd& m) {
      Eigen::Map<Eigen::MatrixXd>(out.data() + o, m.rows(), m.cols()) = m;
      o += m.size();
    };
    put(g.da / ts);
    put(g.db * su.cwiseInverse().asDiagonal() / ts);
    put(sy.asDiagonal() * g.dc);
    put(sy.asDiagonal() * g.dd * su.cwiseInverse().asDiagonal());
    return out;
  }
};

Eigen::VectorXd channel_rms(const Eigen::MatrixXd& m) {
  Eigen::VectorXd r(m.rows());
  for (Index j = 0; j < m.rows(); ++j) {
    const double v = std::sqrt(m.row(j).squaredNorm() / static_cast<double>(m.cols()));
    r[j] = v > 0.0 ? v : 1.0;
  }
  return r;
}

struct RestartOutcome {
  RestartSummary summary;
  StateSpace ss;
};

RestartOutcome run_restart(const LtiData& data, const std::array<double, 3>& w, double power,
                           const Scaling& sc, const FitConfig& cfg, double f_lo, double f_hi,
                           int r, const StateSpace* nested = nullptr) {
  RestartOutcome out;
  StateSpace ss = initial_guess(cfg.n, f_lo, f_hi, cfg.seed + static_cast<std::uint64_t>(r));
  ss.b = ss.b * sc.su.cwiseInverse().asDiagonal();
  if (nested) {
    // the smaller model in the leading block; the extra states keep their
    // seeded poles and inputs, uncoupled
    const Index m = nested->order();
    ss.a.topLeftCorner(m, m) = nested->a;
    ss.b.topRows(m) = nested->b;
  } else if (r > 0) {
    // spread the poles of later restarts by up to half a log step
    auto rng = make_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(r));
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    const double step =
        cfg.n > 1 ? std::log(f_hi / f_lo) / static_cast<double>(cfg.n - 1) : std::log(f_hi / f_lo);
    for (Index i = 0; i < cfg.n; ++i) ss.a(i, i) *= std::exp(unif(rng) * step);
  }
  fit_output_map(ss, data);

  const double inf = std::numeric_limits<double>::infinity();
  const Index nab = sc.n * sc.n + sc.n * kPhiWidth;

  // Phase 1: (A, B) only; C and D are re-solved by least squares at every
  // evaluation, so their partial gradients vanish and the (A, B) gradient is
  // the gradient of the reduced objective.
  const Objective reduced = [&](const Eigen::VectorXd& th, Eigen::VectorXd& grad) {
    try {
      Eigen::VectorXd full = sc.scaled(ss);
      full.head(nab) = th;
      StateSpace p = sc.physical(full);
      if (!p.a.allFinite() || !p.b.allFinite()) return inf;
      fit_output_map(p, data);
      if (!p.c.allFinite() || !p.d.allFinite()) return inf;
      const LossGradient lg = loss_and_gradient(p, data, w);
      if (!std::isfinite(lg.loss)) return inf;
      grad = sc.scaled_gradient(lg).head(nab) / power;
      return lg.loss / power;
    } catch (const NumericalError&) {
      return inf;
    }
  };
  const Objective joint = [&](const Eigen::VectorXd& th, Eigen::VectorXd& grad) {
    try {
      const StateSpace p = sc.physical(th);
      if (!p.a.allFinite() || !p.b.allFinite() || !p.c.allFinite() || !p.d.allFinite()) {
        return inf;
      }
      const LossGradient lg = loss_and_gradient(p, data, w);
      if (!std::isfinite(lg.loss)) return inf;
      grad = sc.scaled_gradient(lg) / power;
      return lg.loss / power;
    } catch (const NumericalError&) {
      return inf;
    }
  };

  LbfgsOptions opt;
  opt.max_iterations = cfg.max_iterations;
  opt.gradient_tol = cfg.gradient_tol;
  opt.loss_tol = cfg.loss_tol;
  const Eigen::VectorXd th0 = sc.scaled(ss).head(nab);
  LbfgsResult r1 = lbfgs_minimize(reduced, th0, opt);
  {
    Eigen::VectorXd full = sc.scaled(ss);
    full.head(nab) = r1.x;
    ss = sc.physical(full);
    fit_output_map(ss, data);
  }

  // Phase 2: joint polish of every entry from the phase-1 model.
  LbfgsResult res = lbfgs_minimize(joint, sc.scaled(ss), opt);
  // the phase-2 start is the phase-1 end point, re-evaluated in the joint
  // parameterization
  r1.trace.pop_back();
  res.trace.insert(res.trace.begin(), r1.trace.begin(), r1.trace.end());
  res.iterations += r1.iterations;
  res.evaluations += r1.evaluations;

  out.ss = sc.physical(res.x);
  auto& s = out.summary;
  s.iterations = res.iterations;
  s.evaluations = res.evaluations;
  s.status = res.status;
  s.trace = std::move(res.trace);
  try {
    s.loss = loss_only(out.ss, data, w);
    s.spectral_abscissa = spectral_abscissa(out.ss.a);
  } catch (const std::exception&) {
    s.loss = std::numeric_limits<double>::quiet_NaN();
  }
  s.finite = std::isfinite(s.loss) && std::isfinite(s.spectral_abscissa);
  return out;
}

}  // namespace

double normalized_loss(const StateSpace& ss, const TrainingSet& train,
                       const std::array<double, 3>& weights) {
  const LtiData data = LtiData::from_series(train.phi_inputs, &train.targets);
  const double p = weighted_power(data, weights);
  return loss_only(ss, data, weights) / (p > 0.0 ? p : 1.0);
}

namespace {

FitResult fit_impl(const TrainingSet& train, const FitConfig& cfg, const StateSpace* nested) {
  cfg.validate();
  train.validate();
  const LtiData data = LtiData::from_series(train.phi_inputs, &train.targets);
  const std::array<double, 3> w = cfg.weights ? *cfg.weights : default_weights(train.targets);
  double power = weighted_power(data, w);
  if (!(power > 0.0)) power = 1.0;

  double f_lo = cfg.f_lo, f_hi = cfg.f_hi;
  double min_dt = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < data.size(); ++k) min_dt = std::min(min_dt, data.t[k] - data.t[k - 1]);
  const double duration = data.t.back() - data.t.front();
  if (f_lo == 0.0) f_lo = 1.0 / duration;
  if (f_hi == 0.0) f_hi = 1.0 / (20.0 * min_dt);
  if (f_hi < f_lo) std::swap(f_lo, f_hi);

  Scaling sc;
  sc.n = cfg.n;
  sc.ts = 1.0 / (2.0 * std::numbers::pi * std::sqrt(f_lo * f_hi));
  sc.su = channel_rms(data.u);
  sc.sy = channel_rms(data.target);
  for (Index j = 0; j < kPorts; ++j) {
    if (data.target.row(j).squaredNorm() == 0.0) sc.sy[j] = sc.sy.maxCoeff();
  }

  const int runs = cfg.restarts + (nested ? 1 : 0);
  std::vector<RestartOutcome> outs(static_cast<std::size_t>(runs));
#pragma omp parallel for schedule(dynamic) num_threads(thread_cap())
  for (int r = 0; r < runs; ++r) {
    try {
      outs[static_cast<std::size_t>(r)] = run_restart(data, w, power, sc, cfg, f_lo, f_hi, r,
                                                      r == cfg.restarts ? nested : nullptr);
    } catch (const std::exception&) {
      outs[static_cast<std::size_t>(r)].summary.finite = false;
      outs[static_cast<std::size_t>(r)].summary.loss = std::numeric_limits<double>::quiet_NaN();
    }
  }

  FitResult res;
  res.n = cfg.n;
  res.seed = cfg.seed;
  res.weights = w;
  std::optional<std::size_t> best_any, best_stable;
  for (std::size_t r = 0; r < outs.size(); ++r) {
    const auto& s = outs[r].summary;
    if (!s.finite) continue;
    if (!best_any || s.loss < outs[*best_any].summary.loss) best_any = r;
    if (s.spectral_abscissa < 0.0 && (!best_stable || s.loss < outs[*best_stable].summary.loss)) {
      best_stable = r;
    }
  }
  if (!best_any) {
    std::ostringstream msg;
    msg << "fit: all " << outs.size() << " restarts diverged;";
    for (std::size_t r = 0; r < outs.size(); ++r) {
      msg << " [" << r << ": " << to_string(outs[r].summary.status) << ", "
          << outs[r].summary.iterations << " it]";
    }
    throw NumericalError(msg.str());
  }
  std::size_t best = *best_any;
  if (cfg.stability == StabilityMode::reject && outs[best].summary.spectral_abscissa >= 0.0) {
    if (!best_stable) {
      throw NumericalError("fit: every finite restart has an unstable A (spectral abscissa >= 0)");
    }
    best = *best_stable;
    res.rejected_unstable = true;
  }
  res.best_restart = best;
  res.ss = outs[best].ss;
  res.loss = outs[best].summary.loss;
  res.normalized_loss = res.loss / power;
  res.spectral_abscissa = outs[best].summary.spectral_abscissa;
  res.status = outs[best].summary.status;
  for (auto& o : outs) res.restarts.push_back(std::move(o.summary));
  return res;
}

}  // namespace

FitResult fit(const TrainingSet& train, const FitConfig& cfg) { return fit_impl(train, cfg, nullptr); }

std::vector<FitResult> order_sweep(const TrainingSet& train, const std::vector<Index>& orders,
                                   const FitConfig& cfg) {
  if (orders.empty()) throw ValidationError("order_sweep: no orders given");
  std::vector<FitResult> out;
  out.reserve(orders.size());
  for (Index n : orders) {
    FitConfig c = cfg;
    c.n = n;
    const FitResult* below = nullptr;
    for (const auto& prev : out) {
      if (prev.n < n && (!below || prev.n > below->n)) below = &prev;
    }
    out.push_back(fit_impl(train, c, below ? &below->ss : nullptr));
  }
  return out;
}

}  // namespace hmor
