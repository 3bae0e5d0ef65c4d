#include "hmor/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace hmor {

std::string to_string(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::gradient_tol: return "gradient_tol";
    case LbfgsStatus::loss_tol: return "loss_tol";
    case LbfgsStatus::stalled: return "stalled";
    case LbfgsStatus::max_iterations: return "max_iterations";
    case LbfgsStatus::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

namespace {

struct Probe {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;  // directional derivative
  Eigen::VectorXd x, g;
  bool finite() const { return std::isfinite(f) && std::isfinite(slope); }
};

class LineSearch {
public:
  LineSearch(const Objective& f, const LbfgsOptions& opt, int& evals)
      : f_(f), opt_(opt), evals_(evals) {}

  // Strong-Wolfe search along p from (x, f0, g0). Returns false when no
  // point with sufficient decrease was found.
  bool run(const Eigen::VectorXd& x, double f0, const Eigen::VectorXd& g0,
           const Eigen::VectorXd& p, double alpha0, Probe& out) {
    x0_ = &x;
    p_ = &p;
    f0_ = f0;
    d0_ = g0.dot(p);
    budget_ = opt_.max_line_search;
    best_.f = f0;
    best_.alpha = 0.0;
    bool have_best = false;

    Probe prev;
    prev.alpha = 0.0;
    prev.f = f0;
    prev.slope = d0_;
    double alpha = alpha0;
    for (int i = 0; budget_ > 0; ++i) {
      Probe cur = eval(alpha);
      if (!cur.finite()) {
        alpha = prev.alpha + 0.25 * (alpha - prev.alpha);
        continue;
      }
      if (sufficient(cur) && cur.f < best_.f) {
        best_ = cur;
        have_best = true;
      }
      if (!sufficient(cur) || (i > 0 && cur.f >= prev.f)) return zoom(prev, cur, out) || take_best(have_best, out);
      if (std::abs(cur.slope) <= -opt_.wolfe_c2 * d0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, out) || take_best(have_best, out);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return take_best(have_best, out);
  }

private:
  bool sufficient(const Probe& p) const { return p.f <= f0_ + opt_.wolfe_c1 * p.alpha * d0_; }

  bool take_best(bool have, Probe& out) {
    if (!have || !(best_.f < f0_)) return false;
    out = best_;
    return true;
  }

  Probe eval(double alpha) {
    --budget_;
    ++evals_;
    Probe p;
    p.alpha = alpha;
    p.x = *x0_ + alpha * *p_;
    p.g.resize(p.x.size());
    p.f = f_(p.x, p.g);
    p.slope = p.g.allFinite() ? p.g.dot(*p_) : std::numeric_limits<double>::quiet_NaN();
    return p;
  }

  bool zoom(Probe lo, Probe hi, Probe& out) {
    while (budget_ > 0) {
      const double a = lo.alpha, b = hi.alpha;
      double alpha = 0.5 * (a + b);
      if (hi.finite()) {
        // cubic through (a, f_lo, d_lo) and (b, f_hi, d_hi)
        const double d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
        const double disc = d1 * d1 - lo.slope * hi.slope;
        if (disc >= 0.0) {
          const double d2 = std::copysign(std::sqrt(disc), b - a);
          const double c = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
          const double lo_b = std::min(a, b) + 0.1 * std::abs(b - a);
          const double hi_b = std::max(a, b) - 0.1 * std::abs(b - a);
          if (std::isfinite(c)) alpha = std::clamp(c, lo_b, hi_b);
        }
      }
      Probe cur = eval(alpha);
      if (!cur.finite() || !sufficient(cur) || cur.f >= lo.f) {
        hi = std::move(cur);
        if (!hi.finite()) hi.f = std::numeric_limits<double>::infinity();
      } else {
        if (cur.f < best_.f) best_ = cur;
        if (std::abs(cur.slope) <= -opt_.wolfe_c2 * d0_) {
          out = std::move(cur);
          return true;
        }
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
      if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
    }
    if (lo.alpha > 0.0 && lo.f < f0_) {
      out = std::move(lo);
      return true;
    }
    return false;
  }

  const Objective& f_;
  const LbfgsOptions& opt_;
  int& evals_;
  const Eigen::VectorXd* x0_ = nullptr;
  const Eigen::VectorXd* p_ = nullptr;
  double f0_ = 0.0, d0_ = 0.0;
  int budget_ = 0;
  Probe best_;
};

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& opt) {
  LbfgsResult res;
  Eigen::VectorXd g(x0.size());
  double fx = f(x0, g);
  res.evaluations = 1;
  res.x = std::move(x0);
  res.f = fx;
  res.trace.push_back(fx);
  if (!std::isfinite(fx) || !g.allFinite()) {
    res.status = LbfgsStatus::line_search_failed;
    return res;
  }

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  LineSearch ls(f, opt, res.evaluations);
  bool just_reset = true;

  for (res.iterations = 0; res.iterations < opt.max_iterations;) {
    if (fx <= opt.loss_tol) {
      res.status = LbfgsStatus::loss_tol;
      return res;
    }
    if (g.cwiseAbs().maxCoeff() <= opt.gradient_tol * std::abs(fx)) {
      res.status = LbfgsStatus::gradient_tol;
      return res;
    }
    const auto& tr = res.trace;
    if (static_cast<int>(tr.size()) > opt.stall_window) {
      const double old = tr[tr.size() - 1 - static_cast<std::size_t>(opt.stall_window)];
      if (old - fx <= opt.rel_decrease_tol * std::abs(old)) {
        res.status = LbfgsStatus::stalled;
        return res;
      }
    }

    // two-loop recursion
    Eigen::VectorXd q = -g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    if (!(q.dot(g) < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      q = -g;
    }
    const double step0 =
        s_hist.empty() ? std::min(1.0, 1.0 / std::max(q.norm(), 1e-300)) : 1.0;

    Probe next;
    if (!ls.run(res.x, fx, g, q, step0, next)) {
      if (s_hist.empty() && just_reset) {
        res.status = LbfgsStatus::line_search_failed;
        return res;
      }
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      just_reset = true;
      continue;
    }
    just_reset = false;
    ++res.iterations;
    Eigen::VectorXd s = next.x - res.x;
    Eigen::VectorXd y = next.g - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    res.x = std::move(next.x);
    g = std::move(next.g);
    fx = next.f;
    res.f = fx;
    res.trace.push_back(fx);
  }
  res.status = LbfgsStatus::max_iterations;
  return res;
}

}  // namespace hmor
