#include "hmor/stimulus.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "hmor/error.hpp"

namespace hmor {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

void check_band(double f0, double f1) {
  if (!(f0 > 0.0) || !(f1 > f0) || !std::isfinite(f1)) {
    throw ValidationError("chirp: need 0 < f0 < f1 (got f0=" + std::to_string(f0) +
                          ", f1=" + std::to_string(f1) + ")");
  }
}

}  // namespace

void ChirpSpec::validate() const {
  check_band(f0, f1);
  if (!(amplitude >= 0.0)) throw ValidationError("chirp: amplitude must be >= 0");
  if (!std::isfinite(v_bias)) throw ValidationError("chirp: non-finite bias");
  if (n_per < 1) throw ValidationError("chirp: n_per must be >= 1");
  if (samples_per_period < 2) throw ValidationError("chirp: samples_per_period must be >= 2");
}

void PulseSpec::validate() const {
  if (!(ramp > 0.0)) throw ValidationError("pulse: ramp time must be > 0");
  if (!(dwell_high >= 0.0) || !(dwell_low >= 0.0)) {
    throw ValidationError("pulse: dwell times must be >= 0");
  }
  if (periods < 1) throw ValidationError("pulse: periods must be >= 1");
  if (points_per_segment < 1) throw ValidationError("pulse: points_per_segment must be >= 1");
}

void SineSpec::validate() const {
  if (!(frequency > 0.0) || !std::isfinite(frequency)) {
    throw ValidationError("sine: frequency must be > 0");
  }
  if (!(amplitude >= 0.0)) throw ValidationError("sine: amplitude must be >= 0");
  if (n_per < 1) throw ValidationError("sine: n_per must be >= 1");
  if (samples_per_period < 2) throw ValidationError("sine: samples_per_period must be >= 2");
}

double chirp_horizon(double f0, double f1, double n_per) {
  check_band(f0, f1);
  return n_per * (std::log(f1) - std::log(f0)) / (f1 - f0);
}

double chirp_phase(double t, double f0, double f1, double T) {
  check_band(f0, f1);
  if (!(t >= 0.0) || !(t <= T)) {
    throw ValidationError("chirp_phase: t outside [0, T]");
  }
  const double lr = std::log(f1) - std::log(f0);
  // f0^(1-t/T) f1^(t/T) - f0 = f0 * expm1((t/T) ln(f1/f0))
  return two_pi * T * f0 * std::expm1(t / T * lr) / lr;
}

double invert_phase(double theta, double f0, double f1, double T) {
  check_band(f0, f1);
  const double lr = std::log(f1) - std::log(f0);
  const double theta_max = two_pi * T * (f1 - f0) / lr;
  if (!(theta >= 0.0) || theta > theta_max * (1.0 + 1e-12)) {
    throw ValidationError("invert_phase: theta outside [0, phase(T)]");
  }
  return std::min(T, T * std::log1p(theta * lr / (two_pi * T * f0)) / lr);
}

double chirp_frequency(double t, double f0, double f1, double T) {
  return f0 * std::pow(f1 / f0, t / T);
}

TimeSeries gen_chirp_pair(const ChirpSpec& spec) {
  spec.validate();
  const double T = chirp_horizon(spec.f0, spec.f1, static_cast<double>(spec.n_per));
  const std::size_t steps = spec.n_per * spec.samples_per_period;
  std::vector<double> t(steps + 1), v1(steps + 1), v2(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    // phase = 2 pi k / samples_per_period; sin evaluated on the exact grid phase
    const double cycles = static_cast<double>(k) / static_cast<double>(spec.samples_per_period);
    const double theta = two_pi * cycles;
    t[k] = k == steps ? T : invert_phase(theta, spec.f0, spec.f1, T);
    const double s = spec.amplitude * std::sin(theta);
    v1[k] = spec.v_bias + s;
    v2[k] = spec.v_bias - s;
  }
  return TimeSeries(std::move(t), {"v1", "v2"}, {std::move(v1), std::move(v2)});
}

TimeSeries gen_pulse(const PulseSpec& spec) {
  spec.validate();
  struct Segment {
    double duration;
    double from;
    double to;
  };
  const Segment cycle[] = {{spec.dwell_low, spec.low, spec.low},
                           {spec.ramp, spec.low, spec.high},
                           {spec.dwell_high, spec.high, spec.high},
                           {spec.ramp, spec.high, spec.low}};
  std::vector<double> t{0.0}, v1{spec.low};
  double t0 = 0.0;
  for (std::size_t p = 0; p < spec.periods; ++p) {
    for (const auto& seg : cycle) {
      if (seg.duration <= 0.0) continue;
      const std::size_t m = spec.points_per_segment;
      for (std::size_t k = 1; k <= m; ++k) {
        const double s = static_cast<double>(k) / static_cast<double>(m);
        t.push_back(k == m ? t0 + seg.duration : t0 + s * seg.duration);
        v1.push_back((1.0 - s) * seg.from + s * seg.to);
      }
      t0 += seg.duration;
    }
  }
  std::vector<double> v2(t.size(), spec.v2);
  return TimeSeries(std::move(t), {"v1", "v2"}, {std::move(v1), std::move(v2)});
}

TimeSeries gen_sine(const SineSpec& spec) {
  spec.validate();
  const std::size_t steps = spec.n_per * spec.samples_per_period;
  const double dt = 1.0 / (spec.frequency * static_cast<double>(spec.samples_per_period));
  std::vector<double> t(steps + 1), v1(steps + 1), v2(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double cycles = static_cast<double>(k) / static_cast<double>(spec.samples_per_period);
    t[k] = static_cast<double>(k) * dt;
    const double s = spec.amplitude * std::sin(two_pi * cycles);
    v1[k] = spec.v_bias + s;
    v2[k] = spec.v_bias - s;
  }
  return TimeSeries(std::move(t), {"v1", "v2"}, {std::move(v1), std::move(v2)});
}

}  // namespace hmor
