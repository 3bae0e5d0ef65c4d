#pragma once

// Excitation waveforms for training and validation runs: exponential chirps
// sampled with a fixed number of points per period, trapezoidal pulses and
// fixed-frequency sinusoids. All generators emit channels `v1`, `v2`.

#include <cstddef>

#include "hmor/time_series.hpp"

namespace hmor {

struct ChirpSpec {
  double f0 = 100e3;  // Hz, start
  double f1 = 5e9;    // Hz, end
  double v_bias = 2.5;
  double amplitude = 50e-3;
  std::size_t n_per = 100;
  std::size_t samples_per_period = 500;

  void validate() const;
};

struct PulseSpec {
  double low = 2.45;
  double high = 2.55;
  double ramp = 10e-9;        // s, each edge
  double dwell_high = 40e-9;  // s
  double dwell_low = 40e-9;   // s
  double v2 = 2.45;
  std::size_t periods = 2;
  std::size_t points_per_segment = 50;

  void validate() const;
};

struct SineSpec {
  double frequency = 10e3;
  double amplitude = 50e-3;
  double v_bias = 2.5;
  std::size_t n_per = 10;
  std::size_t samples_per_period = 200;

  void validate() const;
};

// Horizon holding exactly n_per periods of the f0 -> f1 exponential sweep.
double chirp_horizon(double f0, double f1, double n_per);

// Accumulated phase of the exponential sweep at time t in [0, T].
double chirp_phase(double t, double f0, double f1, double T);

// Closed-form inverse of chirp_phase for theta in [0, chirp_phase(T)].
double invert_phase(double theta, double f0, double f1, double T);

// Instantaneous frequency f0^(1-t/T) f1^(t/T).
double chirp_frequency(double t, double f0, double f1, double T);

// v1 = bias + A sin(phase), v2 = bias - A sin(phase); timestamps are the
// inverse phase of a uniform phase grid so every period gets the same number
// of samples. Includes both t = 0 and t = T.
TimeSeries gen_chirp_pair(const ChirpSpec& spec);

// Trapezoidal v1 starting and ending at `low`; breakpoints are sampled
// exactly. v2 is constant.
TimeSeries gen_pulse(const PulseSpec& spec);

// v1 = bias + A sin(2 pi f t), v2 = bias - A sin(2 pi f t), uniform grid.
TimeSeries gen_sine(const SineSpec& spec);

}  // namespace hmor
