#pragma once

// Synthetic full-order reference circuit: a rail-limited behavioral
// differential amplifier with one internal parasitic pole and a resistive
// output stage, plus a Shichman-Hodges drain-current primitive.
//
//   e(v1,v2) = v_mid + S(A_d (v1 - v2) + A_cm (v1 + v2 - 2 v_mid))
//   tau dw/dt = e - w
//   i3 = (v3 - w) / R_out,   i1 = C_gate dv1/dt,   i2 = C_gate dv2/dt
//
// Port currents flow into the device. With a capacitive load on port 3,
// C_L dv3/dt = -i3.

#include <complex>
#include <span>
#include <vector>

#include "hmor/bode.hpp"
#include "hmor/dc_map.hpp"
#include "hmor/time_series.hpp"
#include "json.hpp"

namespace hmor {

struct ShParams {
  double k = 2e-3;  // A/V^2
  double vth = 1.0;
};

// Cutoff, triode and saturation regions; requires vds >= 0.
double sh_drain_current(const ShParams& p, double vgs, double vds);

struct FomSpec {
  double a_d = 50.0;
  double a_cm = 0.01;
  double v_rail_lo = 0.0;
  double v_rail_hi = 5.0;
  double v_mid = 2.5;
  double r_out = 10e3;
  double tau = 2e-9;
  double c_gate = 0.0;
  double softness = 0.1;

  void validate() const;

  // Smooth rail clipper: slope 1 at the origin, range
  // (v_rail_lo - v_mid, v_rail_hi - v_mid), corner width `softness`.
  double saturate(double x) const;
  double saturate_slope(double x) const;

  double drive(double v1, double v2) const;
  double internal_target(double v1, double v2) const;  // e(v1, v2)
  double de_dv1(double v1, double v2) const;
};

struct LoadSpec {
  double c_load = 5e-12;
  void validate() const;
};

nlohmann::json fom_to_json(const FomSpec& spec);
FomSpec fom_from_json(const nlohmann::json& j);

// Steady state: w = e, i1 = i2 = 0.
PortCurrents fom_dc(const FomSpec& spec, const PortVoltages& v);

// fom_dc at every grid node, V1 index slowest. The parallel kernel and the
// serial reference return identical samples.
std::vector<DcSample> fom_dc_sweep(const FomSpec& spec, const GridAxes& axes);
std::vector<DcSample> fom_dc_sweep_serial(const FomSpec& spec, const GridAxes& axes);

// Closed-loop transient with a capacitive load on port 3. Sources are
// linearly interpolated between samples; the output is sampled at the
// source timestamps with channels v1,v2,v3,i1,i2,i3.
TimeSeries fom_transient(const FomSpec& spec, const TimeSeries& sources, const LoadSpec& load,
                         double v3_0, double rtol = 1e-8);

// Small-signal v1 -> v3 transfer around an operating point (i3 = 0).
std::complex<double> fom_transfer(const FomSpec& spec, const PortVoltages& op,
                                  const LoadSpec& load, double f_hz);
std::vector<BodePoint> fom_ac(const FomSpec& spec, const PortVoltages& op, const LoadSpec& load,
                              std::span<const double> freqs);

// Operating point with v1 = v2 = v_mid and v3 = e.
PortVoltages fom_operating_point(const FomSpec& spec, double v1, double v2);

// Frequency where |H| falls 3 dB below its low-frequency value.
double fom_cutoff(const FomSpec& spec, const PortVoltages& op, const LoadSpec& load);

// 3-axis grid over [vmin, vmax] for a bench table. Ports 1 and 2 get a
// uniform core of `core_points` nodes spanning v_mid +/- core_halfwidth and
// geometric spacing outside it; port 3 is uniform.
GridAxes bench_axes(const FomSpec& spec, double vmin, double vmax, std::size_t points,
                    double core_halfwidth, std::size_t core_points);

}  // namespace hmor
