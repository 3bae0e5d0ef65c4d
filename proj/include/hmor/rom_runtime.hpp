#pragma once

// The reduced-order model: DC table + linear block, with closed-loop
// transient, DC operating point and small-signal AC analyses.
//
// As a DAE the model reads
//   dx/dt = A x + B phi(v),   i = C x + D phi(v),   phi(v) = (I_DC(v), I_DC(v)^2)
// with port currents i flowing into the device. A capacitive load on port 3
// adds C_L dv3/dt = -i3.

#include <complex>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmor/bode.hpp"
#include "hmor/dc_map.hpp"
#include "hmor/fom_bench.hpp"
#include "hmor/lti_sim.hpp"
#include "hmor/time_series.hpp"
#include "json.hpp"

namespace hmor {

struct HammersteinModel {
  DcTable table;
  StateSpace ss;
  nlohmann::json meta = nlohmann::json::object();

  Eigen::Index order() const noexcept { return ss.order(); }
  void validate() const;
};

struct TransientOptions {
  double rtol = 1e-8;
  BoxMode mode = BoxMode::clamp;
  Eigen::VectorXd x0;  // empty: zero
};

// Sources need channels v1, v2; they are linearly interpolated between
// samples. Output channels v1,v2,v3,i1,i2,i3 at the source timestamps.
TimeSeries rom_transient(const HammersteinModel& model, const TimeSeries& sources,
                         const LoadSpec& load, double v3_0, const TransientOptions& opt = {});

struct OperatingPoint {
  double v1 = 0.0, v2 = 0.0, v3 = 0.0;
  double residual = 0.0;  // table I3 at the returned point
  int iterations = 0;
  bool multiple_roots = false;

  PortVoltages voltages() const { return {v1, v2, v3}; }
};

// Root of the table's I3 in V3 by bisection inside the lowest sign-change
// bracket along the V3 axis.
OperatingPoint rom_dc_operating_point(const HammersteinModel& model, double v1, double v2,
                                      double tol = 1e-9);
OperatingPoint dc_operating_point(const DcTable& table, double v1, double v2, double tol = 1e-9);

// Linearized v1 -> v3 response with v2 held and the capacitive load on port 3.
std::vector<std::complex<double>> rom_ac_response(const HammersteinModel& model,
                                                  const OperatingPoint& op, const LoadSpec& load,
                                                  std::span<const double> freqs_hz);
std::vector<BodePoint> rom_ac(const HammersteinModel& model, const OperatingPoint& op,
                              const LoadSpec& load, std::span<const double> freqs_hz);

std::vector<OperatingPoint> dc_transfer_curve(const HammersteinModel& model,
                                              std::span<const double> v1_grid, double v2,
                                              double tol = 1e-9);
std::vector<OperatingPoint> dc_transfer_curve(const DcTable& table,
                                              std::span<const double> v1_grid, double v2,
                                              double tol = 1e-9);

nlohmann::json state_space_to_json(const StateSpace& ss);
StateSpace state_space_from_json(const nlohmann::json& j);

// Model file: keys n, A, B, C, D (row-major nested arrays), meta, and either
// `table` (embedded) or `table_path` + `table_sha256`. A relative table path
// is resolved against the model file's directory.
nlohmann::json model_to_json(const HammersteinModel& model);
void save_model(const HammersteinModel& model, const std::filesystem::path& path);
// Writes the table to `table_path` and stores a hashed reference to it.
void save_model(const HammersteinModel& model, const std::filesystem::path& path,
                const std::filesystem::path& table_path);
HammersteinModel load_model(const std::filesystem::path& path);

}  // namespace hmor
