#pragma once

// Static nonlinear block: a DC I-V table on a Cartesian voltage grid,
// evaluated by piecewise-trilinear interpolation, and the map
// phi(V) = (I_DC(V), I_DC(V)^2) built from it.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

namespace hmor {

struct PortVoltages {
  double v1 = 0.0;
  double v2 = 0.0;
  double v3 = 0.0;

  double operator[](std::size_t i) const { return i == 0 ? v1 : (i == 1 ? v2 : v3); }
  double& operator[](std::size_t i) { return i == 0 ? v1 : (i == 1 ? v2 : v3); }
};

struct PortCurrents {
  double i1 = 0.0;
  double i2 = 0.0;
  double i3 = 0.0;

  double operator[](std::size_t i) const { return i == 0 ? i1 : (i == 1 ? i2 : i3); }
  double& operator[](std::size_t i) { return i == 0 ? i1 : (i == 1 ? i2 : i3); }
};

// (I1, I2, I3, I1^2, I2^2, I3^2)
using PhiVector = std::array<double, 6>;

using PhiJacobian = Eigen::Matrix<double, 6, 3>;

struct DcSample {
  PortVoltages v;
  PortCurrents i;
};

// Per-port sample voltages; each axis strictly increasing with at least two
// points. Uniform spacing is not required.
struct GridAxes {
  std::array<std::vector<double>, 3> axis;

  std::size_t size(std::size_t port) const { return axis[port].size(); }
  std::size_t node_count() const { return size(0) * size(1) * size(2); }
  double lower(std::size_t port) const { return axis[port].front(); }
  double upper(std::size_t port) const { return axis[port].back(); }

  void validate() const;

  static GridAxes uniform(double vmin, double vmax, std::size_t points);
  static GridAxes uniform(const std::array<double, 3>& vmin, const std::array<double, 3>& vmax,
                          const std::array<std::size_t, 3>& points);
};

// Out-of-box handling: strict raises DomainError, clamp projects onto the box.
enum class BoxMode { strict, clamp };

struct CellLocation {
  std::array<std::size_t, 3> cell{};
  std::array<double, 3> local{};
};

class DcTable {
public:
  DcTable() = default;
  // `currents[j]` is the flat K1*K2*K3 array for port j+1, V1 index slowest.
  DcTable(GridAxes axes, std::array<std::vector<double>, 3> currents);

  const GridAxes& axes() const noexcept { return axes_; }
  std::span<const double> currents(std::size_t port) const { return currents_[port]; }

  std::size_t flat_index(std::size_t p, std::size_t q, std::size_t r) const noexcept {
    return (p * axes_.size(1) + q) * axes_.size(2) + r;
  }
  PortVoltages node(std::size_t p, std::size_t q, std::size_t r) const {
    return {axes_.axis[0][p], axes_.axis[1][q], axes_.axis[2][r]};
  }
  PortCurrents node_currents(std::size_t p, std::size_t q, std::size_t r) const;

  bool contains(const PortVoltages& v) const noexcept;
  PortVoltages clamp(const PortVoltages& v) const noexcept;

private:
  GridAxes axes_;
  std::array<std::vector<double>, 3> currents_;
};

// Places every sample at its grid node. Throws ValidationError naming the
// offending coordinates for missing nodes, duplicates and off-axis voltages.
DcTable build_table(std::span<const DcSample> samples, const GridAxes& axes);

// Cell containing v and the affine position inside it. Points on an interior
// face belong to the lower-index cell; the box is closed.
CellLocation locate_cell(const DcTable& table, const PortVoltages& v);

PortCurrents eval_idc(const DcTable& table, const PortVoltages& v,
                      BoxMode mode = BoxMode::strict);

PhiVector eval_phi(const DcTable& table, const PortVoltages& v, BoxMode mode = BoxMode::strict);

// Finite-difference Jacobian d(phi)/d(v1,v2,v3). `step <= 0` selects
// 1e-4 times the spacing of the enclosing cell along each axis. Central
// differences are used when v +/- step stays inside the enclosing cell,
// one-sided differences into the cell otherwise.
PhiJacobian phi_jacobian(const DcTable& table, const PortVoltages& v, double step = 0.0);

// Columns of phi over a batch of voltage samples; `out[c][k]` is component c
// at sample k. The parallel kernel and the serial reference produce
// bit-identical results.
std::array<std::vector<double>, 6> eval_phi_batch(const DcTable& table, std::span<const double> v1,
                                                  std::span<const double> v2,
                                                  std::span<const double> v3, BoxMode mode);
std::array<std::vector<double>, 6> eval_phi_batch_serial(const DcTable& table,
                                                         std::span<const double> v1,
                                                         std::span<const double> v2,
                                                         std::span<const double> v3,
                                                         BoxMode mode);

nlohmann::json table_to_json(const DcTable& table);
DcTable table_from_json(const nlohmann::json& j);

}  // namespace hmor
