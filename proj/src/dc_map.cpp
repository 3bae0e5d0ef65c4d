#include "hmor/dc_map.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hmor/error.hpp"
#include "hmor/parallel.hpp"

namespace hmor {

namespace {

std::string fmt_point(const PortVoltages& v) {
  std::ostringstream s;
  s.precision(17);
  s << '(' << v.v1 << ',' << v.v2 << ',' << v.v3 << ')';
  return s.str();
}

const char* port_name(std::size_t i) {
  static const char* names[] = {"V1", "V2", "V3"};
  return names[i];
}

// Index of the cell holding x on a sorted axis; interior nodes go to the
// lower-index cell.
std::size_t cell_on_axis(const std::vector<double>& axis, double x) {
  auto idx = static_cast<std::size_t>(std::lower_bound(axis.begin(), axis.end(), x) - axis.begin());
  return idx == 0 ? 0 : std::min(idx - 1, axis.size() - 2);
}

}  // namespace

void GridAxes::validate() const {
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& a = axis[i];
    if (a.size() < 2) {
      throw ValidationError(std::string("GridAxes: axis ") + port_name(i) +
                            " needs at least 2 points, got " + std::to_string(a.size()));
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (!std::isfinite(a[k])) {
        throw ValidationError(std::string("GridAxes: non-finite value on axis ") + port_name(i));
      }
      if (k > 0 && !(a[k] > a[k - 1])) {
        throw ValidationError(std::string("GridAxes: axis ") + port_name(i) +
                              " is not strictly increasing at index " + std::to_string(k));
      }
    }
  }
}

GridAxes GridAxes::uniform(double vmin, double vmax, std::size_t points) {
  return uniform({vmin, vmin, vmin}, {vmax, vmax, vmax}, {points, points, points});
}

GridAxes GridAxes::uniform(const std::array<double, 3>& vmin, const std::array<double, 3>& vmax,
                           const std::array<std::size_t, 3>& points) {
  GridAxes g;
  for (std::size_t i = 0; i < 3; ++i) {
    if (points[i] < 2) throw ValidationError("GridAxes::uniform: need at least 2 points");
    if (!(vmax[i] > vmin[i])) throw ValidationError("GridAxes::uniform: empty voltage range");
    auto& a = g.axis[i];
    a.resize(points[i]);
    const double n = static_cast<double>(points[i] - 1);
    for (std::size_t k = 0; k < points[i]; ++k) {
      // endpoints land exactly on vmin/vmax
      double s = static_cast<double>(k) / n;
      a[k] = (1.0 - s) * vmin[i] + s * vmax[i];
    }
    a.back() = vmax[i];
  }
  return g;
}

DcTable::DcTable(GridAxes axes, std::array<std::vector<double>, 3> currents)
    : axes_(std::move(axes)), currents_(std::move(currents)) {
  axes_.validate();
  const std::size_t n = axes_.node_count();
  for (std::size_t j = 0; j < 3; ++j) {
    if (currents_[j].size() != n) {
      throw ValidationError("DcTable: current array i" + std::to_string(j + 1) + " has " +
                            std::to_string(currents_[j].size()) + " entries, expected " +
                            std::to_string(n));
    }
    for (double c : currents_[j]) {
      if (!std::isfinite(c)) {
        throw ValidationError("DcTable: non-finite current in i" + std::to_string(j + 1));
      }
    }
  }
}

PortCurrents DcTable::node_currents(std::size_t p, std::size_t q, std::size_t r) const {
  auto k = flat_index(p, q, r);
  return {currents_[0][k], currents_[1][k], currents_[2][k]};
}

bool DcTable::contains(const PortVoltages& v) const noexcept {
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(v[i] >= axes_.lower(i) && v[i] <= axes_.upper(i))) return false;
  }
  return true;
}

PortVoltages DcTable::clamp(const PortVoltages& v) const noexcept {
  PortVoltages c;
  for (std::size_t i = 0; i < 3; ++i) c[i] = std::clamp(v[i], axes_.lower(i), axes_.upper(i));
  return c;
}

DcTable build_table(std::span<const DcSample> samples, const GridAxes& axes) {
  axes.validate();
  const std::size_t n = axes.node_count();
  std::array<std::vector<double>, 3> cur;
  for (auto& c : cur) c.assign(n, 0.0);
  std::vector<char> seen(n, 0);

  auto index_on = [&](std::size_t port, double x, const PortVoltages& v) {
    const auto& a = axes.axis[port];
    auto it = std::lower_bound(a.begin(), a.end(), x);
    if (it == a.end() || *it != x) {
      throw ValidationError("build_table: sample voltage " + fmt_point(v) + " has " +
                            port_name(port) + " off the grid axis");
    }
    return static_cast<std::size_t>(it - a.begin());
  };

  for (const auto& s : samples) {
    std::size_t p = index_on(0, s.v.v1, s.v);
    std::size_t q = index_on(1, s.v.v2, s.v);
    std::size_t r = index_on(2, s.v.v3, s.v);
    std::size_t k = (p * axes.size(1) + q) * axes.size(2) + r;
    if (seen[k]) throw ValidationError("build_table: duplicate sample at node " + fmt_point(s.v));
    seen[k] = 1;
    cur[0][k] = s.i.i1;
    cur[1][k] = s.i.i2;
    cur[2][k] = s.i.i3;
  }
  for (std::size_t p = 0; p < axes.size(0); ++p) {
    for (std::size_t q = 0; q < axes.size(1); ++q) {
      for (std::size_t r = 0; r < axes.size(2); ++r) {
        if (!seen[(p * axes.size(1) + q) * axes.size(2) + r]) {
          PortVoltages v{axes.axis[0][p], axes.axis[1][q], axes.axis[2][r]};
          throw ValidationError("build_table: missing sample at node " + fmt_point(v));
        }
      }
    }
  }
  return DcTable(axes, std::move(cur));
}

CellLocation locate_cell(const DcTable& table, const PortVoltages& v) {
  const auto& axes = table.axes();
  CellLocation loc;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& a = axes.axis[i];
    if (!(v[i] >= a.front())) {
      throw DomainError(std::string("voltage ") + port_name(i) + " below table range: " +
                            fmt_point(v) + ", lower bound " + std::to_string(a.front()),
                        static_cast<int>(i) + 1, v[i], a.front());
    }
    if (!(v[i] <= a.back())) {
      throw DomainError(std::string("voltage ") + port_name(i) + " above table range: " +
                            fmt_point(v) + ", upper bound " + std::to_string(a.back()),
                        static_cast<int>(i) + 1, v[i], a.back());
    }
    std::size_t c = cell_on_axis(a, v[i]);
    loc.cell[i] = c;
    loc.local[i] = (v[i] - a[c]) / (a[c + 1] - a[c]);
  }
  return loc;
}

namespace {

// Trilinear blend of the eight corner values of one current array. The
// (1-s)*a + s*b form returns corner data bit-exactly at s in {0,1}.
double blend(const DcTable& t, std::span<const double> data, const CellLocation& loc) {
  const auto [p, q, r] = loc.cell;
  const double s1 = loc.local[0], s2 = loc.local[1], s3 = loc.local[2];
  auto line = [&](std::size_t pp, std::size_t qq) {
    std::size_t k = t.flat_index(pp, qq, r);
    return (1.0 - s3) * data[k] + s3 * data[k + 1];
  };
  auto face = [&](std::size_t pp) { return (1.0 - s2) * line(pp, q) + s2 * line(pp, q + 1); };
  return (1.0 - s1) * face(p) + s1 * face(p + 1);
}

PortCurrents eval_located(const DcTable& t, const CellLocation& loc) {
  return {blend(t, t.currents(0), loc), blend(t, t.currents(1), loc),
          blend(t, t.currents(2), loc)};
}

PhiVector phi_from(const PortCurrents& c) {
  return {c.i1, c.i2, c.i3, c.i1 * c.i1, c.i2 * c.i2, c.i3 * c.i3};
}

}  // namespace

PortCurrents eval_idc(const DcTable& table, const PortVoltages& v, BoxMode mode) {
  const PortVoltages q = mode == BoxMode::clamp ? table.clamp(v) : v;
  return eval_located(table, locate_cell(table, q));
}

PhiVector eval_phi(const DcTable& table, const PortVoltages& v, BoxMode mode) {
  return phi_from(eval_idc(table, v, mode));
}

PhiJacobian phi_jacobian(const DcTable& table, const PortVoltages& v, double step) {
  const auto loc = locate_cell(table, v);
  const auto& axes = table.axes();
  const PortCurrents base = eval_located(table, loc);
  PhiJacobian jac = PhiJacobian::Zero();
  for (std::size_t k = 0; k < 3; ++k) {
    const double lo = axes.axis[k][loc.cell[k]];
    const double hi = axes.axis[k][loc.cell[k] + 1];
    const double h = step > 0.0 ? step : 1e-4 * (hi - lo);
    double a = v[k], b = v[k];
    if (v[k] - h >= lo && v[k] + h <= hi) {
      a = v[k] - h;
      b = v[k] + h;
    } else if (v[k] + h <= hi) {
      b = v[k] + h;
    } else if (v[k] - h >= lo) {
      a = v[k] - h;
    } else {
      a = lo;
      b = hi;
    }
    PortVoltages va = v, vb = v;
    va[k] = a;
    vb[k] = b;
    const PortCurrents ia = eval_idc(table, va);
    const PortCurrents ib = eval_idc(table, vb);
    for (std::size_t j = 0; j < 3; ++j) {
      const double d = (ib[j] - ia[j]) / (b - a);
      jac(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = d;
      jac(static_cast<Eigen::Index>(j + 3), static_cast<Eigen::Index>(k)) = 2.0 * base[j] * d;
    }
  }
  return jac;
}

namespace {

void check_batch(std::span<const double> v1, std::span<const double> v2,
                 std::span<const double> v3) {
  if (v1.size() != v2.size() || v1.size() != v3.size()) {
    throw ValidationError("eval_phi_batch: voltage channels differ in length");
  }
}

}  // namespace

std::array<std::vector<double>, 6> eval_phi_batch_serial(const DcTable& table,
                                                         std::span<const double> v1,
                                                         std::span<const double> v2,
                                                         std::span<const double> v3,
                                                         BoxMode mode) {
  check_batch(v1, v2, v3);
  std::array<std::vector<double>, 6> out;
  for (auto& c : out) c.resize(v1.size());
  for (std::size_t k = 0; k < v1.size(); ++k) {
    PhiVector phi = eval_phi(table, {v1[k], v2[k], v3[k]}, mode);
    for (std::size_t c = 0; c < 6; ++c) out[c][k] = phi[c];
  }
  return out;
}

std::array<std::vector<double>, 6> eval_phi_batch(const DcTable& table, std::span<const double> v1,
                                                  std::span<const double> v2,
                                                  std::span<const double> v3, BoxMode mode) {
  check_batch(v1, v2, v3);
  std::array<std::vector<double>, 6> out;
  for (auto& c : out) c.resize(v1.size());
  const auto n = static_cast<std::ptrdiff_t>(v1.size());
  // Exceptions cannot cross the parallel region; record the first bad sample.
  std::ptrdiff_t first_bad = n;
#pragma omp parallel for num_threads(thread_cap()) schedule(static) reduction(min : first_bad)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto u = static_cast<std::size_t>(k);
    PortVoltages v{v1[u], v2[u], v3[u]};
    if (mode == BoxMode::strict && !table.contains(v)) {
      first_bad = std::min(first_bad, k);
      continue;
    }
    PhiVector phi = eval_phi(table, v, BoxMode::clamp);
    for (std::size_t c = 0; c < 6; ++c) out[c][u] = phi[c];
  }
  if (first_bad < n) {
    const auto u = static_cast<std::size_t>(first_bad);
    eval_phi(table, {v1[u], v2[u], v3[u]}, BoxMode::strict);  // rethrows with details
  }
  return out;
}

nlohmann::json table_to_json(const DcTable& table) {
  nlohmann::json j;
  j["axes"] = nlohmann::json::array();
  for (const auto& a : table.axes().axis) j["axes"].push_back(a);
  j["currents"] = {{"i1", std::vector<double>(table.currents(0).begin(), table.currents(0).end())},
                   {"i2", std::vector<double>(table.currents(1).begin(), table.currents(1).end())},
                   {"i3", std::vector<double>(table.currents(2).begin(), table.currents(2).end())}};
  j["units"] = {{"voltage", "V"}, {"current", "A"}};
  return j;
}

DcTable table_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("units")) {
      const auto& u = j.at("units");
      if (u.at("voltage") != "V" || u.at("current") != "A") {
        throw ValidationError("DC table: units must be {\"voltage\":\"V\",\"current\":\"A\"}");
      }
    }
    const auto& ax = j.at("axes");
    if (!ax.is_array() || ax.size() != 3) throw ValidationError("DC table: 'axes' needs 3 arrays");
    GridAxes axes;
    for (std::size_t i = 0; i < 3; ++i) axes.axis[i] = ax.at(i).get<std::vector<double>>();
    std::array<std::vector<double>, 3> cur;
    const auto& c = j.at("currents");
    cur[0] = c.at("i1").get<std::vector<double>>();
    cur[1] = c.at("i2").get<std::vector<double>>();
    cur[2] = c.at("i3").get<std::vector<double>>();
    return DcTable(std::move(axes), std::move(cur));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("DC table: malformed JSON: ") + e.what());
  }
}

}  // namespace hmor
