#include "hmor/rom_runtime.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "hmor/error.hpp"
#include "hmor/io.hpp"
#include "hmor/ode.hpp"

namespace hmor {

namespace fs = std::filesystem;
using Eigen::Index;

void HammersteinModel::validate() const {
  ss.validate();
  table.axes().validate();
}

TimeSeries rom_transient(const HammersteinModel& model, const TimeSeries& sources,
                         const LoadSpec& load, double v3_0, const TransientOptions& opt) {
  model.validate();
  load.validate();
  sources.validate();
  if (!(opt.rtol > 0.0)) throw ValidationError("rom_transient: rtol must be > 0");
  const StateSpace& ss = model.ss;
  const Index n = ss.order();
  if (opt.x0.size() != 0 && opt.x0.size() != n) {
    throw ValidationError("rom_transient: initial state has wrong dimension");
  }
  const auto& t = sources.time();
  auto s1 = sources.channel("v1");
  auto s2 = sources.channel("v2");
  const std::size_t N = t.size();

  // absolute tolerances: states weighted by how strongly they reach the
  // output currents, v3 by the table's voltage span
  double i_scale = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    for (double v : model.table.currents(j)) i_scale = std::max(i_scale, std::abs(v));
  }
  if (!(i_scale > 0.0)) i_scale = 1.0;
  double v_scale = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    v_scale = std::max({v_scale, std::abs(model.table.axes().lower(j)),
                        std::abs(model.table.axes().upper(j))});
  }
  if (!(v_scale > 0.0)) v_scale = 1.0;
  Eigen::VectorXd atol(n + 1);
  for (Index i = 0; i < n; ++i) {
    const double reach = ss.c.col(i).cwiseAbs().maxCoeff();
    atol[i] = reach > 0.0 ? 1e-3 * opt.rtol * i_scale / reach : 1.0;
  }
  atol[n] = 1e-3 * opt.rtol * v_scale;
  DormandPrince solver(opt.rtol, atol);

  Eigen::VectorXd y(n + 1);
  y.head(n) = opt.x0.size() == 0 ? Eigen::VectorXd::Zero(n) : opt.x0;
  y[n] = v3_0;
  const double c_load = load.c_load;
  Eigen::Matrix<double, 6, 1> phi;
  auto eval = [&](double v1, double v2, double v3) {
    const PhiVector p = eval_phi(model.table, {v1, v2, v3}, opt.mode);
    for (int c = 0; c < 6; ++c) phi[c] = p[static_cast<std::size_t>(c)];
  };

  std::vector<double> v3(N), i1(N), i2(N), i3(N);
  auto record = [&](std::size_t k) {
    eval(s1[k], s2[k], y[n]);
    const Eigen::Vector3d cur = ss.c * y.head(n) + ss.d * phi;
    v3[k] = y[n];
    i1[k] = cur[0];
    i2[k] = cur[1];
    i3[k] = cur[2];
  };

  record(0);
  for (std::size_t k = 0; k + 1 < N; ++k) {
    const double t0 = t[k], dt = t[k + 1] - t[k];
    const double a1 = s1[k], d1 = (s1[k + 1] - s1[k]) / dt;
    const double a2 = s2[k], d2 = (s2[k + 1] - s2[k]) / dt;
    auto rhs = [&](double tt, const Eigen::VectorXd& yy, Eigen::VectorXd& dy) {
      eval(a1 + (tt - t0) * d1, a2 + (tt - t0) * d2, yy[n]);
      dy.head(n).noalias() = ss.a * yy.head(n) + ss.b * phi;
      const double cur3 = ss.c.row(2).dot(yy.head(n)) + ss.d.row(2).dot(phi);
      dy[n] = -cur3 / c_load;
    };
    solver.advance(rhs, t0, t[k + 1], y);
    record(k + 1);
  }
  std::vector<double> c1(s1.begin(), s1.end()), c2(s2.begin(), s2.end());
  return TimeSeries(t, {"v1", "v2", "v3", "i1", "i2", "i3"},
                    {std::move(c1), std::move(c2), std::move(v3), std::move(i1), std::move(i2),
                     std::move(i3)});
}

OperatingPoint dc_operating_point(const DcTable& table, double v1, double v2, double tol) {
  if (!(tol > 0.0)) throw ValidationError("operating point: tol must be > 0");
  const auto& ax = table.axes().axis[2];
  auto f = [&](double v3) { return eval_idc(table, {v1, v2, v3}).i3; };

  std::vector<double> fn(ax.size());
  for (std::size_t r = 0; r < ax.size(); ++r) fn[r] = f(ax[r]);

  // sign-change events along the V3 axis: exact zeros at nodes and strict
  // sign flips between neighbours
  std::size_t events = 0;
  std::optional<std::size_t> first_zero, first_bracket;
  for (std::size_t r = 0; r < ax.size(); ++r) {
    if (fn[r] == 0.0) {
      ++events;
      if (!first_zero && !first_bracket) first_zero = r;
    } else if (r + 1 < ax.size() && fn[r + 1] != 0.0 && std::signbit(fn[r]) != std::signbit(fn[r + 1])) {
      ++events;
      if (!first_zero && !first_bracket) first_bracket = r;
    }
  }
  OperatingPoint op;
  op.v1 = v1;
  op.v2 = v2;
  op.multiple_roots = events > 1;
  if (first_zero) {
    op.v3 = ax[*first_zero];
    op.residual = 0.0;
    return op;
  }
  if (!first_bracket) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "operating point: I3 does not change sign over V3 in [" << ax.front() << ", "
        << ax.back() << "] at V1=" << v1 << ", V2=" << v2 << " (I3 = " << fn.front() << " A, "
        << fn.back() << " A)";
    throw NumericalError(msg.str());
  }
  double a = ax[*first_bracket], b = ax[*first_bracket + 1];
  double fa = fn[*first_bracket];
  double m = a, fm = fa;
  for (;;) {
    m = 0.5 * (a + b);
    fm = f(m);
    ++op.iterations;
    if (std::abs(fm) <= tol || fm == 0.0) break;
    if (std::signbit(fm) == std::signbit(fa)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
    if (!(b - a > 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)))) {
      std::ostringstream msg;
      msg << "operating point: bracket collapsed with |I3| = " << std::abs(fm) << " A > tol";
      throw NumericalError(msg.str());
    }
  }
  op.v3 = m;
  op.residual = f(m);
  return op;
}

OperatingPoint rom_dc_operating_point(const HammersteinModel& model, double v1, double v2,
                                      double tol) {
  return dc_operating_point(model.table, v1, v2, tol);
}

std::vector<std::complex<double>> rom_ac_response(const HammersteinModel& model,
                                                  const OperatingPoint& op, const LoadSpec& load,
                                                  std::span<const double> freqs_hz) {
  model.validate();
  load.validate();
  const PhiJacobian jac = phi_jacobian(model.table, op.voltages());
  const auto g = frequency_response(model.ss, freqs_hz);
  std::vector<std::complex<double>> out(freqs_hz.size());
  for (std::size_t k = 0; k < freqs_hz.size(); ++k) {
    const Eigen::Matrix3cd y = g[k] * jac.cast<std::complex<double>>();
    const std::complex<double> jw(0.0, 2.0 * std::numbers::pi * freqs_hz[k]);
    const std::complex<double> den = jw * load.c_load + y(2, 2);
    if (den == 0.0) {
      std::ostringstream msg;
      msg << "rom_ac: singular load equation at f=" << freqs_hz[k] << " Hz";
      throw NumericalError(msg.str());
    }
    out[k] = -y(2, 0) / den;
  }
  return out;
}

std::vector<BodePoint> rom_ac(const HammersteinModel& model, const OperatingPoint& op,
                              const LoadSpec& load, std::span<const double> freqs_hz) {
  const auto h = rom_ac_response(model, op, load, freqs_hz);
  return to_bode(freqs_hz, h);
}

std::vector<OperatingPoint> dc_transfer_curve(const DcTable& table,
                                              std::span<const double> v1_grid, double v2,
                                              double tol) {
  std::vector<OperatingPoint> out;
  out.reserve(v1_grid.size());
  for (double v1 : v1_grid) out.push_back(dc_operating_point(table, v1, v2, tol));
  return out;
}

std::vector<OperatingPoint> dc_transfer_curve(const HammersteinModel& model,
                                              std::span<const double> v1_grid, double v2,
                                              double tol) {
  return dc_transfer_curve(model.table, v1_grid, v2, tol);
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Index rows, Index cols,
                                 const char* name) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
    throw ValidationError(std::string("model: ") + name + " has the wrong number of rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ValidationError(std::string("model: ") + name + " has the wrong number of columns");
    }
    for (Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json state_space_to_json(const StateSpace& ss) {
  ss.validate();
  return {{"n", ss.order()},
          {"A", matrix_to_json(ss.a)},
          {"B", matrix_to_json(ss.b)},
          {"C", matrix_to_json(ss.c)},
          {"D", matrix_to_json(ss.d)}};
}

StateSpace state_space_from_json(const nlohmann::json& j) {
  try {
    const Index n = j.at("n").get<Index>();
    if (n < 1) throw ValidationError("model: n must be >= 1");
    StateSpace ss{matrix_from_json(j.at("A"), n, n, "A"),
                  matrix_from_json(j.at("B"), n, kPhiWidth, "B"),
                  matrix_from_json(j.at("C"), kPorts, n, "C"),
                  matrix_from_json(j.at("D"), kPorts, kPhiWidth, "D")};
    ss.validate();
    return ss;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }
}

nlohmann::json model_to_json(const HammersteinModel& model) {
  nlohmann::json j = state_space_to_json(model.ss);
  j["table"] = table_to_json(model.table);
  j["meta"] = model.meta;
  return j;
}

void save_model(const HammersteinModel& model, const fs::path& path) {
  write_json_atomic(path, model_to_json(model));
}

void save_model(const HammersteinModel& model, const fs::path& path, const fs::path& table_path) {
  write_json_atomic(table_path, table_to_json(model.table));
  nlohmann::json j = state_space_to_json(model.ss);
  // stored relative to the model file so the pair can be moved together
  const fs::path base = fs::absolute(path).parent_path().lexically_normal();
  fs::path ref = fs::absolute(table_path).lexically_normal().lexically_relative(base);
  if (ref.empty()) ref = fs::absolute(table_path);
  j["table_path"] = ref.generic_string();
  j["table_sha256"] = sha256_file(table_path);
  j["meta"] = model.meta;
  write_json_atomic(path, j);
}

HammersteinModel load_model(const fs::path& path) {
  const nlohmann::json j = read_json(path);
  HammersteinModel m;
  m.ss = state_space_from_json(j);
  if (j.contains("table")) {
    m.table = table_from_json(j["table"]);
  } else if (j.contains("table_path")) {
    if (!j.contains("table_sha256")) throw ValidationError("model: table_path without table_sha256");
    fs::path tp = j["table_path"].get<std::string>();
    if (tp.is_relative()) tp = path.parent_path() / tp;
    const std::string text = read_file(tp);
    const std::string want = j["table_sha256"].get<std::string>();
    if (sha256_hex(text) != want) {
      throw ValidationError("model: table hash mismatch for " + tp.string());
    }
    try {
      m.table = table_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(tp.string() + ": malformed JSON: " + e.what());
    }
  } else {
    throw ValidationError("model: needs `table` or `table_path`");
  }
  m.meta = j.value("meta", nlohmann::json::object());
  return m;
}

}  // namespace hmor
