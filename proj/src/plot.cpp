#include "hmor/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "hmor/error.hpp"
#include "hmor/io.hpp"

namespace hmor {

namespace {

constexpr double kWidth = 800.0;
constexpr double kPanelHeight = 260.0;
constexpr double kLeft = 90.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kGap = 50.0;
constexpr std::size_t kMaxPoints = 4000;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  const double nf = f < 1.5 ? 1.0 : (f < 3.0 ? 2.0 : (f < 7.0 ? 5.0 : 10.0));
  return nf * mag;
}

struct Range {
  double lo = 0.0, hi = 1.0;
};

Range pad_range(double lo, double hi) {
  if (!(hi - lo > 1e-9 * std::max(std::abs(lo), std::abs(hi)))) {
    const double d = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
    return {lo - d, hi + d};
  }
  const double d = 0.05 * (hi - lo);
  return {lo - d, hi + d};
}

class Panel {
public:
  Panel(double y0, Range x, Range y, bool log_x) : y0_(y0), x_(x), y_(y), log_x_(log_x) {}

  double sx(double v) const {
    const double a = log_x_ ? std::log10(v) : v;
    const double lo = log_x_ ? std::log10(x_.lo) : x_.lo;
    const double hi = log_x_ ? std::log10(x_.hi) : x_.hi;
    return kLeft + (a - lo) / (hi - lo) * (kWidth - kLeft - kRight);
  }
  double sy(double v) const { return y0_ + kPanelHeight - (v - y_.lo) / (y_.hi - y_.lo) * kPanelHeight; }

  void frame(std::ostringstream& os, const std::string& xlabel, const std::string& ylabel) const {
    const double x1 = kWidth - kRight;
    os << "<rect x=\"" << px(kLeft) << "\" y=\"" << px(y0_) << "\" width=\"" << px(x1 - kLeft)
       << "\" height=\"" << px(kPanelHeight) << "\" fill=\"none\" stroke=\"#000\"/>\n";
    // y ticks
    const double ys = nice_step(y_.hi - y_.lo, 5);
    const double yk0 = std::ceil(y_.lo / ys), yk1 = std::floor(y_.hi / ys + 1e-9);
    for (double k = yk0; k <= yk1; k += 1.0) {
      const double v = k * ys;
      const double yy = sy(v);
      const double vv = std::abs(v) < 1e-9 * ys ? 0.0 : v;
      os << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(yy) << "\" x2=\"" << px(x1) << "\" y2=\""
         << px(yy) << "\" stroke=\"#ddd\"/>\n";
      os << "<text x=\"" << px(kLeft - 6) << "\" y=\"" << px(yy + 4)
         << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(vv) << "</text>\n";
    }
    // x ticks
    if (log_x_) {
      for (double d = std::ceil(std::log10(x_.lo)); d <= std::log10(x_.hi) + 1e-12; d += 1.0) {
        const double xx = sx(std::pow(10.0, d));
        os << "<line x1=\"" << px(xx) << "\" y1=\"" << px(y0_) << "\" x2=\"" << px(xx) << "\" y2=\""
           << px(y0_ + kPanelHeight) << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << px(xx) << "\" y=\"" << px(y0_ + kPanelHeight + 15)
           << "\" text-anchor=\"middle\" font-size=\"11\">1e" << fmt(d) << "</text>\n";
      }
    } else {
      const double xs = nice_step(x_.hi - x_.lo, 6);
      const double xk0 = std::ceil(x_.lo / xs), xk1 = std::floor(x_.hi / xs + 1e-9);
      for (double k = xk0; k <= xk1; k += 1.0) {
        const double v = k * xs;
        const double xx = sx(v);
        const double vv = std::abs(v) < 1e-9 * xs ? 0.0 : v;
        os << "<line x1=\"" << px(xx) << "\" y1=\"" << px(y0_) << "\" x2=\"" << px(xx) << "\" y2=\""
           << px(y0_ + kPanelHeight) << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << px(xx) << "\" y=\"" << px(y0_ + kPanelHeight + 15)
           << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(vv) << "</text>\n";
      }
    }
    os << "<text x=\"" << px(0.5 * (kLeft + x1)) << "\" y=\"" << px(y0_ + kPanelHeight + 32)
       << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(xlabel) << "</text>\n";
    os << "<text x=\"16\" y=\"" << px(y0_ + 0.5 * kPanelHeight)
       << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
       << px(y0_ + 0.5 * kPanelHeight) << ")\">" << escape(ylabel) << "</text>\n";
  }

  void polyline(std::ostringstream& os, std::span<const double> x, std::span<const double> y,
                const char* color, bool dashed) const {
    const std::size_t n = x.size();
    const std::size_t stride = n > kMaxPoints ? (n + kMaxPoints - 1) / kMaxPoints : 1;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\"";
    if (dashed) os << " stroke-dasharray=\"5,3\"";
    os << " points=\"";
    for (std::size_t k = 0; k < n; k += stride) os << px(sx(x[k])) << ',' << px(sy(y[k])) << ' ';
    if ((n - 1) % stride != 0) os << px(sx(x[n - 1])) << ',' << px(sy(y[n - 1]));
    os << "\"/>\n";
  }

private:
  double y0_;
  Range x_, y_;
  bool log_x_;
};

void header(std::ostringstream& os, double height, const std::string& title,
            const nlohmann::json& meta) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(kWidth) << "\" height=\""
     << px(height) << "\" viewBox=\"0 0 " << px(kWidth) << ' ' << px(height)
     << "\" font-family=\"sans-serif\">\n";
  os << "<metadata>" << escape(meta.dump()) << "</metadata>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  os << "<text x=\"" << px(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(title) << "</text>\n";
}

void legend(std::ostringstream& os, double y, const std::vector<std::string>& labels) {
  double x = kLeft + 10;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << "<line x1=\"" << px(x) << "\" y1=\"" << px(y) << "\" x2=\"" << px(x + 24) << "\" y2=\""
       << px(y) << "\" stroke=\"" << kColors[i % 6] << "\" stroke-width=\"2\"";
    if (i % 2 == 1) os << " stroke-dasharray=\"5,3\"";
    os << "/>\n";
    os << "<text x=\"" << px(x + 30) << "\" y=\"" << px(y + 4) << "\" font-size=\"11\">"
       << escape(labels[i]) << "</text>\n";
    x += 40 + 7.0 * static_cast<double>(labels[i].size());
  }
}

Range span_of(std::span<const double> a, std::span<const double> b = {}) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : a) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : b) lo = std::min(lo, v), hi = std::max(hi, v);
  return {lo, hi};
}

}  // namespace

std::string overlay_svg(std::span<const double> t, std::span<const double> reference,
                        std::span<const double> test, const OverlayStyle& style) {
  if (t.empty()) throw ValidationError("plot: empty series");
  if (reference.size() != t.size() || test.size() != t.size()) {
    throw ValidationError("plot: series lengths differ");
  }
  std::vector<double> err(t.size());
  double max_err = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    err[k] = test[k] - reference[k];
    max_err = std::max(max_err, std::abs(err[k]));
  }
  nlohmann::json meta = {{"kind", "overlay"},
                         {"samples", t.size()},
                         {"max_abs_error", max_err},
                         {"reference", style.ref_label},
                         {"test", style.test_label}};
  const double height = kTop + 2 * kPanelHeight + kGap + 60;
  std::ostringstream os;
  header(os, height, style.title, meta);

  Range xr = t.size() > 1 ? Range{t.front(), t.back()} : pad_range(t.front(), t.front());
  const Range yr = span_of(reference, test);
  Panel top(kTop, xr, pad_range(yr.lo, yr.hi), false);
  top.frame(os, "t [s]", style.y_label);
  top.polyline(os, t, reference, kColors[0], false);
  top.polyline(os, t, test, kColors[1], true);

  const Range er = span_of(err);
  Panel bottom(kTop + kPanelHeight + kGap, xr, pad_range(er.lo, er.hi), false);
  bottom.frame(os, "t [s]", "error");
  bottom.polyline(os, t, err, kColors[2], false);

  legend(os, height - 12, {style.ref_label, style.test_label});
  os << "</svg>\n";
  return os.str();
}

std::string bode_svg(const std::vector<BodeCurve>& curves, const std::string& title) {
  if (curves.empty()) throw ValidationError("plot: no Bode curves");
  Range fr{std::numeric_limits<double>::infinity(), 0.0};
  Range mr{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  Range pr = mr;
  nlohmann::json meta = {{"kind", "bode"}, {"curves", nlohmann::json::array()}};
  for (const auto& c : curves) {
    if (c.points.empty()) throw ValidationError("plot: empty Bode curve " + c.label);
    nlohmann::json jc = {{"label", c.label}, {"f_hz", nlohmann::json::array()},
                         {"mag_db", nlohmann::json::array()}, {"phase_deg", nlohmann::json::array()}};
    for (const auto& p : c.points) {
      if (!(p.f_hz > 0.0)) throw ValidationError("plot: Bode frequencies must be > 0");
      fr.lo = std::min(fr.lo, p.f_hz);
      fr.hi = std::max(fr.hi, p.f_hz);
      mr.lo = std::min(mr.lo, p.mag_db);
      mr.hi = std::max(mr.hi, p.mag_db);
      pr.lo = std::min(pr.lo, p.phase_deg);
      pr.hi = std::max(pr.hi, p.phase_deg);
      jc["f_hz"].push_back(p.f_hz);
      jc["mag_db"].push_back(p.mag_db);
      jc["phase_deg"].push_back(p.phase_deg);
    }
    meta["curves"].push_back(std::move(jc));
  }
  if (!(fr.hi > fr.lo)) fr = {fr.lo / 10.0, fr.hi * 10.0};
  const double height = kTop + 2 * kPanelHeight + kGap + 60;
  std::ostringstream os;
  header(os, height, title, meta);
  Panel mag(kTop, fr, pad_range(mr.lo, mr.hi), true);
  mag.frame(os, "f [Hz]", "magnitude [dB]");
  Panel ph(kTop + kPanelHeight + kGap, fr, pad_range(pr.lo, pr.hi), true);
  ph.frame(os, "f [Hz]", "phase [deg]");
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    std::vector<double> f, m, p;
    for (const auto& pt : curves[i].points) {
      f.push_back(pt.f_hz);
      m.push_back(pt.mag_db);
      p.push_back(pt.phase_deg);
    }
    mag.polyline(os, f, m, kColors[i % 6], i % 2 == 1);
    ph.polyline(os, f, p, kColors[i % 6], i % 2 == 1);
    labels.push_back(curves[i].label);
  }
  legend(os, height - 12, labels);
  os << "</svg>\n";
  return os.str();
}

nlohmann::json svg_metadata(const std::string& svg) {
  const auto a = svg.find("<metadata>");
  const auto b = svg.find("</metadata>");
  if (a == std::string::npos || b == std::string::npos || b < a) {
    throw ValidationError("svg: no metadata block");
  }
  std::string s = svg.substr(a + 10, b - a - 10);
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '&') {
      const auto e = s.find(';', i);
      const std::string ent = s.substr(i, e - i + 1);
      out += ent == "&amp;" ? '&' : ent == "&lt;" ? '<' : ent == "&gt;" ? '>' : '"';
      i = e;
    } else {
      out += s[i];
    }
  }
  return nlohmann::json::parse(out);
}

void emit_plot(const std::filesystem::path& path, const std::string& svg) {
  write_file_atomic(path, svg);
}

}  // namespace hmor
