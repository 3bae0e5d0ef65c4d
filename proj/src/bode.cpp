#include "hmor/bode.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "hmor/error.hpp"

namespace hmor {

std::vector<BodePoint> to_bode(std::span<const double> freqs,
                               std::span<const std::complex<double>> h) {
  if (freqs.size() != h.size()) throw ValidationError("to_bode: size mismatch");
  std::vector<BodePoint> out(freqs.size());
  double prev = 0.0;
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    double ph = std::arg(h[k]) * 180.0 / std::numbers::pi;
    if (k > 0) {
      while (ph - prev > 180.0) ph -= 360.0;
      while (ph - prev < -180.0) ph += 360.0;
    }
    prev = ph;
    out[k] = {freqs[k], 20.0 * std::log10(std::abs(h[k])), ph};
  }
  return out;
}

std::vector<double> log_frequencies(double fmin, double fmax, std::size_t points) {
  if (!(fmin > 0.0) || !(fmax >= fmin) || points < 1) {
    throw ValidationError("log_frequencies: need 0 < fmin <= fmax and points >= 1");
  }
  std::vector<double> f(points);
  if (points == 1) {
    f[0] = fmin;
    return f;
  }
  const double a = std::log10(fmin), b = std::log10(fmax);
  for (std::size_t k = 0; k < points; ++k) {
    f[k] = std::pow(10.0, a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1));
  }
  f.front() = fmin;
  f.back() = fmax;
  return f;
}

void write_bode_csv(std::ostream& os, std::span<const BodePoint> bode) {
  std::string out = "f_hz,mag_db,phase_deg\n";
  char buf[96];
  for (const auto& p : bode) {
    int n = std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.f_hz, p.mag_db, p.phase_deg);
    out.append(buf, static_cast<std::size_t>(n));
  }
  os << out;
}

std::vector<BodePoint> read_bode_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("f_hz,mag_db,phase_deg", 0) != 0) {
    throw ValidationError("Bode CSV: missing header f_hz,mag_db,phase_deg");
  }
  std::vector<BodePoint> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    BodePoint p;
    char c1 = 0, c2 = 0;
    if (!(row >> p.f_hz >> c1 >> p.mag_db >> c2 >> p.phase_deg) || c1 != ',' || c2 != ',') {
      throw ValidationError("Bode CSV: malformed row '" + line + "'");
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace hmor
