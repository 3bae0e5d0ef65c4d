#pragma once

#include <complex>
#include <iosfwd>
#include <span>
#include <vector>

namespace hmor {

struct BodePoint {
  double f_hz = 0.0;
  double mag_db = 0.0;
  double phase_deg = 0.0;
};

// Magnitude in dB and phase in degrees, unwrapped along the frequency list.
std::vector<BodePoint> to_bode(std::span<const double> freqs,
                               std::span<const std::complex<double>> h);

// Logarithmically spaced frequencies including both ends.
std::vector<double> log_frequencies(double fmin, double fmax, std::size_t points);

// CSV with header `f_hz,mag_db,phase_deg`.
void write_bode_csv(std::ostream& os, std::span<const BodePoint> bode);
std::vector<BodePoint> read_bode_csv(std::istream& is);

}  // namespace hmor
