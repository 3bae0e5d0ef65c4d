#include "hmor/time_series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "hmor/error.hpp"

namespace hmor {

TimeSeries::TimeSeries(std::vector<double> t, std::vector<std::string> names,
                       std::vector<std::vector<double>> channels)
    : t_(std::move(t)), names_(std::move(names)), channels_(std::move(channels)) {
  if (names_.size() != channels_.size()) {
    throw ValidationError("TimeSeries: " + std::to_string(names_.size()) + " names for " +
                          std::to_string(channels_.size()) + " channels");
  }
  validate();
}

std::span<const double> TimeSeries::channel(std::string_view name) const {
  return channels_[index_of(name)];
}

bool TimeSeries::has_channel(std::string_view name) const noexcept {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t TimeSeries::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) {
    throw ValidationError("TimeSeries: no channel named '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - names_.begin());
}

TimeSeries TimeSeries::select(const std::vector<std::string>& names) const {
  std::vector<std::vector<double>> cols;
  cols.reserve(names.size());
  for (const auto& n : names) {
    auto c = channel(n);
    cols.emplace_back(c.begin(), c.end());
  }
  return TimeSeries(t_, names, std::move(cols));
}

void TimeSeries::validate() const {
  if (t_.size() < 2) {
    throw ValidationError("TimeSeries: need at least 2 samples, got " + std::to_string(t_.size()));
  }
  for (std::size_t k = 0; k < t_.size(); ++k) {
    if (!std::isfinite(t_[k])) throw ValidationError("TimeSeries: non-finite timestamp");
    if (k > 0 && !(t_[k] > t_[k - 1])) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "TimeSeries: timestamps not strictly increasing at index " << k << " (t=" << t_[k]
          << ")";
      throw ValidationError(msg.str());
    }
  }
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    if (channels_[c].size() != t_.size()) {
      throw ValidationError("TimeSeries: channel '" + names_[c] + "' has " +
                            std::to_string(channels_[c].size()) + " samples, expected " +
                            std::to_string(t_.size()));
    }
    for (double v : channels_[c]) {
      if (!std::isfinite(v)) {
        throw ValidationError("TimeSeries: non-finite value in channel '" + names_[c] + "'");
      }
    }
  }
}

namespace {

void put_double(std::string& out, double v) {
  char buf[32];
  int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

double parse_double(std::string_view s, std::size_t line) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError("CSV line " + std::to_string(line) + ": cannot parse number '" +
                          std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

void TimeSeries::write_csv(std::ostream& os) const {
  std::string out = "t";
  for (const auto& n : names_) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (std::size_t k = 0; k < t_.size(); ++k) {
    put_double(out, t_[k]);
    for (const auto& ch : channels_) {
      out += ',';
      put_double(out, ch[k]);
    }
    out += '\n';
  }
  os << out;
}

TimeSeries TimeSeries::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line);
  if (header.empty() || header[0] != "t") {
    throw ValidationError("CSV: header must start with 't'");
  }
  std::vector<std::string> names(header.begin() + 1, header.end());
  std::vector<double> t;
  std::vector<std::vector<double>> cols(names.size());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split(line);
    if (fields.size() != header.size()) {
      throw ValidationError("CSV line " + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    }
    t.push_back(parse_double(fields[0], lineno));
    for (std::size_t c = 0; c < names.size(); ++c) {
      cols[c].push_back(parse_double(fields[c + 1], lineno));
    }
  }
  return TimeSeries(std::move(t), std::move(names), std::move(cols));
}

double interp_linear(std::span<const double> t, std::span<const double> y, double tq) {
  if (tq <= t.front()) return y.front();
  if (tq >= t.back()) return y.back();
  auto it = std::upper_bound(t.begin(), t.end(), tq);
  auto k = static_cast<std::size_t>(it - t.begin()) - 1;
  double s = (tq - t[k]) / (t[k + 1] - t[k]);
  return y[k] + s * (y[k + 1] - y[k]);
}

}  // namespace hmor
