#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hmor {

// Sampled signals on a strictly increasing, possibly non-uniform time grid.
// Channels are stored column-wise, one vector per named channel.
class TimeSeries {
public:
  TimeSeries() = default;
  TimeSeries(std::vector<double> t, std::vector<std::string> names,
             std::vector<std::vector<double>> channels);

  std::size_t size() const noexcept { return t_.size(); }
  std::size_t channel_count() const noexcept { return names_.size(); }

  const std::vector<double>& time() const noexcept { return t_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::span<const double> channel(std::size_t i) const { return channels_.at(i); }
  std::span<const double> channel(std::string_view name) const;
  bool has_channel(std::string_view name) const noexcept;
  std::size_t index_of(std::string_view name) const;

  double duration() const noexcept { return t_.empty() ? 0.0 : t_.back() - t_.front(); }

  // New series holding only the named channels, in the given order.
  TimeSeries select(const std::vector<std::string>& names) const;

  // Throws ValidationError unless timestamps strictly increase, every
  // channel matches the timestamp count, all values are finite and size >= 2.
  void validate() const;

  // CSV: header `t,<ch1>,...`, one row per sample, 17 significant digits.
  void write_csv(std::ostream& os) const;
  static TimeSeries read_csv(std::istream& is);

private:
  std::vector<double> t_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> channels_;
};

// Linear interpolation of a sampled channel at time `tq`, clamped to the ends.
double interp_linear(std::span<const double> t, std::span<const double> y, double tq);

}  // namespace hmor
