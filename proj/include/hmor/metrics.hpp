#pragma once

// Error metrics between a reference and a test series.

#include <cstddef>
#include <string>
#include <vector>

#include "hmor/time_series.hpp"
#include "json.hpp"

namespace hmor {

struct ChannelMetrics {
  std::string name;
  double rmse = 0.0;
  double rel_l2 = 0.0;  // |test - ref|_2 / |ref|_2; 0 when both vanish, inf when only ref does
  double peak = 0.0;    // max |test - ref|
};

struct OrderLoss {
  long n = 0;
  double loss = 0.0;
  double normalized_loss = 0.0;
};

struct MetricsReport {
  std::vector<ChannelMetrics> channels;
  std::size_t samples = 0;
  bool resampled = false;  // test was interpolated onto the reference timestamps
  std::vector<OrderLoss> orders;  // ascending n

  const ChannelMetrics& channel(const std::string& name) const;
};

// Channels are compared on the reference timestamps. When the timestamps
// differ and `allow_resample` is set, the test series is linearly
// interpolated onto the reference samples inside the common time span.
MetricsReport metrics(const TimeSeries& reference, const TimeSeries& test,
                      const std::vector<std::string>& channels, bool allow_resample = true);

// Sorts by n; duplicate orders keep their input order.
void set_order_losses(MetricsReport& report, std::vector<OrderLoss> orders);

nlohmann::json metrics_to_json(const MetricsReport& report);

}  // namespace hmor
