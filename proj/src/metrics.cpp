#include "hmor/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmor/error.hpp"

namespace hmor {

const ChannelMetrics& MetricsReport::channel(const std::string& name) const {
  for (const auto& c : channels) {
    if (c.name == name) return c;
  }
  throw ValidationError("metrics: no channel " + name);
}

MetricsReport metrics(const TimeSeries& reference, const TimeSeries& test,
                      const std::vector<std::string>& channels, bool allow_resample) {
  if (channels.empty()) throw ValidationError("metrics: no channels requested");
  if (reference.size() == 0 || test.size() == 0) throw ValidationError("metrics: empty series");
  MetricsReport rep;
  const auto& tr = reference.time();
  std::vector<std::size_t> idx;
  if (tr == test.time()) {
    idx.resize(tr.size());
    for (std::size_t k = 0; k < tr.size(); ++k) idx[k] = k;
  } else {
    if (!allow_resample) throw ValidationError("metrics: timestamps differ and resampling is off");
    rep.resampled = true;
    const double lo = std::max(tr.front(), test.time().front());
    const double hi = std::min(tr.back(), test.time().back());
    for (std::size_t k = 0; k < tr.size(); ++k) {
      if (tr[k] >= lo && tr[k] <= hi) idx.push_back(k);
    }
  }
  if (idx.empty()) throw ValidationError("metrics: reference and test do not overlap in time");
  rep.samples = idx.size();

  for (const auto& name : channels) {
    auto r = reference.channel(name);
    auto s = test.channel(name);
    double se = 0.0, sr = 0.0, peak = 0.0;
    for (std::size_t k : idx) {
      const double v = rep.resampled ? interp_linear(test.time(), s, tr[k]) : s[k];
      const double e = v - r[k];
      se += e * e;
      sr += r[k] * r[k];
      peak = std::max(peak, std::abs(e));
    }
    ChannelMetrics m;
    m.name = name;
    m.rmse = std::sqrt(se / static_cast<double>(idx.size()));
    m.peak = peak;
    if (sr > 0.0) {
      m.rel_l2 = std::sqrt(se / sr);
    } else {
      m.rel_l2 = se > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    rep.channels.push_back(m);
  }
  return rep;
}

void set_order_losses(MetricsReport& report, std::vector<OrderLoss> orders) {
  std::stable_sort(orders.begin(), orders.end(),
                   [](const OrderLoss& a, const OrderLoss& b) { return a.n < b.n; });
  report.orders = std::move(orders);
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["samples"] = report.samples;
  j["resampled"] = report.resampled;
  auto& ch = j["channels"] = nlohmann::json::object();
  for (const auto& c : report.channels) {
    ch[c.name] = {{"rmse", num(c.rmse)}, {"rel_l2", num(c.rel_l2)}, {"peak", num(c.peak)}};
  }
  auto& ord = j["orders"] = nlohmann::json::array();
  for (const auto& o : report.orders) {
    ord.push_back({{"n", o.n}, {"loss", num(o.loss)}, {"normalized_loss", num(o.normalized_loss)}});
  }
  return j;
}

}  // namespace hmor
