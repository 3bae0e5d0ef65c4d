#pragma once

// Sequential identification: the DC table is fixed (stage 1), then the
// linear block (A, B, C, D) is fitted to transient port currents by L-BFGS
// over several seeded restarts (stage 2).

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hmor/dc_map.hpp"
#include "hmor/lbfgs.hpp"
#include "hmor/lti_sim.hpp"
#include "hmor/time_series.hpp"
#include "json.hpp"

namespace hmor {

struct TrainingSet {
  TimeSeries phi_inputs;  // phi1..phi6
  TimeSeries targets;     // i1, i2, i3
  nlohmann::json provenance = nlohmann::json::object();

  void validate() const;
};

// phi of the recorded port voltages against the recorded currents. The record
// needs channels v1,v2,v3,i1,i2,i3. In strict mode an out-of-box sample
// raises DomainError naming its timestamp.
TrainingSet assemble_training(const DcTable& table, const TimeSeries& recorded,
                              BoxMode mode = BoxMode::strict,
                              nlohmann::json provenance = nlohmann::json::object());

// 1/RMS^2 per target channel; channels with zero RMS get 1/(max RMS)^2.
std::array<double, 3> default_weights(const TimeSeries& targets);

// Diagonal A with eigenvalues -2 pi f log-spaced over [f0, f1], small seeded
// random B, C = D = 0.
StateSpace initial_guess(Eigen::Index n, double f0, double f1, std::uint64_t seed);

// Replaces C and D by the least-squares fit of the targets given the states
// driven by (A, B). Channels are independent, so weights do not enter.
void fit_output_map(StateSpace& ss, const LtiData& data);

enum class StabilityMode { reject, keep };

struct FitConfig {
  Eigen::Index n = 3;
  int restarts = 8;
  int max_iterations = 500;
  double gradient_tol = 1e-7;  // on max|grad| / loss, dimensionless parameters
  double loss_tol = 1e-14;  // on the loss normalized by weighted target power
  std::uint64_t seed = 1;
  StabilityMode stability = StabilityMode::reject;
  std::optional<std::array<double, 3>> weights;
  // Initial pole band in Hz; 0 derives it from the record (1/duration and
  // 1/(20 * smallest step)).
  double f_lo = 0.0;
  double f_hi = 0.0;

  void validate() const;
};

nlohmann::json fit_config_to_json(const FitConfig& cfg);
FitConfig fit_config_from_json(const nlohmann::json& j);

struct RestartSummary {
  double loss = 0.0;  // physical loss of the final iterate
  int iterations = 0;
  int evaluations = 0;
  LbfgsStatus status = LbfgsStatus::max_iterations;
  double spectral_abscissa = 0.0;
  bool finite = true;
  std::vector<double> trace;  // accepted normalized losses
};

struct FitResult {
  StateSpace ss;
  Eigen::Index n = 0;
  std::size_t best_restart = 0;
  double loss = 0.0;             // equals loss_only(ss, training data, weights)
  double normalized_loss = 0.0;  // loss / weighted target power
  double spectral_abscissa = 0.0;
  bool rejected_unstable = false;  // the lowest-loss restart was unstable
  std::array<double, 3> weights{};
  std::uint64_t seed = 0;
  std::vector<RestartSummary> restarts;
  LbfgsStatus status = LbfgsStatus::max_iterations;
};

// Summary without matrices or traces.
nlohmann::json fit_result_to_json(const FitResult& r);

FitResult fit(const TrainingSet& train, const FitConfig& cfg);

// One fit per order, all on the same data and seed. Each order above the
// smallest also gets one extra restart (listed last) started from the best
// smaller model padded with seeded, uncoupled states, so the best loss cannot
// rise with n.
std::vector<FitResult> order_sweep(const TrainingSet& train, const std::vector<Eigen::Index>& orders,
                                   const FitConfig& cfg);

// Loss of ss on the training set divided by the weighted target power.
double normalized_loss(const StateSpace& ss, const TrainingSet& train,
                       const std::array<double, 3>& weights);

}  // namespace hmor
