#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "priceband/ctsgan.hpp"
#include "priceband/ingest.hpp"
#include "priceband/scenario.hpp"
#include "priceband/volatility.hpp"

namespace priceband {

inline constexpr int kDefaultBins = 50;

/// Per-timestep probability mass over equal-width bins on [0, 1].
struct DensityGrid {
  Eigen::VectorXd bin_edges;  // B + 1
  Eigen::MatrixXd mass;       // T x B, rows sum to 1

  int bins() const noexcept { return static_cast<int>(mass.cols()); }
  /// Bin k holds [edge_k, edge_k+1); the value 1 falls in the last bin.
  static int bin_of(double value, int bins) noexcept;

  nlohmann::json to_json() const;
};

struct PredictionInterval {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double nominal_coverage = 0.9;

  Eigen::Index steps() const noexcept { return lower.size(); }
};

enum class IntervalMode {
  /// Symmetric empirical quantiles at (1 - nominal) / 2 and 1 - (1 - nominal) / 2.
  Quantile,
  /// Pointwise min / max over all scenarios.
  Envelope,
};

IntervalMode interval_mode_from_string(const std::string& name);

/// Normalized histogram of scenario values per timestep. Throws EmptySet for
/// M = 0 and InvalidArgument for bins < 2.
DensityGrid stack_density(const ScenarioSet& set, int bins = kDefaultBins);

/// Minimum scenario count for a quantile interval: ceil(2 / (1 - nominal)).
Eigen::Index min_scenarios(double nominal);

/// Quantile position (M - 1) * q with linear interpolation between adjacent
/// order statistics. Throws TooFewScenarios below min_scenarios(nominal).
PredictionInterval build_interval(const ScenarioSet& set, double nominal,
                                  IntervalMode mode = IntervalMode::Quantile);

/// Stacks the two sets, keeping each member's provenance tag. Volatile members
/// carry whole 48-step paths; `reinforced_window` is where their wider noise is
/// expected to show. Throws ConditionMismatch for different condition ids.
ScenarioSet combine_normal_volatile(const ScenarioSet& normal, const ScenarioSet& volatile_set,
                                    StepWindow reinforced_window = kAfternoonWindow);

struct PipelineOptions {
  int scenarios = 500;
  /// Volatile scenarios generated when reinforcement triggers; < 0 means `scenarios`.
  int volatile_scenarios = -1;
  double nominal = 0.9;
  int bins = kDefaultBins;
  IntervalMode mode = IntervalMode::Quantile;
  std::uint64_t seed = 0;
  std::string condition_id;
};

struct PipelineResult {
  PredictionInterval interval;
  DensityGrid density;
  ScenarioSet scenarios;
  VolatilityLevels levels{};
  double sigma = 1.0;
  bool reinforced = false;
};

/// sigma from the forecast variances; normal (sigma = 1) scenarios always,
/// plus reinforced ones with that sigma when it exceeds 1; then density and
/// interval over the combined set.
PipelineResult predict_pipeline(const CtsganModel& model, const ConditionVector& condition,
                                const WeatherVariances& forecast_variances, const VolatilityThresholds& thresholds,
                                const PipelineOptions& options, const SigmaIncrementTable& table = {});

/// "%.3f"-style fixed formatting used in operator log lines.
std::string format_fixed(double value, int decimals);
/// Shortest round-trip decimal for a double.
std::string format_double(double value);

/// `timestep,lower,upper,lower_denorm,upper_denorm`
std::string interval_csv(const PredictionInterval& interval, const MinMaxParams& price_norm);
/// `provenance,t0,...,t47`
std::string scenario_csv(const ScenarioSet& set);

}  // namespace priceband
