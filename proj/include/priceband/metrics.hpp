#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "priceband/calendar.hpp"
#include "priceband/intervals.hpp"

namespace priceband {

/// Actuals and the interval bounds they are scored against.
struct EvaluationRun {
  Eigen::VectorXd actuals;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  int run_id = 0;

  /// LengthMismatch on unequal lengths, InvalidArgument if T = 0 or L_t > U_t.
  void validate() const;
};

/// Fraction of t with L_t <= actual_t <= U_t.
double ecpas(const EvaluationRun& run);
/// Mean of U_t - L_t.
double eawapi(const EvaluationRun& run);

/// Fraction of runs with delta_s >= target.
double confidence_level_ecpas(std::span<const double> deltas, double target);
/// Fraction of runs with xi_s < target (strict).
double confidence_level_eawapi(std::span<const double> xis, double target);

/// Largest target delta' whose coverage confidence level is >= `confidence`.
double achieved_delta(std::span<const double> deltas, double confidence = 0.9);
/// Smallest observed width Z such that a fraction >= `confidence` of runs has
/// xi_s <= Z. The strict count of confidence_level_eawapi only reaches the
/// confidence level for targets just above Z.
double achieved_xi(std::span<const double> xis, double confidence = 0.9);

/// (delta', phi) at every distinct observed delta, ascending.
std::vector<std::pair<double, double>> coverage_confidence_curve(std::span<const double> deltas);

struct RunScore {
  int s = 0;
  double ecpas = 0.0;
  double eawapi = 0.0;
};

struct MetricTargets {
  double delta_prime = 0.9;
  double xi_prime = 0.25;
};

struct RepeatedSamplingReport {
  std::vector<RunScore> runs;
  MetricTargets targets;
  double phi_coverage = 0.0;
  double phi_width = 0.0;
  double achieved_delta_90 = 0.0;
  double achieved_xi_90 = 0.0;

  nlohmann::json to_json() const;
};

RepeatedSamplingReport summarize_runs(std::vector<RunScore> runs, const MetricTargets& targets);

/// Calls run_once(s, seed_s) for s = 1..S with seed_s = derive_seed(master, s),
/// in parallel, and scores each run. Results are ordered by s regardless of
/// scheduling. `keep`, when non-null, receives the raw runs.
RepeatedSamplingReport repeated_sampling(int runs, std::uint64_t master_seed,
                                         const std::function<EvaluationRun(int, std::uint64_t)>& run_once,
                                         const MetricTargets& targets, std::vector<EvaluationRun>* keep = nullptr);

/// One day of held-out evaluation data.
struct EvaluationDay {
  Date date{};
  ConditionVector condition;
  Eigen::VectorXd actual;  // normalized, 48 steps
  WeatherVariances variances;
};

/// Window of the day scored by the harness.
struct HarnessOptions {
  PipelineOptions pipeline;
  StepWindow window{0, kStepsPerDay - 1};
};

/// Runs the predict-and-score loop S times over the same days with
/// independent noise streams; each run's intervals for all days are
/// concatenated (window steps only) before scoring.
RepeatedSamplingReport repeated_sampling_harness(const CtsganModel& model, std::span<const EvaluationDay> days,
                                                 const VolatilityThresholds& thresholds, int runs,
                                                 const HarnessOptions& options, const MetricTargets& targets,
                                                 std::uint64_t master_seed,
                                                 std::vector<EvaluationRun>* keep = nullptr);

}  // namespace priceband
