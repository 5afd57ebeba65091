#include "priceband/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "priceband/parallel.hpp"
#include "priceband/rng.hpp"

namespace priceband {

void EvaluationRun::validate() const {
  if (actuals.size() != lower.size() || actuals.size() != upper.size()) {
    throw Error(ErrorCode::LengthMismatch, "actuals " + std::to_string(actuals.size()) + ", lower " +
                                               std::to_string(lower.size()) + ", upper " +
                                               std::to_string(upper.size()));
  }
  if (actuals.size() == 0) throw Error(ErrorCode::InvalidArgument, "evaluation run needs T >= 1");
  if ((lower.array() > upper.array()).any()) throw Error(ErrorCode::InvalidArgument, "interval with L_t > U_t");
}

double ecpas(const EvaluationRun& run) {
  run.validate();
  const auto covered = (run.actuals.array() >= run.lower.array() && run.actuals.array() <= run.upper.array());
  return static_cast<double>(covered.count()) / static_cast<double>(run.actuals.size());
}

double eawapi(const EvaluationRun& run) {
  run.validate();
  return (run.upper - run.lower).mean();
}

namespace {

void require_runs(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::EmptyRuns, "no repeated runs");
}

// Smallest integer k with k / S >= confidence.
std::size_t needed_count(std::size_t runs, double confidence) {
  if (!(confidence > 0.0 && confidence <= 1.0)) throw Error(ErrorCode::InvalidArgument, "confidence must be in (0, 1]");
  const auto k = static_cast<std::size_t>(std::ceil(confidence * static_cast<double>(runs) - 1e-9));
  return std::clamp<std::size_t>(k, 1, runs);
}

}  // namespace

double confidence_level_ecpas(std::span<const double> deltas, double target) {
  require_runs(deltas);
  const auto hits = std::count_if(deltas.begin(), deltas.end(), [&](double d) { return d >= target; });
  return static_cast<double>(hits) / static_cast<double>(deltas.size());
}

double confidence_level_eawapi(std::span<const double> xis, double target) {
  require_runs(xis);
  const auto hits = std::count_if(xis.begin(), xis.end(), [&](double x) { return x < target; });
  return static_cast<double>(hits) / static_cast<double>(xis.size());
}

double achieved_delta(std::span<const double> deltas, double confidence) {
  require_runs(deltas);
  std::vector<double> sorted(deltas.begin(), deltas.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted[sorted.size() - needed_count(sorted.size(), confidence)];
}

double achieved_xi(std::span<const double> xis, double confidence) {
  require_runs(xis);
  std::vector<double> sorted(xis.begin(), xis.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted[needed_count(sorted.size(), confidence) - 1];
}

std::vector<std::pair<double, double>> coverage_confidence_curve(std::span<const double> deltas) {
  require_runs(deltas);
  std::vector<double> sorted(deltas.begin(), deltas.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::pair<double, double>> curve;
  for (double d : sorted) curve.emplace_back(d, confidence_level_ecpas(deltas, d));
  return curve;
}

nlohmann::json RepeatedSamplingReport::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : runs) rs.push_back({{"s", r.s}, {"ecpas", r.ecpas}, {"eawapi", r.eawapi}});
  return {{"runs", rs},
          {"targets", {{"delta_prime", targets.delta_prime}, {"xi_prime", targets.xi_prime}}},
          {"phi_coverage", phi_coverage},
          {"phi_width", phi_width},
          {"achieved_delta_90", achieved_delta_90},
          {"achieved_xi_90", achieved_xi_90}};
}

RepeatedSamplingReport summarize_runs(std::vector<RunScore> runs, const MetricTargets& targets) {
  if (runs.empty()) throw Error(ErrorCode::EmptyRuns, "no repeated runs");
  RepeatedSamplingReport rep;
  std::vector<double> deltas, xis;
  for (const auto& r : runs) {
    deltas.push_back(r.ecpas);
    xis.push_back(r.eawapi);
  }
  rep.runs = std::move(runs);
  rep.targets = targets;
  rep.phi_coverage = confidence_level_ecpas(deltas, targets.delta_prime);
  rep.phi_width = confidence_level_eawapi(xis, targets.xi_prime);
  rep.achieved_delta_90 = achieved_delta(deltas, 0.9);
  rep.achieved_xi_90 = achieved_xi(xis, 0.9);
  return rep;
}

RepeatedSamplingReport repeated_sampling(int runs, std::uint64_t master_seed,
                                         const std::function<EvaluationRun(int, std::uint64_t)>& run_once,
                                         const MetricTargets& targets, std::vector<EvaluationRun>* keep) {
  if (runs < 1) throw Error(ErrorCode::EmptyRuns, "need at least one repeated run");
  std::vector<EvaluationRun> results(static_cast<std::size_t>(runs));
  parallel_for(results.size(), [&](std::size_t i) {
    const int s = static_cast<int>(i) + 1;
    results[i] = run_once(s, derive_seed(master_seed, static_cast<std::uint64_t>(s)));
    results[i].run_id = s;
  });
  std::vector<RunScore> scores;
  for (const auto& r : results) scores.push_back({r.run_id, ecpas(r), eawapi(r)});
  if (keep) *keep = std::move(results);
  return summarize_runs(std::move(scores), targets);
}

RepeatedSamplingReport repeated_sampling_harness(const CtsganModel& model, std::span<const EvaluationDay> days,
                                                 const VolatilityThresholds& thresholds, int runs,
                                                 const HarnessOptions& options, const MetricTargets& targets,
                                                 std::uint64_t master_seed, std::vector<EvaluationRun>* keep) {
  if (days.empty()) throw Error(ErrorCode::EmptyDataset, "no evaluation days");
  const auto w = options.window;
  if (w.first < 0 || w.last >= kStepsPerDay || w.last < w.first) {
    throw Error(ErrorCode::InvalidArgument, "scoring window outside the day");
  }
  const Eigen::Index width = w.size();
  auto run_once = [&](int, std::uint64_t seed) {
    EvaluationRun run;
    const Eigen::Index total = width * static_cast<Eigen::Index>(days.size());
    run.actuals.resize(total);
    run.lower.resize(total);
    run.upper.resize(total);
    for (std::size_t d = 0; d < days.size(); ++d) {
      PipelineOptions opts = options.pipeline;
      opts.seed = derive_seed(seed, d);
      opts.condition_id = format_date(days[d].date);
      const auto res = predict_pipeline(model, days[d].condition, days[d].variances, thresholds, opts);
      const Eigen::Index at = width * static_cast<Eigen::Index>(d);
      run.actuals.segment(at, width) = days[d].actual.segment(w.first, width);
      run.lower.segment(at, width) = res.interval.lower.segment(w.first, width);
      run.upper.segment(at, width) = res.interval.upper.segment(w.first, width);
    }
    return run;
  };
  return repeated_sampling(runs, master_seed, run_once, targets, keep);
}

}  // namespace priceband
