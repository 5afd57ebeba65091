#include "priceband/intervals.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "priceband/rng.hpp"

namespace priceband {

using Eigen::Index;

const char* to_string(Provenance p) noexcept { return p == Provenance::Normal ? "normal" : "volatile"; }

Index ScenarioSet::count(Provenance p) const noexcept {
  return static_cast<Index>(std::count(provenance.begin(), provenance.end(), p));
}

void ScenarioSet::validate() const {
  if (static_cast<Index>(provenance.size()) != scenarios.rows()) {
    throw Error(ErrorCode::InvalidArgument, "provenance tags do not match scenario rows");
  }
  if (scenarios.size() > 0 && (!scenarios.allFinite() || scenarios.minCoeff() < 0.0 || scenarios.maxCoeff() > 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "scenario values must lie in [0, 1]");
  }
}

int DensityGrid::bin_of(double value, int bins) noexcept {
  const int k = static_cast<int>(std::floor(value * bins));
  return std::clamp(k, 0, bins - 1);
}

nlohmann::json DensityGrid::to_json() const {
  nlohmann::json mass_rows = nlohmann::json::array();
  for (Index t = 0; t < mass.rows(); ++t) {
    std::vector<double> row(static_cast<std::size_t>(mass.cols()));
    for (Index k = 0; k < mass.cols(); ++k) row[static_cast<std::size_t>(k)] = mass(t, k);
    mass_rows.push_back(row);
  }
  return {{"bin_edges", std::vector<double>(bin_edges.data(), bin_edges.data() + bin_edges.size())},
          {"mass", mass_rows}};
}

IntervalMode interval_mode_from_string(const std::string& name) {
  if (name == "quantile") return IntervalMode::Quantile;
  if (name == "envelope") return IntervalMode::Envelope;
  throw Error(ErrorCode::InvalidArgument, "interval mode must be 'quantile' or 'envelope', got '" + name + "'");
}

DensityGrid stack_density(const ScenarioSet& set, int bins) {
  if (set.empty()) throw Error(ErrorCode::EmptySet, "cannot stack an empty scenario set");
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 bins");
  set.validate();
  DensityGrid grid;
  grid.bin_edges = Eigen::VectorXd::LinSpaced(bins + 1, 0.0, 1.0);
  grid.mass = Eigen::MatrixXd::Zero(set.scenarios.cols(), bins);
  for (Index m = 0; m < set.scenarios.rows(); ++m) {
    for (Index t = 0; t < set.scenarios.cols(); ++t) {
      grid.mass(t, DensityGrid::bin_of(set.scenarios(m, t), bins)) += 1.0;
    }
  }
  grid.mass /= static_cast<double>(set.size());
  return grid;
}

Index min_scenarios(double nominal) {
  if (!(nominal > 0.0 && nominal < 1.0)) throw Error(ErrorCode::InvalidArgument, "nominal coverage must be in (0, 1)");
  return static_cast<Index>(std::ceil(2.0 / (1.0 - nominal) - 1e-9));
}

PredictionInterval build_interval(const ScenarioSet& set, double nominal, IntervalMode mode) {
  const Index needed = min_scenarios(nominal);
  if (set.empty()) throw Error(ErrorCode::EmptySet, "cannot build an interval from no scenarios");
  if (mode == IntervalMode::Quantile && set.size() < needed) {
    throw Error(ErrorCode::TooFewScenarios, std::to_string(set.size()) + " scenarios, nominal " +
                                                format_fixed(nominal, 3) + " needs " + std::to_string(needed));
  }
  set.validate();
  const Index steps = set.scenarios.cols();
  PredictionInterval pi{Eigen::VectorXd(steps), Eigen::VectorXd(steps), nominal};
  const double tail = (1.0 - nominal) / 2.0;
  std::vector<double> column(static_cast<std::size_t>(set.size()));
  for (Index t = 0; t < steps; ++t) {
    if (mode == IntervalMode::Envelope) {
      pi.lower(t) = set.scenarios.col(t).minCoeff();
      pi.upper(t) = set.scenarios.col(t).maxCoeff();
      continue;
    }
    Eigen::Map<Eigen::VectorXd>(column.data(), set.size()) = set.scenarios.col(t);
    std::sort(column.begin(), column.end());
    pi.lower(t) = empirical_quantile(column, tail);
    pi.upper(t) = empirical_quantile(column, 1.0 - tail);
  }
  return pi;
}

ScenarioSet combine_normal_volatile(const ScenarioSet& normal, const ScenarioSet& volatile_set,
                                    StepWindow reinforced_window) {
  if (reinforced_window.first < 0 || reinforced_window.last < reinforced_window.first) {
    throw Error(ErrorCode::InvalidArgument, "bad reinforced window");
  }
  if (volatile_set.empty()) return normal;
  if (normal.empty()) return volatile_set;
  if (normal.condition_id != volatile_set.condition_id) {
    throw Error(ErrorCode::ConditionMismatch,
                "'" + normal.condition_id + "' vs '" + volatile_set.condition_id + "'");
  }
  if (normal.scenarios.cols() != volatile_set.scenarios.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "scenario lengths differ");
  }
  ScenarioSet out;
  out.condition_id = normal.condition_id;
  out.noise_sigma = std::max(normal.noise_sigma, volatile_set.noise_sigma);
  out.scenarios.resize(normal.size() + volatile_set.size(), normal.scenarios.cols());
  out.scenarios << normal.scenarios, volatile_set.scenarios;
  out.provenance = normal.provenance;
  out.provenance.insert(out.provenance.end(), volatile_set.provenance.begin(), volatile_set.provenance.end());
  return out;
}

PipelineResult predict_pipeline(const CtsganModel& model, const ConditionVector& condition,
                                const WeatherVariances& forecast_variances, const VolatilityThresholds& thresholds,
                                const PipelineOptions& options, const SigmaIncrementTable& table) {
  PipelineResult r;
  r.levels = classify_all(forecast_variances, thresholds);
  r.sigma = sigma_from_levels(r.levels, table);
  r.reinforced = r.sigma > 1.0;

  r.scenarios = generate_scenarios(model, condition, NoiseSpec{1.0}, options.scenarios,
                                   derive_seed(options.seed, "normal"), options.condition_id, Provenance::Normal);
  if (r.reinforced) {
    const int count = options.volatile_scenarios < 0 ? options.scenarios : options.volatile_scenarios;
    const auto vol = generate_scenarios(model, condition, NoiseSpec{r.sigma}, count,
                                        derive_seed(options.seed, "volatile"), options.condition_id,
                                        Provenance::Volatile);
    r.scenarios = combine_normal_volatile(r.scenarios, vol);
  }
  r.density = stack_density(r.scenarios, options.bins);
  r.interval = build_interval(r.scenarios, options.nominal, options.mode);
  return r;
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string interval_csv(const PredictionInterval& interval, const MinMaxParams& price_norm) {
  std::ostringstream os;
  os << "timestep,lower,upper,lower_denorm,upper_denorm\n";
  for (Index t = 0; t < interval.steps(); ++t) {
    os << t << ',' << format_double(interval.lower(t)) << ',' << format_double(interval.upper(t)) << ','
       << format_double(denormalize(interval.lower(t), price_norm)) << ','
       << format_double(denormalize(interval.upper(t), price_norm)) << '\n';
  }
  return os.str();
}

std::string scenario_csv(const ScenarioSet& set) {
  std::ostringstream os;
  os << "provenance";
  for (Index t = 0; t < set.scenarios.cols(); ++t) os << ",t" << t;
  os << '\n';
  for (Index m = 0; m < set.scenarios.rows(); ++m) {
    os << to_string(set.provenance[static_cast<std::size_t>(m)]);
    for (Index t = 0; t < set.scenarios.cols(); ++t) os << ',' << format_double(set.scenarios(m, t));
    os << '\n';
  }
  return os.str();
}

}  // namespace priceband
