#include "priceband/volatility.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

namespace priceband {

const char* to_string(WeatherFactor f) noexcept {
  switch (f) {
    case WeatherFactor::Temperature: return "temperature";
    case WeatherFactor::Irradiance: return "irradiance";
    case WeatherFactor::Wind: return "wind";
  }
  return "unknown";
}

const char* to_string(VolatilityLevel level) noexcept {
  switch (level) {
    case VolatilityLevel::Normal: return "Normal";
    case VolatilityLevel::Low: return "Low";
    case VolatilityLevel::Medium: return "Medium";
    case VolatilityLevel::High: return "High";
  }
  return "unknown";
}

StepWindow default_window(WeatherFactor f) noexcept {
  return f == WeatherFactor::Irradiance ? kIrradianceWindow : kAfternoonWindow;
}

WeatherVariances forecast_variances(const WeatherForecast& forecast, const ChannelNorms& norms) {
  auto channel = [](const std::optional<Eigen::VectorXd>& ch, const char* name) -> const Eigen::VectorXd& {
    if (!ch) throw Error(ErrorCode::MissingChannel, name);
    return *ch;
  };
  WeatherVariances v;
  v[WeatherFactor::Temperature] =
      window_variance(normalize(channel(forecast.temperature, "temperature"), norms.temperature).matrix(),
                      default_window(WeatherFactor::Temperature));
  v[WeatherFactor::Irradiance] =
      window_variance(normalize(channel(forecast.irradiance, "irradiance"), norms.irradiance).matrix(),
                      default_window(WeatherFactor::Irradiance));
  v[WeatherFactor::Wind] =
      window_variance(normalize(channel(forecast.wind_speed, "wind"), norms.wind_speed).matrix(),
                      default_window(WeatherFactor::Wind));
  return v;
}

VolatilityThresholds::VolatilityThresholds(std::array<FactorCuts, 3> cuts) : cuts_(cuts) {
  for (auto f : kWeatherFactors) {
    const auto& c = cuts_[static_cast<int>(f)];
    if (!(0.0 < c.low_cut && c.low_cut < c.med_cut && c.med_cut < c.high_cut)) {
      std::ostringstream os;
      os << to_string(f) << " cuts (" << c.low_cut << ", " << c.med_cut << ", " << c.high_cut
         << ") are not strictly increasing and positive";
      throw Error(ErrorCode::CalibrationDegenerate, os.str());
    }
  }
}

VolatilityThresholds VolatilityThresholds::reference_table() {
  return VolatilityThresholds({FactorCuts{0.0019, 0.0030, 0.0058}, FactorCuts{0.0246, 0.0419, 0.0622},
                               FactorCuts{0.0052, 0.0079, 0.0173}});
}

nlohmann::json VolatilityThresholds::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (auto f : kWeatherFactors) {
    const auto& c = (*this)[f];
    j[to_string(f)] = {{"low_cut", c.low_cut}, {"med_cut", c.med_cut}, {"high_cut", c.high_cut}};
  }
  return j;
}

VolatilityThresholds VolatilityThresholds::from_json(const nlohmann::json& j) {
  std::array<FactorCuts, 3> cuts;
  for (auto f : kWeatherFactors) {
    const auto& c = j.at(to_string(f));
    cuts[static_cast<int>(f)] = {c.at("low_cut").get<double>(), c.at("med_cut").get<double>(),
                                 c.at("high_cut").get<double>()};
  }
  return VolatilityThresholds(cuts);
}

VolatilityLevel classify_volatility(WeatherFactor factor, double variance,
                                    const VolatilityThresholds& thresholds) {
  if (!(variance >= 0.0)) throw Error(ErrorCode::InvalidArgument, "variance must be non-negative");
  const auto& c = thresholds[factor];
  if (variance < c.low_cut) return VolatilityLevel::Normal;
  if (variance < c.med_cut) return VolatilityLevel::Low;
  if (variance < c.high_cut) return VolatilityLevel::Medium;
  return VolatilityLevel::High;
}

VolatilityLevels classify_all(const WeatherVariances& variances, const VolatilityThresholds& thresholds) {
  VolatilityLevels out{};
  for (auto f : kWeatherFactors) out[static_cast<int>(f)] = classify_volatility(f, variances[f], thresholds);
  return out;
}

SigmaIncrementTable::SigmaIncrementTable() {
  Eigen::Matrix<double, 3, 4> inc;
  inc.rowwise() = Eigen::RowVector4d(0.0, 0.333, 0.667, 1.0);
  increments_ = inc;
}

SigmaIncrementTable::SigmaIncrementTable(const Eigen::Matrix<double, 3, 4>& increments)
    : increments_(increments) {
  for (int f = 0; f < 3; ++f) {
    if (increments_(f, 0) != 0.0) throw Error(ErrorCode::InvalidArgument, "Normal increment must be 0");
    for (int l = 1; l < 4; ++l) {
      if (increments_(f, l) < increments_(f, l - 1)) {
        throw Error(ErrorCode::InvalidArgument, "increments must be non-decreasing in level");
      }
    }
  }
}

double sigma_from_levels(const VolatilityLevels& levels, const SigmaIncrementTable& table) {
  double sum = 0.0;
  for (auto f : kWeatherFactors) sum += table.increment(f, levels[static_cast<int>(f)]);
  return std::max(1.0, sum);
}

double empirical_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile level outside [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

VolatilityThresholds calibrate_thresholds(const std::array<std::vector<double>, 3>& variances) {
  std::array<FactorCuts, 3> cuts;
  for (auto f : kWeatherFactors) {
    auto sample = variances[static_cast<int>(f)];
    if (sample.size() < 100) {
      throw Error(ErrorCode::InsufficientData, std::string(to_string(f)) + ": " +
                                                   std::to_string(sample.size()) +
                                                   " samples, at least 100 required");
    }
    std::sort(sample.begin(), sample.end());
    cuts[static_cast<int>(f)] = {empirical_quantile(sample, 0.60), empirical_quantile(sample, 0.85),
                                 empirical_quantile(sample, 0.95)};
  }
  return VolatilityThresholds(cuts);
}

Correlation pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "x and y differ in length");
  if (x.size() < 3) throw Error(ErrorCode::InsufficientData, "need at least 3 pairs");
  const Eigen::Map<const Eigen::ArrayXd> xs(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Eigen::ArrayXd> ys(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::ArrayXd dx = xs - xs.mean();
  const Eigen::ArrayXd dy = ys - ys.mean();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance, "correlation undefined for constant input");
  const double r = std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);

  const double dof = static_cast<double>(x.size()) - 2.0;
  Correlation out{r, 0.0};
  if (std::abs(r) < 1.0) {
    const double t = r * std::sqrt(dof / (1.0 - r * r));
    boost::math::students_t dist(dof);
    out.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
  }
  return out;
}

std::array<int, kStepsPerDay> spike_histogram(const PriceSeries& prices, double threshold) {
  if (!(threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "spike threshold must be positive");
  if (prices.timestamps.size() != static_cast<std::size_t>(prices.values.size())) {
    throw Error(ErrorCode::LengthMismatch, "timestamps and values differ in length");
  }
  std::array<int, kStepsPerDay> bins{};
  for (std::size_t i = 0; i < prices.timestamps.size(); ++i) {
    if (prices.values(static_cast<Eigen::Index>(i)) >= threshold) ++bins[prices.timestamps[i].half_hour_index()];
  }
  return bins;
}

std::string spike_histogram_csv(const std::array<int, kStepsPerDay>& histogram) {
  std::ostringstream os;
  os << "half_hour_index,count\n";
  for (int k = 0; k < kStepsPerDay; ++k) os << k << ',' << histogram[k] << '\n';
  return os.str();
}

std::array<std::vector<double>, 3> historical_variances(std::span<const MarketDay> days,
                                                        const ChannelNorms& norms) {
  std::array<std::vector<double>, 3> out;
  for (const auto& d : days) {
    const auto v = forecast_variances(WeatherForecast::from_day(d), norms);
    for (auto f : kWeatherFactors) out[static_cast<int>(f)].push_back(v[f]);
  }
  return out;
}

}  // namespace priceband
