#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>
#include <string>

#include <json.hpp>

#include "priceband/calendar.hpp"
#include "priceband/ingest.hpp"

namespace priceband {

enum class WeatherFactor { Temperature = 0, Irradiance = 1, Wind = 2 };
inline constexpr std::array<WeatherFactor, 3> kWeatherFactors{
    WeatherFactor::Temperature, WeatherFactor::Irradiance, WeatherFactor::Wind};

const char* to_string(WeatherFactor f) noexcept;

enum class VolatilityLevel { Normal = 0, Low = 1, Medium = 2, High = 3 };

const char* to_string(VolatilityLevel level) noexcept;

/// Closed range of half-hour indices; both ends included.
struct StepWindow {
  int first = 0;
  int last = kStepsPerDay - 1;

  int size() const noexcept { return last - first + 1; }
};

/// 12:00-19:00, where afternoon spikes concentrate.
inline constexpr StepWindow kAfternoonWindow{24, 38};
/// 12:00-17:00; irradiance is negligible after 17:00.
inline constexpr StepWindow kIrradianceWindow{24, 34};

StepWindow default_window(WeatherFactor f) noexcept;

/// Population variance (divisor n) of the window samples. Throws
/// IncompleteWindow if the window runs off the day or the day is short.
template <typename Derived>
double window_variance(const Eigen::MatrixBase<Derived>& day_values, StepWindow window) {
  if (window.first < 0 || window.last < window.first || window.last >= day_values.size()) {
    throw Error(ErrorCode::IncompleteWindow, "window [" + std::to_string(window.first) + ", " +
                                                 std::to_string(window.last) + "] not covered by " +
                                                 std::to_string(day_values.size()) + " samples");
  }
  const auto seg = day_values.derived().segment(window.first, window.size()).array();
  if (!seg.allFinite()) throw Error(ErrorCode::IncompleteWindow, "window contains missing samples");
  // Shifted by the first sample so a constant window gives exactly 0.
  const Eigen::ArrayXd d = seg.template cast<double>() - static_cast<double>(seg(0));
  return (d - d.mean()).square().mean();
}

/// Per-factor afternoon variances of one day's normalized weather.
struct WeatherVariances {
  std::array<double, 3> values{};

  double operator[](WeatherFactor f) const noexcept { return values[static_cast<int>(f)]; }
  double& operator[](WeatherFactor f) noexcept { return values[static_cast<int>(f)]; }
};

/// Normalizes each forecast channel with the training norms and takes the
/// default window variance per factor.
WeatherVariances forecast_variances(const WeatherForecast& forecast, const ChannelNorms& norms);

struct FactorCuts {
  double low_cut = 0.0;
  double med_cut = 0.0;
  double high_cut = 0.0;

  friend bool operator==(const FactorCuts&, const FactorCuts&) = default;
};

class VolatilityThresholds {
 public:
  /// Throws CalibrationDegenerate unless 0 < low < med < high for every factor.
  explicit VolatilityThresholds(std::array<FactorCuts, 3> cuts);

  /// The published temperature / irradiance / wind cut table.
  static VolatilityThresholds reference_table();

  const FactorCuts& operator[](WeatherFactor f) const noexcept { return cuts_[static_cast<int>(f)]; }

  nlohmann::json to_json() const;
  static VolatilityThresholds from_json(const nlohmann::json& j);

  friend bool operator==(const VolatilityThresholds&, const VolatilityThresholds&) = default;

 private:
  std::array<FactorCuts, 3> cuts_;
};

/// Lower-inclusive bands: Normal below low_cut, Low in [low, med), Medium in
/// [med, high), High from high_cut upward.
VolatilityLevel classify_volatility(WeatherFactor factor, double variance,
                                    const VolatilityThresholds& thresholds);

class SigmaIncrementTable {
 public:
  /// Normal 0, Low +0.333, Medium +0.667, High +1 for every factor.
  SigmaIncrementTable();
  /// Rows are factors, columns levels. Throws InvalidArgument unless rows are
  /// non-decreasing and start at exactly 0.
  explicit SigmaIncrementTable(const Eigen::Matrix<double, 3, 4>& increments);

  double increment(WeatherFactor f, VolatilityLevel level) const noexcept {
    return increments_(static_cast<int>(f), static_cast<int>(level));
  }

 private:
  Eigen::Matrix<double, 3, 4> increments_;
};

using VolatilityLevels = std::array<VolatilityLevel, 3>;

/// sigma = max(1, sum of per-factor increments).
double sigma_from_levels(const VolatilityLevels& levels, const SigmaIncrementTable& table = {});

VolatilityLevels classify_all(const WeatherVariances& variances, const VolatilityThresholds& thresholds);

/// Empirical percentile with linear interpolation between order statistics,
/// position (n - 1) * q on the sorted sample.
double empirical_quantile(std::span<const double> sorted, double q);

/// 60th / 85th / 95th percentiles per factor. Each sample needs >= 100 values
/// (InsufficientData); tied cuts raise CalibrationDegenerate.
VolatilityThresholds calibrate_thresholds(const std::array<std::vector<double>, 3>& variances);

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;
};

/// Sample Pearson r with a two-sided p-value from t = r sqrt((n-2)/(1-r^2)).
Correlation pearson_correlation(std::span<const double> x, std::span<const double> y);

inline constexpr double kSpikeThreshold = 350.0;

/// Count of observations with price >= threshold per half-hour-of-day bin.
std::array<int, kStepsPerDay> spike_histogram(const PriceSeries& prices, double threshold = kSpikeThreshold);

std::string spike_histogram_csv(const std::array<int, kStepsPerDay>& histogram);

/// Historical per-day variances of each factor's normalized weather,
/// in the layout calibrate_thresholds expects.
std::array<std::vector<double>, 3> historical_variances(std::span<const MarketDay> days,
                                                        const ChannelNorms& norms);

}  // namespace priceband
