#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "priceband/calendar.hpp"
#include "priceband/error.hpp"

namespace priceband {

inline constexpr double kDefaultPriceFloor = 0.0;
inline constexpr double kDefaultPriceCap = 500.0;
inline constexpr double kDefaultHddBase = 18.0;

struct PriceSeries {
  std::vector<Timestamp> timestamps;
  Eigen::VectorXd values;  // A$/MWh
};

struct WeatherSeries {
  std::vector<Timestamp> timestamps;
  Eigen::VectorXd temperature;  // degC
  Eigen::VectorXd irradiance;   // W/m^2, shortwave
  Eigen::VectorXd wind_speed;   // m/s
};

/// Min-max range of one channel. Construction enforces p_max > p_min.
class MinMaxParams {
 public:
  MinMaxParams(double p_min, double p_max);

  /// Fits the range to the observed min and max. Throws DegenerateRange when
  /// every value is equal.
  template <typename Derived>
  static MinMaxParams fit(const Eigen::DenseBase<Derived>& values) {
    if (values.size() == 0) throw Error(ErrorCode::EmptyInput, "cannot fit min-max on no values");
    return MinMaxParams(values.minCoeff(), values.maxCoeff());
  }

  double p_min() const noexcept { return p_min_; }
  double p_max() const noexcept { return p_max_; }
  double span() const noexcept { return p_max_ - p_min_; }

  nlohmann::json to_json() const;
  static MinMaxParams from_json(const nlohmann::json& j);

  friend bool operator==(const MinMaxParams&, const MinMaxParams&) = default;

 private:
  double p_min_;
  double p_max_;
};

/// p' = (p - p_min) / (p_max - p_min), element-wise.
template <typename Derived>
Eigen::ArrayXd normalize(const Eigen::DenseBase<Derived>& values, const MinMaxParams& params) {
  return (values.derived().array().template cast<double>() - params.p_min()) / params.span();
}

inline double normalize(double value, const MinMaxParams& params) {
  return (value - params.p_min()) / params.span();
}

template <typename Derived>
Eigen::ArrayXd denormalize(const Eigen::DenseBase<Derived>& normalized, const MinMaxParams& params) {
  return normalized.derived().array().template cast<double>() * params.span() + params.p_min();
}

inline double denormalize(double normalized, const MinMaxParams& params) {
  return normalized * params.span() + params.p_min();
}

/// Element-wise min(hi, max(lo, p)). Requires lo < hi.
PriceSeries clip_prices(const PriceSeries& series, double lo = kDefaultPriceFloor,
                        double hi = kDefaultPriceCap);

struct DegreeDays {
  double hdd = 0.0;
  double cdd = 0.0;
};

/// Daily-mean method: hdd = max(0, base - mean T), cdd = max(0, mean T - base).
DegreeDays compute_hdd_cdd(std::span<const double> daily_temps, double base = kDefaultHddBase);

/// Column names looked up in the CSV header. Column order in the file is free.
struct CsvSchema {
  std::string timestamp = "timestamp";
  std::string price = "price";
  std::string demand = "demand";
  std::string temperature = "temperature";
  std::string irradiance = "irradiance";
  std::string wind_speed = "wind_speed";
  std::string gas_price = "gas_price";
  std::string coal_price = "coal_price";
};

/// One complete local-time day of half-hourly observations.
struct MarketDay {
  Date date{};
  int utc_offset_minutes = 0;
  Eigen::VectorXd price;  // raw A$/MWh, unclipped
  Eigen::VectorXd demand;
  Eigen::VectorXd temperature;
  Eigen::VectorXd irradiance;
  Eigen::VectorXd wind_speed;
  double gas_price = 0.0;  // daily mean of the half-hourly column
  double coal_price = 0.0;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_consumed = 0;
  std::size_t days_kept = 0;
  std::size_t days_dropped = 0;
  std::vector<std::string> dropped_dates;

  std::string summary() const;
  nlohmann::json to_json() const;
};

/// Complete days loaded from a market CSV plus the accounting of what was dropped.
struct Dataset {
  std::vector<MarketDay> days;
  LoadReport report;

  const MarketDay* find(Date date) const;
  PriceSeries prices() const;
  WeatherSeries weather() const;
  /// Days with date in [from, to], inclusive.
  std::vector<MarketDay> between(Date from, Date to) const;
};

/// Parses a market CSV. Incomplete days are dropped and counted in the report.
/// Errors: MalformedRow (line number in message), NonMonotonicTimestamps,
/// EmptyDataset, MissingChannel for a header lacking a schema column, Io.
Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset parse_dataset(std::istream& in, const CsvSchema& schema = {});

/// Per-channel min-max ranges, fitted on a training split only.
struct ChannelNorms {
  MinMaxParams price{kDefaultPriceFloor, kDefaultPriceCap};
  MinMaxParams demand{0.0, 1.0};
  MinMaxParams temperature{0.0, 1.0};
  MinMaxParams irradiance{0.0, 1.0};
  MinMaxParams wind_speed{0.0, 1.0};
  MinMaxParams gas_price{0.0, 1.0};
  MinMaxParams coal_price{0.0, 1.0};
  MinMaxParams hdd{0.0, 1.0};
  MinMaxParams cdd{0.0, 1.0};
  double price_floor = kDefaultPriceFloor;
  double price_cap = kDefaultPriceCap;
  double hdd_base = kDefaultHddBase;

  nlohmann::json to_json() const;
  static ChannelNorms from_json(const nlohmann::json& j);
};

/// Prices are clipped to [price_floor, price_cap] before fitting. A channel
/// that is constant over the split gets a unit-width range around its value.
ChannelNorms fit_channel_norms(std::span<const MarketDay> train_days,
                               double price_floor = kDefaultPriceFloor,
                               double price_cap = kDefaultPriceCap,
                               double hdd_base = kDefaultHddBase);

/// Normalized price path of one day (clip, then min-max).
Eigen::VectorXd normalized_prices(const MarketDay& day, const ChannelNorms& norms);

/// Forecast weather for the target day, raw units. Absent channels are
/// reported as MissingChannel by build_conditions.
struct WeatherForecast {
  std::optional<Eigen::VectorXd> temperature;
  std::optional<Eigen::VectorXd> irradiance;
  std::optional<Eigen::VectorXd> wind_speed;

  /// Perfect-forecast proxy: the realised weather of a day.
  static WeatherForecast from_day(const MarketDay& day);
};

struct ConditionVector {
  static constexpr int kDim = 5 * kStepsPerDay + 7 + 12 + 4;

  Eigen::VectorXd lagged_prices;   // 48, normalized
  Eigen::VectorXd lagged_demand;   // 48, normalized
  Eigen::VectorXd day_of_week;     // one-hot(7), Monday = index 0
  Eigen::VectorXd month;           // one-hot(12), January = index 0
  double hdd = 0.0;                // normalized
  double cdd = 0.0;                // normalized
  double gas_price = 0.0;          // normalized
  double coal_price = 0.0;         // normalized
  Eigen::VectorXd forecast_temperature;  // 48, normalized
  Eigen::VectorXd forecast_irradiance;   // 48, normalized
  Eigen::VectorXd forecast_wind;         // 48, normalized

  /// Fixed layout: lags, calendar one-hots, hdd, cdd, gas, coal, forecasts.
  Eigen::VectorXd flatten() const;
};

/// Encodes day d's conditions from day d-1 observations and day d forecasts.
/// Normalized entries are clamped to [0, 1] so out-of-split values stay in range.
ConditionVector build_conditions(const MarketDay& previous_day, const WeatherForecast& forecast,
                                 Date target_date, const ChannelNorms& norms);

/// One model-ready day: conditions plus the normalized 48-step target path.
struct Sample {
  Date date{};
  ConditionVector condition;
  Eigen::VectorXd target;
};

struct SampleSet {
  std::vector<Sample> samples;
  ChannelNorms norms;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
};

/// Builds one sample for every day whose previous calendar day is also present.
/// The target day's realised weather stands in for its forecast.
SampleSet build_samples(std::span<const MarketDay> days, const ChannelNorms& norms);

}  // namespace priceband
