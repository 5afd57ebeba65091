#include "priceband/ingest.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace priceband {

MinMaxParams::MinMaxParams(double p_min, double p_max) : p_min_(p_min), p_max_(p_max) {
  if (!std::isfinite(p_min) || !std::isfinite(p_max)) {
    throw Error(ErrorCode::NonFiniteValue, "min-max bounds must be finite");
  }
  if (!(p_max > p_min)) {
    throw Error(ErrorCode::DegenerateRange,
                "p_max (" + std::to_string(p_max) + ") must exceed p_min (" + std::to_string(p_min) + ")");
  }
}

nlohmann::json MinMaxParams::to_json() const { return {{"p_min", p_min_}, {"p_max", p_max_}}; }

MinMaxParams MinMaxParams::from_json(const nlohmann::json& j) {
  return MinMaxParams(j.at("p_min").get<double>(), j.at("p_max").get<double>());
}

PriceSeries clip_prices(const PriceSeries& series, double lo, double hi) {
  if (!(lo < hi)) throw Error(ErrorCode::DegenerateRange, "clip bounds require lo < hi");
  PriceSeries out = series;
  out.values = series.values.cwiseMax(lo).cwiseMin(hi);
  return out;
}

DegreeDays compute_hdd_cdd(std::span<const double> daily_temps, double base) {
  if (daily_temps.empty()) throw Error(ErrorCode::EmptyInput, "no temperatures for degree days");
  const double mean = std::accumulate(daily_temps.begin(), daily_temps.end(), 0.0) /
                      static_cast<double>(daily_temps.size());
  return {std::max(0.0, base - mean), std::max(0.0, mean - base)};
}

// ---------------------------------------------------------------------------
// CSV loading

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Returns nullopt for an empty / NaN cell; throws on garbage.
std::optional<double> parse_cell(std::string_view cell, std::size_t line_no) {
  if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA") return std::nullopt;
  std::string tmp(cell);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": bad number '" + tmp + "'");
  }
  return v;
}

enum Channel { kPrice, kDemand, kTemp, kIrr, kWind, kGas, kCoal, kChannels };

struct PartialDay {
  int utc_offset = 0;
  std::array<std::array<double, kStepsPerDay>, kChannels> values{};
  std::array<bool, kStepsPerDay> filled{};
  std::size_t rows = 0;
  bool has_gap_cell = false;
};

}  // namespace

Dataset parse_dataset(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::EmptyDataset, "missing header row");
  ++line_no;
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_fields(line);
  auto column = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(ErrorCode::MissingChannel, "\"" + name + "\" not in CSV header");
  };
  const std::size_t ts_col = column(schema.timestamp);
  const std::array<std::size_t, kChannels> cols{
      column(schema.price),      column(schema.demand),     column(schema.temperature),
      column(schema.irradiance), column(schema.wind_speed), column(schema.gas_price),
      column(schema.coal_price)};

  std::map<Date, PartialDay> partial;
  std::optional<std::int64_t> last_utc;
  Dataset ds;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++ds.report.rows_read;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected " +
                                               std::to_string(header.size()) + " fields, got " +
                                               std::to_string(fields.size()));
    }
    Timestamp ts;
    try {
      ts = parse_timestamp(fields[ts_col]);
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ts.on_half_hour()) {
      throw Error(ErrorCode::MalformedRow,
                  "line " + std::to_string(line_no) + ": timestamp not on a half-hour boundary");
    }
    const auto utc = ts.utc_minutes();
    if (last_utc && utc <= *last_utc) {
      throw Error(ErrorCode::NonMonotonicTimestamps,
                  "line " + std::to_string(line_no) + ": " + std::string(fields[ts_col]) +
                      " does not follow the previous row");
    }
    last_utc = utc;

    auto& day = partial[ts.date];
    if (day.rows == 0) day.utc_offset = ts.utc_offset_minutes;
    ++day.rows;
    const int k = ts.half_hour_index();
    day.filled[k] = true;
    for (int c = 0; c < kChannels; ++c) {
      const auto v = parse_cell(fields[cols[c]], line_no);
      if (!v) {
        day.has_gap_cell = true;
      } else {
        day.values[c][k] = *v;
      }
    }
  }
  if (ds.report.rows_read == 0) throw Error(ErrorCode::EmptyDataset, "no data rows");

  for (const auto& [date, pd] : partial) {
    const bool complete = !pd.has_gap_cell &&
                          std::all_of(pd.filled.begin(), pd.filled.end(), [](bool b) { return b; });
    if (!complete) {
      ++ds.report.days_dropped;
      ds.report.dropped_dates.push_back(format_date(date));
      continue;
    }
    MarketDay md;
    md.date = date;
    md.utc_offset_minutes = pd.utc_offset;
    auto vec = [&](Channel c) {
      return Eigen::Map<const Eigen::VectorXd>(pd.values[c].data(), kStepsPerDay).eval();
    };
    md.price = vec(kPrice);
    md.demand = vec(kDemand);
    md.temperature = vec(kTemp);
    md.irradiance = vec(kIrr);
    md.wind_speed = vec(kWind);
    md.gas_price = vec(kGas).mean();
    md.coal_price = vec(kCoal).mean();
    ds.days.push_back(std::move(md));
    ds.report.rows_consumed += kStepsPerDay;
  }
  ds.report.days_kept = ds.days.size();
  if (ds.days.empty()) throw Error(ErrorCode::EmptyDataset, "no complete day in input");
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_dataset(in, schema);
}

std::string LoadReport::summary() const {
  return std::to_string(days_kept) + " days kept, " + std::to_string(days_dropped) +
         (days_dropped == 1 ? " day dropped" : " days dropped") + ", " +
         std::to_string(rows_consumed) + "/" + std::to_string(rows_read) + " rows consumed";
}

nlohmann::json LoadReport::to_json() const {
  return {{"rows_read", rows_read},     {"rows_consumed", rows_consumed},
          {"days_kept", days_kept},     {"days_dropped", days_dropped},
          {"dropped_dates", dropped_dates}, {"summary", summary()}};
}

const MarketDay* Dataset::find(Date date) const {
  auto it = std::lower_bound(days.begin(), days.end(), date,
                             [](const MarketDay& d, Date x) { return d.date < x; });
  return (it != days.end() && it->date == date) ? &*it : nullptr;
}

std::vector<MarketDay> Dataset::between(Date from, Date to) const {
  std::vector<MarketDay> out;
  for (const auto& d : days) {
    if (d.date >= from && d.date <= to) out.push_back(d);
  }
  return out;
}

namespace {

template <typename Field>
std::vector<Timestamp> stamps(const std::vector<MarketDay>& days, Field) {
  std::vector<Timestamp> out;
  out.reserve(days.size() * kStepsPerDay);
  for (const auto& d : days) {
    for (int k = 0; k < kStepsPerDay; ++k) {
      out.push_back({d.date, k * kMinutesPerStep, d.utc_offset_minutes});
    }
  }
  return out;
}

Eigen::VectorXd concat(const std::vector<MarketDay>& days, Eigen::VectorXd MarketDay::*field) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(days.size()) * kStepsPerDay);
  for (std::size_t i = 0; i < days.size(); ++i) {
    out.segment(static_cast<Eigen::Index>(i) * kStepsPerDay, kStepsPerDay) = days[i].*field;
  }
  return out;
}

}  // namespace

PriceSeries Dataset::prices() const {
  return {stamps(days, 0), concat(days, &MarketDay::price)};
}

WeatherSeries Dataset::weather() const {
  return {stamps(days, 0), concat(days, &MarketDay::temperature), concat(days, &MarketDay::irradiance),
          concat(days, &MarketDay::wind_speed)};
}

// ---------------------------------------------------------------------------
// Normalization and conditions

nlohmann::json ChannelNorms::to_json() const {
  return {{"price", price.to_json()},
          {"demand", demand.to_json()},
          {"temperature", temperature.to_json()},
          {"irradiance", irradiance.to_json()},
          {"wind_speed", wind_speed.to_json()},
          {"gas_price", gas_price.to_json()},
          {"coal_price", coal_price.to_json()},
          {"hdd", hdd.to_json()},
          {"cdd", cdd.to_json()},
          {"price_floor", price_floor},
          {"price_cap", price_cap},
          {"hdd_base", hdd_base}};
}

ChannelNorms ChannelNorms::from_json(const nlohmann::json& j) {
  ChannelNorms n;
  n.price = MinMaxParams::from_json(j.at("price"));
  n.demand = MinMaxParams::from_json(j.at("demand"));
  n.temperature = MinMaxParams::from_json(j.at("temperature"));
  n.irradiance = MinMaxParams::from_json(j.at("irradiance"));
  n.wind_speed = MinMaxParams::from_json(j.at("wind_speed"));
  n.gas_price = MinMaxParams::from_json(j.at("gas_price"));
  n.coal_price = MinMaxParams::from_json(j.at("coal_price"));
  n.hdd = MinMaxParams::from_json(j.at("hdd"));
  n.cdd = MinMaxParams::from_json(j.at("cdd"));
  n.price_floor = j.at("price_floor").get<double>();
  n.price_cap = j.at("price_cap").get<double>();
  n.hdd_base = j.at("hdd_base").get<double>();
  return n;
}

namespace {

MinMaxParams fit_or_unit(double lo, double hi) {
  if (hi > lo) return MinMaxParams(lo, hi);
  return MinMaxParams(lo - 0.5, lo + 0.5);
}

template <typename Getter>
MinMaxParams fit_channel(std::span<const MarketDay> days, Getter get) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& d : days) {
    const Eigen::ArrayXd v = get(d);
    lo = std::min(lo, v.minCoeff());
    hi = std::max(hi, v.maxCoeff());
  }
  return fit_or_unit(lo, hi);
}

Eigen::VectorXd unit_interval(const Eigen::ArrayXd& a) { return a.cwiseMax(0.0).cwiseMin(1.0).matrix(); }

double unit_interval(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

ChannelNorms fit_channel_norms(std::span<const MarketDay> train_days, double price_floor,
                               double price_cap, double hdd_base) {
  if (train_days.empty()) throw Error(ErrorCode::EmptyDataset, "no days to fit normalization on");
  if (!(price_cap > price_floor)) throw Error(ErrorCode::DegenerateRange, "price cap must exceed floor");
  ChannelNorms n;
  n.price_floor = price_floor;
  n.price_cap = price_cap;
  n.hdd_base = hdd_base;
  n.price = fit_channel(train_days, [&](const MarketDay& d) {
    return d.price.array().cwiseMax(price_floor).cwiseMin(price_cap).eval();
  });
  n.demand = fit_channel(train_days, [](const MarketDay& d) { return d.demand.array().eval(); });
  n.temperature = fit_channel(train_days, [](const MarketDay& d) { return d.temperature.array().eval(); });
  n.irradiance = fit_channel(train_days, [](const MarketDay& d) { return d.irradiance.array().eval(); });
  n.wind_speed = fit_channel(train_days, [](const MarketDay& d) { return d.wind_speed.array().eval(); });
  n.gas_price = fit_channel(train_days, [](const MarketDay& d) {
    return Eigen::ArrayXd::Constant(1, d.gas_price);
  });
  n.coal_price = fit_channel(train_days, [](const MarketDay& d) {
    return Eigen::ArrayXd::Constant(1, d.coal_price);
  });
  auto degree = [&](const MarketDay& d) {
    return compute_hdd_cdd({d.temperature.data(), static_cast<std::size_t>(d.temperature.size())}, hdd_base);
  };
  n.hdd = fit_channel(train_days, [&](const MarketDay& d) { return Eigen::ArrayXd::Constant(1, degree(d).hdd); });
  n.cdd = fit_channel(train_days, [&](const MarketDay& d) { return Eigen::ArrayXd::Constant(1, degree(d).cdd); });
  return n;
}

Eigen::VectorXd normalized_prices(const MarketDay& day, const ChannelNorms& norms) {
  return unit_interval(normalize(day.price.cwiseMax(norms.price_floor).cwiseMin(norms.price_cap), norms.price));
}

WeatherForecast WeatherForecast::from_day(const MarketDay& day) {
  return {day.temperature, day.irradiance, day.wind_speed};
}

Eigen::VectorXd ConditionVector::flatten() const {
  Eigen::VectorXd out(kDim);
  Eigen::Index at = 0;
  auto put = [&](const Eigen::VectorXd& v) {
    out.segment(at, v.size()) = v;
    at += v.size();
  };
  put(lagged_prices);
  put(lagged_demand);
  put(day_of_week);
  put(month);
  out(at++) = hdd;
  out(at++) = cdd;
  out(at++) = gas_price;
  out(at++) = coal_price;
  put(forecast_temperature);
  put(forecast_irradiance);
  put(forecast_wind);
  if (at != kDim) throw Error(ErrorCode::DimensionMismatch, "condition vector has wrong length");
  return out;
}

ConditionVector build_conditions(const MarketDay& previous_day, const WeatherForecast& forecast,
                                 Date target_date, const ChannelNorms& norms) {
  auto require = [](const std::optional<Eigen::VectorXd>& ch, const char* name) -> const Eigen::VectorXd& {
    if (!ch) throw Error(ErrorCode::MissingChannel, name);
    if (ch->size() != kStepsPerDay) {
      throw Error(ErrorCode::DimensionMismatch, std::string(name) + " forecast must have 48 values");
    }
    return *ch;
  };
  const auto& temp = require(forecast.temperature, "temperature");
  const auto& irr = require(forecast.irradiance, "irradiance");
  const auto& wind = require(forecast.wind_speed, "wind");
  if (target_date != previous_day.date + std::chrono::days{1}) {
    throw Error(ErrorCode::InvalidArgument, "previous day must immediately precede the target date");
  }

  ConditionVector c;
  c.lagged_prices = normalized_prices(previous_day, norms);
  c.lagged_demand = unit_interval(normalize(previous_day.demand, norms.demand));
  c.day_of_week = Eigen::VectorXd::Zero(7);
  c.day_of_week(day_of_week_index(target_date)) = 1.0;
  c.month = Eigen::VectorXd::Zero(12);
  c.month(month_index(target_date)) = 1.0;
  const auto dd = compute_hdd_cdd({temp.data(), static_cast<std::size_t>(temp.size())}, norms.hdd_base);
  c.hdd = unit_interval(normalize(dd.hdd, norms.hdd));
  c.cdd = unit_interval(normalize(dd.cdd, norms.cdd));
  c.gas_price = unit_interval(normalize(previous_day.gas_price, norms.gas_price));
  c.coal_price = unit_interval(normalize(previous_day.coal_price, norms.coal_price));
  c.forecast_temperature = unit_interval(normalize(temp, norms.temperature));
  c.forecast_irradiance = unit_interval(normalize(irr, norms.irradiance));
  c.forecast_wind = unit_interval(normalize(wind, norms.wind_speed));
  return c;
}

SampleSet build_samples(std::span<const MarketDay> days, const ChannelNorms& norms) {
  SampleSet set;
  set.norms = norms;
  for (std::size_t i = 1; i < days.size(); ++i) {
    if (days[i].date != days[i - 1].date + std::chrono::days{1}) continue;
    Sample s;
    s.date = days[i].date;
    s.condition = build_conditions(days[i - 1], WeatherForecast::from_day(days[i]), days[i].date, norms);
    s.target = normalized_prices(days[i], norms);
    set.samples.push_back(std::move(s));
  }
  return set;
}

}  // namespace priceband
