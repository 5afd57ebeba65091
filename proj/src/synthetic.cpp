#include "priceband/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "priceband/intervals.hpp"
#include "priceband/rng.hpp"
#include "priceband/volatility.hpp"

namespace priceband {

SyntheticMarket make_synthetic_market(const SyntheticOptions& options) {
  if (options.days <= 0) throw Error(ErrorCode::InvalidArgument, "synthetic market needs at least one day");
  std::mt19937_64 rng(derive_seed(options.seed, "synthetic-market"));
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  SyntheticMarket out;
  double gas = 8.0;
  double coal = 80.0;
  for (int d = 0; d < options.days; ++d) {
    MarketDay day;
    day.date = options.start + std::chrono::days{d};
    day.utc_offset_minutes = options.utc_offset_minutes;
    day.price.resize(kStepsPerDay);
    day.demand.resize(kStepsPerDay);
    day.temperature.resize(kStepsPerDay);
    day.irradiance.resize(kStepsPerDay);
    day.wind_speed.resize(kStepsPerDay);

    const bool is_volatile = uniform(rng) < options.volatile_fraction;
    const double day_temp = 22.0 + 3.0 * unit(rng);
    const double cloud = 0.7 + 0.3 * uniform(rng);
    const double day_wind = 5.0 + 1.5 * unit(rng);
    const double day_level = 60.0 + 8.0 * unit(rng);
    gas = std::max(2.0, gas + 0.2 * unit(rng));
    coal = std::max(20.0, coal + 1.0 * unit(rng));

    for (int k = 0; k < kStepsPerDay; ++k) {
      const double phase = two_pi * static_cast<double>(k) / kStepsPerDay;
      const bool afternoon = k >= kAfternoonWindow.first && k <= kAfternoonWindow.last;
      double temp = day_temp + 6.0 * std::sin(phase - 0.6 * std::numbers::pi) + 0.3 * unit(rng);
      double sun = (k >= 12 && k <= 38) ? 950.0 * std::sin(std::numbers::pi * (k - 12) / 26.0) * cloud : 0.0;
      double wind = day_wind + 1.0 * std::sin(phase) + 0.4 * unit(rng);
      double price = day_level + 25.0 * std::sin(phase - 0.5 * std::numbers::pi) + 15.0 * std::sin(2.0 * phase) +
                     4.0 * unit(rng);
      if (is_volatile && afternoon) {
        temp += 4.0 * unit(rng);
        sun *= 0.25 + 0.75 * uniform(rng);
        wind += 3.0 * std::abs(unit(rng));
        price += 120.0 + 150.0 * std::abs(unit(rng));
      }
      day.temperature(k) = temp;
      day.irradiance(k) = std::max(0.0, sun);
      day.wind_speed(k) = std::max(0.0, wind);
      day.price(k) = price;
      day.demand(k) = 6000.0 + 1500.0 * std::sin(phase - 0.5 * std::numbers::pi) + 80.0 * (temp - 18.0) +
                      100.0 * unit(rng);
    }
    day.gas_price = gas;
    day.coal_price = coal;
    out.dataset.days.push_back(std::move(day));
    out.volatile_day.push_back(is_volatile);
  }
  auto& rep = out.dataset.report;
  rep.rows_read = rep.rows_consumed = static_cast<std::size_t>(options.days) * kStepsPerDay;
  rep.days_kept = static_cast<std::size_t>(options.days);
  return out;
}

void write_market_csv(std::span<const MarketDay> days, std::ostream& out) {
  out << "timestamp,price,demand,temperature,irradiance,wind_speed,gas_price,coal_price\n";
  for (const auto& d : days) {
    for (int k = 0; k < kStepsPerDay; ++k) {
      const Timestamp ts{d.date, k * kMinutesPerStep, d.utc_offset_minutes};
      out << format_timestamp(ts) << ',' << format_double(d.price(k)) << ',' << format_double(d.demand(k)) << ','
          << format_double(d.temperature(k)) << ',' << format_double(d.irradiance(k)) << ','
          << format_double(d.wind_speed(k)) << ',' << format_double(d.gas_price) << ','
          << format_double(d.coal_price) << '\n';
    }
  }
}

}  // namespace priceband
