#pragma once

#include <cstdint>
#include <ostream>
#include <span>

#include "priceband/calendar.hpp"
#include "priceband/ingest.hpp"

namespace priceband {

/// Toy market: diurnal sinusoidal prices and weather, with a fraction of
/// days whose afternoon weather turns volatile and drives price spikes.
struct SyntheticOptions {
  int days = 140;
  Date start = Date{std::chrono::year{2019} / 1 / 1};
  std::uint64_t seed = 1;
  double volatile_fraction = 0.3;
  int utc_offset_minutes = 600;  // market time, UTC+10
};

struct SyntheticMarket {
  Dataset dataset;
  std::vector<bool> volatile_day;  // parallel to dataset.days
};

SyntheticMarket make_synthetic_market(const SyntheticOptions& options);

/// Writes days in the input CSV schema with ISO-8601 timestamps.
void write_market_csv(std::span<const MarketDay> days, std::ostream& out);

}  // namespace priceband
