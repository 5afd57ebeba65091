#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace priceband {

inline constexpr int kStepsPerDay = 48;
inline constexpr int kMinutesPerStep = 30;

using Date = std::chrono::sys_days;

/// A half-hourly observation instant in local market time, with the UTC
/// offset it was recorded under. Half-hour index 0 is 00:00 local.
struct Timestamp {
  Date date{};
  int minute_of_day = 0;
  int utc_offset_minutes = 0;

  std::int64_t utc_minutes() const noexcept;
  int half_hour_index() const noexcept { return minute_of_day / kMinutesPerStep; }
  bool on_half_hour() const noexcept { return minute_of_day % kMinutesPerStep == 0; }
};

/// Accepts `YYYY-MM-DDTHH:MM[:SS][Z|+HH:MM|-HH:MM]`; a space may replace the `T`.
/// Throws Error(MalformedRow) on anything else.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(const Timestamp& ts);

Date parse_date(std::string_view text);
std::string format_date(Date d);

/// Monday = 0 ... Sunday = 6.
int day_of_week_index(Date d) noexcept;
/// January = 0 ... December = 11.
int month_index(Date d) noexcept;

enum class Season { Summer, Autumn, Winter, Spring };

/// Southern-hemisphere meteorological seasons: Dec-Feb summer, Mar-May autumn,
/// Jun-Aug winter, Sep-Nov spring.
Season southern_season(Date d) noexcept;
const char* to_string(Season s) noexcept;

}  // namespace priceband
