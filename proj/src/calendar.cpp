#include "priceband/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "priceband/error.hpp"

namespace priceband {

namespace {

int parse_int(std::string_view text, std::string_view whole) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::MalformedRow, "bad timestamp '" + std::string(whole) + "'");
  }
  return value;
}

Date make_date(int y, int m, int d, std::string_view whole) {
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error(ErrorCode::MalformedRow, "bad date '" + std::string(whole) + "'");
  return sys_days{ymd};
}

}  // namespace

std::int64_t Timestamp::utc_minutes() const noexcept {
  return static_cast<std::int64_t>(date.time_since_epoch().count()) * 1440 + minute_of_day -
         utc_offset_minutes;
}

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorCode::MalformedRow, "bad date '" + std::string(text) + "'");
  }
  return make_date(parse_int(text.substr(0, 4), text), parse_int(text.substr(5, 2), text),
                   parse_int(text.substr(8, 2), text), text);
}

Timestamp parse_timestamp(std::string_view text) {
  auto bad = [&] { return Error(ErrorCode::MalformedRow, "bad timestamp '" + std::string(text) + "'"); };
  if (text.size() < 16 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':') throw bad();
  Timestamp ts;
  ts.date = parse_date(text.substr(0, 10));
  const int hh = parse_int(text.substr(11, 2), text);
  const int mm = parse_int(text.substr(14, 2), text);
  std::size_t pos = 16;
  int ss = 0;
  if (pos < text.size() && text[pos] == ':') {
    if (text.size() < 19) throw bad();
    ss = parse_int(text.substr(17, 2), text);
    pos = 19;
  }
  if (hh > 23 || mm > 59 || ss > 59 || ss != 0) throw bad();
  ts.minute_of_day = hh * 60 + mm;
  if (pos < text.size()) {
    const char sign = text[pos];
    if (sign == 'Z' && pos + 1 == text.size()) {
      ts.utc_offset_minutes = 0;
    } else if ((sign == '+' || sign == '-') && text.size() == pos + 6 && text[pos + 3] == ':') {
      const int oh = parse_int(text.substr(pos + 1, 2), text);
      const int om = parse_int(text.substr(pos + 4, 2), text);
      ts.utc_offset_minutes = (sign == '-' ? -1 : 1) * (oh * 60 + om);
    } else {
      throw bad();
    }
  }
  return ts;
}

std::string format_date(Date d) {
  using namespace std::chrono;
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(const Timestamp& ts) {
  char buf[32];
  const int off = ts.utc_offset_minutes < 0 ? -ts.utc_offset_minutes : ts.utc_offset_minutes;
  std::snprintf(buf, sizeof buf, "T%02d:%02d:00%c%02d:%02d", ts.minute_of_day / 60,
                ts.minute_of_day % 60, ts.utc_offset_minutes < 0 ? '-' : '+', off / 60, off % 60);
  return format_date(ts.date) + buf;
}

int day_of_week_index(Date d) noexcept {
  return static_cast<int>(std::chrono::weekday{d}.iso_encoding()) - 1;
}

int month_index(Date d) noexcept {
  return static_cast<int>(static_cast<unsigned>(std::chrono::year_month_day{d}.month())) - 1;
}

Season southern_season(Date d) noexcept {
  switch (month_index(d)) {
    case 11: case 0: case 1: return Season::Summer;
    case 2: case 3: case 4: return Season::Autumn;
    case 5: case 6: case 7: return Season::Winter;
    default: return Season::Spring;
  }
}

const char* to_string(Season s) noexcept {
  switch (s) {
    case Season::Summer: return "summer";
    case Season::Autumn: return "autumn";
    case Season::Winter: return "winter";
    case Season::Spring: return "spring";
  }
  return "unknown";
}

}  // namespace priceband
