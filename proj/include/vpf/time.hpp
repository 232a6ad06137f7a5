#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace vpf {

using Timestamp = std::chrono::sys_seconds;
using std::chrono::minutes;
using std::chrono::hours;
using std::chrono::days;

/// Fixed sampling interval of every measurement and feature series.
inline constexpr minutes kStep{15};
inline constexpr int kStepsPerDay = 96;

/// Parses `YYYY-MM-DDTHH:MM[:SS][Z]` (a space separator is accepted too).
/// Throws vpf::Error(Parse) on malformed input.
Timestamp parse_timestamp(std::string_view text);

/// `YYYY-MM-DDTHH:MM:SSZ`
std::string format_timestamp(Timestamp t);

/// Midnight UTC of a calendar date given as `YYYY-MM-DD` or a full timestamp.
Timestamp parse_date(std::string_view text);

inline Timestamp make_time(int y, unsigned m, unsigned d, int hh = 0, int mm = 0, int ss = 0) {
  using namespace std::chrono;
  return sys_days{year{y} / month{m} / day{d}} + hours{hh} + minutes{mm} + seconds{ss};
}

inline Timestamp start_of_day(Timestamp t) {
  return std::chrono::floor<days>(t);
}

/// Monday = 0 ... Sunday = 6.
inline int weekday_index(Timestamp t) {
  std::chrono::weekday wd{std::chrono::floor<days>(t)};
  return static_cast<int>(wd.iso_encoding()) - 1;
}

/// Number of 15-minute steps between `from` and `to` (to - from); exact only on the grid.
inline long long steps_between(Timestamp from, Timestamp to) {
  return std::chrono::duration_cast<minutes>(to - from).count() / kStep.count();
}

}  // namespace vpf
