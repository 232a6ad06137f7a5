#include "vpf/time.hpp"

#include <charconv>
#include <cstdio>

#include "vpf/error.hpp"

namespace vpf {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Coverage: return "coverage error";
    case ErrorKind::Size: return "size error";
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Range: return "range error";
    case ErrorKind::Alignment: return "alignment error";
    case ErrorKind::DegenerateScale: return "degenerate scale";
    case ErrorKind::State: return "state error";
    case ErrorKind::UndefinedCorrelation: return "undefined correlation";
    case ErrorKind::Numerical: return "numerical failure";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  const char* first = s.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, out);
  return ec == std::errc{} && ptr == first + len;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  // 0123456789012345678
  // YYYY-MM-DDTHH:MM:SSZ
  int y = 0, mo = 0, d = 0, hh = 0, mi = 0, ss = 0;
  bool ok = text.size() >= 16 && read_int(text, 0, 4, y) && text[4] == '-' &&
            read_int(text, 5, 2, mo) && text[7] == '-' && read_int(text, 8, 2, d) &&
            (text[10] == 'T' || text[10] == ' ') && read_int(text, 11, 2, hh) &&
            text[13] == ':' && read_int(text, 14, 2, mi);
  std::size_t rest = 16;
  if (ok && text.size() >= 19 && text[16] == ':') {
    ok = read_int(text, 17, 2, ss);
    rest = 19;
  }
  if (ok && rest < text.size()) ok = (text.substr(rest) == "Z" || text.substr(rest) == "+00:00");
  if (!ok || mo < 1 || mo > 12 || d < 1 || d > 31 || hh > 23 || mi > 59 || ss > 59)
    throw Error(ErrorKind::Parse, "malformed timestamp '" + std::string(text) + "'");
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error(ErrorKind::Parse, "invalid date '" + std::string(text) + "'");
  return make_time(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), hh, mi, ss);
}

Timestamp parse_date(std::string_view text) {
  if (text.size() == 10) return parse_timestamp(std::string(text) + "T00:00");
  return start_of_day(parse_timestamp(text));
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

}  // namespace vpf
