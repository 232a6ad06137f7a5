#include "vpf/grid_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "vpf/csv.hpp"
#include "vpf/error.hpp"

namespace vpf::grid {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double wrap360(double x) {
  x = std::fmod(x, 360.0);
  return x < 0 ? x + 360.0 : x;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Series

std::size_t PowerSeries::index_of(Timestamp t) const {
  const auto offset = t - start;
  if (offset.count() < 0 || offset % kStep != std::chrono::seconds{0})
    throw Error(ErrorKind::Range, "timestamp " + format_timestamp(t) + " is not on the series grid");
  const auto idx = static_cast<std::size_t>(offset / kStep);
  if (idx >= size()) throw Error(ErrorKind::Range, "timestamp " + format_timestamp(t) + " is past the series end");
  return idx;
}

PowerSeries PowerSeries::slice(std::size_t first, std::size_t last) const {
  if (first > last || last > size()) throw Error(ErrorKind::Range, "power slice out of range");
  PowerSeries out;
  out.start = time_at(first);
  out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(first), values.begin() + static_cast<std::ptrdiff_t>(last));
  out.status.assign(status.begin() + static_cast<std::ptrdiff_t>(first), status.begin() + static_cast<std::ptrdiff_t>(last));
  return out;
}

void PowerSeries::validate() const {
  if (values.size() != status.size())
    throw Error(ErrorKind::Schema, "power series values/status length mismatch");
}

FeatureFrame FeatureFrame::slice(std::size_t first, std::size_t last) const {
  if (first > last || last > size()) throw Error(ErrorKind::Range, "feature slice out of range");
  FeatureFrame out;
  out.start = time_at(first);
  out.values.resize(last - first, kColumns);
  std::copy(values.data() + first * kColumns, values.data() + last * kColumns, out.values.data());
  return out;
}

const std::array<std::string_view, FeatureFrame::kColumns>& FeatureFrame::column_names() {
  static const std::array<std::string_view, kColumns> names = {
      "u10",          "v10",         "u100",          "v100",     "t2m",      "d2m",
      "fal",          "ssrd",        "sp",            "tp",       "sun_altitude", "sun_azimuth",
      "clear_sky",    "hour_sin",    "hour_cos",      "weekday_sin", "weekday_cos"};
  return names;
}

WeatherRecord WeatherRecord::from_fields(Timestamp t, std::span<const double, kFields> f) {
  WeatherRecord r;
  r.valid_time = t;
  r.u10 = f[0];
  r.v10 = f[1];
  r.u100 = f[2];
  r.v100 = f[3];
  r.t2m = f[4];
  r.d2m = f[5];
  r.fal = f[6];
  r.ssrd = f[7];
  r.sp = f[8];
  r.tp = f[9];
  return r;
}

void WeatherRecord::validate() const {
  const auto where = " at " + format_timestamp(valid_time);
  if (!(fal >= 0.0 && fal <= 1.0)) throw Error(ErrorKind::Domain, "albedo outside [0,1]" + where);
  if (!(ssrd >= 0.0)) throw Error(ErrorKind::Domain, "negative ssrd" + where);
  if (!(sp > 0.0)) throw Error(ErrorKind::Domain, "non-positive surface pressure" + where);
  if (!(tp >= 0.0)) throw Error(ErrorKind::Domain, "negative precipitation" + where);
}

// ---------------------------------------------------------------------------
// Sun position

SunPosition compute_sun_position(double lat_deg, double lon_deg, Timestamp t) {
  if (!(lat_deg >= -90.0 && lat_deg <= 90.0) || !(lon_deg >= -180.0 && lon_deg <= 180.0))
    throw Error(ErrorKind::Domain, "invalid coordinates");

  const double unix_s = static_cast<double>(t.time_since_epoch().count());
  const double jd = unix_s / 86400.0 + 2440587.5;
  const double jc = (jd - 2451545.0) / 36525.0;

  const double mean_long = wrap360(280.46646 + jc * (36000.76983 + jc * 0.0003032));
  const double mean_anom = 357.52911 + jc * (35999.05029 - 0.0001537 * jc);
  const double ecc = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc);
  const double m = mean_anom * kDeg;
  const double centre = std::sin(m) * (1.914602 - jc * (0.004817 + 0.000014 * jc)) +
                        std::sin(2 * m) * (0.019993 - 0.000101 * jc) + std::sin(3 * m) * 0.000289;
  const double omega = (125.04 - 1934.136 * jc) * kDeg;
  const double app_long = (mean_long + centre - 0.00569 - 0.00478 * std::sin(omega)) * kDeg;
  const double mean_obliq = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0;
  const double obliq = (mean_obliq + 0.00256 * std::cos(omega)) * kDeg;
  const double decl = std::asin(std::sin(obliq) * std::sin(app_long));

  const double y = std::pow(std::tan(obliq / 2), 2);
  const double l0 = mean_long * kDeg;
  const double eq_time_min =
      4.0 / kDeg *
      (y * std::sin(2 * l0) - 2 * ecc * std::sin(m) + 4 * ecc * y * std::sin(m) * std::cos(2 * l0) -
       0.5 * y * y * std::sin(4 * l0) - 1.25 * ecc * ecc * std::sin(2 * m));

  const double minutes_of_day = std::fmod(unix_s, 86400.0) / 60.0;
  const double true_solar_min = std::fmod(minutes_of_day + eq_time_min + 4.0 * lon_deg + 2880.0, 1440.0);
  const double hour_angle = (true_solar_min / 4.0 - 180.0) * kDeg;

  const double lat = lat_deg * kDeg;
  const double cos_zen = std::clamp(
      std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(hour_angle), -1.0, 1.0);
  const double zenith = std::acos(cos_zen);

  SunPosition out;
  out.altitude_deg = 90.0 - zenith / kDeg;
  out.azimuth_deg = wrap360(
      std::atan2(std::sin(hour_angle), std::cos(hour_angle) * std::sin(lat) - std::tan(decl) * std::cos(lat)) /
          kDeg +
      180.0);
  if (out.azimuth_deg >= 360.0) out.azimuth_deg = 0.0;
  out.clear_sky_w_m2 = out.altitude_deg > 0.0 ? kSolarConstant * std::sin(out.altitude_deg * kDeg) : 0.0;
  return out;
}

CalendarFeatures calendar_features(Timestamp t) {
  using namespace std::chrono;
  const auto since_midnight = duration_cast<seconds>(t - start_of_day(t)).count();
  const double hour = static_cast<double>(since_midnight) / 3600.0;
  const double hour_angle = 2.0 * std::numbers::pi * hour / 24.0;
  const double wd_angle = 2.0 * std::numbers::pi * weekday_index(t) / 7.0;
  return {std::sin(hour_angle), std::cos(hour_angle), std::sin(wd_angle), std::cos(wd_angle)};
}

// ---------------------------------------------------------------------------
// Weather alignment

Matrix align_weather(std::span<const WeatherRecord> records, Timestamp axis_start, std::size_t count) {
  if (records.empty()) throw Error(ErrorKind::Coverage, "no weather records");
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].valid_time <= records[i - 1].valid_time)
      throw Error(ErrorKind::Schema, "weather records not strictly increasing at " +
                                         format_timestamp(records[i].valid_time));
  const Timestamp axis_end = axis_start + kStep * static_cast<long long>(count == 0 ? 0 : count - 1);
  if (axis_start < records.front().valid_time || axis_end > records.back().valid_time)
    throw Error(ErrorKind::Coverage, "target axis " + format_timestamp(axis_start) + ".." +
                                         format_timestamp(axis_end) + " outside weather coverage " +
                                         format_timestamp(records.front().valid_time) + ".." +
                                         format_timestamp(records.back().valid_time));

  Matrix out(count, WeatherRecord::kFields);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const Timestamp t = axis_start + kStep * static_cast<long long>(i);
    while (seg + 1 < records.size() && records[seg + 1].valid_time <= t) ++seg;
    const auto f0 = records[seg].fields();
    if (records[seg].valid_time == t || seg + 1 == records.size()) {
      std::copy(f0.begin(), f0.end(), out.row(i).begin());
      continue;
    }
    const auto f1 = records[seg + 1].fields();
    const double span = static_cast<double>((records[seg + 1].valid_time - records[seg].valid_time).count());
    const double w = static_cast<double>((t - records[seg].valid_time).count()) / span;
    for (std::size_t c = 0; c < WeatherRecord::kFields; ++c) out(i, c) = f0[c] + (f1[c] - f0[c]) * w;
  }
  return out;
}

FeatureFrame build_feature_frame(std::span<const WeatherRecord> records, double lat_deg, double lon_deg,
                                 Timestamp axis_start, std::size_t count) {
  const Matrix weather = align_weather(records, axis_start, count);
  FeatureFrame frame;
  frame.start = axis_start;
  frame.values.resize(count, FeatureFrame::kColumns);
  for (std::size_t i = 0; i < count; ++i) {
    auto row = frame.values.row(i);
    std::copy(weather.row(i).begin(), weather.row(i).end(), row.begin());
    const Timestamp t = frame.time_at(i);
    const SunPosition sun = compute_sun_position(lat_deg, lon_deg, t);
    const CalendarFeatures cal = calendar_features(t);
    row[10] = sun.altitude_deg;
    row[11] = sun.azimuth_deg;
    row[12] = sun.clear_sky_w_m2;
    row[13] = cal.hour_sin;
    row[14] = cal.hour_cos;
    row[15] = cal.weekday_sin;
    row[16] = cal.weekday_cos;
  }
  return frame;
}

// ---------------------------------------------------------------------------
// CSV

PowerSeries read_power_csv(std::istream& in) {
  const auto lines = csv::read_lines(in);
  if (lines.empty() || lines[0] != kPowerHeader)
    throw Error(ErrorKind::Schema, "power csv header must be '" + std::string(kPowerHeader) + "'");

  PowerSeries series;
  bool first = true;
  Timestamp prev{};
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto cols = csv::split(lines[ln]);
    if (cols.size() != 3) throw ParseError(ln + 1, "expected 3 columns");
    Timestamp t;
    try {
      t = parse_timestamp(cols[0]);
    } catch (const Error& e) {
      throw ParseError(ln + 1, e.what());
    }
    double value = 0;
    long long status = 0;
    if (!csv::parse_double(cols[1], value) || !std::isfinite(value)) throw ParseError(ln + 1, "bad value_mw");
    if (!csv::parse_int(cols[2], status) || (status != 0 && status != 1))
      throw ParseError(ln + 1, "status must be 0 or 1");

    if (first) {
      series.start = t;
      first = false;
    } else {
      if (t <= prev)
        throw Error(ErrorKind::Schema, "line " + std::to_string(ln + 1) + ": non-increasing timestamp " +
                                           format_timestamp(t));
      if ((t - series.start) % kStep != std::chrono::seconds{0})
        throw Error(ErrorKind::Schema, "line " + std::to_string(ln + 1) + ": timestamp off the 15-minute grid");
      // Gap fill: carry the last value, flagged unreliable.
      for (Timestamp g = prev + kStep; g < t; g += kStep) {
        series.values.push_back(series.values.back());
        series.status.push_back(Status::Unreliable);
      }
    }
    series.values.push_back(value);
    series.status.push_back(status == 0 ? Status::Reliable : Status::Unreliable);
    prev = t;
  }
  return series;
}

PowerSeries load_power_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_power_csv(in);
}

std::vector<WeatherRecord> read_weather_csv(std::istream& in) {
  const auto lines = csv::read_lines(in);
  if (lines.empty() || lines[0] != kWeatherHeader)
    throw Error(ErrorKind::Schema, "weather csv header must be '" + std::string(kWeatherHeader) + "'");
  std::vector<WeatherRecord> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto cols = csv::split(lines[ln]);
    if (cols.size() != 1 + WeatherRecord::kFields) throw ParseError(ln + 1, "expected 11 columns");
    Timestamp t;
    try {
      t = parse_timestamp(cols[0]);
    } catch (const Error& e) {
      throw ParseError(ln + 1, e.what());
    }
    std::array<double, WeatherRecord::kFields> f{};
    for (std::size_t c = 0; c < f.size(); ++c)
      if (!csv::parse_double(cols[c + 1], f[c]) || !std::isfinite(f[c]))
        throw ParseError(ln + 1, "bad number in column " + std::to_string(c + 2));
    if (!out.empty() && t <= out.back().valid_time)
      throw Error(ErrorKind::Schema, "line " + std::to_string(ln + 1) + ": non-increasing valid_time");
    auto rec = WeatherRecord::from_fields(t, f);
    try {
      rec.validate();
    } catch (const Error& e) {
      throw ParseError(ln + 1, e.what());
    }
    out.push_back(rec);
  }
  return out;
}

std::vector<WeatherRecord> load_weather_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_weather_csv(in);
}

TransformerMeta load_transformer_meta(const std::filesystem::path& path) {
  auto in = open_input(path);
  TransformerMeta meta;
  bool has_id = false, has_lat = false, has_lon = false;
  const auto lines = csv::read_lines(in);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string_view line = lines[ln];
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(ln + 1, "expected key=value");
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "id") {
      meta.id = std::string(value);
      has_id = true;
    } else if (key == "lat") {
      if (!csv::parse_double(value, meta.lat)) throw ParseError(ln + 1, "bad lat");
      has_lat = true;
    } else if (key == "lon") {
      if (!csv::parse_double(value, meta.lon)) throw ParseError(ln + 1, "bad lon");
      has_lon = true;
    }
  }
  if (!has_id || !has_lat || !has_lon) throw Error(ErrorKind::Schema, path.string() + ": needs id, lat and lon");
  return meta;
}

void write_power_csv(std::ostream& out, const PowerSeries& series) {
  series.validate();
  out << kPowerHeader << '\n';
  for (std::size_t i = 0; i < series.size(); ++i)
    out << format_timestamp(series.time_at(i)) << ',' << csv::format_double(series.values[i]) << ','
        << static_cast<int>(series.status[i]) << '\n';
}

void write_weather_csv(std::ostream& out, std::span<const WeatherRecord> records) {
  out << kWeatherHeader << '\n';
  for (const auto& r : records) {
    out << format_timestamp(r.valid_time);
    for (double v : r.fields()) out << ',' << csv::format_double(v);
    out << '\n';
  }
}

void save_power_csv(const std::filesystem::path& path, const PowerSeries& series) {
  auto out = open_output(path);
  write_power_csv(out, series);
}

void save_weather_csv(const std::filesystem::path& path, std::span<const WeatherRecord> records) {
  auto out = open_output(path);
  write_weather_csv(out, records);
}

void save_transformer_meta(const std::filesystem::path& path, const TransformerMeta& meta) {
  auto out = open_output(path);
  out << "id=" << meta.id << "\nlat=" << csv::format_double(meta.lat) << "\nlon=" << csv::format_double(meta.lon)
      << '\n';
}

}  // namespace vpf::grid
