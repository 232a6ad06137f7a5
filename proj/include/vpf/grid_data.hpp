#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpf/matrix.hpp"
#include "vpf/time.hpp"

/// Measurement, weather and feature time series for one transformer.
namespace vpf::grid {

enum class Status : unsigned char { Reliable = 0, Unreliable = 1 };

/// Vertical power flow at 15-minute resolution. Values are signed MW:
/// positive when consumption dominates, negative when generation does.
struct PowerSeries {
  Timestamp start{};
  std::vector<double> values;
  std::vector<Status> status;

  std::size_t size() const noexcept { return values.size(); }
  Timestamp time_at(std::size_t i) const { return start + kStep * static_cast<long long>(i); }
  Timestamp end() const { return time_at(size()); }
  bool reliable(std::size_t i) const { return status[i] == Status::Reliable; }

  /// Index of timestamp t. Throws Range if t is off-grid or outside [start, end).
  std::size_t index_of(Timestamp t) const;

  /// Copy of the half-open index range [first, last).
  PowerSeries slice(std::size_t first, std::size_t last) const;

  /// Throws Schema if the value/status lengths differ.
  void validate() const;
};

/// One numerical weather forecast record (3-hour cadence).
struct WeatherRecord {
  Timestamp valid_time{};
  double u10 = 0, v10 = 0, u100 = 0, v100 = 0;  // m/s
  double t2m = 0, d2m = 0;                      // K
  double fal = 0;                               // albedo, [0, 1]
  double ssrd = 0;                              // J/m^2
  double sp = 0;                                // Pa
  double tp = 0;                                // m

  static constexpr std::size_t kFields = 10;
  std::array<double, kFields> fields() const { return {u10, v10, u100, v100, t2m, d2m, fal, ssrd, sp, tp}; }
  static WeatherRecord from_fields(Timestamp t, std::span<const double, kFields> f);

  /// Throws Domain when a physical range invariant is violated.
  void validate() const;
};

struct SunPosition {
  double altitude_deg = 0;       // [-90, 90]
  double azimuth_deg = 0;        // [0, 360), clockwise from north
  double clear_sky_w_m2 = 0;     // zero whenever the sun is at or below the horizon
};

inline constexpr double kSolarConstant = 1361.0;

/// Solar altitude/azimuth from the NOAA approximation of Meeus' low-precision
/// solar coordinates (about 0.01 deg between 1800 and 2100, no refraction).
/// Clear-sky radiation is kSolarConstant * max(0, sin(altitude)).
SunPosition compute_sun_position(double lat_deg, double lon_deg, Timestamp t);

struct CalendarFeatures {
  double hour_sin = 0, hour_cos = 1;
  double weekday_sin = 0, weekday_cos = 1;
};

CalendarFeatures calendar_features(Timestamp t);

/// Exogenous model inputs on the 15-minute axis, one row per step. Column
/// order is fixed: 10 weather variables, 3 sun variables, 4 calendar variables.
struct FeatureFrame {
  static constexpr std::size_t kColumns = 17;
  static constexpr std::size_t kWeatherColumns = 10;
  static const std::array<std::string_view, kColumns>& column_names();

  Timestamp start{};
  Matrix values;  // rows() steps x kColumns

  std::size_t size() const noexcept { return values.rows(); }
  Timestamp time_at(std::size_t i) const { return start + kStep * static_cast<long long>(i); }
  FeatureFrame slice(std::size_t first, std::size_t last) const;
};

/// Linearly interpolates the 10 weather variables onto `count` 15-minute steps
/// starting at `axis_start`. Returns a count x 10 matrix. Values at record
/// timestamps are reproduced exactly. Throws Coverage when the axis leaves
/// [first record, last record], Schema when records are not strictly increasing.
Matrix align_weather(std::span<const WeatherRecord> records, Timestamp axis_start, std::size_t count);

/// Full feature frame for the axis of `power`.
FeatureFrame build_feature_frame(std::span<const WeatherRecord> records, double lat_deg, double lon_deg,
                                 Timestamp axis_start, std::size_t count);

struct TransformerMeta {
  std::string id;
  double lat = 0;
  double lon = 0;
};

// CSV schemas:
//   power:   timestamp,value_mw,status
//   weather: valid_time,u10,v10,u100,v100,t2m,d2m,fal,ssrd,sp,tp
//   meta:    key=value lines with id, lat, lon
inline constexpr std::string_view kPowerHeader = "timestamp,value_mw,status";
inline constexpr std::string_view kWeatherHeader = "valid_time,u10,v10,u100,v100,t2m,d2m,fal,ssrd,sp,tp";

/// Parses a power CSV. Gaps on the 15-minute grid are filled with the last
/// seen value flagged unreliable.
PowerSeries read_power_csv(std::istream& in);
PowerSeries load_power_csv(const std::filesystem::path& path);
std::vector<WeatherRecord> read_weather_csv(std::istream& in);
std::vector<WeatherRecord> load_weather_csv(const std::filesystem::path& path);
TransformerMeta load_transformer_meta(const std::filesystem::path& path);

void write_power_csv(std::ostream& out, const PowerSeries& series);
void write_weather_csv(std::ostream& out, std::span<const WeatherRecord> records);
void save_power_csv(const std::filesystem::path& path, const PowerSeries& series);
void save_weather_csv(const std::filesystem::path& path, std::span<const WeatherRecord> records);
void save_transformer_meta(const std::filesystem::path& path, const TransformerMeta& meta);

}  // namespace vpf::grid
