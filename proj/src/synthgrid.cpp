#include "vpf/synthgrid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "vpf/csv.hpp"
#include "vpf/error.hpp"
#include "vpf/neuralnet.hpp"

namespace vpf::synth {

namespace {

using nn::Rng;
using nn::standard_normal;
using nn::uniform01;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Discrete AR(1) with the given correlation time (in steps) and unit
// stationary variance.
class Ar1 {
 public:
  Ar1(double tau_steps, Rng& rng) : phi_(std::exp(-1.0 / tau_steps)), x_(standard_normal(rng)) {}
  double next(Rng& rng) {
    x_ = phi_ * x_ + std::sqrt(1.0 - phi_ * phi_) * standard_normal(rng);
    return x_;
  }

 private:
  double phi_;
  double x_;
};

// Independent stream per process so adding an event never shifts the weather.
Rng stream(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  return Rng(seq);
}

double hour_of_day(Timestamp t) {
  const auto s = (t - start_of_day(t)).count();
  return static_cast<double>(s) / 3600.0;
}

double day_of_year(Timestamp t) {
  using namespace std::chrono;
  const year_month_day ymd{floor<days>(t)};
  const auto jan1 = sys_days{ymd.year() / January / 1};
  return static_cast<double>((floor<days>(t) - jan1).count());
}

// Daily consumption shape around 1: night trough, morning and evening peaks.
double daily_shape(double hour) {
  return -0.6 * std::cos(kTwoPi * (hour - 1.0) / 24.0) + 0.4 * std::cos(2.0 * kTwoPi * (hour - 19.0) / 24.0);
}

struct Scales {
  double pv = 1.0, wind = 1.0, load = 1.0;
};

// Events are applied in time order; the latest one per asset wins.
Scales scales_at(const std::vector<DriftEvent>& events, Timestamp t) {
  Scales s;
  const DriftEvent* latest[3] = {nullptr, nullptr, nullptr};
  for (const auto& e : events) {
    if (t < e.at) continue;
    auto& slot = latest[static_cast<int>(e.asset)];
    if (!slot || slot->at <= e.at) slot = &e;
  }
  for (const DriftEvent* p : latest) {
    if (!p) continue;
    const auto& e = *p;
    switch (e.asset) {
      case Asset::Pv: s.pv = e.factor; break;
      case Asset::Wind: s.wind = e.factor; break;
      case Asset::Load: s.load = e.factor; break;
    }
  }
  return s;
}

// True atmospheric state at one 15-minute step.
struct State {
  double speed100 = 0, dir = 0, transmissivity = 1, t2m = 0, spread = 0, sp = 0, fal = 0, clear_sky = 0;
};

}  // namespace

const char* to_string(Asset a) {
  switch (a) {
    case Asset::Pv: return "pv";
    case Asset::Wind: return "wind";
    case Asset::Load: return "load";
  }
  return "?";
}

Asset parse_asset(std::string_view name) {
  if (name == "pv") return Asset::Pv;
  if (name == "wind") return Asset::Wind;
  if (name == "load") return Asset::Load;
  throw Error(ErrorKind::Config, "unknown asset '" + std::string(name) + "'");
}

void ScenarioSpec::validate() const {
  if (id.empty()) throw Error(ErrorKind::Config, "scenario id must not be empty");
  if (days < 2) throw Error(ErrorKind::Config, "scenario " + id + ": span must cover at least two days");
  if (start != start_of_day(start)) throw Error(ErrorKind::Config, "scenario " + id + ": start must be midnight UTC");
  if (!(lat >= -90 && lat <= 90 && lon >= -180 && lon <= 180))
    throw Error(ErrorKind::Config, "scenario " + id + ": invalid coordinates");
  if (!(pv_capacity_mw >= 0 && wind_capacity_mw >= 0 && load.base_mw >= 0))
    throw Error(ErrorKind::Config, "scenario " + id + ": capacities must be non-negative");
  if (!(load.daily_amplitude >= 0 && load.daily_amplitude < 1 && load.weekend_factor > 0 && load.noise_sigma >= 0))
    throw Error(ErrorKind::Config, "scenario " + id + ": invalid load profile");
  if (!(weather_noise >= 0)) throw Error(ErrorKind::Config, "scenario " + id + ": weather noise must be >= 0");
  if (!(unreliable_fraction >= 0 && unreliable_fraction < 1))
    throw Error(ErrorKind::Config, "scenario " + id + ": unreliable fraction must lie in [0, 1)");
  for (const auto& e : events) {
    if (e.at < start || e.at >= end())
      throw Error(ErrorKind::Config, "scenario " + id + ": event at " + format_timestamp(e.at) + " outside the span");
    if (!(e.factor >= 0)) throw Error(ErrorKind::Config, "scenario " + id + ": event factor must be >= 0");
  }
  if (split && !(start < split->train_end && split->train_end < split->val_end && split->val_end < end()))
    throw Error(ErrorKind::Config, "scenario " + id + ": split boundaries must be ordered inside the span");
}

double wind_power_curve(double speed) {
  constexpr double cut_in = 3.0, rated = 12.0, cut_out = 25.0;
  if (speed < cut_in || speed > cut_out) return 0.0;
  if (speed >= rated) return 1.0;
  return (speed * speed * speed - cut_in * cut_in * cut_in) / (rated * rated * rated - cut_in * cut_in * cut_in);
}

SyntheticBundle generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const std::size_t n = spec.days * static_cast<std::size_t>(kStepsPerDay);

  Rng wind_rng = stream(spec.seed, 1), cloud_rng = stream(spec.seed, 2), temp_rng = stream(spec.seed, 3);
  Rng load_rng = stream(spec.seed, 4), fc_rng = stream(spec.seed, 5);

  // slow synoptic and faster mesoscale wind variability, 15-min steps
  Ar1 wind_slow(4.0 * 96, wind_rng), wind_fast(8.0 * 4, wind_rng), wind_dir(2.0 * 96, wind_rng);
  Ar1 cloud(10.0 * 4, cloud_rng), cloud_slow(3.0 * 96, cloud_rng);
  Ar1 temp(2.0 * 96, temp_rng), pressure(3.0 * 96, temp_rng), albedo(10.0 * 96, temp_rng);
  Ar1 load_noise(6.0 * 4, load_rng);

  // one extra step so the last weather record (at the end of the span) has a state
  std::vector<State> st(n + 1);
  SyntheticBundle b;
  b.spec = spec;
  b.power.start = spec.start;
  b.power.values.resize(n);
  b.power.status.assign(n, grid::Status::Reliable);
  b.load.resize(n);
  b.pv.resize(n);
  b.wind.resize(n);

  for (std::size_t i = 0; i <= n; ++i) {
    const Timestamp t = spec.start + kStep * static_cast<long long>(i);
    const double doy = day_of_year(t), hour = hour_of_day(t);
    State& s = st[i];
    s.speed100 = std::max(0.0, 7.0 + 3.2 * wind_slow.next(wind_rng) + 1.3 * wind_fast.next(wind_rng));
    s.dir = 4.2 + 1.2 * wind_dir.next(wind_rng);  // radians, prevailing south-west
    const double c = 0.9 * cloud.next(cloud_rng) + 0.8 * cloud_slow.next(cloud_rng);
    s.transmissivity = 0.2 + 0.8 / (1.0 + std::exp(-(1.2 * c + 0.6)));
    const auto sun = grid::compute_sun_position(spec.lat, spec.lon, t);
    s.clear_sky = sun.clear_sky_w_m2;
    s.t2m = 282.0 - 9.0 * std::cos(kTwoPi * (doy - 15.0) / 365.0) - 3.5 * std::cos(kTwoPi * (hour - 3.0) / 24.0) +
            2.5 * temp.next(temp_rng);
    s.spread = 3.0 + 2.0 * (s.transmissivity - 0.2);
    s.sp = 101325.0 + 900.0 * pressure.next(temp_rng);
    s.fal = std::clamp(0.17 + 0.02 * albedo.next(temp_rng), 0.0, 1.0);
    if (i == n) break;

    const Scales sc = scales_at(spec.events, t);
    const int wd = weekday_index(t);
    const double weekly = wd >= 5 ? spec.load.weekend_factor : 1.0;
    const double seasonal = 1.0 + 0.08 * std::cos(kTwoPi * (doy - 15.0) / 365.0);
    const double l = spec.load.base_mw * sc.load * seasonal * weekly * (1.0 + spec.load.daily_amplitude * daily_shape(hour)) +
                     spec.load.noise_sigma * load_noise.next(load_rng);
    b.load[i] = std::max(0.0, l);
    b.pv[i] = spec.pv_capacity_mw * sc.pv * 0.85 * (s.clear_sky / grid::kSolarConstant) * s.transmissivity;
    b.wind[i] = spec.wind_capacity_mw * sc.wind * wind_power_curve(s.speed100);
    b.power.values[i] = b.load[i] - b.pv[i] - b.wind[i];
  }

  // forecast records: truth at the 3 h knots plus white forecast error
  const double e = spec.weather_noise;
  for (std::size_t i = 0; i <= n; i += 12) {
    const State& s = st[i];
    const double speed = std::max(0.0, s.speed100 + e * 1.0 * standard_normal(fc_rng));
    const double dir = s.dir + e * 0.15 * standard_normal(fc_rng);
    grid::WeatherRecord w;
    w.valid_time = spec.start + kStep * static_cast<long long>(i);
    w.u100 = speed * std::cos(dir);
    w.v100 = speed * std::sin(dir);
    w.u10 = 0.72 * w.u100;
    w.v10 = 0.72 * w.v100;
    w.t2m = s.t2m + e * 0.8 * standard_normal(fc_rng);
    w.d2m = w.t2m - s.spread;
    w.fal = s.fal;
    const double trans = std::clamp(s.transmissivity + e * 0.08 * standard_normal(fc_rng), 0.0, 1.0);
    w.ssrd = s.clear_sky * trans * 3600.0;  // hourly accumulation
    w.sp = s.sp + e * 50.0 * standard_normal(fc_rng);
    w.tp = std::max(0.0, 0.55 - trans) * 0.004;
    b.weather.push_back(w);
  }

  if (spec.unreliable_fraction > 0.0)
    b.power = inject_status_noise(b.power, spec.unreliable_fraction, spec.seed ^ 0x5eed5eedULL);
  return b;
}

grid::PowerSeries inject_status_noise(const grid::PowerSeries& series, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw Error(ErrorKind::Config, "unreliable fraction must lie in [0, 1)");
  grid::PowerSeries out = series;
  if (fraction == 0.0 || series.size() == 0) return out;
  Rng rng = stream(seed, 99);
  double spread = 0.0;
  {
    double m = 0;
    for (double v : series.values) m += v;
    m /= static_cast<double>(series.size());
    for (double v : series.values) spread += (v - m) * (v - m);
    spread = std::sqrt(spread / static_cast<double>(series.size()));
  }
  const double p_start = fraction / 4.5;
  for (std::size_t i = 0; i < out.size();) {
    if (uniform01(rng) >= p_start) {
      ++i;
      continue;
    }
    const std::size_t len = 1 + static_cast<std::size_t>(uniform01(rng) * 8.0);
    const bool hold = uniform01(rng) < 0.5;
    const double held = i > 0 ? out.values[i - 1] : out.values[i];
    const double spike = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * (3.0 + 3.0 * uniform01(rng)) * spread;
    for (std::size_t j = i; j < std::min(out.size(), i + len); ++j) {
      out.status[j] = grid::Status::Unreliable;
      out.values[j] = hold ? held : out.values[j] + spike;
    }
    i += len;
  }
  return out;
}

std::vector<ScenarioSpec> canonical_fleet(std::uint64_t seed, const FleetTimeline& tl) {
  if (tl.train_days < 4 || tl.val_days < 2 || tl.test_days < 1)
    throw Error(ErrorKind::Config, "fleet timeline needs >= 4 train, >= 2 validation and >= 1 test days");
  const Timestamp val_end = make_time(2018, 7, 15);
  const Timestamp train_end = val_end - std::chrono::days{tl.val_days};
  const Timestamp start = train_end - std::chrono::days{tl.train_days};
  const std::size_t days = tl.train_days + tl.val_days + tl.test_days + tl.tail_days;

  auto base = [&](std::string id, double lat, double lon, std::uint64_t k) {
    ScenarioSpec s;
    s.id = std::move(id);
    s.lat = lat;
    s.lon = lon;
    s.start = start;
    s.days = days;
    s.split = prep::SplitSpec{train_end, val_end};
    s.unreliable_fraction = 0.01;
    s.seed = seed * 1000003ULL + k;
    return s;
  };

  std::vector<ScenarioSpec> fleet;
  {  // consumption dominated, stable
    auto s = base("T1_consumer", 52.4, 9.7, 1);
    s.load = {25.0, 0.35, 0.85, 0.5};
    s.pv_capacity_mw = 3.0;
    fleet.push_back(s);
  }
  {  // new solar park at test start
    auto s = base("T2_pv_drift", 48.8, 11.4, 2);
    s.load = {16.0, 0.3, 0.9, 0.4};
    s.pv_capacity_mw = 10.0;
    s.events = {{val_end, Asset::Pv, 4.0}};
    fleet.push_back(s);
  }
  {  // new wind farm at test start
    auto s = base("T3_wind_drift", 53.9, 8.6, 3);
    s.load = {12.0, 0.3, 0.9, 0.3};
    s.pv_capacity_mw = 1.0;
    s.wind_capacity_mw = 2.0;
    s.events = {{val_end, Asset::Wind, 16.0}};
    fleet.push_back(s);
  }
  {  // mixed, wind farm and solar extension at test start
    auto s = base("T4_mixed_drift", 51.3, 12.4, 4);
    s.load = {18.0, 0.3, 0.9, 0.4};
    s.pv_capacity_mw = 4.0;
    s.wind_capacity_mw = 2.0;
    s.events = {{val_end, Asset::Wind, 14.0}, {val_end, Asset::Pv, 4.0}};
    fleet.push_back(s);
  }
  {  // mixed, PV extension at test start
    auto s = base("T5_pv_wind_drift", 50.1, 8.7, 5);
    s.load = {12.0, 0.3, 0.9, 0.3};
    s.pv_capacity_mw = 8.0;
    s.wind_capacity_mw = 2.0;
    s.events = {{val_end, Asset::Pv, 5.0}};
    fleet.push_back(s);
  }
  {  // wind dominated, stable
    auto s = base("T6_wind_heavy", 54.3, 10.1, 6);
    s.load = {8.0, 0.25, 0.9, 0.3};
    s.wind_capacity_mw = 20.0;
    fleet.push_back(s);
  }
  {  // mixed, stable
    auto s = base("T7_mixed_stable", 49.5, 10.9, 7);
    s.load = {14.0, 0.3, 0.9, 0.4};
    s.pv_capacity_mw = 15.0;
    s.wind_capacity_mw = 6.0;
    fleet.push_back(s);
  }
  return fleet;
}

bool has_drift_in_test(const ScenarioSpec& spec) {
  if (!spec.split) return false;
  return std::any_of(spec.events.begin(), spec.events.end(),
                     [&](const DriftEvent& e) { return e.at >= spec.split->val_end && e.at < spec.end(); });
}

void save_manifest(const std::filesystem::path& path, const ScenarioSpec& s) {
  nlohmann::ordered_json j;
  j["format"] = "vpf-scenario";
  j["version"] = 1;
  j["id"] = s.id;
  j["lat"] = s.lat;
  j["lon"] = s.lon;
  j["start"] = format_timestamp(s.start);
  j["days"] = s.days;
  j["load"] = {{"base_mw", s.load.base_mw},
               {"daily_amplitude", s.load.daily_amplitude},
               {"weekend_factor", s.load.weekend_factor},
               {"noise_sigma", s.load.noise_sigma}};
  j["pv_capacity_mw"] = s.pv_capacity_mw;
  j["wind_capacity_mw"] = s.wind_capacity_mw;
  j["events"] = nlohmann::ordered_json::array();
  for (const auto& e : s.events)
    j["events"].push_back({{"at", format_timestamp(e.at)}, {"asset", to_string(e.asset)}, {"factor", e.factor}});
  j["weather_noise"] = s.weather_noise;
  j["unreliable_fraction"] = s.unreliable_fraction;
  if (s.split) j["split"] = {{"train_end", format_timestamp(s.split->train_end)}, {"val_end", format_timestamp(s.split->val_end)}};
  j["seed"] = s.seed;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << j.dump(2) << '\n';
}

ScenarioSpec load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot read " + path.string());
  try {
    const auto j = nlohmann::json::parse(f);
    if (j.at("format") != "vpf-scenario") throw Error(ErrorKind::Schema, path.string() + ": not a scenario manifest");
    ScenarioSpec s;
    s.id = j.at("id").get<std::string>();
    s.lat = j.at("lat").get<double>();
    s.lon = j.at("lon").get<double>();
    s.start = parse_timestamp(j.at("start").get<std::string>());
    s.days = j.at("days").get<std::size_t>();
    const auto& l = j.at("load");
    s.load = {l.at("base_mw").get<double>(), l.at("daily_amplitude").get<double>(), l.at("weekend_factor").get<double>(),
              l.at("noise_sigma").get<double>()};
    s.pv_capacity_mw = j.at("pv_capacity_mw").get<double>();
    s.wind_capacity_mw = j.at("wind_capacity_mw").get<double>();
    for (const auto& e : j.at("events"))
      s.events.push_back({parse_timestamp(e.at("at").get<std::string>()), parse_asset(e.at("asset").get<std::string>()),
                          e.at("factor").get<double>()});
    s.weather_noise = j.at("weather_noise").get<double>();
    s.unreliable_fraction = j.at("unreliable_fraction").get<double>();
    if (j.contains("split"))
      s.split = prep::SplitSpec{parse_timestamp(j["split"].at("train_end").get<std::string>()),
                                parse_timestamp(j["split"].at("val_end").get<std::string>())};
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Schema, path.string() + ": " + e.what());
  }
}

void save_bundle(const std::filesystem::path& dir, const SyntheticBundle& b) {
  std::filesystem::create_directories(dir);
  grid::save_power_csv(dir / "power.csv", b.power);
  grid::save_weather_csv(dir / "weather.csv", b.weather);
  grid::save_transformer_meta(dir / "meta.txt", {b.spec.id, b.spec.lat, b.spec.lon});
  save_manifest(dir / "manifest.json", b.spec);
  std::ofstream f(dir / "components.csv");
  if (!f) throw Error(ErrorKind::Io, "cannot write " + (dir / "components.csv").string());
  f << "timestamp,load_mw,pv_mw,wind_mw\n";
  for (std::size_t i = 0; i < b.load.size(); ++i)
    f << format_timestamp(b.power.time_at(i)) << ',' << csv::format_double(b.load[i]) << ','
      << csv::format_double(b.pv[i]) << ',' << csv::format_double(b.wind[i]) << '\n';
}

}  // namespace vpf::synth
