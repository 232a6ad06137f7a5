#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vpf/grid_data.hpp"
#include "vpf/preprocess.hpp"

/// Synthetic transformer scenarios: consumption minus PV and wind generation,
/// with step changes in installed capacity that make a trained model stale.
namespace vpf::synth {

enum class Asset { Pv, Wind, Load };

const char* to_string(Asset a);
Asset parse_asset(std::string_view name);

/// From `at` onwards the named component is scaled by `factor`, replacing the
/// scale set by any earlier event on the same asset.
struct DriftEvent {
  Timestamp at{};
  Asset asset = Asset::Pv;
  double factor = 1.0;
};

struct LoadProfile {
  double base_mw = 20.0;
  double daily_amplitude = 0.3;  // relative swing of the daily shape
  double weekend_factor = 0.9;   // Saturday and Sunday multiplier
  double noise_sigma = 0.4;      // MW, slowly varying
};

struct ScenarioSpec {
  std::string id;
  double lat = 51.0;
  double lon = 9.0;
  Timestamp start{};
  std::size_t days = 0;
  LoadProfile load;
  double pv_capacity_mw = 0.0;
  double wind_capacity_mw = 0.0;
  std::vector<DriftEvent> events;
  double weather_noise = 1.0;         // scale of the forecast error added to the weather records
  double unreliable_fraction = 0.0;   // share of measurements flagged and corrupted
  std::optional<prep::SplitSpec> split;
  std::uint64_t seed = 1;

  Timestamp end() const { return start + days * std::chrono::days{1}; }
  /// Throws Config.
  void validate() const;
};

struct SyntheticBundle {
  ScenarioSpec spec;
  grid::PowerSeries power;                  // load - pv - wind, then status noise
  std::vector<grid::WeatherRecord> weather;  // 3 h cadence covering the power axis
  // diagnostic components (MW, non-negative) on the power axis
  std::vector<double> load, pv, wind;
};

/// Capacity factor of a generic turbine at hub-height wind speed (m/s): zero
/// below 3 m/s cut-in, cubic ramp to rated at 12 m/s, one until 25 m/s
/// cut-out, zero above.
double wind_power_curve(double speed);

SyntheticBundle generate_scenario(const ScenarioSpec& spec);

/// Flags random runs of 1 to 8 steps as unreliable, holding or spiking the
/// values inside them. A run starts at each step with probability
/// fraction / 4.5. Throws Config for a fraction outside [0, 1).
grid::PowerSeries inject_status_noise(const grid::PowerSeries& series, double unreliable_fraction,
                                      std::uint64_t seed);

/// Split lengths of the canonical fleet. The test period always starts on
/// 2018-07-15; `tail_days` extra days give the last test origins a full
/// 48 h of truth.
struct FleetTimeline {
  std::size_t train_days = 181;
  std::size_t val_days = 14;
  std::size_t test_days = 42;
  std::size_t tail_days = 2;
};

/// Seven transformers (consumption, PV, wind and mixed), by default about six
/// months of training data, two weeks of validation and six weeks of test.
/// Four carry a large capacity step at the start of the test period, three
/// are stable.
std::vector<ScenarioSpec> canonical_fleet(std::uint64_t seed, const FleetTimeline& timeline = {});

bool has_drift_in_test(const ScenarioSpec& spec);

void save_manifest(const std::filesystem::path& path, const ScenarioSpec& spec);
ScenarioSpec load_manifest(const std::filesystem::path& path);

/// Writes power.csv, weather.csv, meta.txt, components.csv and manifest.json.
void save_bundle(const std::filesystem::path& dir, const SyntheticBundle& bundle);

}  // namespace vpf::synth
