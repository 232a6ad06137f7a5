#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vpf/evaluation.hpp"
#include "vpf/model.hpp"
#include "vpf/synthgrid.hpp"
#include "vpf/update_engine.hpp"

/// Experiment driver behind the command-line tool. Every command works on one
/// output directory:
///
///   data/<id>/        power.csv, weather.csv, meta.txt, manifest.json
///   models/<id>/      checkpoint.json, history.csv, preprocess.json
///   forecasts/<id>/   <model>.csv + <model>.audit.csv, grid/<strategy>.csv
///   reports/          reports.csv, boxplot.csv, improvement.csv, grid*.csv
namespace vpf::experiment {

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string preset = "desk";
  model::ArchitectureSpec arch = model::ArchitectureSpec::desk();
  std::filesystem::path out = "vpf_out";
  std::optional<std::filesystem::path> data_dir;  // default out/data
  std::vector<std::string> transformers;         // empty: every directory under data

  synth::FleetTimeline timeline;
  std::optional<double> unreliable_fraction;  // overrides the fleet default

  model::TrainingConfig training;  // Table 1 defaults
  update::UpdateStrategy update;   // epochs 5, lr 0.001
  std::size_t origins_per_day = 6;
  std::vector<std::size_t> grid_epochs{5, 10, 15, 20};
  std::vector<double> grid_lrs{0.01, 0.001};

  std::optional<prep::SplitSpec> split;  // default: from each scenario manifest
  std::vector<int> horizons_h{eval::kCanonicalHorizonsH.begin(), eval::kCanonicalHorizonsH.end()};
  std::vector<std::string> models{"lstm", "lstm_updated", "persistence_24h", "persistence_last"};
  std::string compare_frozen = "lstm";
  std::string compare_updated = "lstm_updated";
  double quantile_low = 0.003;
  double quantile_high = 0.997;

  std::filesystem::path data_path() const { return data_dir ? *data_dir : out / "data"; }
  std::vector<update::UpdateStrategy> grid() const;

  /// Throws Config.
  void validate() const;
  /// Unknown keys are rejected (Config). Missing keys keep their defaults.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
/// Writes the effective configuration to out/config.json.
void echo_config(const ExperimentConfig& config);

/// One transformer's data as loaded from data/<id>.
struct TransformerData {
  std::string id;
  grid::TransformerMeta meta;
  grid::PowerSeries power;
  grid::FeatureFrame features;
  prep::SplitSpec split;
};

TransformerData load_transformer(const ExperimentConfig& config, const std::string& id);
/// Sorted transformer ids under the data directory (or the configured subset).
std::vector<std::string> list_transformers(const ExperimentConfig& config);

/// Test-period forecast origins with a full lookback and a full horizon of
/// truth; shared by every model so evaluations align.
std::vector<Timestamp> evaluation_origins(const ExperimentConfig& config, const TransformerData& data);

/// Quantile scaler for evaluation, fitted on the reliable measurements of
/// the whole series.
prep::QuantileScaler evaluation_scaler(const ExperimentConfig& config, const grid::PowerSeries& power);

// -- commands ------------------------------------------------------------------
// Each returns normally on success and throws vpf::Error otherwise.

/// Canonical fleet into data/. Returns the scenario ids.
std::vector<std::string> cmd_generate(const ExperimentConfig& config);
/// Initial training per transformer into models/.
std::vector<model::TrainingResult> cmd_train(const ExperimentConfig& config);
/// Frozen LSTM and persistence archives over the test period.
void cmd_forecast(const ExperimentConfig& config);
/// Daily-update simulation from the validation start with the configured strategy.
void cmd_update_run(const ExperimentConfig& config);
/// Strategy grid per transformer.
std::vector<update::GridResult> cmd_grid(const ExperimentConfig& config);
/// Per-horizon reports for every configured model. Throws Data listing missing archives.
std::vector<eval::HorizonReport> cmd_evaluate(const ExperimentConfig& config);
/// Boxplot data, improvement of the updated over the frozen model and a summary.
eval::Comparison cmd_compare(const ExperimentConfig& config, std::ostream& summary);
/// Look-ahead audit of every archive under forecasts/.
forecast::VerifyReport cmd_verify(const ExperimentConfig& config);

/// 0 ok, 1 usage/config, 2 data, 3 numerical.
int exit_code(const Error& e);

}  // namespace vpf::experiment
