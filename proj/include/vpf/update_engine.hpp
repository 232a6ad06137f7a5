#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpf/evaluation.hpp"
#include "vpf/forecast.hpp"
#include "vpf/model.hpp"

/// Daily regular retraining of a trained forecaster on the newest day of
/// measurements, and the epochs x learning-rate strategy grid.
namespace vpf::update {

struct UpdateStrategy {
  std::size_t epochs = 5;
  double lr = 0.001;
  std::size_t steps_per_epoch = 1;
  nn::LossKind loss = nn::LossKind::MSE;
  double clip_norm = 5.0;   // 0 disables
  bool carry_adam = false;  // keep Adam moments from one daily update to the next

  /// Member of the 4 x 2 epochs/lr grid with one step per epoch and MSE.
  bool canonical() const;
  /// e.g. "e5_lr0.001"
  std::string label() const;
  /// Throws Config. epochs = 0 is allowed (no-op update).
  void validate() const;
};

/// epochs {5, 10, 15, 20} x lr {0.01, 0.001}.
std::vector<UpdateStrategy> canonical_grid();

struct UpdateOutcome {
  bool skipped = false;
  std::size_t windows = 0;  // samples in the update batch
  std::size_t steps = 0;    // optimiser steps taken
  double pre_loss = 0.0;    // update loss on the batch, inference mode
  double post_loss = 0.0;
};

/// Origin indices of the update windows for the day starting at index
/// `day_start`: the windows whose last target falls in the preceding 96
/// steps, so every value they touch lies strictly before `day_start`.
std::vector<std::size_t> update_window_origins(std::size_t day_start, std::size_t lookback, std::size_t horizon);

/// Retrains `model` in place on the day before `day_start`. `data` must be the
/// full series normalised with the model's z-scores (model_dataset). The whole
/// set of windows forms one batch; each step draws fresh dropout masks.
/// Skips (model unchanged) when every measurement of that day is unreliable.
/// With carry_adam the moments in `adam` are reused, otherwise it is reset.
UpdateOutcome daily_update(model::ModelParams& model, const prep::WindowDataset& data, std::size_t day_start,
                           const UpdateStrategy& strategy, nn::Rng& rng, nn::AdamState& adam);

struct UpdateRunRecord {
  std::size_t day = 0;        // 0-based simulated day
  Timestamp update_time{};    // midnight after the day, when the update is applied
  double pre_loss = 0.0;      // NaN when skipped
  double post_loss = 0.0;
  std::size_t forecasts = 0;  // archived that day, before the update
  double wall_ms = 0.0;
  bool skipped = false;
};

struct SimulationConfig {
  UpdateStrategy strategy;
  Timestamp start{};  // midnight; normally the validation start
  Timestamp end{};    // exclusive, midnight
  std::size_t origins_per_day = 6;
  bool updates_enabled = true;
  /// Suppress the update at the end of this day (for causality tests).
  std::optional<std::size_t> skip_update_day;
  std::uint64_t seed = 1;

  /// Throws Config / Range.
  void validate() const;
};

struct SimulationResult {
  std::vector<UpdateRunRecord> records;
  forecast::ForecastSet forecasts;
  std::vector<forecast::AuditEntry> audit;
  model::ModelParams final_model;
};

/// Day by day from `start`: forecast at the configured origins with the
/// current model and archive, then update on that day's measurements.
/// Origins without a full horizon of truth in the series are skipped.
SimulationResult run_update_simulation(model::ModelParams model, const grid::PowerSeries& power,
                                       const grid::FeatureFrame& features, const SimulationConfig& config,
                                       std::string model_id = "lstm_updated");

/// Forecast origins of a simulation, in order.
std::vector<Timestamp> simulation_origins(const SimulationConfig& config);

struct StrategyRow {
  UpdateStrategy strategy;
  std::vector<eval::HorizonReport> reports;
  std::vector<UpdateRunRecord> records;
  forecast::ForecastSet forecasts;  // evaluation window only
  std::vector<forecast::AuditEntry> audit;  // matching the forecasts
};

struct GridResult {
  std::vector<StrategyRow> rows;  // one per strategy, input order
  StrategyRow control;            // epochs = 0, equals the frozen model
  /// Per horizon, the index into `rows` with the lowest nRMSE.
  std::vector<std::pair<int, std::size_t>> best;
};

struct GridConfig {
  SimulationConfig simulation;  // strategy field ignored
  Timestamp eval_from{};        // usually the test start
  Timestamp eval_to{};
  std::string transformer;
  std::vector<int> horizons_h{eval::kCanonicalHorizonsH.begin(), eval::kCanonicalHorizonsH.end()};
};

/// Independent simulations from the same initial model, one per strategy plus
/// an epochs = 0 control. Strategies run in parallel when OpenMP is enabled.
GridResult run_strategy_grid(const model::ModelParams& initial, const grid::PowerSeries& power,
                             const grid::FeatureFrame& features, const prep::QuantileScaler& scaler,
                             std::span<const UpdateStrategy> strategies, const GridConfig& config);

// Grid CSV: strategy_epochs,strategy_lr,horizon_h,nrmse,pearson
inline constexpr std::string_view kGridHeader = "strategy_epochs,strategy_lr,horizon_h,nrmse,pearson";
void save_grid(const std::filesystem::path& path, std::span<const StrategyRow> rows);
// Run log CSV: day,update_time,pre_loss,post_loss,forecasts,wall_ms,skipped
void save_run_records(const std::filesystem::path& path, std::span<const UpdateRunRecord> records);

}  // namespace vpf::update
