#include "vpf/update_engine.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>

#include "vpf/csv.hpp"
#include "vpf/error.hpp"
#include "vpf/log.hpp"

namespace vpf::update {

namespace {

constexpr std::size_t kDay = kStepsPerDay;

std::uint64_t day_seed(std::uint64_t seed, std::size_t day) {
  // splitmix64 over (seed, day) so neighbouring days get unrelated streams
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (day + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double batch_loss(const model::ModelParams& m, const model::Batch& batch, nn::LossKind loss) {
  nn::Rng unused(0);
  const Matrix pred = model::forward(m, batch, nn::Mode::Infer, unused);
  const auto r = nn::masked_loss(loss, pred, batch.y, batch.mask);
  return r.skipped ? std::numeric_limits<double>::quiet_NaN() : r.value;
}

std::size_t index_of(const grid::PowerSeries& power, Timestamp t) {
  const auto off = steps_between(power.start, t);
  if (off < 0 || power.time_at(static_cast<std::size_t>(off)) != t)
    throw Error(ErrorKind::Range, "timestamp " + format_timestamp(t) + " is not on the series grid");
  return static_cast<std::size_t>(off);
}

}  // namespace

// -- strategies --------------------------------------------------------------

bool UpdateStrategy::canonical() const {
  const bool e = epochs == 5 || epochs == 10 || epochs == 15 || epochs == 20;
  return e && (lr == 0.01 || lr == 0.001) && steps_per_epoch == 1 && loss == nn::LossKind::MSE;
}

std::string UpdateStrategy::label() const {
  std::ostringstream s;
  s << 'e' << epochs << "_lr" << lr;
  return s.str();
}

void UpdateStrategy::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorKind::Config, "update learning rate must be positive");
  if (steps_per_epoch == 0) throw Error(ErrorKind::Config, "update steps per epoch must be positive");
  if (!(clip_norm >= 0.0)) throw Error(ErrorKind::Config, "clip norm must be >= 0");
}

std::vector<UpdateStrategy> canonical_grid() {
  std::vector<UpdateStrategy> out;
  for (std::size_t e : {5, 10, 15, 20})
    for (double lr : {0.01, 0.001}) {
      UpdateStrategy s;
      s.epochs = e;
      s.lr = lr;
      out.push_back(s);
    }
  return out;
}

// -- single update -----------------------------------------------------------

std::vector<std::size_t> update_window_origins(std::size_t day_start, std::size_t lookback, std::size_t horizon) {
  // last target o + H in [day_start - 96, day_start - 1]
  std::vector<std::size_t> out;
  if (day_start < kDay + horizon) return out;
  const std::size_t lo = day_start - kDay - horizon, hi = day_start - 1 - horizon;
  for (std::size_t o = lo; o <= hi; ++o)
    if (o + 1 >= lookback) out.push_back(o);
  return out;
}

UpdateOutcome daily_update(model::ModelParams& m, const prep::WindowDataset& data, std::size_t day_start,
                           const UpdateStrategy& strategy, nn::Rng& rng, nn::AdamState& adam) {
  strategy.validate();
  if (day_start > data.power.size() || day_start < kDay)
    throw Error(ErrorKind::Range, "update day outside the series");
  UpdateOutcome out;
  bool any_reliable = false;
  for (std::size_t i = day_start - kDay; i < day_start; ++i) any_reliable |= data.status[i] == grid::Status::Reliable;

  prep::WindowDataset windows = data;  // shares nothing mutable with the caller
  windows.origins = update_window_origins(day_start, data.lookback, data.horizon);
  out.windows = windows.origins.size();
  if (!any_reliable || windows.origins.empty()) {
    out.skipped = true;
    out.pre_loss = out.post_loss = std::numeric_limits<double>::quiet_NaN();
    log::warn("update before " + format_timestamp(data.time_at(day_start)) +
              (any_reliable ? " skipped: no complete windows" : " skipped: previous day entirely unreliable"));
    return out;
  }

  std::vector<std::size_t> ids(windows.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const model::Batch batch = model::assemble_batch(windows, ids);
  out.pre_loss = batch_loss(m, batch, strategy.loss);

  if (!strategy.carry_adam || adam.m.size() != model::ModelParams::kTensorCount) {
    const auto params = m.tensors();
    adam = nn::AdamState::for_params(std::span<const Matrix* const>(params.data(), params.size()), strategy.lr);
  }
  adam.lr = strategy.lr;
  for (std::size_t e = 0; e < strategy.epochs; ++e)
    for (std::size_t s = 0; s < strategy.steps_per_epoch; ++s) {
      const auto r = model::train_step(m, batch, strategy.loss, adam, rng, strategy.clip_norm);
      if (!r.skipped) ++out.steps;
    }
  out.post_loss = out.steps ? batch_loss(m, batch, strategy.loss) : out.pre_loss;
  return out;
}

// -- simulation --------------------------------------------------------------

void SimulationConfig::validate() const {
  strategy.validate();
  if (start != start_of_day(start) || end != start_of_day(end))
    throw Error(ErrorKind::Config, "simulation start and end must be midnight UTC");
  if (origins_per_day == 0 || kDay % origins_per_day != 0)
    throw Error(ErrorKind::Config, "origins per day must divide 96");
  if (end - start < std::chrono::days{2}) throw Error(ErrorKind::Range, "update simulation needs at least two days");
}

std::vector<Timestamp> simulation_origins(const SimulationConfig& c) {
  std::vector<Timestamp> out;
  const auto stride = kStep * static_cast<long long>(kDay / c.origins_per_day);
  for (Timestamp t = c.start; t < c.end; t += stride) out.push_back(t);
  return out;
}

SimulationResult run_update_simulation(model::ModelParams m, const grid::PowerSeries& power,
                                       const grid::FeatureFrame& features, const SimulationConfig& config,
                                       std::string model_id) {
  config.validate();
  m.validate();
  const std::size_t first = index_of(power, config.start);
  if (config.end > power.end()) throw Error(ErrorKind::Range, "simulation end lies past the series");
  const std::size_t days = static_cast<std::size_t>((config.end - config.start) / std::chrono::days{1});
  const std::size_t stride = kDay / config.origins_per_day;
  const std::size_t lookback = m.arch.lookback, horizon = m.arch.output_dim;

  // normalisation is frozen with the initial model, so one dataset serves all days
  const prep::WindowDataset data = model::model_dataset(m, power, features);

  SimulationResult res;
  res.forecasts.model = std::move(model_id);
  nn::AdamState adam;
  std::optional<Timestamp> update_data_end;

  for (std::size_t d = 0; d < days; ++d) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t ds = first + d * kDay;
    UpdateRunRecord rec;
    rec.day = d;
    rec.update_time = power.time_at(ds + kDay);

    std::vector<std::size_t> idx;
    for (std::size_t o = ds; o < ds + kDay; o += stride) {
      if (o + 1 < lookback || o + horizon >= power.size()) {
        ++res.forecasts.skipped;
        continue;
      }
      idx.push_back(o);
    }
    if (!idx.empty()) {
      const Matrix values = model::predict_origins(m, data, idx);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto row = values.row(r);
        res.forecasts.records.push_back({power.time_at(idx[r]), std::vector<double>(row.begin(), row.end())});
        res.audit.push_back({power.time_at(idx[r]), power.time_at(idx[r]), update_data_end});
      }
    }
    rec.forecasts = idx.size();

    const bool apply = config.updates_enabled && config.strategy.epochs > 0 && config.skip_update_day != d &&
                       ds + kDay <= power.size();
    if (apply) {
      nn::Rng rng(day_seed(config.seed, d));
      const auto u = daily_update(m, data, ds + kDay, config.strategy, rng, adam);
      rec.skipped = u.skipped;
      rec.pre_loss = u.pre_loss;
      rec.post_loss = u.post_loss;
      if (!u.skipped) update_data_end = power.time_at(ds + kDay - 1);
    } else {
      rec.skipped = true;
      rec.pre_loss = rec.post_loss = std::numeric_limits<double>::quiet_NaN();
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    res.records.push_back(rec);
  }
  if (res.forecasts.skipped)
    log::info(std::to_string(res.forecasts.skipped) + " forecast origins skipped (insufficient data)");
  res.final_model = std::move(m);
  return res;
}

// -- strategy grid -----------------------------------------------------------

GridResult run_strategy_grid(const model::ModelParams& initial, const grid::PowerSeries& power,
                             const grid::FeatureFrame& features, const prep::QuantileScaler& scaler,
                             std::span<const UpdateStrategy> strategies, const GridConfig& config) {
  std::vector<UpdateStrategy> all(strategies.begin(), strategies.end());
  UpdateStrategy control;
  control.epochs = 0;
  all.push_back(control);
  for (const auto& s : all) s.validate();

  std::vector<StrategyRow> rows(all.size());
  std::vector<std::exception_ptr> errors(all.size());
  const auto n = static_cast<long long>(all.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < n; ++i) {
    try {
      SimulationConfig sc = config.simulation;
      sc.strategy = all[i];
      auto sim = run_update_simulation(initial, power, features, sc, "lstm_" + all[i].label());
      StrategyRow row;
      row.strategy = all[i];
      row.records = std::move(sim.records);
      row.forecasts = sim.forecasts.between(config.eval_from, config.eval_to);
      row.forecasts.model = sim.forecasts.model;
      for (const auto& a : sim.audit)
        if (a.origin >= config.eval_from && a.origin < config.eval_to) row.audit.push_back(a);
      row.reports = eval::evaluate(row.forecasts, power, scaler, config.transformer, config.horizons_h);
      rows[i] = std::move(row);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  GridResult out;
  out.control = std::move(rows.back());
  rows.pop_back();
  out.rows = std::move(rows);
  for (std::size_t h = 0; h < config.horizons_h.size(); ++h) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < out.rows.size(); ++r)
      if (out.rows[r].reports[h].nrmse < out.rows[best].reports[h].nrmse) best = r;
    if (!out.rows.empty()) out.best.emplace_back(config.horizons_h[h], best);
  }
  return out;
}

void save_grid(const std::filesystem::path& path, std::span<const StrategyRow> rows) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << kGridHeader << '\n';
  for (const auto& row : rows)
    for (const auto& r : row.reports)
      f << row.strategy.epochs << ',' << csv::format_double(row.strategy.lr) << ',' << r.horizon_h << ','
        << csv::format_double(r.nrmse) << ',' << (std::isnan(r.pearson) ? std::string() : csv::format_double(r.pearson))
        << '\n';
}

void save_run_records(const std::filesystem::path& path, std::span<const UpdateRunRecord> records) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << "day,update_time,pre_loss,post_loss,forecasts,wall_ms,skipped\n";
  auto num = [](double v) { return std::isnan(v) ? std::string() : csv::format_double(v); };
  for (const auto& r : records)
    f << r.day << ',' << format_timestamp(r.update_time) << ',' << num(r.pre_loss) << ',' << num(r.post_loss) << ','
      << r.forecasts << ',' << csv::format_double(r.wall_ms) << ',' << (r.skipped ? 1 : 0) << '\n';
}

}  // namespace vpf::update
