#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "vpf/error.hpp"
#include "vpf/update_engine.hpp"

using namespace vpf;
using namespace vpf::update;

namespace {

model::ArchitectureSpec small_arch() {
  model::ArchitectureSpec a;
  a.lstm_units = 4;
  a.dense1 = 8;
  a.dense2 = 8;
  a.lookback = 8;
  a.output_dim = 8;
  return a;
}

struct Fixture {
  grid::PowerSeries power;
  grid::FeatureFrame features;
  model::ModelParams model;
  prep::QuantileScaler scaler;
};

// Daily-periodic power with a feature-driven part; model normalised on the
// first four days and trained for a few steps so updates have work to do.
Fixture make_fixture(std::size_t days = 12, std::uint64_t seed = 3) {
  Fixture fx;
  const std::size_t n = days * 96;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  fx.features.start = make_time(2018, 3, 1);
  fx.features.values.resize(n, grid::FeatureFrame::kColumns);
  for (std::size_t c = 0; c < fx.features.values.cols(); ++c) {
    double v = g(rng);
    for (std::size_t i = 0; i < n; ++i) {
      v = 0.97 * v + 0.2 * g(rng);
      fx.features.values(i, c) = v;
    }
  }
  fx.power.start = fx.features.start;
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / 96.0;
    // level shift after day 6 so updates matter
    const double shift = i >= 6 * 96 ? -6.0 : 0.0;
    fx.power.values.push_back(10.0 + 4.0 * std::sin(phase) + 1.0 * fx.features.values(i, 0) + shift + 0.2 * g(rng));
    fx.power.status.push_back(grid::Status::Reliable);
  }
  fx.model = model::build_model(small_arch(), seed);
  model::fit_normalization(fx.model, fx.power.slice(0, 4 * 96), fx.features.slice(0, 4 * 96));
  fx.scaler = prep::fit_quantile_scaler(fx.power.values);
  return fx;
}

bool same_params(const model::ModelParams& a, const model::ModelParams& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i]->rows() != tb[i]->rows() || ta[i]->cols() != tb[i]->cols()) return false;
    if (!std::equal(ta[i]->data(), ta[i]->data() + ta[i]->size(), tb[i]->data())) return false;
  }
  return true;
}

bool same_forecasts(const forecast::ForecastSet& a, const forecast::ForecastSet& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i)
    if (a.records[i].origin != b.records[i].origin || a.records[i].values != b.records[i].values) return false;
  return true;
}

SimulationConfig sim_config(const Fixture& fx, std::size_t first_day, std::size_t days) {
  SimulationConfig c;
  c.start = fx.power.start + std::chrono::days{first_day};
  c.end = c.start + std::chrono::days{days};
  c.strategy.epochs = 5;
  c.strategy.lr = 0.01;
  c.origins_per_day = 6;
  c.seed = 17;
  return c;
}

}  // namespace

TEST_CASE("canonical strategy grid") {
  const auto g = canonical_grid();
  REQUIRE(g.size() == 8);
  std::set<std::string> labels;
  for (const auto& s : g) {
    CHECK(s.canonical());
    CHECK(s.steps_per_epoch == 1);
    CHECK(s.loss == nn::LossKind::MSE);
    CHECK_FALSE(s.carry_adam);
    labels.insert(s.label());
  }
  CHECK(labels.size() == 8);
  CHECK(labels.count("e5_lr0.001") == 1);
  CHECK(labels.count("e20_lr0.01") == 1);
  UpdateStrategy odd;
  odd.epochs = 7;
  CHECK_FALSE(odd.canonical());
  CHECK_NOTHROW(odd.validate());
  odd.lr = 0.0;
  CHECK_THROWS_AS(odd.validate(), Error);
}

TEST_CASE("update windows end strictly before the update time") {
  for (std::size_t horizon : {1u, 8u, 192u}) {
    const std::size_t ds = 10 * 96;
    const auto o = update_window_origins(ds, 96, horizon);
    REQUIRE(o.size() == 96);
    for (std::size_t i = 0; i < o.size(); ++i) {
      CHECK(o[i] + horizon < ds);
      CHECK(o[i] + horizon >= ds - 96);
      if (i) CHECK(o[i] == o[i - 1] + 1);
    }
  }
  // not enough history for the lookback of the earliest windows
  CHECK(update_window_origins(96 + 8, 96, 8).size() < 96);
  CHECK(update_window_origins(50, 8, 8).empty());
}

TEST_CASE("daily update: no-op, shapes, loss decrease and skipping") {
  auto fx = make_fixture();
  const auto data = model::model_dataset(fx.model, fx.power, fx.features);
  const std::size_t ds = 8 * 96;
  nn::AdamState adam;

  SUBCASE("epochs 0 leaves the model bit-identical") {
    auto m = fx.model;
    nn::Rng rng(1);
    UpdateStrategy s;
    s.epochs = 0;
    const auto out = daily_update(m, data, ds, s, rng, adam);
    CHECK(out.steps == 0);
    CHECK(same_params(m, fx.model));
  }
  SUBCASE("training changes weights, not shapes, and lowers the batch loss") {
    auto m = fx.model;
    nn::Rng rng(1);
    UpdateStrategy s;
    s.epochs = 20;
    s.lr = 0.01;
    const auto out = daily_update(m, data, ds, s, rng, adam);
    CHECK(out.windows == 96);
    CHECK(out.steps == 20);
    CHECK(out.post_loss < out.pre_loss);
    CHECK_FALSE(same_params(m, fx.model));
    const auto a = m.tensors();
    const auto b = fx.model.tensors();
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i]->rows() == b[i]->rows());
      CHECK(a[i]->cols() == b[i]->cols());
    }
    CHECK(m.arch == fx.model.arch);
    CHECK(adam.t == 20);
  }
  SUBCASE("fresh optimiser per update unless carried") {
    UpdateStrategy s;
    s.epochs = 3;
    auto m = fx.model;
    nn::Rng rng(1);
    daily_update(m, data, ds, s, rng, adam);
    daily_update(m, data, ds + 96, s, rng, adam);
    CHECK(adam.t == 3);
    s.carry_adam = true;
    daily_update(m, data, ds + 2 * 96, s, rng, adam);
    CHECK(adam.t == 6);
  }
  SUBCASE("an entirely unreliable day is skipped") {
    auto p = fx.power;
    for (std::size_t i = ds - 96; i < ds; ++i) p.status[i] = grid::Status::Unreliable;
    const auto d2 = model::model_dataset(fx.model, p, fx.features);
    auto m = fx.model;
    nn::Rng rng(1);
    UpdateStrategy s;
    const auto out = daily_update(m, d2, ds, s, rng, adam);
    CHECK(out.skipped);
    CHECK(std::isnan(out.pre_loss));
    CHECK(same_params(m, fx.model));
  }
  SUBCASE("data at or after the update time does not influence it") {
    auto p = fx.power;
    auto f = fx.features;
    for (std::size_t i = ds; i < p.size(); ++i) {
      p.values[i] += 100.0;
      p.status[i] = grid::Status::Unreliable;
      f.values(i, 3) = -50.0;
    }
    const auto d2 = model::model_dataset(fx.model, p, f);
    UpdateStrategy s;
    auto a = fx.model, b = fx.model;
    nn::Rng ra(9), rb(9);
    daily_update(a, data, ds, s, ra, adam);
    daily_update(b, d2, ds, s, rb, adam);
    CHECK(same_params(a, b));
  }
  CHECK_THROWS_AS(daily_update(fx.model, data, 50, UpdateStrategy{}, *std::make_unique<nn::Rng>(1), adam), Error);
}

TEST_CASE("update simulation records and reduction to the frozen model") {
  auto fx = make_fixture();
  auto cfg = sim_config(fx, 5, 5);
  const auto res = run_update_simulation(fx.model, fx.power, fx.features, cfg);
  REQUIRE(res.records.size() == 5);
  for (std::size_t d = 0; d < 5; ++d) {
    CHECK(res.records[d].day == d);
    CHECK(res.records[d].update_time == cfg.start + std::chrono::days{d + 1});
    CHECK(res.records[d].forecasts == 6);
    CHECK_FALSE(res.records[d].skipped);
  }
  CHECK(res.forecasts.records.size() == 30);
  CHECK_FALSE(same_params(res.final_model, fx.model));

  const auto origins = simulation_origins(cfg);
  CHECK(origins.size() == 30);
  const auto frozen = model::rolling_forecast(fx.model, fx.power, fx.features, origins);

  auto off = cfg;
  off.updates_enabled = false;
  CHECK(same_forecasts(run_update_simulation(fx.model, fx.power, fx.features, off).forecasts, frozen));
  auto zero = cfg;
  zero.strategy.epochs = 0;
  CHECK(same_forecasts(run_update_simulation(fx.model, fx.power, fx.features, zero).forecasts, frozen));

  // first day uses the initial model; afterwards forecasts differ
  for (std::size_t r = 0; r < 6; ++r) CHECK(res.forecasts.records[r].values == frozen.records[r].values);
  CHECK(res.forecasts.records[6].values != frozen.records[6].values);

  // deterministic
  CHECK(same_forecasts(run_update_simulation(fx.model, fx.power, fx.features, cfg).forecasts, res.forecasts));
}

TEST_CASE("update simulation causality") {
  auto fx = make_fixture();
  auto cfg = sim_config(fx, 5, 5);
  const auto base = run_update_simulation(fx.model, fx.power, fx.features, cfg);

  SUBCASE("forecasts on day d never reflect the update at the end of day d") {
    for (std::size_t d : {0u, 2u}) {
      auto c = cfg;
      c.skip_update_day = d;
      const auto alt = run_update_simulation(fx.model, fx.power, fx.features, c);
      for (std::size_t r = 0; r < 6 * (d + 1); ++r)
        CHECK(alt.forecasts.records[r].values == base.forecasts.records[r].values);
      CHECK(alt.forecasts.records[6 * (d + 1)].values != base.forecasts.records[6 * (d + 1)].values);
      CHECK(alt.records[d].skipped);
    }
  }
  SUBCASE("perturbing the future leaves earlier forecasts unchanged") {
    const std::size_t cut = 8 * 96;  // start of simulated day 3
    auto p = fx.power;
    auto f = fx.features;
    for (std::size_t i = cut; i < p.size(); ++i) {
      p.values[i] *= -3.0;
      f.values(i, 0) += 7.0;
    }
    const auto alt = run_update_simulation(fx.model, p, f, cfg);
    for (std::size_t r = 0; r < 18; ++r) CHECK(alt.forecasts.records[r].values == base.forecasts.records[r].values);
    CHECK(alt.forecasts.records[18].values != base.forecasts.records[18].values);
  }
  SUBCASE("audit entries") {
    REQUIRE(base.audit.size() == base.forecasts.records.size());
    for (std::size_t r = 0; r < base.audit.size(); ++r) {
      const auto& a = base.audit[r];
      CHECK(a.origin == base.forecasts.records[r].origin);
      CHECK(a.input_end <= a.origin);
      if (r < 6) {
        CHECK_FALSE(a.update_data_end.has_value());
      } else {
        REQUIRE(a.update_data_end.has_value());
        CHECK(*a.update_data_end < a.origin);
        CHECK(*a.update_data_end == start_of_day(a.origin) - kStep);
      }
    }
  }
}

TEST_CASE("update simulation errors and skipped origins") {
  auto fx = make_fixture(8);
  auto cfg = sim_config(fx, 3, 1);
  CHECK_THROWS_AS(run_update_simulation(fx.model, fx.power, fx.features, cfg), Error);
  try {
    run_update_simulation(fx.model, fx.power, fx.features, cfg);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Range);
  }
  cfg = sim_config(fx, 6, 3);  // past the series end
  CHECK_THROWS_AS(run_update_simulation(fx.model, fx.power, fx.features, cfg), Error);
  cfg = sim_config(fx, 6, 2);  // last origins lack a full horizon of truth
  auto arch = small_arch();
  arch.output_dim = 32;
  auto longer = model::build_model(arch, 1);
  model::fit_normalization(longer, fx.power, fx.features);
  const auto res = run_update_simulation(longer, fx.power, fx.features, cfg);
  CHECK(res.forecasts.skipped == 2);  // origins 736 and 752 need truth up to 768 and 784
  CHECK(res.forecasts.records.size() + res.forecasts.skipped == 12);
  cfg.origins_per_day = 5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("strategy grid: shape, control, reproducibility and isolation") {
  auto fx = make_fixture(10);
  GridConfig gc;
  gc.simulation = sim_config(fx, 5, 4);
  gc.eval_from = gc.simulation.start + std::chrono::days{1};
  gc.eval_to = gc.simulation.end;
  gc.transformer = "toy";
  gc.horizons_h = {1, 2};
  const auto strategies = canonical_grid();
  const auto g = run_strategy_grid(fx.model, fx.power, fx.features, fx.scaler, strategies, gc);
  REQUIRE(g.rows.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(g.rows[i].strategy.label() == strategies[i].label());
    REQUIRE(g.rows[i].reports.size() == 2);
    CHECK(g.rows[i].reports[0].horizon_h == 1);
    CHECK(g.rows[i].forecasts.records.size() == 18);
  }
  CHECK(g.control.strategy.epochs == 0);
  REQUIRE(g.best.size() == 2);
  for (const auto& [h, idx] : g.best)
    for (const auto& row : g.rows) CHECK(g.rows[idx].reports[h == 1 ? 0 : 1].nrmse <= row.reports[h == 1 ? 0 : 1].nrmse);

  const auto origins = simulation_origins(gc.simulation);
  const auto frozen = model::rolling_forecast(fx.model, fx.power, fx.features, origins).between(gc.eval_from, gc.eval_to);
  CHECK(same_forecasts(g.control.forecasts, frozen));
  const auto frozen_reports = eval::evaluate(frozen, fx.power, fx.scaler, "toy", gc.horizons_h);
  for (std::size_t h = 0; h < 2; ++h) CHECK(g.control.reports[h].nrmse == frozen_reports[h].nrmse);

  const auto again = run_strategy_grid(fx.model, fx.power, fx.features, fx.scaler, strategies, gc);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t h = 0; h < 2; ++h) {
      CHECK(again.rows[i].reports[h].nrmse == g.rows[i].reports[h].nrmse);
      CHECK(again.rows[i].reports[h].pearson == g.rows[i].reports[h].pearson);
    }

  const std::vector<UpdateStrategy> one{strategies[5]};
  const auto alone = run_strategy_grid(fx.model, fx.power, fx.features, fx.scaler, one, gc);
  CHECK(same_forecasts(alone.rows[0].forecasts, g.rows[5].forecasts));
  for (std::size_t h = 0; h < 2; ++h) CHECK(alone.rows[0].reports[h].nrmse == g.rows[5].reports[h].nrmse);
}
