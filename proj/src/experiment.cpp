#include "vpf/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "vpf/baselines.hpp"
#include "vpf/csv.hpp"
#include "vpf/error.hpp"
#include "vpf/log.hpp"

namespace vpf::experiment {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Rejects keys outside `allowed` so typos in a config do not pass silently.
void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw Error(ErrorKind::Config, "unknown config key '" + where + (where.empty() ? "" : ".") + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

fs::path model_dir(const ExperimentConfig& c, const std::string& id) { return c.out / "models" / id; }
fs::path forecast_dir(const ExperimentConfig& c, const std::string& id) { return c.out / "forecasts" / id; }
fs::path report_dir(const ExperimentConfig& c) { return c.out / "reports"; }

fs::path audit_path(const fs::path& archive) {
  fs::path p = archive;
  p.replace_extension(".audit.csv");
  return p;
}

void save_forecasts(const fs::path& archive, const forecast::ForecastSet& set, const grid::PowerSeries& truth,
                    const std::vector<forecast::AuditEntry>& audit) {
  fs::create_directories(archive.parent_path());
  forecast::save_archive(archive, set, truth);
  forecast::save_audit(audit_path(archive), audit);
}

std::vector<forecast::AuditEntry> plain_audit(const forecast::ForecastSet& set) {
  std::vector<forecast::AuditEntry> out;
  out.reserve(set.records.size());
  for (const auto& r : set.records) out.push_back({r.origin, r.origin, std::nullopt});
  return out;
}

model::Checkpoint load_model(const ExperimentConfig& c, const std::string& id) {
  const fs::path p = model_dir(c, id) / "checkpoint.json";
  if (!fs::exists(p)) throw Error(ErrorKind::Io, "missing checkpoint " + p.string() + " (run train first)");
  return model::load_checkpoint(p);
}

update::SimulationConfig simulation_config(const ExperimentConfig& c, const TransformerData& d) {
  update::SimulationConfig s;
  s.strategy = c.update;
  s.start = d.split.train_end;  // validation start: data the trained model has not fitted
  s.end = start_of_day(d.power.end());
  s.origins_per_day = c.origins_per_day;
  s.seed = c.seed;
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// -- config ------------------------------------------------------------------

std::vector<update::UpdateStrategy> ExperimentConfig::grid() const {
  std::vector<update::UpdateStrategy> out;
  for (std::size_t e : grid_epochs)
    for (double lr : grid_lrs) {
      update::UpdateStrategy s = update;
      s.epochs = e;
      s.lr = lr;
      s.steps_per_epoch = 1;
      out.push_back(s);
    }
  return out;
}

void ExperimentConfig::validate() const {
  arch.validate();
  training.validate();
  update.validate();
  if (origins_per_day == 0 || kStepsPerDay % origins_per_day != 0)
    throw Error(ErrorKind::Config, "origins_per_day must divide 96");
  if (horizons_h.empty()) throw Error(ErrorKind::Config, "at least one evaluation horizon is required");
  for (int h : horizons_h)
    if (h <= 0 || eval::horizon_step(h) > arch.output_dim)
      throw Error(ErrorKind::Config, "horizon " + std::to_string(h) + " h exceeds the model output");
  if (grid_epochs.empty() || grid_lrs.empty()) throw Error(ErrorKind::Config, "grid needs epochs and learning rates");
  for (double lr : grid_lrs)
    if (!(lr > 0)) throw Error(ErrorKind::Config, "grid learning rates must be positive");
  if (models.empty()) throw Error(ErrorKind::Config, "no models to evaluate");
  if (!(quantile_low >= 0 && quantile_low < quantile_high && quantile_high <= 1))
    throw Error(ErrorKind::Config, "quantile levels must satisfy 0 <= low < high <= 1");
  if (unreliable_fraction && !(*unreliable_fraction >= 0 && *unreliable_fraction < 1))
    throw Error(ErrorKind::Config, "unreliable_fraction must lie in [0, 1)");
  if (split && !(split->train_end < split->val_end)) throw Error(ErrorKind::Config, "split boundaries out of order");
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    check_keys(j, "", {"seed", "preset", "out", "data_dir", "transformers", "architecture", "generate", "training",
                       "update", "grid", "split", "evaluation"});
    read(j, "seed", c.seed);
    read(j, "preset", c.preset);
    c.arch = model::ArchitectureSpec::from_preset(c.preset);
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    if (j.contains("data_dir")) c.data_dir = fs::path(j["data_dir"].get<std::string>());
    read(j, "transformers", c.transformers);
    if (j.contains("architecture")) {
      const auto& a = j["architecture"];
      check_keys(a, "architecture", {"lstm_units", "dense1", "dense2", "lookback", "output_dim", "dropout",
                                     "recurrent_dropout", "leaky_alpha"});
      read(a, "lstm_units", c.arch.lstm_units);
      read(a, "dense1", c.arch.dense1);
      read(a, "dense2", c.arch.dense2);
      read(a, "lookback", c.arch.lookback);
      read(a, "output_dim", c.arch.output_dim);
      read(a, "dropout", c.arch.dropout);
      read(a, "recurrent_dropout", c.arch.recurrent_dropout);
      read(a, "leaky_alpha", c.arch.leaky_alpha);
    }
    if (j.contains("generate")) {
      const auto& g = j["generate"];
      check_keys(g, "generate", {"train_days", "val_days", "test_days", "tail_days", "unreliable_fraction"});
      read(g, "train_days", c.timeline.train_days);
      read(g, "val_days", c.timeline.val_days);
      read(g, "test_days", c.timeline.test_days);
      read(g, "tail_days", c.timeline.tail_days);
      if (g.contains("unreliable_fraction")) c.unreliable_fraction = g["unreliable_fraction"].get<double>();
    }
    if (j.contains("training")) {
      const auto& t = j["training"];
      check_keys(t, "training", {"epochs", "steps_per_epoch", "batch_size", "learning_rate", "loss", "patience",
                                 "clip_norm"});
      read(t, "epochs", c.training.epochs);
      read(t, "steps_per_epoch", c.training.steps_per_epoch);
      read(t, "batch_size", c.training.batch_size);
      read(t, "learning_rate", c.training.lr);
      if (t.contains("loss")) c.training.loss = nn::parse_loss(t["loss"].get<std::string>());
      read(t, "patience", c.training.patience);
      read(t, "clip_norm", c.training.clip_norm);
    }
    if (j.contains("update")) {
      const auto& u = j["update"];
      check_keys(u, "update", {"epochs", "learning_rate", "steps_per_epoch", "loss", "clip_norm", "carry_adam",
                               "origins_per_day"});
      read(u, "epochs", c.update.epochs);
      read(u, "learning_rate", c.update.lr);
      read(u, "steps_per_epoch", c.update.steps_per_epoch);
      if (u.contains("loss")) c.update.loss = nn::parse_loss(u["loss"].get<std::string>());
      read(u, "clip_norm", c.update.clip_norm);
      read(u, "carry_adam", c.update.carry_adam);
      read(u, "origins_per_day", c.origins_per_day);
    }
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      check_keys(g, "grid", {"epochs", "learning_rates"});
      read(g, "epochs", c.grid_epochs);
      read(g, "learning_rates", c.grid_lrs);
    }
    if (j.contains("split")) {
      const auto& s = j["split"];
      check_keys(s, "split", {"train_end", "val_end"});
      c.split = prep::SplitSpec{parse_timestamp(s.at("train_end").get<std::string>()),
                                parse_timestamp(s.at("val_end").get<std::string>())};
    }
    if (j.contains("evaluation")) {
      const auto& e = j["evaluation"];
      check_keys(e, "evaluation", {"horizons_h", "models", "compare_frozen", "compare_updated", "quantile_low",
                                   "quantile_high"});
      read(e, "horizons_h", c.horizons_h);
      read(e, "models", c.models);
      read(e, "compare_frozen", c.compare_frozen);
      read(e, "compare_updated", c.compare_updated);
      read(e, "quantile_low", c.quantile_low);
      read(e, "quantile_high", c.quantile_high);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config: ") + e.what());
  } catch (const ParseError& e) {
    throw Error(ErrorKind::Config, std::string("config: ") + e.what());
  }
  c.training.seed = c.seed;
  c.validate();
  return c;
}

ordered_json ExperimentConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["preset"] = preset;
  j["out"] = out.string();
  if (data_dir) j["data_dir"] = data_dir->string();
  j["transformers"] = transformers;
  j["architecture"] = {{"lstm_units", arch.lstm_units},   {"dense1", arch.dense1},
                       {"dense2", arch.dense2},           {"lookback", arch.lookback},
                       {"output_dim", arch.output_dim},   {"dropout", arch.dropout},
                       {"recurrent_dropout", arch.recurrent_dropout}, {"leaky_alpha", arch.leaky_alpha}};
  j["generate"] = {{"train_days", timeline.train_days},
                   {"val_days", timeline.val_days},
                   {"test_days", timeline.test_days},
                   {"tail_days", timeline.tail_days}};
  if (unreliable_fraction) j["generate"]["unreliable_fraction"] = *unreliable_fraction;
  j["training"] = {{"epochs", training.epochs},       {"steps_per_epoch", training.steps_per_epoch},
                   {"batch_size", training.batch_size}, {"learning_rate", training.lr},
                   {"loss", nn::to_string(training.loss)}, {"patience", training.patience},
                   {"clip_norm", training.clip_norm}};
  j["update"] = {{"epochs", update.epochs},       {"learning_rate", update.lr},
                 {"steps_per_epoch", update.steps_per_epoch}, {"loss", nn::to_string(update.loss)},
                 {"clip_norm", update.clip_norm}, {"carry_adam", update.carry_adam},
                 {"origins_per_day", origins_per_day}};
  j["grid"] = {{"epochs", grid_epochs}, {"learning_rates", grid_lrs}};
  if (split) j["split"] = {{"train_end", format_timestamp(split->train_end)}, {"val_end", format_timestamp(split->val_end)}};
  j["evaluation"] = {{"horizons_h", horizons_h},         {"models", models},
                     {"compare_frozen", compare_frozen}, {"compare_updated", compare_updated},
                     {"quantile_low", quantile_low},     {"quantile_high", quantile_high}};
  return j;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Config, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

void echo_config(const ExperimentConfig& c) {
  fs::create_directories(c.out);
  std::ofstream f(c.out / "config.json");
  if (!f) throw Error(ErrorKind::Io, "cannot write " + (c.out / "config.json").string());
  f << c.to_json().dump(2) << '\n';
}

// -- data --------------------------------------------------------------------

std::vector<std::string> list_transformers(const ExperimentConfig& c) {
  if (!c.transformers.empty()) return c.transformers;
  const fs::path dir = c.data_path();
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "data directory " + dir.string() + " not found");
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::exists(e.path() / "power.csv")) ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw Error(ErrorKind::Data, "no transformer data under " + dir.string());
  return ids;
}

TransformerData load_transformer(const ExperimentConfig& c, const std::string& id) {
  const fs::path dir = c.data_path() / id;
  TransformerData d;
  d.id = id;
  d.power = grid::load_power_csv(dir / "power.csv");
  d.meta = grid::load_transformer_meta(dir / "meta.txt");
  const auto weather = grid::load_weather_csv(dir / "weather.csv");
  d.features = grid::build_feature_frame(weather, d.meta.lat, d.meta.lon, d.power.start, d.power.size());
  if (c.split) {
    d.split = *c.split;
  } else if (fs::exists(dir / "manifest.json")) {
    const auto m = synth::load_manifest(dir / "manifest.json");
    if (!m.split) throw Error(ErrorKind::Config, id + ": manifest has no split and none is configured");
    d.split = *m.split;
  } else {
    throw Error(ErrorKind::Config, id + ": no split configured and no manifest found");
  }
  prep::split_indices(d.power, d.split);  // validates the boundaries
  return d;
}

std::vector<Timestamp> evaluation_origins(const ExperimentConfig& c, const TransformerData& d) {
  const auto idx = prep::split_indices(d.power, d.split);
  const std::size_t stride = kStepsPerDay / c.origins_per_day;
  std::vector<Timestamp> out;
  for (std::size_t o = idx.val_end; o < d.power.size(); o += stride)
    if (o + 1 >= c.arch.lookback && o + c.arch.output_dim < d.power.size()) out.push_back(d.power.time_at(o));
  return out;
}

prep::QuantileScaler evaluation_scaler(const ExperimentConfig& c, const grid::PowerSeries& power) {
  std::vector<double> reliable;
  for (std::size_t i = 0; i < power.size(); ++i)
    if (power.reliable(i)) reliable.push_back(power.values[i]);
  return prep::fit_quantile_scaler(reliable, c.quantile_low, c.quantile_high);
}

// -- commands ----------------------------------------------------------------

std::vector<std::string> cmd_generate(const ExperimentConfig& c) {
  c.validate();
  echo_config(c);
  std::vector<std::string> ids;
  for (auto spec : synth::canonical_fleet(c.seed, c.timeline)) {
    if (!c.transformers.empty() &&
        std::find(c.transformers.begin(), c.transformers.end(), spec.id) == c.transformers.end())
      continue;
    if (c.unreliable_fraction) spec.unreliable_fraction = *c.unreliable_fraction;
    synth::save_bundle(c.data_path() / spec.id, synth::generate_scenario(spec));
    log::info("generated " + spec.id);
    ids.push_back(spec.id);
  }
  return ids;
}

std::vector<model::TrainingResult> cmd_train(const ExperimentConfig& c) {
  c.validate();
  echo_config(c);
  std::vector<model::TrainingResult> results;
  for (const auto& id : list_transformers(c)) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = load_transformer(c, id);
    const auto idx = prep::split_indices(d.power, d.split);
    const std::size_t L = c.arch.lookback, H = c.arch.output_dim;
    if (idx.train_end < L + H + 1 || idx.val_end < idx.train_end + H + 1)
      throw Error(ErrorKind::Size, id + ": training or validation period too short for one window");

    auto m = model::build_model(c.arch, c.seed);
    model::fit_normalization(m, d.power.slice(0, idx.train_end), d.features.slice(0, idx.train_end));
    auto train = model::model_dataset(m, d.power, d.features);
    auto val = train;
    // train targets stay inside the training period; validation origins lie in
    // the validation period and may look back into training data
    train.origins = prep::window_origins(d.power.size(), L, H, 1, 0, idx.train_end - 1 - H);
    val.origins = prep::window_origins(d.power.size(), L, H, 1, idx.train_end, idx.val_end - 1 - H);

    model::TrainingConfig tc = c.training;
    tc.seed = c.seed;
    auto res = model::train_initial(std::move(m), train, val, tc);

    const fs::path dir = model_dir(c, id);
    fs::create_directories(dir);
    model::Checkpoint ck{res.model, std::nullopt, evaluation_scaler(c, d.power)};
    model::save_checkpoint(dir / "checkpoint.json", ck);
    model::save_preprocess_sidecar(dir / "preprocess.json", res.model, ck.eval_scaler);
    model::write_history_csv(dir / "history.csv", res.history);
    log::info(id + ": trained " + std::to_string(res.history.size()) + " epochs (best " +
              std::to_string(res.best_epoch) + ") in " + std::to_string(seconds_since(t0)) + " s");
    results.push_back(std::move(res));
  }
  return results;
}

void cmd_forecast(const ExperimentConfig& c) {
  c.validate();
  echo_config(c);
  for (const auto& id : list_transformers(c)) {
    const auto d = load_transformer(c, id);
    const auto ck = load_model(c, id);
    if (ck.model.arch.output_dim != c.arch.output_dim || ck.model.arch.lookback != c.arch.lookback)
      throw Error(ErrorKind::Config, id + ": checkpoint architecture differs from the configuration");
    const auto origins = evaluation_origins(c, d);
    const fs::path dir = forecast_dir(c, id);

    const auto lstm = model::rolling_forecast(ck.model, d.power, d.features, origins, "lstm");
    save_forecasts(dir / "lstm.csv", lstm, d.power, plain_audit(lstm));
    for (auto kind : {baselines::PersistenceKind::LastDay, baselines::PersistenceKind::LastMeasurement}) {
      const auto set = baselines::persistence_forecast(kind, d.power, origins, c.arch.output_dim);
      save_forecasts(dir / (set.model + ".csv"), set, d.power, plain_audit(set));
    }
    log::info(id + ": " + std::to_string(origins.size()) + " test origins forecast");
  }
}

void cmd_update_run(const ExperimentConfig& c) {
  c.validate();
  echo_config(c);
  for (const auto& id : list_transformers(c)) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = load_transformer(c, id);
    const auto ck = load_model(c, id);
    const auto sim = update::run_update_simulation(ck.model, d.power, d.features, simulation_config(c, d), "lstm_updated");
    // only test-period forecasts are evaluated
    const Timestamp from = d.split.val_end, to = d.power.end();
    const auto test = sim.forecasts.between(from, to);
    std::vector<forecast::AuditEntry> audit;
    for (const auto& a : sim.audit)
      if (a.origin >= from && a.origin < to) audit.push_back(a);
    const fs::path dir = forecast_dir(c, id);
    save_forecasts(dir / "lstm_updated.csv", test, d.power, audit);
    update::save_run_records(dir / "update_log.csv", sim.records);
    log::info(id + ": " + std::to_string(sim.records.size()) + " daily updates in " +
              std::to_string(seconds_since(t0)) + " s");
  }
}

std::vector<update::GridResult> cmd_grid(const ExperimentConfig& c) {
  c.validate();
  echo_config(c);
  const auto strategies = c.grid();
  std::vector<update::GridResult> out;
  std::vector<std::string> ids = list_transformers(c);
  fs::create_directories(report_dir(c) / "grid");
  std::ofstream best(report_dir(c) / "grid_best.csv");
  if (!best) throw Error(ErrorKind::Io, "cannot write grid_best.csv");
  best << "transformer,horizon_h,strategy_epochs,strategy_lr,nrmse\n";
  std::map<std::pair<std::size_t, int>, std::vector<double>> by_strategy;

  for (const auto& id : ids) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = load_transformer(c, id);
    const auto ck = load_model(c, id);
    update::GridConfig gc;
    gc.simulation = simulation_config(c, d);
    gc.eval_from = d.split.val_end;
    gc.eval_to = d.power.end();
    gc.transformer = id;
    gc.horizons_h = c.horizons_h;
    auto g = update::run_strategy_grid(ck.model, d.power, d.features, evaluation_scaler(c, d.power), strategies, gc);

    const fs::path dir = forecast_dir(c, id) / "grid";
    for (const auto& row : g.rows) save_forecasts(dir / (row.strategy.label() + ".csv"), row.forecasts, d.power, row.audit);
    save_forecasts(dir / "control_e0.csv", g.control.forecasts, d.power, g.control.audit);
    update::save_grid(report_dir(c) / "grid" / (id + ".csv"), g.rows);
    update::save_grid(report_dir(c) / "grid" / (id + "_control.csv"), std::span(&g.control, 1));
    for (const auto& [h, r] : g.best) {
      const auto& row = g.rows[r];
      const auto it = std::find_if(row.reports.begin(), row.reports.end(), [&](const auto& x) { return x.horizon_h == h; });
      best << id << ',' << h << ',' << row.strategy.epochs << ',' << csv::format_double(row.strategy.lr) << ','
           << csv::format_double(it->nrmse) << '\n';
    }
    for (std::size_t r = 0; r < g.rows.size(); ++r)
      for (const auto& rep : g.rows[r].reports) by_strategy[{r, rep.horizon_h}].push_back(rep.nrmse);
    log::info(id + ": grid of " + std::to_string(strategies.size()) + " strategies in " +
              std::to_string(seconds_since(t0)) + " s");
    out.push_back(std::move(g));
  }

  std::ofstream mean(report_dir(c) / "grid_mean.csv");
  if (!mean) throw Error(ErrorKind::Io, "cannot write grid_mean.csv");
  mean << "strategy_epochs,strategy_lr,horizon_h,mean_nrmse,transformers\n";
  for (const auto& [key, v] : by_strategy) {
    double s = 0;
    for (double x : v) s += x;
    mean << strategies[key.first].epochs << ',' << csv::format_double(strategies[key.first].lr) << ',' << key.second
         << ',' << csv::format_double(s / static_cast<double>(v.size())) << ',' << v.size() << '\n';
  }
  return out;
}

std::vector<eval::HorizonReport> cmd_evaluate(const ExperimentConfig& c) {
  c.validate();
  echo_config(c);
  const auto ids = list_transformers(c);
  std::vector<std::string> missing;
  for (const auto& id : ids)
    for (const auto& m : c.models)
      if (!fs::exists(forecast_dir(c, id) / (m + ".csv"))) missing.push_back(id + "/" + m);
  if (!missing.empty()) {
    std::string msg = "missing forecast archives:";
    for (const auto& m : missing) msg += " " + m;
    throw Error(ErrorKind::Data, msg);
  }
  std::vector<eval::HorizonReport> rows;
  for (const auto& id : ids) {
    const auto power = grid::load_power_csv(c.data_path() / id / "power.csv");
    const auto scaler = evaluation_scaler(c, power);
    for (const auto& m : c.models) {
      const auto set = forecast::load_archive(forecast_dir(c, id) / (m + ".csv"), m);
      const auto r = eval::evaluate(set, power, scaler, id, c.horizons_h);
      rows.insert(rows.end(), r.begin(), r.end());
    }
  }
  fs::create_directories(report_dir(c));
  eval::save_reports(report_dir(c) / "reports.csv", rows);
  return rows;
}

eval::Comparison cmd_compare(const ExperimentConfig& c, std::ostream& summary) {
  c.validate();
  echo_config(c);
  const fs::path reports = report_dir(c) / "reports.csv";
  if (!fs::exists(reports)) throw Error(ErrorKind::Io, "missing " + reports.string() + " (run evaluate first)");
  const auto rows = eval::load_reports(reports);
  const auto cmp = eval::compare_models(rows);
  eval::save_boxplot(report_dir(c) / "boxplot.csv", cmp);

  std::ostringstream text;
  eval::print_summary(text, cmp);
  std::vector<eval::HorizonReport> frozen, updated;
  for (const auto& r : rows) {
    if (r.model == c.compare_frozen) frozen.push_back(r);
    if (r.model == c.compare_updated) updated.push_back(r);
  }
  if (!frozen.empty() && !updated.empty()) {
    const auto imp = eval::improvement(frozen, updated);
    eval::save_improvement(report_dir(c) / "improvement.csv", imp);
    text << "\nmean nRMSE improvement of " << c.compare_updated << " over " << c.compare_frozen << ": "
         << csv::format_double(imp.mean_delta) << '\n';
  }
  std::ofstream f(report_dir(c) / "summary.txt");
  f << text.str();
  summary << text.str();
  return cmp;
}

forecast::VerifyReport cmd_verify(const ExperimentConfig& c) {
  echo_config(c);
  const fs::path root = c.out / "forecasts";
  if (!fs::is_directory(root)) throw Error(ErrorKind::Io, "no forecasts under " + root.string());
  std::vector<fs::path> archives;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".csv" && !name.ends_with(".audit.csv") && name != "update_log.csv")
      archives.push_back(e.path());
  }
  std::sort(archives.begin(), archives.end());
  forecast::VerifyReport total;
  std::map<std::string, grid::PowerSeries> truth;
  for (const auto& a : archives) {
    const std::string id = fs::relative(a, root).begin()->string();
    if (!truth.count(id)) {
      const fs::path p = c.data_path() / id / "power.csv";
      if (!fs::exists(p)) throw Error(ErrorKind::Io, "missing truth " + p.string());
      truth.emplace(id, grid::load_power_csv(p));
    }
    if (!fs::exists(audit_path(a))) {
      ++total.violations;
      total.messages.push_back(a.string() + ": missing audit file");
      continue;
    }
    const auto r = forecast::verify_archive(a, audit_path(a), &truth.at(id));
    total.origins += r.origins;
    total.rows += r.rows;
    total.violations += r.violations;
    for (const auto& m : r.messages)
      if (total.messages.size() < 50) total.messages.push_back(fs::relative(a, root).string() + ": " + m);
  }
  fs::create_directories(report_dir(c));
  std::ofstream f(report_dir(c) / "verify.txt");
  f << "archives " << archives.size() << "\norigins " << total.origins << "\nrows " << total.rows << "\nviolations "
    << total.violations << '\n';
  for (const auto& m : total.messages) f << m << '\n';
  return total;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Config: return 1;
    case ErrorKind::Numerical: return 3;
    default: return 2;
  }
}

}  // namespace vpf::experiment
