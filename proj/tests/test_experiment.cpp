#include "doctest.h"

#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "vpf/error.hpp"
#include "vpf/experiment.hpp"

using namespace vpf;
using namespace vpf::experiment;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Domain;
}

ExperimentConfig tiny(const fs::path& out) {
  auto j = nlohmann::json::parse(R"({
    "seed": 9,
    "transformers": ["T5_pv_wind_drift"],
    "architecture": {"lstm_units": 4, "dense1": 8, "dense2": 8},
    "generate": {"train_days": 5, "val_days": 3, "test_days": 2},
    "training": {"epochs": 2, "steps_per_epoch": 2, "batch_size": 16},
    "grid": {"epochs": [1, 2], "learning_rates": [0.01]},
    "update": {"epochs": 2, "origins_per_day": 4}
  })");
  j["out"] = out.string();
  return ExperimentConfig::from_json(j);
}

}  // namespace

TEST_CASE("config defaults carry the paper's training and update values") {
  const auto c = ExperimentConfig::from_json(nlohmann::json::object());
  CHECK(c.training.epochs == 40);
  CHECK(c.training.steps_per_epoch == 50);
  CHECK(c.training.batch_size == 192);
  CHECK(c.training.lr == 0.001);
  CHECK(c.training.loss == nn::LossKind::MAE);
  CHECK(c.training.patience == 5);
  CHECK(c.update.epochs == 5);
  CHECK(c.update.lr == 0.001);
  CHECK(c.update.steps_per_epoch == 1);
  CHECK(c.update.loss == nn::LossKind::MSE);
  CHECK(c.grid().size() == 8);
  CHECK(c.arch == model::ArchitectureSpec::desk());
  CHECK(c.horizons_h == std::vector<int>{1, 4, 8, 16, 24, 32, 48});
  CHECK(c.models.size() == 4);
  const auto p = ExperimentConfig::from_json(nlohmann::json{{"preset", "paper"}});
  CHECK(p.arch == model::ArchitectureSpec::paper());
}

TEST_CASE("config round trip and validation") {
  auto c = tiny("/tmp/x");
  c.split = prep::SplitSpec{make_time(2018, 7, 1), make_time(2018, 7, 15)};
  const auto back = ExperimentConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  CHECK(back.to_json() == c.to_json());
  CHECK(back.arch == c.arch);
  CHECK(back.split->val_end == c.split->val_end);

  CHECK(kind_of([] { ExperimentConfig::from_json(nlohmann::json{{"sede", 1}}); }) == ErrorKind::Config);
  CHECK(kind_of([] { ExperimentConfig::from_json(nlohmann::json{{"training", {{"epoch", 1}}}}); }) ==
        ErrorKind::Config);
  CHECK(kind_of([] { ExperimentConfig::from_json(nlohmann::json{{"preset", "huge"}}); }) == ErrorKind::Config);
  CHECK(kind_of([] { ExperimentConfig::from_json(nlohmann::json{{"seed", "x"}}); }) == ErrorKind::Config);
  CHECK(kind_of([] {
          ExperimentConfig::from_json(nlohmann::json{{"evaluation", {{"horizons_h", {1, 72}}}}});
        }) == ErrorKind::Config);
  CHECK(kind_of([] { ExperimentConfig::from_json(nlohmann::json{{"update", {{"origins_per_day", 5}}}}); }) ==
        ErrorKind::Config);
}

TEST_CASE("exit codes") {
  CHECK(exit_code(Error(ErrorKind::Config, "")) == 1);
  CHECK(exit_code(Error(ErrorKind::Numerical, "")) == 3);
  CHECK(exit_code(Error(ErrorKind::Parse, "")) == 2);
  CHECK(exit_code(Error(ErrorKind::Data, "")) == 2);
  CHECK(exit_code(Error(ErrorKind::Io, "")) == 2);
}

TEST_CASE("small pipeline: generation, training, forecasts, updates, evaluation") {
  const fs::path out = fs::temp_directory_path() / "vpf_experiment_test";
  fs::remove_all(out);
  const auto c = tiny(out);

  const auto ids = cmd_generate(c);
  REQUIRE(ids == std::vector<std::string>{"T5_pv_wind_drift"});
  const std::string power = slurp(out / "data" / ids[0] / "power.csv");
  cmd_generate(c);
  CHECK(slurp(out / "data" / ids[0] / "power.csv") == power);  // idempotent
  CHECK(fs::exists(out / "config.json"));
  CHECK(load_config(out / "config.json").to_json() == c.to_json());

  CHECK(kind_of([&] { cmd_forecast(c); }) == ErrorKind::Io);  // no checkpoint yet
  const auto trained = cmd_train(c);
  REQUIRE(trained.size() == 1);
  CHECK(trained[0].history.size() <= 2);
  const std::string ckpt = slurp(out / "models" / ids[0] / "checkpoint.json");
  cmd_train(c);
  CHECK(slurp(out / "models" / ids[0] / "checkpoint.json") == ckpt);

  cmd_forecast(c);
  CHECK(kind_of([&] { cmd_evaluate(c); }) == ErrorKind::Data);  // lstm_updated missing
  cmd_update_run(c);
  const auto rows = cmd_evaluate(c);
  CHECK(rows.size() == 4 * 7);

  // frozen and updated forecasts share origins, so they compare cleanly
  std::ostringstream text;
  const auto cmp = cmd_compare(c, text);
  CHECK(cmp.winners.size() == 7);
  CHECK(text.str().find("best model per horizon") != std::string::npos);
  CHECK(fs::exists(out / "reports" / "improvement.csv"));

  auto self = c;
  self.compare_updated = "lstm";
  std::ostringstream ignore;
  cmd_compare(self, ignore);
  std::ifstream imp(out / "reports" / "improvement.csv");
  std::string line;
  std::getline(imp, line);
  std::size_t n = 0;
  while (std::getline(imp, line)) {
    ++n;
    CHECK(line.find(",0,0") != std::string::npos);  // delta and ratio
  }
  CHECK(n == 7);

  const auto grids = cmd_grid(c);
  REQUIRE(grids.size() == 1);
  CHECK(grids[0].rows.size() == 2);
  const auto v = cmd_verify(c);
  CHECK(v.ok());
  CHECK(v.origins > 0);

  // a forecast that peeks at its own target is caught
  {
    const fs::path a = out / "forecasts" / ids[0] / "lstm.audit.csv";
    std::string s = slurp(a);
    const auto second = s.find('\n') + 1;
    const auto comma = s.find(',', second);
    const auto comma2 = s.find(',', comma + 1);
    const std::string origin = s.substr(second, comma - second);
    auto t = parse_timestamp(origin) + std::chrono::hours{1};
    s.replace(comma + 1, comma2 - comma - 1, format_timestamp(t));
    std::ofstream(a, std::ios::binary) << s;
  }
  CHECK_FALSE(cmd_verify(c).ok());
  fs::remove_all(out);
}
