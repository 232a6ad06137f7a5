// Command-line driver for the vertical power-flow forecasting experiments.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "vpf/error.hpp"
#include "vpf/experiment.hpp"
#include "vpf/log.hpp"

using namespace vpf;

int main(int argc, char** argv) {
  CLI::App app{"Vertical power-flow forecasting: synthetic data, LSTM training, daily updates and evaluation"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::string out;
  bool verbose = false, quiet = false;
  app.add_option("--config", config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "random seed for data, initialisation and training");
  app.add_option("--preset", preset, "architecture preset")->check(CLI::IsMember({"paper", "desk"}));
  app.add_option("--out", out, "output directory");
  app.add_flag("-v,--verbose", verbose, "progress messages");
  app.add_flag("-q,--quiet", quiet, "suppress warnings");

  auto* generate = app.add_subcommand("generate", "write the canonical synthetic fleet to <out>/data");
  auto* train = app.add_subcommand("train", "initial training per transformer");
  auto* update_run = app.add_subcommand("update-run", "daily-update simulation with the configured strategy");
  auto* grid = app.add_subcommand("grid", "epochs x learning-rate strategy grid");
  auto* forecast = app.add_subcommand("forecast", "frozen LSTM and persistence forecasts over the test period");
  auto* evaluate = app.add_subcommand("evaluate", "per-horizon nRMSE and Pearson for every model");
  auto* compare = app.add_subcommand("compare", "boxplot data, improvement and per-horizon winners");
  auto* verify = app.add_subcommand("verify-archive", "look-ahead audit of every forecast archive");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  log::set_level(quiet ? log::Level::Quiet : verbose ? log::Level::Info : log::Level::Warn);
  try {
    auto cfg = config_path.empty() ? experiment::ExperimentConfig::from_json(nlohmann::json::object())
                                   : experiment::load_config(config_path);
    // command-line flags override the file; a preset resets the architecture
    if (seed) cfg.seed = cfg.training.seed = *seed;
    if (!preset.empty()) {
      cfg.preset = preset;
      cfg.arch = model::ArchitectureSpec::from_preset(preset);
    }
    if (!out.empty()) cfg.out = out;
    cfg.validate();

    if (generate->parsed()) {
      const auto ids = experiment::cmd_generate(cfg);
      std::cout << "generated " << ids.size() << " scenarios under " << cfg.data_path().string() << '\n';
    } else if (train->parsed()) {
      const auto res = experiment::cmd_train(cfg);
      std::cout << "trained " << res.size() << " models\n";
    } else if (update_run->parsed()) {
      experiment::cmd_update_run(cfg);
    } else if (grid->parsed()) {
      experiment::cmd_grid(cfg);
    } else if (forecast->parsed()) {
      experiment::cmd_forecast(cfg);
    } else if (evaluate->parsed()) {
      const auto rows = experiment::cmd_evaluate(cfg);
      std::cout << rows.size() << " report rows written\n";
    } else if (compare->parsed()) {
      experiment::cmd_compare(cfg, std::cout);
    } else if (verify->parsed()) {
      const auto r = experiment::cmd_verify(cfg);
      std::cout << r.origins << " origins, " << r.rows << " rows, " << r.violations << " violations\n";
      for (const auto& m : r.messages) std::cout << "  " << m << '\n';
      return r.ok() ? 0 : 2;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return experiment::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
