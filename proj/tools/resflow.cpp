// resflow: hourly event-attendance forecasting from reservation dynamics.
//
// Subcommands: generate | train | predict | evaluate | ablate | correlate.
// Exit codes: 0 success, 1 runtime/numeric failure, 2 usage/config error.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "resflow/commands.hpp"

namespace {

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("RESFLOW_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    return static_cast<std::uint64_t>(std::stoull(v));
  } catch (...) {
    throw resflow::UsageError("RESFLOW_SEED must be an unsigned integer");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"resflow - attendance forecasting from reservation dynamics"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, checkpoint_path, variant = "full";
  std::string issue_date;
  int jobs = 1;
  std::int64_t seed_flag = -1;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_flag, "Override generator and training seed");
  };

  CLI::App* generate = app.add_subcommand("generate", "Write synthetic entrance/reservation CSVs");
  generate->add_option("--config", config_path, "Run config JSON");
  generate->add_option("--out", out_path, "Output directory")->required();
  add_seed(generate);

  CLI::App* train = app.add_subcommand("train", "Train one variant and write a checkpoint");
  train->add_option("--config", config_path, "Run config JSON");
  train->add_option("--data", data_dir, "Directory with entrance.csv and reservations.csv")
      ->required();
  train->add_option("--out", checkpoint_path, "Checkpoint output path")->required();
  train->add_option("--variant", variant,
                    "full | no-inv | dec-only | no-af | dec-only-no-af");
  add_seed(train);

  CLI::App* predict = app.add_subcommand("predict", "Forecast from a checkpoint");
  predict->add_option("--checkpoint", checkpoint_path, "Checkpoint path")->required();
  predict->add_option("--data", data_dir, "Data directory")->required();
  predict->add_option("--issue-date", issue_date, "Forecast issue date YYYY-MM-DD")->required();
  predict->add_option("--out", out_path, "forecast.csv output path")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "Train/evaluate the config grid");
  evaluate->add_option("--config", config_path, "Run config JSON");
  evaluate->add_option("--data", data_dir, "Data directory")->required();
  evaluate->add_option("--out", out_path, "report.csv output path")->required();
  evaluate->add_option("--jobs", jobs, "Parallel cell workers");
  add_seed(evaluate);

  CLI::App* ablate = app.add_subcommand("ablate", "Run the five ablation variants at IW=7, H=5");
  ablate->add_option("--config", config_path, "Run config JSON");
  ablate->add_option("--data", data_dir, "Data directory")->required();
  ablate->add_option("--out", out_path, "report.csv output path")->required();
  ablate->add_option("--jobs", jobs, "Parallel cell workers");
  add_seed(ablate);

  CLI::App* correlate = app.add_subcommand("correlate", "Write lag-correlation heatmap data");
  correlate->add_option("--config", config_path, "Run config JSON");
  correlate->add_option("--data", data_dir, "Data directory")->required();
  correlate->add_option("--out", out_path, "corr.csv output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    resflow::CommandOptions opts;
    opts.seed_override = env_seed();
    if (seed_flag >= 0) opts.seed_override = static_cast<std::uint64_t>(seed_flag);

    if (app.got_subcommand(generate)) {
      resflow::run_generate(resflow::load_config_or_default(config_path, opts), out_path);
    } else if (app.got_subcommand(train)) {
      const auto report = resflow::run_train(
          resflow::load_config_or_default(config_path, opts), data_dir, checkpoint_path,
          variant);
      std::cerr << "trained " << variant << ": best epoch " << report.best_epoch << "/"
                << report.stopped_epoch << ", val MAE "
                << report.val_loss[report.best_epoch - 1] << "\n";
    } else if (app.got_subcommand(predict)) {
      resflow::run_predict(checkpoint_path, data_dir, issue_date, out_path);
    } else if (app.got_subcommand(evaluate)) {
      const auto report = resflow::run_evaluate(
          resflow::load_config_or_default(config_path, opts), data_dir, out_path, jobs);
      std::cerr << "evaluated " << report.rows.size() << " cells, skipped "
                << report.skipped.size() << "\n";
      for (const auto& s : report.skipped) std::cerr << "skipped " << s << "\n";
    } else if (app.got_subcommand(ablate)) {
      const auto report = resflow::run_ablate(
          resflow::load_config_or_default(config_path, opts), data_dir, out_path, jobs);
      std::cerr << "ablation rows: " << report.rows.size() << "\n";
    } else if (app.got_subcommand(correlate)) {
      resflow::run_correlate(resflow::load_config_or_default(config_path, opts), data_dir,
                             out_path);
    }
  } catch (const resflow::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const resflow::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
