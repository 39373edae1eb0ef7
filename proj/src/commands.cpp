#include "resflow/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "resflow/checkpoint.hpp"
#include "resflow/evalkit.hpp"

namespace resflow {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct LoadedData {
  SlotSeries entrance;  // per-gate channels
  ReservationLog reservations;
};

LoadedData load_data_dir(const std::string& data_dir, const SlotGrid& grid) {
  const fs::path dir(data_dir);
  const fs::path entrance_path = dir / "entrance.csv";
  const fs::path reservations_path = dir / "reservations.csv";
  if (!fs::exists(entrance_path)) {
    throw IoError("missing " + entrance_path.string());
  }
  if (!fs::exists(reservations_path)) {
    throw IoError("missing " + reservations_path.string());
  }
  LoadedData d{load_entrance_csv(entrance_path.string(), grid),
               load_reservations_csv(reservations_path.string(), grid)};
  return d;
}

// Collapses gates when the window asks for the single-channel setting.
SlotSeries series_for_channels(const SlotSeries& gates, int out_channels) {
  if (out_channels == 1 && gates.num_channels() > 1) return gates.sum_channels();
  if (gates.num_channels() != out_channels) {
    throw ConfigError("data has " + std::to_string(gates.num_channels()) +
                      " gate channels but the window requests " +
                      std::to_string(out_channels));
  }
  return gates;
}

void write_train_log(const std::string& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t i = 0; i < report.train_loss.size(); ++i) {
    out << (i + 1) << ',' << fmt_double(report.train_loss[i]) << ','
        << fmt_double(report.val_loss[i]) << '\n';
  }
}

}  // namespace

RunConfig load_config_or_default(const std::string& config_path, const CommandOptions& opts) {
  RunConfig config = config_path.empty() ? default_run_config() : load_run_config(config_path);
  if (opts.seed_override) {
    config.generator.seed = *opts.seed_override;
    config.train_config.seed = *opts.seed_override;
  }
  return config;
}

void run_generate(const RunConfig& config, const std::string& out_dir) {
  config.generator.validate();  // fail before touching the filesystem
  const SlotSeries attendance = generate_attendance(config.generator);
  const ReservationLog log = generate_reservations(attendance, config.generator);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_entrance_csv((dir / "entrance.csv").string(), attendance);
  write_reservations_csv((dir / "reservations.csv").string(), log);

  nlohmann::json manifest = {{"seed", config.generator.seed},
                             {"generator", generator_config_to_json(config.generator)}};
  std::ofstream mf(dir / "manifest.json", std::ios::binary);
  if (!mf) throw IoError("cannot write manifest.json");
  mf << manifest.dump(2) << '\n';
}

TrainReport run_train(const RunConfig& config, const std::string& data_dir,
                      const std::string& checkpoint_path, const std::string& variant) {
  const LoadedData data = load_data_dir(data_dir, config.window.grid);
  const SlotSeries series = series_for_channels(data.entrance, config.window.out_channels);

  auto samples = build_samples(series, data.reservations, config.window);
  auto [train_set, test_set] = chrono_split(samples, config.train_fraction, config.window);
  const Standardizer st = Standardizer::fit(train_set);

  ModelConfig mc = make_variant(variant, config.model);
  mc.spec = config.window;
  auto [model, report] = train(mc, train_set, st, config.train_config);

  save_checkpoint(checkpoint_path, model, config.train_config.seed, st, series.channels);
  const fs::path log_path = fs::path(checkpoint_path).parent_path() / "train_log.csv";
  write_train_log(log_path.string(), report);
  return report;
}

void run_predict(const std::string& checkpoint_path, const std::string& data_dir,
                 const std::string& issue_date, const std::string& out_csv) {
  LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
  const WindowSpec& spec = ckpt.model.config().spec;
  const LoadedData data = load_data_dir(data_dir, spec.grid);
  const SlotSeries series = series_for_channels(data.entrance, spec.out_channels);
  const Date issue = Date::parse(issue_date);

  const ForecastSample sample =
      build_sample_at(series, data.reservations, spec, issue, /*require_target=*/false);

  Tape tape;
  const auto f = ckpt.model.forward(tape, sample, ckpt.standardizer, false, nullptr);
  const Mat& yhat = tape.val(f.yhat);
  const bool fused = ckpt.model.config().use_adaptive_fusion;

  std::ofstream out(out_csv, std::ios::binary);
  if (!out) throw IoError("cannot write " + out_csv);
  out << "target_date,slot,channel,prediction";
  if (fused) out << ",baseline,gate,smoothed";
  out << '\n';
  const int T = spec.grid.slots_per_day;
  for (int j = 0; j < spec.horizon_days; ++j) {
    const std::string date = issue.add_days(j + 1).iso();
    for (int s = 0; s < T; ++s) {
      const int r = j * T + s;
      for (int c = 0; c < spec.out_channels; ++c) {
        out << date << ',' << s << ',' << ckpt.channels[c] << ','
            << fmt_double(yhat(r, c));
        if (fused) {
          out << ',' << fmt_double(tape.val(f.baseline)(r, c)) << ','
              << fmt_double(tape.val(f.gate)(r, c)) << ','
              << fmt_double(tape.val(f.smoothed)(r, c));
        }
        out << '\n';
      }
    }
  }
  if (!out) throw IoError("error writing " + out_csv);
}

EvalReport run_evaluate(const RunConfig& config, const std::string& data_dir,
                        const std::string& out_csv, int jobs) {
  const LoadedData data = load_data_dir(data_dir, config.window.grid);
  ModelConfig base = config.model;
  base.spec = config.window;
  EvalReport report = grid_eval(data.entrance, data.reservations, config.grid, base,
                                config.train_config, config.train_fraction, jobs);
  write_report_csv(out_csv, report);
  return report;
}

EvalReport run_ablate(const RunConfig& config, const std::string& data_dir,
                      const std::string& out_csv, int jobs) {
  GridSpec grid;
  grid.variants.clear();
  for (const auto& v : all_variants()) grid.variants.push_back(v.slug);
  grid.settings = {"single"};
  grid.input_days = {7};
  grid.horizon_days = {5};

  const LoadedData data = load_data_dir(data_dir, config.window.grid);
  ModelConfig base = config.model;
  base.spec = config.window;
  EvalReport report = grid_eval(data.entrance, data.reservations, grid, base,
                                config.train_config, config.train_fraction, jobs);
  write_report_csv(out_csv, report);
  return report;
}

void run_correlate(const RunConfig& config, const std::string& data_dir,
                   const std::string& out_csv) {
  const LoadedData data = load_data_dir(data_dir, config.window.grid);
  const std::vector<MonthRef> months =
      config.months ? *config.months : full_months_in_span(data.entrance);
  if (months.empty()) {
    throw ConfigError("no complete month in the data span; pass correlate.months explicitly");
  }
  const CorrMatrix visits = lag_correlation_visits(data.entrance, config.visit_lags, months);
  const CorrMatrix reservations = lag_correlation_reservations(
      data.entrance, data.reservations, config.res_lags, months);
  write_corr_csv(out_csv, {visits, reservations});
}

}  // namespace resflow
