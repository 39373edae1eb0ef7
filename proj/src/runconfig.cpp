#include "resflow/runconfig.hpp"

#include <fstream>

namespace resflow {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ConfigError(context + ": unknown key '" + it.key() + "'");
    }
  }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      j.at(key).get_to(out);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

void get_date(const json& j, const char* key, Date& out) {
  if (j.contains(key)) {
    if (!j.at(key).is_string()) throw ConfigError(std::string(key) + " must be a string");
    out = Date::parse(j.at(key).get<std::string>());
  }
}

GeneratorConfig generator_from_json(const json& j) {
  check_keys(j,
             {"start_date", "num_days", "gates", "base_daily_mean", "weekend_multiplier",
              "trend_slope", "shocks", "intraday_profile", "reservation_rate",
              "reschedule_prob", "noshow_prob", "lead_time_mean_days", "noise_cv", "seed"},
             "generator");
  GeneratorConfig g;
  get_date(j, "start_date", g.start_date);
  get_to(j, "num_days", g.num_days);
  get_to(j, "gates", g.gates);
  get_to(j, "base_daily_mean", g.base_daily_mean);
  get_to(j, "weekend_multiplier", g.weekend_multiplier);
  get_to(j, "trend_slope", g.trend_slope);
  if (j.contains("shocks")) {
    g.shock_calendar.clear();
    for (const auto& sj : j.at("shocks")) {
      check_keys(sj, {"date", "multiplier", "kind"}, "generator.shocks[]");
      ShockSpec s;
      if (!sj.contains("date")) throw ConfigError("shock entry missing 'date'");
      s.date = Date::parse(sj.at("date").get<std::string>());
      get_to(sj, "multiplier", s.multiplier);
      std::string kind = "rain";
      get_to(sj, "kind", kind);
      if (kind == "rain") {
        s.kind = ShockKind::rain;
      } else if (kind == "special_event") {
        s.kind = ShockKind::special_event;
      } else {
        throw ConfigError("shock kind must be 'rain' or 'special_event', got '" + kind + "'");
      }
      g.shock_calendar.push_back(s);
    }
  }
  get_to(j, "intraday_profile", g.intraday_profile);
  get_to(j, "reservation_rate", g.reservation_rate);
  get_to(j, "reschedule_prob", g.reschedule_prob);
  get_to(j, "noshow_prob", g.noshow_prob);
  get_to(j, "lead_time_mean_days", g.lead_time_mean_days);
  get_to(j, "noise_cv", g.noise_cv);
  get_to(j, "seed", g.seed);
  return g;
}

WindowSpec window_from_json(const json& j) {
  check_keys(j,
             {"input_days", "horizon_days", "out_channels", "res_feature_lags",
              "slots_per_day", "first_hour", "last_hour_exclusive"},
             "window");
  WindowSpec w;
  get_to(j, "input_days", w.input_days);
  get_to(j, "horizon_days", w.horizon_days);
  get_to(j, "out_channels", w.out_channels);
  get_to(j, "res_feature_lags", w.res_feature_lags);
  get_to(j, "slots_per_day", w.grid.slots_per_day);
  get_to(j, "first_hour", w.grid.first_hour);
  get_to(j, "last_hour_exclusive", w.grid.last_hour_exclusive);
  return w;
}

void model_section_from_json(const json& j, ModelConfig& m) {
  check_keys(j, {"d_model", "n_enc_layers", "n_dec_layers", "n_heads", "ffn_dim",
                 "kernel_size", "dropout"},
             "model");
  get_to(j, "d_model", m.d_model);
  get_to(j, "n_enc_layers", m.n_enc_layers);
  get_to(j, "n_dec_layers", m.n_dec_layers);
  get_to(j, "n_heads", m.n_heads);
  get_to(j, "ffn_dim", m.ffn_dim);
  get_to(j, "kernel_size", m.kernel_size);
  get_to(j, "dropout", m.dropout);
}

TrainConfig train_from_json(const json& j, double& train_fraction) {
  check_keys(j,
             {"learning_rate", "batch_size", "max_epochs", "patience",
              "val_fraction_of_train", "seed", "adam_beta1", "adam_beta2", "adam_eps",
              "grad_clip_norm", "train_fraction"},
             "train");
  TrainConfig t;
  get_to(j, "learning_rate", t.learning_rate);
  get_to(j, "batch_size", t.batch_size);
  get_to(j, "max_epochs", t.max_epochs);
  get_to(j, "patience", t.patience);
  get_to(j, "val_fraction_of_train", t.val_fraction_of_train);
  get_to(j, "seed", t.seed);
  get_to(j, "adam_beta1", t.adam_beta1);
  get_to(j, "adam_beta2", t.adam_beta2);
  get_to(j, "adam_eps", t.adam_eps);
  get_to(j, "grad_clip_norm", t.grad_clip_norm);
  get_to(j, "train_fraction", train_fraction);
  return t;
}

GridSpec grid_from_json(const json& j) {
  check_keys(j, {"variants", "settings", "input_days", "horizon_days"}, "grid");
  GridSpec g;
  get_to(j, "variants", g.variants);
  get_to(j, "settings", g.settings);
  get_to(j, "input_days", g.input_days);
  get_to(j, "horizon_days", g.horizon_days);
  return g;
}

}  // namespace

MonthRef month_from_string(const std::string& s) {
  if (s.size() != 7 || s[4] != '-') {
    throw ConfigError("month must be 'YYYY-MM', got '" + s + "'");
  }
  const Date first = Date::parse(s + "-01");
  return MonthRef{first.year(), first.month()};
}

RunConfig default_run_config() { return RunConfig{}; }

RunConfig run_config_from_json(const nlohmann::json& j) {
  check_keys(j, {"generator", "window", "model", "train", "grid", "variant", "correlate"},
             "config");
  RunConfig c;
  if (j.contains("generator")) c.generator = generator_from_json(j.at("generator"));
  if (j.contains("window")) c.window = window_from_json(j.at("window"));
  if (j.contains("model")) model_section_from_json(j.at("model"), c.model);
  if (j.contains("train")) c.train_config = train_from_json(j.at("train"), c.train_fraction);
  if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
  get_to(j, "variant", c.variant);
  if (j.contains("correlate")) {
    const auto& cj = j.at("correlate");
    check_keys(cj, {"months", "visit_lags", "res_lags"}, "correlate");
    if (cj.contains("months")) {
      std::vector<std::string> labels;
      cj.at("months").get_to(labels);
      std::vector<MonthRef> months;
      for (const auto& s : labels) months.push_back(month_from_string(s));
      c.months = months;
    }
    get_to(cj, "visit_lags", c.visit_lags);
    get_to(cj, "res_lags", c.res_lags);
  }
  c.model.spec = c.window;
  // The generator and dataset must agree on the slot grid.
  c.generator.grid = c.window.grid;
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

nlohmann::json generator_config_to_json(const GeneratorConfig& g) {
  nlohmann::json shocks = nlohmann::json::array();
  for (const auto& s : g.shock_calendar) {
    shocks.push_back({{"date", s.date.iso()},
                      {"multiplier", s.multiplier},
                      {"kind", s.kind == ShockKind::rain ? "rain" : "special_event"}});
  }
  return {{"start_date", g.start_date.iso()},
          {"num_days", g.num_days},
          {"gates", g.gates},
          {"base_daily_mean", g.base_daily_mean},
          {"weekend_multiplier", g.weekend_multiplier},
          {"trend_slope", g.trend_slope},
          {"shocks", shocks},
          {"intraday_profile", g.intraday_profile},
          {"reservation_rate", g.reservation_rate},
          {"reschedule_prob", g.reschedule_prob},
          {"noshow_prob", g.noshow_prob},
          {"lead_time_mean_days", g.lead_time_mean_days},
          {"noise_cv", g.noise_cv},
          {"seed", g.seed}};
}

nlohmann::json model_config_to_json(const ModelConfig& m) {
  return {{"d_model", m.d_model},
          {"n_enc_layers", m.n_enc_layers},
          {"n_dec_layers", m.n_dec_layers},
          {"n_heads", m.n_heads},
          {"ffn_dim", m.ffn_dim},
          {"kernel_size", m.kernel_size},
          {"dropout", m.dropout},
          {"use_encoder", m.use_encoder},
          {"use_inverse_embedding", m.use_inverse_embedding},
          {"use_adaptive_fusion", m.use_adaptive_fusion},
          {"window",
           {{"input_days", m.spec.input_days},
            {"horizon_days", m.spec.horizon_days},
            {"out_channels", m.spec.out_channels},
            {"res_feature_lags", m.spec.res_feature_lags},
            {"slots_per_day", m.spec.grid.slots_per_day},
            {"first_hour", m.spec.grid.first_hour},
            {"last_hour_exclusive", m.spec.grid.last_hour_exclusive}}}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  check_keys(j,
             {"d_model", "n_enc_layers", "n_dec_layers", "n_heads", "ffn_dim", "kernel_size",
              "dropout", "use_encoder", "use_inverse_embedding", "use_adaptive_fusion",
              "window"},
             "model config");
  ModelConfig m;
  get_to(j, "d_model", m.d_model);
  get_to(j, "n_enc_layers", m.n_enc_layers);
  get_to(j, "n_dec_layers", m.n_dec_layers);
  get_to(j, "n_heads", m.n_heads);
  get_to(j, "ffn_dim", m.ffn_dim);
  get_to(j, "kernel_size", m.kernel_size);
  get_to(j, "dropout", m.dropout);
  get_to(j, "use_encoder", m.use_encoder);
  get_to(j, "use_inverse_embedding", m.use_inverse_embedding);
  get_to(j, "use_adaptive_fusion", m.use_adaptive_fusion);
  if (j.contains("window")) m.spec = window_from_json(j.at("window"));
  return m;
}

}  // namespace resflow
