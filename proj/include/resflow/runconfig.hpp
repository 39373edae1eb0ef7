#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "resflow/evalkit.hpp"
#include "resflow/synthgen.hpp"

namespace resflow {

// Everything the CLI reads from a config file. Parsing is strict: unknown
// keys are rejected so a typo cannot silently change an experiment.
struct RunConfig {
  GeneratorConfig generator;
  WindowSpec window;
  ModelConfig model;  // model.spec mirrors `window` after loading
  TrainConfig train_config;
  double train_fraction = 0.8;
  GridSpec grid;
  std::string variant = "full";
  std::optional<std::vector<MonthRef>> months;  // correlate; defaults to full months
  std::vector<int> visit_lags{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<int> res_lags{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
};

RunConfig default_run_config();
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json generator_config_to_json(const GeneratorConfig& g);
nlohmann::json model_config_to_json(const ModelConfig& m);
ModelConfig model_config_from_json(const nlohmann::json& j);

MonthRef month_from_string(const std::string& s);  // "YYYY-MM"

}  // namespace resflow
