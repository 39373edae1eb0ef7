#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "resflow/runconfig.hpp"
#include "resflow/training.hpp"

namespace resflow {

// Shared implementations behind the CLI subcommands. Each throws on failure;
// the CLI front end maps exception types onto exit codes.
struct CommandOptions {
  std::optional<std::uint64_t> seed_override;  // --seed / RESFLOW_SEED
};

// Applies the seed override to both the generator and training seeds.
RunConfig load_config_or_default(const std::string& config_path, const CommandOptions& opts);

void run_generate(const RunConfig& config, const std::string& out_dir);
TrainReport run_train(const RunConfig& config, const std::string& data_dir,
                      const std::string& checkpoint_path, const std::string& variant);
void run_predict(const std::string& checkpoint_path, const std::string& data_dir,
                 const std::string& issue_date, const std::string& out_csv);
EvalReport run_evaluate(const RunConfig& config, const std::string& data_dir,
                        const std::string& out_csv, int jobs);
EvalReport run_ablate(const RunConfig& config, const std::string& data_dir,
                      const std::string& out_csv, int jobs);
void run_correlate(const RunConfig& config, const std::string& data_dir,
                   const std::string& out_csv);

}  // namespace resflow
