#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resflow/net.hpp"

namespace resflow {

// Binary model checkpoint: magic "EXFC1", format version, a JSON header
// (model config echo, training seed, output channel labels, standardizer
// statistics) and a named tensor table of row-major float64 little-endian
// payloads. Save/load round-trips every tensor bit-exactly.
inline constexpr char kCheckpointMagic[5] = {'E', 'X', 'F', 'C', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Model& model, std::uint64_t seed,
                     const Standardizer& st, const std::vector<std::string>& channels);

struct LoadedCheckpoint {
  Model model;
  std::uint64_t seed = 0;
  Standardizer standardizer;
  std::vector<std::string> channels;
};

// When `expected` is set, a differing embedded ModelConfig raises
// ConfigError (config-conflict) instead of silently proceeding.
LoadedCheckpoint load_checkpoint(const std::string& path,
                                 const std::optional<ModelConfig>& expected = {});

}  // namespace resflow
