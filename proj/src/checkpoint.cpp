#include "resflow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "resflow/runconfig.hpp"

namespace resflow {

namespace {

using nlohmann::json;

void write_u32(std::ofstream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, 4);
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, 8);
}

void write_f64(std::ofstream& out, double d) {
  write_u64(out, std::bit_cast<std::uint64_t>(d));
}

std::uint32_t read_u32(std::ifstream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::ifstream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

double read_f64(std::ifstream& in) { return std::bit_cast<double>(read_u64(in)); }

json standardizer_to_json(const Standardizer& st) {
  auto block = [](const std::vector<Standardizer::ChannelStat>& stats) {
    json arr = json::array();
    for (const auto& s : stats) {
      arr.push_back({{"mean", s.mean}, {"std", s.stddev}, {"active", s.active}});
    }
    return arr;
  };
  return {{"enc", block(st.enc)}, {"dec", block(st.dec)}, {"warnings", st.warnings}};
}

Standardizer standardizer_from_json(const json& j) {
  auto block = [](const json& arr) {
    std::vector<Standardizer::ChannelStat> stats;
    for (const auto& e : arr) {
      Standardizer::ChannelStat s;
      s.mean = e.at("mean").get<double>();
      s.stddev = e.at("std").get<double>();
      s.active = e.at("active").get<bool>();
      stats.push_back(s);
    }
    return stats;
  };
  Standardizer st;
  st.enc = block(j.at("enc"));
  st.dec = block(j.at("dec"));
  if (j.contains("warnings")) j.at("warnings").get_to(st.warnings);
  return st;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, std::uint64_t seed,
                     const Standardizer& st, const std::vector<std::string>& channels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);

  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_u32(out, kCheckpointVersion);

  const json header = {{"config", model_config_to_json(model.config())},
                       {"seed", seed},
                       {"channels", channels},
                       {"standardizer", standardizer_to_json(st)}};
  const std::string header_str = header.dump();
  write_u64(out, header_str.size());
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  const auto& items = model.params().items();
  write_u64(out, items.size());
  for (const auto& p : items) {
    write_u64(out, p->name.size());
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u64(out, static_cast<std::uint64_t>(p->value.rows()));
    write_u64(out, static_cast<std::uint64_t>(p->value.cols()));
    for (int i = 0; i < p->value.rows(); ++i) {
      for (int j = 0; j < p->value.cols(); ++j) write_f64(out, p->value(i, j));
    }
  }
  if (!out) throw IoError("error writing checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path,
                                 const std::optional<ModelConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);

  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ParseError(path + ": not a checkpoint (bad magic)");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion) {
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  }

  const std::uint64_t header_len = read_u64(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ParseError(path + ": truncated header");
  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    throw ParseError(path + ": corrupt header: " + e.what());
  }

  const ModelConfig config = model_config_from_json(header.at("config"));
  if (expected.has_value()) {
    const std::string got = model_config_to_json(config).dump();
    const std::string want = model_config_to_json(*expected).dump();
    if (got != want) {
      throw ConfigError(path + ": checkpoint model config conflicts with the requested one");
    }
  }

  LoadedCheckpoint loaded{Model(config, header.at("seed").get<std::uint64_t>()),
                          header.at("seed").get<std::uint64_t>(),
                          standardizer_from_json(header.at("standardizer")),
                          header.at("channels").get<std::vector<std::string>>()};

  const std::uint64_t n_tensors = read_u64(in);
  if (n_tensors != loaded.model.params().items().size()) {
    throw ParseError(path + ": tensor count mismatch");
  }
  for (std::uint64_t t = 0; t < n_tensors; ++t) {
    const std::uint64_t name_len = read_u64(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    const std::uint64_t rows = read_u64(in);
    const std::uint64_t cols = read_u64(in);
    Param* p = loaded.model.params().find(name);
    if (p == nullptr) throw ParseError(path + ": unexpected tensor '" + name + "'");
    if (rows != static_cast<std::uint64_t>(p->value.rows()) ||
        cols != static_cast<std::uint64_t>(p->value.cols())) {
      throw ParseError(path + ": shape mismatch for tensor '" + name + "'");
    }
    for (std::uint64_t i = 0; i < rows; ++i) {
      for (std::uint64_t j = 0; j < cols; ++j) {
        p->value(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = read_f64(in);
      }
    }
  }
  if (!in) throw ParseError(path + ": truncated tensor table");
  return loaded;
}

}  // namespace resflow
