#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "tinyradar/corpus.hpp"
#include "tinyradar/model.hpp"
#include "tinyradar/training.hpp"

namespace tinyradar::cli {

// Bad configuration file or flag combination; exits with the usage code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SynthCorpusConfig synth;
  std::optional<std::size_t> fold;
  std::optional<std::uint32_t> held_out_user;
  std::uint64_t split_seed = 1;
  Aggregation aggregation = Aggregation::MeanSoftmax;
  std::size_t calibration_sequences = 64;
  std::string data_dir;

  // Keys given explicitly (file or flag); the rest may be inferred from data.
  std::set<std::string> explicit_keys;

  bool is_explicit(const std::string& key) const { return explicit_keys.count(key) != 0; }
};

/// Applies a JSON object. Keys may sit at the top level or inside one of the
/// sections "model", "train", "split", "eval", "quant", "synth", "paths".
/// Unknown keys and ill-typed values throw ConfigError.
void apply_json(RunConfig& config, const nlohmann::json& j);
void load_config_file(RunConfig& config, const std::string& path);

nlohmann::json to_json(const RunConfig& config);

/// FNV-1a (64-bit) of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& resolved);

}  // namespace tinyradar::cli
