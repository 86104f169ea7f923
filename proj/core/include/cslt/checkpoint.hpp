#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cslt/model.hpp"

namespace cslt {

// Checkpoint archive: magic + length-prefixed JSON header (config, vocab,
// metadata, parameter table) followed by raw little-endian doubles in
// header order. Doubles round-trip bitwise.
inline constexpr char kCheckpointMagic[8] = {'C', 'S', 'L', 'T', 'C', 'K', 'P', '1'};

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct CheckpointHeader {
  ModelConfig config;
  std::vector<std::string> vocab;
  nlohmann::json metadata;
};

void save_checkpoint(const std::string& path, const TranslationModel& model,
                     const std::vector<std::string>& vocab,
                     const nlohmann::json& metadata = nlohmann::json::object());

CheckpointHeader read_checkpoint_header(const std::string& path);

// Rebuilds the model and restores every parameter; the stored parameter
// set must match the rebuilt model exactly.
std::unique_ptr<TranslationModel> load_checkpoint(const std::string& path,
                                                  CheckpointHeader* header_out = nullptr);

}  // namespace cslt
