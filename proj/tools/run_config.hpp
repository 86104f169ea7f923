#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cslt/corpus.hpp"
#include "cslt/model.hpp"
#include "cslt/synth.hpp"
#include "cslt/training.hpp"

namespace cslt::cli {

// Resolves --preset NAME (embedded) or a path to a JSON config file.
nlohmann::json load_config_document(const std::string& preset, const std::string& config_path);

// Applies one "dotted.key=value" override; values parse as JSON when
// possible, otherwise as strings.
void apply_override(nlohmann::json& doc, const std::string& assignment);
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& assignments);

SynthConfig synth_section(const nlohmann::json& doc);
TrainConfig train_section(const nlohmann::json& doc);
// vocab_size and feature_dim come from the corpus, not the preset
ModelConfig model_section(const nlohmann::json& doc, int vocab_size, int feature_dim);

// "C+V+S" style stream-subset tags, in the fixed reporting order
// V, C, C+V, S, C+S, C+V+S.
std::set<Stream> parse_subset(const std::string& tag);
std::string subset_tag(const std::set<Stream>& streams);
std::vector<std::string> canonical_subset_order();

int feature_dim_of(const Corpus& corpus);

}  // namespace cslt::cli
