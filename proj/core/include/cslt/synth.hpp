#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cslt/corpus.hpp"

namespace cslt {

// Synthetic episode generator. Each episode carries a latent topic that
// its first sentence announces; sentences draw content words from the
// topic's pool, so any preceding sentence reveals the topic. Homonym word
// pairs share one visual prototype and are resolved only by topic, which
// makes the value of context measurable by construction.
struct SynthConfig {
  int episodes = 40;
  int sentences_per_episode = 12;
  int sentence_len_min = 5;
  int sentence_len_max = 7;
  int topics = 2;
  int topic_words = 15;
  int function_words = 3;
  int homonym_pairs = 6;
  double ambiguity_rate = 0.3;   // probability a content slot is a homonym slot
  int feature_dim = 64;
  double noise_sigma = 1.0;      // per-frame feature noise
  int sign_duration_min = 8;     // frames per sign
  int sign_duration_max = 24;
  double spotting_coverage = 0.5;  // fraction of signs emitted as spottings
  std::string prototype_mode = "orthonormal";  // or "random-unit"
  double dev_fraction = 0.2;     // trailing episodes held out
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json synth_config_to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SynthResult {
  std::string train_manifest;
  std::string dev_manifest;
  int train_samples = 0;
  int dev_samples = 0;
  int sign_count = 0;
  int homonym_slots = 0;
};

// Writes train.jsonl / dev.jsonl, features/, truth/ (homonym slots, sign
// spans, prototypes) and the resolved generator config under out_dir.
// Byte-identical for a fixed config.
SynthResult generate_synthetic(const SynthConfig& cfg, const std::string& out_dir);

// Ground-truth row for one homonym slot.
struct HomonymSlot {
  std::string episode_id;
  int subtitle_index = 0;
  int token_pos = 0;
  std::string word;
  std::string partner;
  std::string shared_gloss;
};

// Ground-truth temporal span of one sign within its video.
struct SignSpan {
  std::string video_id;
  int sign_pos = 0;
  std::string gloss;
  int start_frame = 0;
  int end_frame = 0;  // exclusive
};

std::vector<HomonymSlot> read_homonym_truth(const std::string& path);
std::vector<SignSpan> read_sign_spans(const std::string& path);

}  // namespace cslt
