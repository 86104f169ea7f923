#pragma once

#include <string>
#include <vector>

#include "cslt/features.hpp"
#include "cslt/tokenizer.hpp"

namespace cslt {

struct Spotting {
  std::string gloss;
  int window_index = 0;
};

// One translation unit: a sign phrase clip, its target subtitle, and the
// sparse spottings recognized in the clip.
struct Sample {
  std::string video_id;
  std::string feature_path;  // relative to the manifest directory
  FeatureSequence features;
  std::string target;
  std::vector<Spotting> spottings;
  int subtitle_index = 0;
};

// Ordered broadcast segment; sample n's context may only come from
// samples before n.
struct Episode {
  std::string episode_id;
  std::vector<Sample> samples;
};

using Corpus = std::vector<Episode>;

std::size_t corpus_sample_count(const Corpus& corpus);

// JSONL manifest: an episode header line {"episode_id": ...} followed by
// one line per sample. Feature files resolve relative to the manifest's
// directory and are loaded eagerly.
Corpus load_corpus(const std::string& manifest_path);
void save_corpus(const std::string& manifest_path, const Corpus& corpus);

// Vocabulary over the training targets plus every spotting gloss, so all
// text cues are embeddable through one shared table.
Tokenizer build_tokenizer(const Corpus& corpus);

// How the preceding context is assembled.
struct ContextMode {
  enum class Kind { Sentences, Spottings };
  Kind kind = Kind::Sentences;
  int sentences = 1;       // k preceding sentences
  int max_spottings = 10;  // cap on gloss count
  int lookback = 3;        // sentences whose spottings are eligible

  std::string describe() const;
};

// Token sequence for sample n of the episode, reading only samples < n.
// Sentences are joined oldest-first with <sep>; the result is truncated to
// the most recent max_tokens tokens.
std::vector<int> build_context(const Episode& episode, int n, const ContextMode& mode,
                               const Tokenizer& tok, int max_tokens = 64);

// Same assembly from explicit preceding texts/spotting lists; used when the
// context source is the model's own previous output.
std::vector<int> build_context_from(const std::vector<std::string>& preceding_sentences,
                                    const std::vector<std::vector<std::string>>& preceding_glosses,
                                    const ContextMode& mode, const Tokenizer& tok,
                                    int max_tokens = 64);

}  // namespace cslt
