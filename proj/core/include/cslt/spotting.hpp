#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cslt/corpus.hpp"

namespace cslt {

// Word of the subtitle vocabulary with every (video, subtitle) it occurs in.
struct VocabularyEntry {
  std::string word;  // lowercase lemma
  std::vector<std::pair<std::string, int>> occurrences;  // (video_id, subtitle_index)
};

class Lemmatizer {
 public:
  virtual ~Lemmatizer() = default;
  virtual std::string lemma(const std::string& word) const = 0;
};

class IdentityLemmatizer : public Lemmatizer {
 public:
  std::string lemma(const std::string& word) const override { return word; }
};

// Lowercased, lemmatized vocabulary with per-sentence occurrence lists
// (duplicates within one subtitle collapse); entries with fewer than
// min_count occurrences are dropped; lexicographic order.
std::vector<VocabularyEntry> build_vocabulary(const Corpus& corpus, const Lemmatizer& lemmatizer,
                                              int min_count);

// a.b / (|a||b|); either vector zero => 0 (neutral, avoids padded-feature
// division by zero).
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct SpotParams {
  int positives = 9;       // N positive exemplars
  int negative_ratio = 3;  // 3*N negatives
  double threshold = 0.5;  // cosine similarity gate
  int window = 16;
  int stride = 4;
  // PerWindow: negatives subtract from each window's margin.
  // Global: a majority of negatives matching anywhere vetoes the word.
  enum class VetoMode { PerWindow, Global };
  VetoMode veto = VetoMode::PerWindow;
  std::uint64_t seed = 1;
  int jobs = 1;
  int min_count = 1;
};

struct SpottingRecord {
  std::string gloss;
  std::string video_id;
  int window_index = 0;
  double score = 0.0;  // best voting similarity at the chosen window
  int vote_count = 0;  // positive votes at the chosen window
};

struct AnnotateStats {
  int words = 0;
  int attempts = 0;
  int emitted = 0;
  int positive_shortfalls = 0;  // fewer than N positives available
  int negative_shortfalls = 0;
};

// Localizes word w in the reference clip by exemplar voting: each positive
// exemplar votes for reference window r when its best-matching window has
// similarity > threshold; negatives veto identically. The window with the
// highest margin wins (ties to the earliest); a record is emitted when the
// margin reaches a majority of the positives actually used.
class SpottingAnnotator {
 public:
  SpottingAnnotator(const Corpus& corpus, SpotParams params,
                    const Lemmatizer& lemmatizer = identity_lemmatizer());

  std::optional<SpottingRecord> spot_word(const VocabularyEntry& word,
                                          const std::string& reference_video_id);

  // Runs spot_word for every (word, occurrence) pair of the vocabulary;
  // deterministic under a fixed seed, output sorted by
  // (video_id, window_index, gloss).
  std::vector<SpottingRecord> annotate(AnnotateStats* stats = nullptr);

  const std::vector<VocabularyEntry>& vocabulary() const { return vocabulary_; }
  const Tensor& windows_of(const std::string& video_id);

  static const Lemmatizer& identity_lemmatizer();

 private:
  struct SampleRef {
    const Sample* sample;
    std::vector<std::string> words;  // lemmatized unique words
  };

  bool contains_word(const SampleRef& ref, const std::string& word) const;

  const Corpus& corpus_;
  SpotParams params_;
  std::vector<SampleRef> samples_;
  std::map<std::string, int> by_video_;
  std::vector<VocabularyEntry> vocabulary_;
  std::map<std::string, Tensor> window_cache_;
};

void write_spottings_tsv(const std::string& path, const std::vector<SpottingRecord>& records);
std::vector<SpottingRecord> read_spottings_tsv(const std::string& path);

// Replaces every sample's spottings with the annotator's records.
Corpus apply_spottings(const Corpus& corpus, const std::vector<SpottingRecord>& records);

}  // namespace cslt
