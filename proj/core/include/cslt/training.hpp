#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cslt/corpus.hpp"
#include "cslt/metrics.hpp"
#include "cslt/model.hpp"
#include "cslt/synth.hpp"
#include "cslt/tokenizer.hpp"

namespace cslt {

struct TrainConfig {
  double lr0 = 3e-4;
  int batch_size = 16;
  int plateau_patience = 5;
  double plateau_factor = 0.7;
  double lr_floor = 1e-5;
  double improvement_eps = 0.0;  // "does not increase" read as strict improvement
  int max_epochs = 100;
  std::uint64_t seed = 1;
  double label_smoothing = 0.1;
  bool smoothing_enabled = true;
  double grad_clip = 0.0;  // 0 = off
  ContextMode context_mode;
  int max_context_tokens = 64;
  std::string context_source = "reference";  // reference | self (evaluation only)
  int max_decode_len = 24;

  double effective_smoothing() const { return smoothing_enabled ? label_smoothing : 0.0; }
  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_token_acc = 0.0;
  MetricReport dev;
  double seconds = 0.0;
};

struct TrainState {
  int epoch = 0;
  double lr = 0.0;
  double best_dev_bleu4 = -1.0;
  int epochs_since_improvement = 0;
  int decay_count = 0;
  bool stopped_on_lr_floor = false;
  std::vector<EpochStats> history;
};

// Plateau schedule: strict BLEU-4 improvement resets the patience counter
// and the best score; after `patience` consecutive non-improving epochs the
// learning rate is multiplied by `factor`.
void plateau_step(TrainState& state, double dev_bleu4, const TrainConfig& cfg);

struct TranslationRow {
  std::string episode_id;
  int subtitle_index = 0;
  std::string hypothesis;
  std::string reference;
};

struct EvalOutput {
  MetricReport metrics;
  std::vector<TranslationRow> rows;
};

struct EvalConfig {
  ContextMode context_mode;
  int max_context_tokens = 64;
  std::string context_source = "reference";  // or "self"
  int max_decode_len = 24;
  int beam = 1;  // 1 = greedy
};

// Builds the model input for one sample (context tokens supplied by the
// caller; spottings sorted temporally; video mean-pool windowed).
ModelInput make_model_input(const ModelConfig& cfg, const Tokenizer& tok,
                            std::vector<int> context_tokens, const Sample& sample);

// Greedy (or beam) translation of every sample with corpus-level metrics.
// context_source "self" feeds the model's own previous outputs as the
// sentence context instead of the reference subtitles.
EvalOutput evaluate_model(TranslationModel& model, const Tokenizer& tok, const Corpus& corpus,
                          const EvalConfig& cfg);

void write_translations_tsv(const std::string& path, const std::vector<TranslationRow>& rows);
std::vector<TranslationRow> read_translations_tsv(const std::string& path);

// Fraction of ground-truth homonym slots whose aligned hypothesis token is
// the correct pair member.
double homonym_slot_accuracy(const std::vector<TranslationRow>& rows,
                             const std::vector<HomonymSlot>& slots);

struct TrainResult {
  TrainState state;
  int best_epoch = 0;
  MetricReport best_dev;
};

// Teacher-forced batch training with Adam and the plateau schedule keyed
// to dev BLEU-4. When run_dir is set, writes train_log.jsonl,
// checkpoint_best.ckpt, dev_translations.tsv, metrics.json and leaves the
// model holding the best-dev parameters.
class Trainer {
 public:
  Trainer(TranslationModel& model, const Tokenizer& tok, const Corpus& train_corpus,
          const Corpus& dev_corpus, TrainConfig cfg, std::string run_dir = "");

  TrainResult run();
  EvalOutput evaluate_dev(const std::string& context_source);

 private:
  struct Prepared {
    ModelInput input;
    std::vector<int> target_ids;
  };

  double train_epoch(double* token_acc);
  void snapshot_best();
  void restore_best();

  TranslationModel& model_;
  const Tokenizer& tok_;
  const Corpus& train_corpus_;
  const Corpus& dev_corpus_;
  TrainConfig cfg_;
  std::string run_dir_;
  std::vector<Prepared> prepared_;
  std::vector<std::vector<double>> best_params_;
  Rng shuffle_rng_;
  double current_lr_ = 0.0;
};

}  // namespace cslt
