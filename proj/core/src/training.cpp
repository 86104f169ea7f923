#include "cslt/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cslt/checkpoint.hpp"
#include "cslt/decoding.hpp"
#include "cslt/errors.hpp"
#include "cslt/ops.hpp"
#include "cslt/text.hpp"

namespace cslt {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (lr0 <= 0.0) throw ConfigError(concat("lr0 ", lr0));
  if (batch_size < 1) throw ConfigError(concat("batch_size ", batch_size));
  if (plateau_patience < 1) throw ConfigError(concat("plateau_patience ", plateau_patience));
  if (plateau_factor <= 0.0 || plateau_factor >= 1.0) {
    throw ConfigError(concat("plateau_factor ", plateau_factor, " not in (0,1)"));
  }
  if (lr_floor <= 0.0) throw ConfigError(concat("lr_floor ", lr_floor));
  if (max_epochs < 0) throw ConfigError(concat("max_epochs ", max_epochs));
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw ConfigError(concat("label_smoothing ", label_smoothing));
  }
  if (context_source != "reference" && context_source != "self") {
    throw ConfigError(concat("context_source '", context_source, "'"));
  }
  if (max_decode_len < 1) throw ConfigError(concat("max_decode_len ", max_decode_len));
}

json train_config_to_json(const TrainConfig& c) {
  json ctx{{"kind", c.context_mode.kind == ContextMode::Kind::Sentences ? "sentences"
                                                                        : "spottings"},
           {"sentences", c.context_mode.sentences},
           {"max_spottings", c.context_mode.max_spottings},
           {"lookback", c.context_mode.lookback}};
  return json{{"lr0", c.lr0},
              {"batch_size", c.batch_size},
              {"plateau_patience", c.plateau_patience},
              {"plateau_factor", c.plateau_factor},
              {"lr_floor", c.lr_floor},
              {"improvement_eps", c.improvement_eps},
              {"max_epochs", c.max_epochs},
              {"seed", c.seed},
              {"label_smoothing", c.label_smoothing},
              {"smoothing_enabled", c.smoothing_enabled},
              {"grad_clip", c.grad_clip},
              {"context", ctx},
              {"max_context_tokens", c.max_context_tokens},
              {"context_source", c.context_source},
              {"max_decode_len", c.max_decode_len}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.lr0 = j.value("lr0", c.lr0);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
  c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
  c.lr_floor = j.value("lr_floor", c.lr_floor);
  c.improvement_eps = j.value("improvement_eps", c.improvement_eps);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.seed = j.value("seed", c.seed);
  c.label_smoothing = j.value("label_smoothing", c.label_smoothing);
  c.smoothing_enabled = j.value("smoothing_enabled", c.smoothing_enabled);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.max_context_tokens = j.value("max_context_tokens", c.max_context_tokens);
  c.context_source = j.value("context_source", c.context_source);
  c.max_decode_len = j.value("max_decode_len", c.max_decode_len);
  if (j.contains("context")) {
    const auto& ctx = j.at("context");
    const std::string kind = ctx.value("kind", "sentences");
    c.context_mode.kind =
        kind == "spottings" ? ContextMode::Kind::Spottings : ContextMode::Kind::Sentences;
    c.context_mode.sentences = ctx.value("sentences", c.context_mode.sentences);
    c.context_mode.max_spottings = ctx.value("max_spottings", c.context_mode.max_spottings);
    c.context_mode.lookback = ctx.value("lookback", c.context_mode.lookback);
  }
  return c;
}

void plateau_step(TrainState& state, double dev_bleu4, const TrainConfig& cfg) {
  if (dev_bleu4 > state.best_dev_bleu4 + cfg.improvement_eps) {
    state.best_dev_bleu4 = dev_bleu4;
    state.epochs_since_improvement = 0;
    return;
  }
  ++state.epochs_since_improvement;
  if (state.epochs_since_improvement >= cfg.plateau_patience) {
    state.lr *= cfg.plateau_factor;
    ++state.decay_count;
    state.epochs_since_improvement = 0;
  }
}

ModelInput make_model_input(const ModelConfig& cfg, const Tokenizer& tok,
                            std::vector<int> context_tokens, const Sample& sample) {
  ModelInput input;
  if (cfg.has(Stream::Context)) input.context_tokens = std::move(context_tokens);
  if (cfg.has(Stream::Video)) {
    input.video_windows =
        sign_embed(sample.features, MeanPoolReducer(), cfg.window, cfg.stride).windows;
  }
  if (cfg.has(Stream::Spotting)) {
    std::vector<Spotting> sorted = sample.spottings;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Spotting& a, const Spotting& b) {
                       return a.window_index < b.window_index;
                     });
    for (const auto& sp : sorted) input.spotting_tokens.push_back(tok.id_of(sp.gloss));
  }
  return input;
}

EvalOutput evaluate_model(TranslationModel& model, const Tokenizer& tok, const Corpus& corpus,
                          const EvalConfig& cfg) {
  const bool was_training = model.train_mode();
  model.set_train_mode(false);
  EvalOutput out;
  std::vector<EvalPair> pairs;
  for (const auto& ep : corpus) {
    std::vector<std::string> self_sentences;
    for (int n = 0; n < static_cast<int>(ep.samples.size()); ++n) {
      const Sample& sample = ep.samples[n];
      std::vector<int> context_tokens;
      if (model.config().has(Stream::Context)) {
        if (cfg.context_source == "self" &&
            cfg.context_mode.kind == ContextMode::Kind::Sentences) {
          std::vector<std::vector<std::string>> no_glosses;
          context_tokens = build_context_from(self_sentences, no_glosses, cfg.context_mode, tok,
                                              cfg.max_context_tokens);
        } else {
          context_tokens =
              build_context(ep, n, cfg.context_mode, tok, cfg.max_context_tokens);
        }
      }
      ModelInput input = make_model_input(model.config(), tok, std::move(context_tokens), sample);
      EncodedStreams encoded = model.encode(input);
      const std::vector<int> ids =
          cfg.beam <= 1 ? greedy_decode(model, encoded, cfg.max_decode_len)
                        : beam_decode(model, encoded, cfg.beam, cfg.max_decode_len);
      const std::string hyp = tok.detokenize(ids);
      self_sentences.push_back(hyp);
      out.rows.push_back({ep.episode_id, sample.subtitle_index, hyp, sample.target});
      pairs.push_back({hyp, sample.target});
    }
  }
  out.metrics = pairs.empty() ? MetricReport{} : evaluate_pairs(pairs);
  model.set_train_mode(was_training);
  return out;
}

void write_translations_tsv(const std::string& path, const std::vector<TranslationRow>& rows) {
  std::ostringstream os;
  for (const auto& r : rows) {
    os << r.episode_id << '\t' << r.subtitle_index << '\t' << r.hypothesis << '\t' << r.reference
       << '\n';
  }
  write_file(path, os.str());
}

std::vector<TranslationRow> read_translations_tsv(const std::string& path) {
  std::string content = read_file(path);
  std::vector<TranslationRow> rows;
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        cols.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (cols.size() != 4) {
      throw ParseError(concat(path, ": want 4 tab-separated columns, got ", cols.size()),
                       line_no);
    }
    rows.push_back({cols[0], static_cast<int>(parse_long(cols[1])), cols[2], cols[3]});
  }
  return rows;
}

double homonym_slot_accuracy(const std::vector<TranslationRow>& rows,
                             const std::vector<HomonymSlot>& slots) {
  std::map<std::pair<std::string, int>, const TranslationRow*> index;
  for (const auto& r : rows) index[{r.episode_id, r.subtitle_index}] = &r;
  int total = 0, correct = 0;
  for (const auto& slot : slots) {
    auto it = index.find({slot.episode_id, slot.subtitle_index});
    if (it == index.end()) continue;  // slot belongs to a different split
    ++total;
    const auto words = Tokenizer::split_words(it->second->hypothesis);
    if (slot.token_pos < static_cast<int>(words.size()) &&
        words[static_cast<std::size_t>(slot.token_pos)] == slot.word) {
      ++correct;
    }
  }
  if (total == 0) throw ValueError("homonym_slot_accuracy: no slots matched the rows");
  return static_cast<double>(correct) / total;
}

Trainer::Trainer(TranslationModel& model, const Tokenizer& tok, const Corpus& train_corpus,
                 const Corpus& dev_corpus, TrainConfig cfg, std::string run_dir)
    : model_(model), tok_(tok), train_corpus_(train_corpus), dev_corpus_(dev_corpus),
      cfg_(std::move(cfg)), run_dir_(std::move(run_dir)),
      shuffle_rng_(make_rng(derive_seed(cfg_.seed, "shuffle"))) {
  cfg_.validate();
  model_.reseed(derive_seed(cfg_.seed, "dropout"));
  // Context is precomputed per sample; epoch shuffling later never touches
  // the episode-internal references.
  for (const auto& ep : train_corpus_) {
    for (int n = 0; n < static_cast<int>(ep.samples.size()); ++n) {
      const Sample& s = ep.samples[n];
      if (s.target.empty()) {
        throw ValueError(concat("training sample ", s.video_id, " has an empty target"));
      }
      Prepared p;
      std::vector<int> context;
      if (model_.config().has(Stream::Context)) {
        context = build_context(ep, n, cfg_.context_mode, tok_, cfg_.max_context_tokens);
      }
      p.input = make_model_input(model_.config(), tok_, std::move(context), s);
      p.target_ids = tok_.tokenize(s.target);
      prepared_.push_back(std::move(p));
    }
  }
  if (run_dir_.empty()) return;
  fs::create_directories(run_dir_);
}

void Trainer::snapshot_best() {
  best_params_.clear();
  for (const auto& p : model_.parameters().all()) best_params_.push_back(p.tensor.data());
}

void Trainer::restore_best() {
  if (best_params_.empty()) return;
  auto& params = model_.parameters().all();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor.data() = best_params_[i];
}

double Trainer::train_epoch(double* token_acc) {
  model_.set_train_mode(true);
  std::vector<std::size_t> order(prepared_.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle_rng_);

  double loss_sum = 0.0;
  long loss_count = 0;
  long correct = 0;
  const double smoothing = cfg_.effective_smoothing();

  for (std::size_t batch_start = 0; batch_start < order.size();
       batch_start += static_cast<std::size_t>(cfg_.batch_size)) {
    const std::size_t batch_end =
        std::min(order.size(), batch_start + static_cast<std::size_t>(cfg_.batch_size));
    long batch_tokens = 0;
    for (std::size_t i = batch_start; i < batch_end; ++i) {
      batch_tokens += static_cast<long>(prepared_[order[i]].target_ids.size()) + 1;
    }
    for (std::size_t i = batch_start; i < batch_end; ++i) {
      const Prepared& p = prepared_[order[i]];
      std::vector<int> prefix = {SpecialTokens::Bos};
      prefix.insert(prefix.end(), p.target_ids.begin(), p.target_ids.end());
      std::vector<int> targets = p.target_ids;
      targets.push_back(SpecialTokens::Eos);

      EncodedStreams encoded = model_.encode(p.input);
      Tensor logits = model_.decoder_logits(encoded, prefix);
      ops::CeSum ce = ops::cross_entropy_sum(logits, targets, smoothing, SpecialTokens::Pad);
      // each sample contributes sum/batch_tokens, the padded-batch mean
      Tensor scaled = ops::scale(ce.sum, 1.0 / batch_tokens);
      scaled.backward();

      loss_sum += ce.sum.value();
      loss_count += ce.count;
      const int vocab = logits.dim(1);
      for (int t = 0; t < logits.dim(0); ++t) {
        const double* row = logits.data().data() + static_cast<std::size_t>(t) * vocab;
        int best = 0;
        for (int v = 1; v < vocab; ++v) {
          if (row[v] > row[best]) best = v;
        }
        if (best == targets[static_cast<std::size_t>(t)]) ++correct;
      }
    }
    if (cfg_.grad_clip > 0.0) {
      const double norm = model_.parameters().grad_norm();
      if (norm > cfg_.grad_clip) {
        const double s = cfg_.grad_clip / norm;
        for (auto& p : model_.parameters().all()) {
          for (double& g : p.tensor.grad()) g *= s;
        }
      }
    }
    adam_step(model_.parameters(), current_lr_);
  }
  if (token_acc) *token_acc = loss_count > 0 ? static_cast<double>(correct) / loss_count : 0.0;
  if (!std::isfinite(loss_sum)) throw ValueError("non-finite training loss");
  return loss_count > 0 ? loss_sum / loss_count : 0.0;
}

EvalOutput Trainer::evaluate_dev(const std::string& context_source) {
  EvalConfig ec;
  ec.context_mode = cfg_.context_mode;
  ec.max_context_tokens = cfg_.max_context_tokens;
  ec.context_source = context_source;
  ec.max_decode_len = cfg_.max_decode_len;
  return evaluate_model(model_, tok_, dev_corpus_, ec);
}

TrainResult Trainer::run() {
  TrainResult result;
  TrainState& state = result.state;
  state.lr = cfg_.lr0;
  if (state.lr < cfg_.lr_floor) {
    state.stopped_on_lr_floor = true;  // degenerate config: zero epochs
    return result;
  }

  std::ofstream log;
  if (!run_dir_.empty()) {
    log.open((fs::path(run_dir_) / "train_log.jsonl").string());
  }

  for (int epoch = 1; epoch <= cfg_.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    state.epoch = epoch;
    double token_acc = 0.0;
    current_lr_ = state.lr;
    double train_loss;
    try {
      train_loss = train_epoch(&token_acc);
    } catch (const ValueError& e) {
      throw ValueError(concat("training aborted at epoch ", epoch, ": ", e.what(),
                              " (|params| = ", model_.parameters().value_norm(), ")"));
    }
    EvalOutput dev = evaluate_dev(cfg_.context_source);

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = state.lr;
    stats.train_loss = train_loss;
    stats.train_token_acc = token_acc;
    stats.dev = dev.metrics;
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    state.history.push_back(stats);

    if (log.is_open()) {
      json line{{"epoch", epoch},
                {"lr", stats.lr},
                {"train_loss", stats.train_loss},
                {"train_token_acc", stats.train_token_acc},
                {"bleu1", stats.dev.bleu1},
                {"bleu4", stats.dev.bleu4},
                {"rougeL", stats.dev.rouge_l},
                {"chrf", stats.dev.chrf},
                {"seconds", stats.seconds}};
      log << line.dump() << '\n';
      log.flush();
    }

    const bool improved = stats.dev.bleu4 > state.best_dev_bleu4 + cfg_.improvement_eps;
    if (improved) {
      result.best_epoch = epoch;
      result.best_dev = stats.dev;
      snapshot_best();
    }
    plateau_step(state, stats.dev.bleu4, cfg_);
    if (state.lr < cfg_.lr_floor) {
      state.stopped_on_lr_floor = true;
      break;
    }
  }

  restore_best();
  if (!run_dir_.empty()) {
    const fs::path dir(run_dir_);
    json metadata{{"train", train_config_to_json(cfg_)},
                  {"best_epoch", result.best_epoch}};
    save_checkpoint((dir / "checkpoint_best.ckpt").string(), model_, tok_.vocab(), metadata);
    EvalOutput best_eval = evaluate_dev(cfg_.context_source);
    write_translations_tsv((dir / "dev_translations.tsv").string(), best_eval.rows);
    json metrics = metric_report_to_json(best_eval.metrics);
    metrics["signature"] = metric_signature();
    metrics["best_epoch"] = result.best_epoch;
    write_file((dir / "metrics.json").string(), metrics.dump(2) + "\n");
    result.best_dev = best_eval.metrics;
  }
  return result;
}

}  // namespace cslt
