#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>

#include "cslt/checkpoint.hpp"
#include "cslt/corpus.hpp"
#include "cslt/decoding.hpp"
#include "cslt/errors.hpp"
#include "cslt/metrics.hpp"
#include "cslt/spotting.hpp"
#include "cslt/synth.hpp"
#include "cslt/text.hpp"
#include "cslt/training.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cslt;
using namespace cslt::cli;

namespace {

struct CommonArgs {
  std::string preset;
  std::string config_path;
  std::vector<std::string> overrides;
  json resolve() const {
    json doc = load_config_document(preset, config_path);
    apply_overrides(doc, overrides);
    return doc;
  }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--preset", args.preset, "named preset or path to a preset JSON");
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--set", args.overrides, "override 'dotted.key=value'")->take_all();
}

void write_resolved_config(const fs::path& dir, const json& doc) {
  fs::create_directories(dir);
  write_file((dir / "resolved_config.json").string(), doc.dump(2) + "\n");
}

int cmd_synth(const CommonArgs& common, const std::string& out_dir, long seed, bool has_seed) {
  json doc = common.resolve();
  if (has_seed) doc["synth"]["seed"] = seed;
  SynthConfig cfg = synth_section(doc);
  SynthResult result = generate_synthetic(cfg, out_dir);
  doc["synth"] = synth_config_to_json(cfg);
  write_resolved_config(out_dir, doc);
  json summary{{"train_manifest", result.train_manifest},
               {"dev_manifest", result.dev_manifest},
               {"train_samples", result.train_samples},
               {"dev_samples", result.dev_samples},
               {"signs", result.sign_count},
               {"homonym_slots", result.homonym_slots}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_spot(const std::string& corpus_path, const std::string& out_path, SpotParams params,
             const std::string& veto_mode, const std::string& emit_corpus, int min_count) {
  if (veto_mode == "global") {
    params.veto = SpotParams::VetoMode::Global;
  } else if (veto_mode != "per-window") {
    throw ConfigError(concat("--veto must be per-window or global, got '", veto_mode, "'"));
  }
  params.min_count = min_count;
  Corpus corpus = load_corpus(corpus_path);
  SpottingAnnotator annotator(corpus, params);
  AnnotateStats stats;
  auto records = annotator.annotate(&stats);
  write_spottings_tsv(out_path, records);
  if (!emit_corpus.empty()) {
    save_corpus(emit_corpus, apply_spottings(corpus, records));
  }
  std::cerr << "spot: " << stats.words << " words, " << stats.attempts << " attempts, "
            << stats.emitted << " records";
  if (stats.positive_shortfalls > 0) {
    std::cerr << " (" << stats.positive_shortfalls << " with fewer positives than requested)";
  }
  std::cerr << "\n";
  return 0;
}

struct TrainRunOutput {
  MetricReport dev;
  int best_epoch = 0;
  double homonym_acc = -1.0;   // -1: truth unavailable
  MetricReport dev_self;
  bool has_self = false;
  double seconds = 0.0;
};

TrainRunOutput run_training(json doc, const Corpus& train, const Corpus& dev,
                            const std::string& run_dir, const std::string& truth_path) {
  const auto t0 = std::chrono::steady_clock::now();
  Tokenizer tok = build_tokenizer(train);
  TrainConfig tc = train_section(doc);
  ModelConfig mc = model_section(doc, tok.size(), feature_dim_of(train));

  doc["resolved"] = {{"vocab_size", mc.vocab_size}, {"feature_dim", mc.feature_dim}};
  write_resolved_config(run_dir, doc);

  TranslationModel model(mc, derive_seed(tc.seed, "model"));
  Trainer trainer(model, tok, train, dev, tc, run_dir);
  TrainResult result = trainer.run();

  TrainRunOutput out;
  out.dev = result.best_dev;
  out.best_epoch = result.best_epoch;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!truth_path.empty() && fs::exists(truth_path)) {
    try {
      auto slots = read_homonym_truth(truth_path);
      auto rows = read_translations_tsv((fs::path(run_dir) / "dev_translations.tsv").string());
      out.homonym_acc = homonym_slot_accuracy(rows, slots);
    } catch (const ValueError&) {
      // no slots in the dev split
    }
  }
  if (mc.has(Stream::Context) && tc.context_mode.kind == ContextMode::Kind::Sentences) {
    EvalConfig ec;
    ec.context_mode = tc.context_mode;
    ec.max_context_tokens = tc.max_context_tokens;
    ec.context_source = "self";
    ec.max_decode_len = tc.max_decode_len;
    EvalOutput self_eval = evaluate_model(model, tok, dev, ec);
    write_translations_tsv((fs::path(run_dir) / "dev_translations_selfctx.tsv").string(),
                           self_eval.rows);
    out.dev_self = self_eval.metrics;
    out.has_self = true;
  }
  return out;
}

int cmd_train(const CommonArgs& common, const std::string& train_path, std::string dev_path,
              const std::string& out_dir, long seed, bool has_seed) {
  json doc = common.resolve();
  if (has_seed) doc["train"]["seed"] = seed;
  Corpus train = load_corpus(train_path);
  Corpus dev = dev_path.empty() ? train : load_corpus(dev_path);
  // truth file conventionally sits next to the manifest
  const fs::path truth = fs::path(train_path).parent_path() / "truth" / "homonym_slots.tsv";
  TrainRunOutput out = run_training(doc, train, dev, out_dir, truth.string());

  json report = metric_report_to_json(out.dev);
  report["best_epoch"] = out.best_epoch;
  if (out.homonym_acc >= 0.0) report["homonym_slot_acc"] = out.homonym_acc;
  if (out.has_self) report["bleu4_selfctx"] = out.dev_self.bleu4;
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_translate(const std::string& checkpoint_path, const std::string& features_path,
                  const std::string& context, const std::string& spottings, int beam,
                  int max_len) {
  CheckpointHeader header;
  auto model = load_checkpoint(checkpoint_path, &header);
  model->set_train_mode(false);
  Tokenizer tok = Tokenizer::from_vocab(header.vocab);
  const ModelConfig& cfg = model->config();

  ModelInput input;
  if (cfg.has(Stream::Video)) {
    if (features_path.empty()) throw ValueError("model wants video features; pass --features");
    FeatureSequence seq = read_fmat(features_path, fs::path(features_path).stem().string());
    input.video_windows = sign_embed(seq, MeanPoolReducer(), cfg.window, cfg.stride).windows;
  }
  if (cfg.has(Stream::Context) && !context.empty()) {
    std::vector<std::string> sentences;
    std::string current;
    for (char c : context) {
      if (c == '|') {
        sentences.push_back(current);
        current.clear();
      } else {
        current += c;
      }
    }
    sentences.push_back(current);
    ContextMode mode;
    mode.sentences = static_cast<int>(sentences.size());
    input.context_tokens = build_context_from(sentences, {}, mode, tok);
  }
  if (cfg.has(Stream::Spotting) && !spottings.empty()) {
    for (const auto& gloss : split_ws(spottings)) {
      input.spotting_tokens.push_back(tok.id_of(gloss));
    }
  }

  EncodedStreams encoded = model->encode(input);
  const std::vector<int> ids = beam <= 1 ? greedy_decode(*model, encoded, max_len)
                                         : beam_decode(*model, encoded, beam, max_len);
  std::cout << tok.detokenize(ids) << "\n";
  return 0;
}

int cmd_evaluate(const std::string& translations_path, const std::string& out_path,
                 const std::string& per_pair_path) {
  auto rows = read_translations_tsv(translations_path);
  std::vector<EvalPair> pairs;
  for (const auto& r : rows) pairs.push_back({r.hypothesis, r.reference});
  if (pairs.empty()) throw ValueError(concat("no pairs in ", translations_path));

  MetricReport report = evaluate_pairs(pairs);
  json doc = metric_report_to_json(report);
  doc["signature"] = metric_signature();
  std::cout << doc.dump(2) << "\n";
  if (!out_path.empty()) write_file(out_path, doc.dump(2) + "\n");

  if (!per_pair_path.empty()) {
    std::ostringstream os;
    for (const auto& r : rows) {
      std::vector<EvalPair> one = {{r.hypothesis, r.reference}};
      os << r.episode_id << '\t' << r.subtitle_index << '\t' << format_double(bleu(one, 4))
         << '\t' << format_double(rouge_l_f1(one)) << '\t' << format_double(chrf(one)) << '\n';
    }
    write_file(per_pair_path, os.str());
  }
  return 0;
}

int cmd_ablate(const CommonArgs& common, const std::string& data_dir, const std::string& out_dir,
               const std::string& seeds_csv, const std::string& subsets_csv) {
  json doc = common.resolve();
  const fs::path data(data_dir);
  Corpus train = load_corpus((data / "train.jsonl").string());
  Corpus dev = load_corpus((data / "dev.jsonl").string());
  const std::string truth = (data / "truth" / "homonym_slots.tsv").string();

  std::vector<long> seeds;
  for (const auto& s : split_ws([&] {
         std::string t = seeds_csv;
         std::replace(t.begin(), t.end(), ',', ' ');
         return t;
       }())) {
    seeds.push_back(parse_long(s));
  }
  std::vector<std::string> requested;
  {
    std::string t = subsets_csv;
    std::replace(t.begin(), t.end(), ',', ' ');
    requested = split_ws(t);
  }
  // canonical paper-table row order, filtered to the requested subsets
  std::vector<std::string> ordered;
  for (const auto& tag : canonical_subset_order()) {
    for (const auto& r : requested) {
      if (subset_tag(parse_subset(r)) == tag) ordered.push_back(tag);
    }
  }
  if (ordered.empty()) throw ConfigError("no valid stream subsets requested");

  fs::create_directories(out_dir);
  write_resolved_config(out_dir, doc);

  json summary = json::array();
  std::ostringstream md;
  md << "| mode | BLEU-1 | BLEU-4 | ROUGE-L | chrF | homonym acc | BLEU-4 (self ctx) |\n";
  md << "|---|---|---|---|---|---|---|\n";
  std::ostringstream tsv;
  tsv << "mode\tseed\tbleu1\tbleu4\trougeL\tchrf\thomonym_acc\tbleu4_selfctx\n";

  for (const auto& tag : ordered) {
    const std::set<Stream> streams = parse_subset(tag);
    json subset_doc = doc;
    json stream_names = json::array();
    for (Stream s : {Stream::Context, Stream::Video, Stream::Spotting}) {
      if (streams.count(s)) stream_names.push_back(stream_name(s));
    }
    subset_doc["model"]["streams"] = stream_names;

    std::vector<TrainRunOutput> runs;
    for (long seed : seeds) {
      json run_doc = subset_doc;
      run_doc["train"]["seed"] = seed;
      std::string safe_tag = tag;
      std::replace(safe_tag.begin(), safe_tag.end(), '+', '_');
      const fs::path run_dir = fs::path(out_dir) / safe_tag / concat("seed", seed);
      std::cerr << "ablate: " << tag << " seed " << seed << "...\n";
      TrainRunOutput out = run_training(run_doc, train, dev, run_dir.string(), truth);
      tsv << tag << '\t' << seed << '\t' << format_double(out.dev.bleu1) << '\t'
          << format_double(out.dev.bleu4) << '\t' << format_double(out.dev.rouge_l) << '\t'
          << format_double(out.dev.chrf) << '\t'
          << (out.homonym_acc >= 0 ? format_double(out.homonym_acc) : "-") << '\t'
          << (out.has_self ? format_double(out.dev_self.bleu4) : "-") << '\n';
      json row{{"mode", tag},
               {"seed", seed},
               {"metrics", metric_report_to_json(out.dev)},
               {"best_epoch", out.best_epoch},
               {"seconds", out.seconds}};
      if (out.homonym_acc >= 0) row["homonym_slot_acc"] = out.homonym_acc;
      if (out.has_self) row["bleu4_selfctx"] = out.dev_self.bleu4;
      summary.push_back(row);
      runs.push_back(std::move(out));
    }

    auto mean_std = [&](auto getter) {
      double mean = 0;
      for (const auto& r : runs) mean += getter(r);
      mean /= runs.size();
      double var = 0;
      for (const auto& r : runs) var += (getter(r) - mean) * (getter(r) - mean);
      const double std_dev = runs.size() > 1 ? std::sqrt(var / (runs.size() - 1)) : 0.0;
      std::ostringstream os;
      os.precision(2);
      os << std::fixed << mean;
      if (runs.size() > 1) os << " ± " << std_dev;
      return os.str();
    };
    md << "| " << tag << " | " << mean_std([](const auto& r) { return r.dev.bleu1; }) << " | "
       << mean_std([](const auto& r) { return r.dev.bleu4; }) << " | "
       << mean_std([](const auto& r) { return r.dev.rouge_l; }) << " | "
       << mean_std([](const auto& r) { return r.dev.chrf; }) << " | "
       << (runs[0].homonym_acc >= 0
               ? mean_std([](const auto& r) { return 100.0 * r.homonym_acc; })
               : std::string("-"))
       << " | "
       << (runs[0].has_self ? mean_std([](const auto& r) { return r.dev_self.bleu4; })
                            : std::string("-"))
       << " |\n";
  }

  write_file((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");
  write_file((fs::path(out_dir) / "summary.tsv").string(), tsv.str());
  write_file((fs::path(out_dir) / "summary.md").string(), md.str());
  std::cout << md.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"context-aware multi-modal sign language translation toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic episode corpus");
  CommonArgs synth_common;
  add_common(synth, synth_common);
  std::string synth_out;
  long synth_seed = 0;
  synth->add_option("--out", synth_out, "output directory")->required();
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "generator seed");

  // spot
  auto* spot = app.add_subcommand("spot", "annotate a corpus by exemplar voting");
  std::string spot_corpus, spot_out, spot_emit, spot_veto = "per-window";
  SpotParams spot_params;
  int spot_min_count = 1;
  spot->add_option("--corpus", spot_corpus, "corpus manifest (JSONL)")->required();
  spot->add_option("--out", spot_out, "output spotting TSV")->required();
  spot->add_option("--emit-corpus", spot_emit, "write a corpus with the new spottings applied");
  spot->add_option("--positives", spot_params.positives, "positive exemplars per word");
  spot->add_option("--negative-ratio", spot_params.negative_ratio, "negatives per positive");
  spot->add_option("--threshold", spot_params.threshold, "cosine similarity threshold");
  spot->add_option("--window", spot_params.window, "window size in frames");
  spot->add_option("--stride", spot_params.stride, "window stride in frames");
  spot->add_option("--veto", spot_veto, "per-window | global");
  spot->add_option("--seed", spot_params.seed, "sampling seed");
  spot->add_option("--jobs", spot_params.jobs, "parallel jobs across words");
  spot->add_option("--min-count", spot_min_count, "minimum word occurrences");

  // train
  auto* train = app.add_subcommand("train", "train a translation model");
  CommonArgs train_common;
  add_common(train, train_common);
  std::string train_train, train_dev, train_out;
  long train_seed = 0;
  train->add_option("--train", train_train, "training manifest")->required();
  train->add_option("--dev", train_dev, "development manifest (defaults to the training set)");
  train->add_option("--out", train_out, "run directory")->required();
  auto* train_seed_opt = train->add_option("--seed", train_seed, "training seed");

  // translate
  auto* translate = app.add_subcommand("translate", "translate one clip with a checkpoint");
  std::string tr_ckpt, tr_feat, tr_ctx, tr_spot;
  int tr_beam = 1, tr_max_len = 32;
  translate->add_option("--checkpoint", tr_ckpt, "checkpoint file")->required();
  translate->add_option("--features", tr_feat, "fmat feature file");
  translate->add_option("--context", tr_ctx, "preceding sentences, '|' separated");
  translate->add_option("--spottings", tr_spot, "space-separated gloss list");
  translate->add_option("--beam", tr_beam, "beam size (1 = greedy)");
  translate->add_option("--max-len", tr_max_len, "maximum output length");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score dumped translations");
  std::string ev_in, ev_out, ev_pairs;
  evaluate->add_option("--translations", ev_in, "4-column translations TSV")->required();
  evaluate->add_option("--out", ev_out, "write metrics JSON here too");
  evaluate->add_option("--per-pair", ev_pairs, "write per-pair metrics TSV");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "train and compare stream subsets");
  CommonArgs ablate_common;
  add_common(ablate, ablate_common);
  std::string ab_data, ab_out, ab_seeds = "1,2,3", ab_subsets = "V,C,C+V,S,C+S,C+V+S";
  ablate->add_option("--data", ab_data, "corpus directory (train.jsonl/dev.jsonl)")->required();
  ablate->add_option("--out", ab_out, "output directory")->required();
  ablate->add_option("--seeds", ab_seeds, "comma-separated training seeds");
  ablate->add_option("--subsets", ab_subsets, "comma-separated stream subsets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      return cmd_synth(synth_common, synth_out, synth_seed, synth_seed_opt->count() > 0);
    }
    if (spot->parsed()) {
      return cmd_spot(spot_corpus, spot_out, spot_params, spot_veto, spot_emit, spot_min_count);
    }
    if (train->parsed()) {
      return cmd_train(train_common, train_train, train_dev, train_out, train_seed,
                       train_seed_opt->count() > 0);
    }
    if (translate->parsed()) {
      return cmd_translate(tr_ckpt, tr_feat, tr_ctx, tr_spot, tr_beam, tr_max_len);
    }
    if (evaluate->parsed()) return cmd_evaluate(ev_in, ev_out, ev_pairs);
    if (ablate->parsed()) {
      return cmd_ablate(ablate_common, ab_data, ab_out, ab_seeds, ab_subsets);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
