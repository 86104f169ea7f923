#include "cslt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cslt/errors.hpp"
#include "cslt/rng.hpp"
#include "cslt/text.hpp"

namespace cslt {

namespace fs = std::filesystem;
using nlohmann::json;

void SynthConfig::validate() const {
  if (episodes < 1 || sentences_per_episode < 1) {
    throw ConfigError("synth: episodes and sentences_per_episode must be positive");
  }
  if (sentence_len_min < 2 || sentence_len_max < sentence_len_min) {
    throw ConfigError(concat("synth: sentence length range [", sentence_len_min, ",",
                             sentence_len_max, "]"));
  }
  if (topics < 1 || topic_words < 1 || function_words < 1) {
    throw ConfigError("synth: topics, topic_words and function_words must be positive");
  }
  if (homonym_pairs < 0) throw ConfigError("synth: homonym_pairs must be >= 0");
  if (homonym_pairs > 0 && topics < 2) {
    throw ConfigError("synth: homonym pairs need at least two topics to be resolvable");
  }
  if (ambiguity_rate < 0.0 || ambiguity_rate > 1.0) {
    throw ConfigError(concat("synth: ambiguity_rate ", ambiguity_rate));
  }
  if (feature_dim < 1) throw ConfigError("synth: feature_dim must be positive");
  if (noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
  if (sign_duration_min < 1 || sign_duration_max < sign_duration_min) {
    throw ConfigError(concat("synth: sign duration range [", sign_duration_min, ",",
                             sign_duration_max, "]"));
  }
  // The embedding window needs at least 16 frames per clip.
  if (sentence_len_min * sign_duration_min < 16) {
    throw ConfigError("synth: shortest possible clip is below the 16-frame window");
  }
  if (spotting_coverage < 0.0 || spotting_coverage > 1.0) {
    throw ConfigError(concat("synth: spotting_coverage ", spotting_coverage));
  }
  if (prototype_mode != "orthonormal" && prototype_mode != "random-unit") {
    throw ConfigError(concat("synth: prototype_mode '", prototype_mode, "'"));
  }
  if (dev_fraction < 0.0 || dev_fraction >= 1.0) {
    throw ConfigError(concat("synth: dev_fraction ", dev_fraction));
  }
}

json synth_config_to_json(const SynthConfig& c) {
  return json{{"episodes", c.episodes},
              {"sentences_per_episode", c.sentences_per_episode},
              {"sentence_len_min", c.sentence_len_min},
              {"sentence_len_max", c.sentence_len_max},
              {"topics", c.topics},
              {"topic_words", c.topic_words},
              {"function_words", c.function_words},
              {"homonym_pairs", c.homonym_pairs},
              {"ambiguity_rate", c.ambiguity_rate},
              {"feature_dim", c.feature_dim},
              {"noise_sigma", c.noise_sigma},
              {"sign_duration_min", c.sign_duration_min},
              {"sign_duration_max", c.sign_duration_max},
              {"spotting_coverage", c.spotting_coverage},
              {"prototype_mode", c.prototype_mode},
              {"dev_fraction", c.dev_fraction},
              {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  c.episodes = j.value("episodes", c.episodes);
  c.sentences_per_episode = j.value("sentences_per_episode", c.sentences_per_episode);
  c.sentence_len_min = j.value("sentence_len_min", c.sentence_len_min);
  c.sentence_len_max = j.value("sentence_len_max", c.sentence_len_max);
  c.topics = j.value("topics", c.topics);
  c.topic_words = j.value("topic_words", c.topic_words);
  c.function_words = j.value("function_words", c.function_words);
  c.homonym_pairs = j.value("homonym_pairs", c.homonym_pairs);
  c.ambiguity_rate = j.value("ambiguity_rate", c.ambiguity_rate);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.sign_duration_min = j.value("sign_duration_min", c.sign_duration_min);
  c.sign_duration_max = j.value("sign_duration_max", c.sign_duration_max);
  c.spotting_coverage = j.value("spotting_coverage", c.spotting_coverage);
  c.prototype_mode = j.value("prototype_mode", c.prototype_mode);
  c.dev_fraction = j.value("dev_fraction", c.dev_fraction);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

struct HomonymPair {
  std::string word_a, word_b;
  std::string gloss;
  int topic_a = 0, topic_b = 0;
};

struct Lexicon {
  std::vector<std::string> announce;                // per topic
  std::vector<std::string> function_words;
  std::vector<std::vector<std::string>> topic_pool; // per topic
  std::vector<HomonymPair> pairs;
  std::vector<std::string> signs;                   // gloss per prototype row
  std::unordered_map<std::string, int> sign_index;  // gloss -> prototype row
  std::unordered_map<std::string, std::string> word_sign;  // word -> gloss

  int sign_of(const std::string& word) const { return sign_index.at(word_sign.at(word)); }
};

Lexicon build_lexicon(const SynthConfig& cfg) {
  Lexicon lex;
  auto add_sign = [&lex](const std::string& gloss) {
    lex.sign_index[gloss] = static_cast<int>(lex.signs.size());
    lex.signs.push_back(gloss);
  };
  for (int t = 0; t < cfg.topics; ++t) {
    std::string w = concat("topic", t);
    lex.announce.push_back(w);
    add_sign(w);
    lex.word_sign[w] = w;
  }
  for (int i = 0; i < cfg.function_words; ++i) {
    std::string w = concat("fw", i);
    lex.function_words.push_back(w);
    add_sign(w);
    lex.word_sign[w] = w;
  }
  lex.topic_pool.resize(cfg.topics);
  for (int t = 0; t < cfg.topics; ++t) {
    for (int i = 0; i < cfg.topic_words; ++i) {
      std::string w = concat("t", t, "w", i);
      lex.topic_pool[t].push_back(w);
      add_sign(w);
      lex.word_sign[w] = w;
    }
  }
  for (int i = 0; i < cfg.homonym_pairs; ++i) {
    HomonymPair p;
    p.word_a = concat("hom", i, "a");
    p.word_b = concat("hom", i, "b");
    p.gloss = concat("hg", i);
    p.topic_a = i % cfg.topics;
    p.topic_b = (i + 1) % cfg.topics;
    add_sign(p.gloss);
    lex.word_sign[p.word_a] = p.gloss;
    lex.word_sign[p.word_b] = p.gloss;
    lex.pairs.push_back(std::move(p));
  }
  return lex;
}

std::vector<std::vector<double>> make_prototypes(const SynthConfig& cfg, int count, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int f = cfg.feature_dim;
  if (cfg.prototype_mode == "orthonormal" && count > f) {
    throw ConfigError(concat("synth: ", count, " orthonormal prototypes do not fit in ", f,
                             " dimensions"));
  }
  std::vector<std::vector<double>> protos;
  protos.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::vector<double> v(f);
    while (true) {
      for (double& x : v) x = gauss(rng);
      if (cfg.prototype_mode == "orthonormal") {
        // Gram-Schmidt against the accepted rows.
        for (const auto& q : protos) {
          double dot = 0.0;
          for (int j = 0; j < f; ++j) dot += v[j] * q[j];
          for (int j = 0; j < f; ++j) v[j] -= dot * q[j];
        }
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 1e-6) {
        for (double& x : v) x /= norm;
        break;
      }
    }
    protos.push_back(std::move(v));
  }
  return protos;
}

std::string tsv_escape(const std::string& s) { return s; }  // values never contain tabs

}  // namespace

SynthResult generate_synthetic(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const fs::path root(out_dir);
  fs::create_directories(root / "features");
  fs::create_directories(root / "truth");

  Rng rng = make_rng(derive_seed(cfg.seed, "synth"));
  Lexicon lex = build_lexicon(cfg);
  auto protos = make_prototypes(cfg, static_cast<int>(lex.signs.size()), rng);

  std::uniform_int_distribution<int> len_dist(cfg.sentence_len_min, cfg.sentence_len_max);
  std::uniform_int_distribution<int> dur_dist(cfg.sign_duration_min, cfg.sign_duration_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Corpus corpus;
  std::vector<HomonymSlot> homonym_truth;
  std::vector<SignSpan> span_truth;
  int homonym_slots = 0;

  for (int e = 0; e < cfg.episodes; ++e) {
    const int topic = e % cfg.topics;
    Episode ep;
    ep.episode_id = concat("ep", e);
    // pairs usable under this episode's topic
    std::vector<int> usable_pairs;
    for (int i = 0; i < static_cast<int>(lex.pairs.size()); ++i) {
      if (lex.pairs[i].topic_a == topic || lex.pairs[i].topic_b == topic) {
        usable_pairs.push_back(i);
      }
    }
    for (int s = 0; s < cfg.sentences_per_episode; ++s) {
      Sample sample;
      sample.subtitle_index = s;
      sample.video_id = concat("ep", e, "_s", s);
      sample.feature_path = concat("features/", sample.video_id, ".fmat");

      const int len = len_dist(rng);
      std::vector<std::string> words;
      words.reserve(len);
      for (int pos = 0; pos < len; ++pos) {
        if (pos == 0) {
          if (s == 0) {
            words.push_back(lex.announce[topic]);  // topic announcement
          } else {
            std::uniform_int_distribution<int> fd(0, cfg.function_words - 1);
            words.push_back(lex.function_words[fd(rng)]);
          }
          continue;
        }
        const bool homonym_slot =
            !usable_pairs.empty() && unit(rng) < cfg.ambiguity_rate;
        if (homonym_slot) {
          std::uniform_int_distribution<int> pd(0, static_cast<int>(usable_pairs.size()) - 1);
          const HomonymPair& pair = lex.pairs[usable_pairs[pd(rng)]];
          const bool is_a = (pair.topic_a == topic);
          const std::string& word = is_a ? pair.word_a : pair.word_b;
          const std::string& partner = is_a ? pair.word_b : pair.word_a;
          homonym_truth.push_back(
              {ep.episode_id, s, pos, word, partner, pair.gloss});
          ++homonym_slots;
          words.push_back(word);
        } else {
          std::uniform_int_distribution<int> td(0, cfg.topic_words - 1);
          words.push_back(lex.topic_pool[topic][td(rng)]);
        }
      }
      sample.target = join(words);

      // frames: one span of prototype + noise per sign
      std::vector<int> durations(len);
      int total_frames = 0;
      for (int i = 0; i < len; ++i) {
        durations[i] = dur_dist(rng);
        total_frames += durations[i];
      }
      Tensor frames = Tensor::zeros({total_frames, cfg.feature_dim});
      auto& fd = frames.data();
      int cursor = 0;
      for (int i = 0; i < len; ++i) {
        const auto& proto = protos[static_cast<std::size_t>(lex.sign_of(words[i]))];
        const std::string& gloss = lex.word_sign.at(words[i]);
        span_truth.push_back({sample.video_id, i, gloss, cursor, cursor + durations[i]});
        for (int t = 0; t < durations[i]; ++t) {
          double* row = fd.data() + static_cast<std::size_t>(cursor + t) * cfg.feature_dim;
          for (int j = 0; j < cfg.feature_dim; ++j) {
            row[j] = proto[j] + (cfg.noise_sigma > 0.0 ? cfg.noise_sigma * gauss(rng) : 0.0);
          }
        }
        cursor += durations[i];
      }
      write_fmat((root / sample.feature_path).string(), frames);
      sample.features.video_id = sample.video_id;
      sample.features.frames = frames;

      // spottings: a coverage-fraction of signs, shared gloss for homonyms,
      // window index under the default (16, 4) embedding grid
      const int w_count = std::max(1, (total_frames - 16) / 4 + 1);
      cursor = 0;
      for (int i = 0; i < len; ++i) {
        const double draw = unit(rng);
        const int start = cursor;
        cursor += durations[i];
        if (draw >= cfg.spotting_coverage) continue;
        const double center = start + durations[i] / 2.0;
        int win = static_cast<int>(std::lround((center - 8.0) / 4.0));
        win = std::clamp(win, 0, w_count - 1);
        sample.spottings.push_back({lex.word_sign.at(words[i]), win});
      }
      ep.samples.push_back(std::move(sample));
    }
    corpus.push_back(std::move(ep));
  }

  // split: trailing episodes become the dev set
  int n_dev = cfg.dev_fraction > 0.0
                  ? std::max(1, static_cast<int>(std::lround(cfg.episodes * cfg.dev_fraction)))
                  : 0;
  if (n_dev >= cfg.episodes) n_dev = cfg.episodes - 1;
  Corpus train(corpus.begin(), corpus.end() - n_dev);
  Corpus dev(corpus.end() - n_dev, corpus.end());

  SynthResult result;
  result.train_manifest = (root / "train.jsonl").string();
  result.dev_manifest = (root / "dev.jsonl").string();
  result.train_samples = static_cast<int>(corpus_sample_count(train));
  result.dev_samples = static_cast<int>(corpus_sample_count(dev));
  result.sign_count = static_cast<int>(lex.signs.size());
  result.homonym_slots = homonym_slots;
  save_corpus(result.train_manifest, train);
  save_corpus(result.dev_manifest, dev);

  {
    std::ostringstream os;
    for (const auto& h : homonym_truth) {
      os << tsv_escape(h.episode_id) << '\t' << h.subtitle_index << '\t' << h.token_pos << '\t'
         << h.word << '\t' << h.partner << '\t' << h.shared_gloss << '\n';
    }
    write_file((root / "truth" / "homonym_slots.tsv").string(), os.str());
  }
  {
    std::ostringstream os;
    for (const auto& sp : span_truth) {
      os << sp.video_id << '\t' << sp.sign_pos << '\t' << sp.gloss << '\t' << sp.start_frame
         << '\t' << sp.end_frame << '\n';
    }
    write_file((root / "truth" / "sign_spans.tsv").string(), os.str());
  }
  {
    Tensor proto_mat = Tensor::zeros({static_cast<int>(protos.size()), cfg.feature_dim});
    for (std::size_t i = 0; i < protos.size(); ++i) {
      std::copy(protos[i].begin(), protos[i].end(),
                proto_mat.data().begin() + i * static_cast<std::size_t>(cfg.feature_dim));
    }
    write_fmat((root / "truth" / "prototypes.fmat").string(), proto_mat);
    std::ostringstream os;
    for (const auto& s : lex.signs) os << s << '\n';
    write_file((root / "truth" / "sign_names.txt").string(), os.str());
  }
  write_file((root / "generator_config.json").string(), synth_config_to_json(cfg).dump(2) + "\n");
  return result;
}

std::vector<HomonymSlot> read_homonym_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(concat("cannot open homonym truth: ", path));
  std::vector<HomonymSlot> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto parts = split_ws(line);
    if (parts.size() != 6) throw ParseError(concat(path, ": want 6 columns"), line_no);
    out.push_back({parts[0], static_cast<int>(parse_long(parts[1])),
                   static_cast<int>(parse_long(parts[2])), parts[3], parts[4], parts[5]});
  }
  return out;
}

std::vector<SignSpan> read_sign_spans(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(concat("cannot open sign spans: ", path));
  std::vector<SignSpan> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto parts = split_ws(line);
    if (parts.size() != 5) throw ParseError(concat(path, ": want 5 columns"), line_no);
    out.push_back({parts[0], static_cast<int>(parse_long(parts[1])), parts[2],
                   static_cast<int>(parse_long(parts[3])),
                   static_cast<int>(parse_long(parts[4]))});
  }
  return out;
}

}  // namespace cslt
