#include "cslt/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cslt/errors.hpp"
#include "cslt/model.hpp"
#include "cslt/text.hpp"

namespace cslt {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t corpus_sample_count(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& ep : corpus) n += ep.samples.size();
  return n;
}

Corpus load_corpus(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError(concat("cannot open corpus manifest: ", manifest_path));
  const fs::path root = fs::path(manifest_path).parent_path();

  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      throw ParseError(concat(manifest_path, ": invalid JSON"), line_no);
    }
    const bool is_header = !j.contains("subtitle_index");
    if (is_header) {
      if (!j.contains("episode_id")) {
        throw ParseError(concat(manifest_path, ": header line missing episode_id"), line_no);
      }
      corpus.push_back(Episode{j["episode_id"].get<std::string>(), {}});
      continue;
    }
    if (corpus.empty()) {
      throw ParseError(concat(manifest_path, ": sample before any episode header"), line_no);
    }
    Episode& ep = corpus.back();
    Sample s;
    try {
      s.subtitle_index = j.at("subtitle_index").get<int>();
      s.target = j.at("target").get<std::string>();
      s.feature_path = j.at("feature_path").get<std::string>();
      s.video_id = j.value("video_id", fs::path(s.feature_path).stem().string());
      if (j.contains("spottings")) {
        for (const auto& sp : j["spottings"]) {
          s.spottings.push_back({sp.at("gloss").get<std::string>(), sp.at("window").get<int>()});
        }
      }
      const std::string ep_id = j.at("episode_id").get<std::string>();
      if (ep_id != ep.episode_id) {
        throw ParseError(concat(manifest_path, ": sample episode_id '", ep_id,
                                "' does not match open episode '", ep.episode_id, "'"),
                         line_no);
      }
    } catch (const json::exception& e) {
      throw ParseError(concat(manifest_path, ": ", e.what()), line_no);
    }
    if (!ep.samples.empty() && s.subtitle_index <= ep.samples.back().subtitle_index) {
      throw ParseError(concat(manifest_path, ": subtitle_index ", s.subtitle_index,
                              " out of order in episode ", ep.episode_id),
                       line_no);
    }
    const fs::path feat = root / s.feature_path;
    s.features = read_fmat(feat.string(), s.video_id);
    ep.samples.push_back(std::move(s));
  }
  return corpus;
}

void save_corpus(const std::string& manifest_path, const Corpus& corpus) {
  std::ostringstream os;
  for (const auto& ep : corpus) {
    os << json{{"episode_id", ep.episode_id}}.dump() << '\n';
    for (const auto& s : ep.samples) {
      json spots = json::array();
      for (const auto& sp : s.spottings) {
        spots.push_back({{"gloss", sp.gloss}, {"window", sp.window_index}});
      }
      json j{{"episode_id", ep.episode_id},
             {"subtitle_index", s.subtitle_index},
             {"video_id", s.video_id},
             {"feature_path", s.feature_path},
             {"target", s.target},
             {"spottings", spots}};
      os << j.dump() << '\n';
    }
  }
  write_file(manifest_path, os.str());
}

Tokenizer build_tokenizer(const Corpus& corpus) {
  std::vector<std::string> texts;
  for (const auto& ep : corpus) {
    for (const auto& s : ep.samples) {
      texts.push_back(s.target);
      for (const auto& sp : s.spottings) texts.push_back(sp.gloss);
    }
  }
  return Tokenizer::build(texts);
}

std::string ContextMode::describe() const {
  if (kind == Kind::Sentences) return concat("sentences(", sentences, ")");
  return concat("spottings(max=", max_spottings, ",lookback=", lookback, ")");
}

std::vector<int> build_context_from(const std::vector<std::string>& preceding_sentences,
                                    const std::vector<std::vector<std::string>>& preceding_glosses,
                                    const ContextMode& mode, const Tokenizer& tok,
                                    int max_tokens) {
  std::vector<int> out;
  if (mode.kind == ContextMode::Kind::Sentences) {
    const int k = std::min<int>(mode.sentences, static_cast<int>(preceding_sentences.size()));
    const int start = static_cast<int>(preceding_sentences.size()) - k;
    for (int i = start; i < static_cast<int>(preceding_sentences.size()); ++i) {
      if (i > start) out.push_back(SpecialTokens::Sep);
      for (int id : tok.tokenize(preceding_sentences[i])) out.push_back(id);
    }
  } else {
    const int k = std::min<int>(mode.lookback, static_cast<int>(preceding_glosses.size()));
    const int start = static_cast<int>(preceding_glosses.size()) - k;
    std::vector<int> glosses;
    for (int i = start; i < static_cast<int>(preceding_glosses.size()); ++i) {
      for (const auto& g : preceding_glosses[i]) glosses.push_back(tok.id_of(g));
    }
    if (static_cast<int>(glosses.size()) > mode.max_spottings) {
      glosses.erase(glosses.begin(), glosses.end() - mode.max_spottings);
    }
    out = std::move(glosses);
  }
  if (max_tokens > 0 && static_cast<int>(out.size()) > max_tokens) {
    out.erase(out.begin(), out.end() - max_tokens);
  }
  return out;
}

std::vector<int> build_context(const Episode& episode, int n, const ContextMode& mode,
                               const Tokenizer& tok, int max_tokens) {
  if (n < 0 || n > static_cast<int>(episode.samples.size())) {
    throw ValueError(concat("build_context: sample index ", n, " in episode of ",
                            episode.samples.size()));
  }
  std::vector<std::string> sentences;
  std::vector<std::vector<std::string>> glosses;
  for (int i = 0; i < n; ++i) {
    sentences.push_back(episode.samples[i].target);
    std::vector<std::string> g;
    for (const auto& sp : episode.samples[i].spottings) g.push_back(sp.gloss);
    glosses.push_back(std::move(g));
  }
  return build_context_from(sentences, glosses, mode, tok, max_tokens);
}

}  // namespace cslt
