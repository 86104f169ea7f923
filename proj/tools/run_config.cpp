#include "run_config.hpp"

#include <algorithm>
#include <filesystem>

#include "cslt/errors.hpp"
#include "cslt/text.hpp"
#include "presets_data.hpp"

namespace cslt::cli {

using nlohmann::json;

json load_config_document(const std::string& preset, const std::string& config_path) {
  if (!preset.empty() && !config_path.empty()) {
    throw ConfigError("give either --preset or --config, not both");
  }
  if (!preset.empty()) {
    const auto& presets = embedded_presets();
    auto it = presets.find(preset);
    if (it != presets.end()) return json::parse(it->second);
    if (std::filesystem::exists(preset)) return json::parse(read_file(preset));
    std::string known;
    for (const auto& [name, text] : presets) known += (known.empty() ? "" : ", ") + name;
    throw ConfigError(concat("unknown preset '", preset, "' (known: ", known, ")"));
  }
  if (!config_path.empty()) {
    json doc = json::parse(read_file(config_path), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) throw ParseError(concat(config_path, ": invalid JSON"));
    return doc;
  }
  return json::object();
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(concat("--set expects key=value, got '", assignment, "'"));
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError(concat("bad key in --set: '", key, "'"));
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
      (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

void apply_overrides(json& doc, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) apply_override(doc, a);
}

SynthConfig synth_section(const json& doc) {
  return synth_config_from_json(doc.value("synth", json::object()));
}

TrainConfig train_section(const json& doc) {
  return train_config_from_json(doc.value("train", json::object()));
}

ModelConfig model_section(const json& doc, int vocab_size, int feature_dim) {
  const json m = doc.value("model", json::object());
  ModelConfig cfg;
  cfg.d_model = m.value("d_model", cfg.d_model);
  cfg.d_ff = m.value("d_ff", cfg.d_ff);
  cfg.layers = m.value("layers", cfg.layers);
  cfg.heads = m.value("heads", cfg.heads);
  cfg.dropout = m.value("dropout", cfg.dropout);
  cfg.max_positions = m.value("max_positions", cfg.max_positions);
  cfg.window = m.value("window", cfg.window);
  cfg.stride = m.value("stride", cfg.stride);
  if (m.contains("streams")) {
    cfg.enabled_streams.clear();
    for (const auto& s : m.at("streams")) {
      cfg.enabled_streams.insert(stream_from_name(s.get<std::string>()));
    }
  }
  cfg.vocab_size = vocab_size;
  cfg.feature_dim = cfg.has(Stream::Video) ? feature_dim : 0;
  return cfg;
}

std::set<Stream> parse_subset(const std::string& tag) {
  std::set<Stream> out;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    std::string t = to_lower_ascii(token);
    if (t == "v" || t == "video") out.insert(Stream::Video);
    else if (t == "c" || t == "context") out.insert(Stream::Context);
    else if (t == "s" || t == "spot" || t == "spotting") out.insert(Stream::Spotting);
    else throw ConfigError(concat("unknown stream '", token, "' in subset '", tag, "'"));
    token.clear();
  };
  for (char c : tag) {
    if (c == '+') flush();
    else token += c;
  }
  flush();
  if (out.empty()) throw ConfigError(concat("empty stream subset '", tag, "'"));
  return out;
}

std::string subset_tag(const std::set<Stream>& streams) {
  std::string tag;
  for (Stream s : {Stream::Context, Stream::Video, Stream::Spotting}) {
    if (!streams.count(s)) continue;
    if (!tag.empty()) tag += '+';
    tag += s == Stream::Context ? "C" : s == Stream::Video ? "V" : "S";
  }
  return tag;
}

std::vector<std::string> canonical_subset_order() {
  return {"V", "C", "C+V", "S", "C+S", "C+V+S"};
}

int feature_dim_of(const Corpus& corpus) {
  int dim = -1;
  for (const auto& ep : corpus) {
    for (const auto& s : ep.samples) {
      const int f = s.features.feature_dim();
      if (dim < 0) dim = f;
      if (f != dim) {
        throw ValueError(concat("inconsistent feature widths in corpus: ", dim, " vs ", f,
                                " (video ", s.video_id, ")"));
      }
    }
  }
  if (dim < 0) throw ValueError("corpus has no samples");
  return dim;
}

}  // namespace cslt::cli
