#include "cslt/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "cslt/errors.hpp"

namespace cslt {

using nlohmann::json;

json model_config_to_json(const ModelConfig& cfg) {
  json j;
  j["d_model"] = cfg.d_model;
  j["d_ff"] = cfg.d_ff;
  j["layers"] = cfg.layers;
  j["heads"] = cfg.heads;
  j["dropout"] = cfg.dropout;
  j["vocab_size"] = cfg.vocab_size;
  j["max_positions"] = cfg.max_positions;
  j["feature_dim"] = cfg.feature_dim;
  j["window"] = cfg.window;
  j["stride"] = cfg.stride;
  json streams = json::array();
  for (Stream s : {Stream::Context, Stream::Video, Stream::Spotting}) {
    if (cfg.has(s)) streams.push_back(stream_name(s));
  }
  j["streams"] = streams;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.d_model = j.at("d_model").get<int>();
  cfg.d_ff = j.at("d_ff").get<int>();
  cfg.layers = j.at("layers").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.max_positions = j.at("max_positions").get<int>();
  cfg.feature_dim = j.at("feature_dim").get<int>();
  cfg.window = j.at("window").get<int>();
  cfg.stride = j.at("stride").get<int>();
  cfg.enabled_streams.clear();
  for (const auto& s : j.at("streams")) {
    cfg.enabled_streams.insert(stream_from_name(s.get<std::string>()));
  }
  return cfg;
}

void save_checkpoint(const std::string& path, const TranslationModel& model,
                     const std::vector<std::string>& vocab, const json& metadata) {
  json header;
  header["format"] = "cslt-checkpoint";
  header["version"] = 1;
  header["model"] = model_config_to_json(model.config());
  header["vocab"] = vocab;
  header["metadata"] = metadata;
  json params = json::array();
  for (const auto& p : model.parameters().all()) {
    params.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
  }
  header["params"] = params;

  const std::string header_str = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(concat("cannot write checkpoint: ", path));
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t len = header_str.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& p : model.parameters().all()) {
    const auto& data = p.tensor.data();
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!out) throw IoError(concat("checkpoint write failed: ", path));
}

namespace {

json read_header_json(std::ifstream& in, const std::string& path) {
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ParseError(concat(path, ": not a cslt checkpoint (bad magic)"));
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in) throw ParseError(concat(path, ": truncated header length"));
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError(concat(path, ": truncated header"));
  json header = json::parse(header_str, nullptr, /*allow_exceptions=*/false);
  if (header.is_discarded()) throw ParseError(concat(path, ": header is not valid JSON"));
  return header;
}

CheckpointHeader header_from_json(const json& h) {
  CheckpointHeader out;
  out.config = model_config_from_json(h.at("model"));
  out.vocab = h.at("vocab").get<std::vector<std::string>>();
  out.metadata = h.value("metadata", json::object());
  return out;
}

}  // namespace

CheckpointHeader read_checkpoint_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(concat("cannot open checkpoint: ", path));
  return header_from_json(read_header_json(in, path));
}

std::unique_ptr<TranslationModel> load_checkpoint(const std::string& path,
                                                  CheckpointHeader* header_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(concat("cannot open checkpoint: ", path));
  json header = read_header_json(in, path);
  CheckpointHeader parsed = header_from_json(header);

  auto model = std::make_unique<TranslationModel>(parsed.config, /*seed=*/0);
  const auto& listed = header.at("params");
  auto& store = model->parameters();
  if (listed.size() != store.size()) {
    throw ParseError(concat(path, ": checkpoint has ", listed.size(), " parameters, model wants ",
                            store.size()));
  }
  for (const auto& entry : listed) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    if (!store.contains(name)) throw ParseError(concat(path, ": unexpected parameter ", name));
    auto& p = store.at(name);
    if (p.tensor.shape() != shape) {
      throw ParseError(concat(path, ": parameter ", name, " stored as ", shape_str(shape),
                              ", model wants ", shape_str(p.tensor.shape())));
    }
    auto& data = p.tensor.data();
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw ParseError(concat(path, ": truncated data for parameter ", name));
  }
  if (header_out) *header_out = std::move(parsed);
  return model;
}

}  // namespace cslt
