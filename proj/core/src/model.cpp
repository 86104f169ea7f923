#include "cslt/model.hpp"

#include <cmath>

#include "cslt/errors.hpp"
#include "cslt/ops.hpp"

namespace cslt {

void ModelConfig::validate() const {
  if (d_model < 2 || d_model % 2 != 0) {
    throw ConfigError(concat("d_model must be even and >= 2, got ", d_model));
  }
  if (heads < 1 || d_model % heads != 0) {
    throw ConfigError(concat("d_model ", d_model, " not divisible by heads ", heads));
  }
  if (layers < 1) throw ConfigError(concat("layers must be >= 1, got ", layers));
  if (d_ff < 1) throw ConfigError(concat("d_ff must be >= 1, got ", d_ff));
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError(concat("dropout ", dropout));
  if (vocab_size < SpecialTokens::Count) {
    throw ConfigError(concat("vocab_size ", vocab_size, " smaller than special tokens"));
  }
  if (max_positions < 2) throw ConfigError(concat("max_positions ", max_positions));
  if (enabled_streams.empty()) throw ConfigError("enabled_streams must be non-empty");
  if (has(Stream::Video) && feature_dim < 1) {
    throw ConfigError("video stream enabled but feature_dim not set");
  }
  if (window < 1 || stride < 1) throw ConfigError(concat("window ", window, " stride ", stride));
}

FeedForward FeedForward::create(ParameterStore& store, const std::string& prefix, int d_model,
                                int d_ff) {
  FeedForward ff;
  ff.w1 = store.create(prefix + ".w1", {d_model, d_ff});
  ff.b1 = store.create(prefix + ".b1", {d_ff});
  ff.w2 = store.create(prefix + ".w2", {d_ff, d_model});
  ff.b2 = store.create(prefix + ".b2", {d_model});
  return ff;
}

SublayerNorm SublayerNorm::create(ParameterStore& store, const std::string& prefix, int d_model) {
  SublayerNorm ln;
  ln.gain = store.create(prefix + ".ln_gain", {d_model});
  ln.bias = store.create(prefix + ".ln_bias", {d_model});
  return ln;
}

TranslationModel::TranslationModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), rng_(make_rng(seed)) {
  cfg_.validate();
  word_table_ = EmbeddingTable::create(store_, "embed.word", cfg_.vocab_size, cfg_.d_model);
  if (cfg_.has(Stream::Video)) {
    feature_embed_ = FeatureEmbedding::create(store_, "embed.feature", cfg_.feature_dim,
                                              cfg_.d_model);
  }
  for (Stream s : cfg_.enabled_streams) {
    auto& stack = encoders_[s];
    for (int l = 0; l < cfg_.layers; ++l) {
      std::string prefix = concat("encoder.", stream_name(s), ".layer", l);
      EncoderLayer layer;
      layer.self_attn = MultiHeadAttention(store_, prefix + ".self", cfg_.d_model, cfg_.heads);
      layer.ln_attn = SublayerNorm::create(store_, prefix + ".self", cfg_.d_model);
      layer.ff = FeedForward::create(store_, prefix + ".ff", cfg_.d_model, cfg_.d_ff);
      layer.ln_ff = SublayerNorm::create(store_, prefix + ".ff", cfg_.d_model);
      stack.push_back(std::move(layer));
    }
  }
  for (int l = 0; l < cfg_.layers; ++l) {
    std::string prefix = concat("decoder.layer", l);
    DecoderLayer layer;
    layer.self_attn = MultiHeadAttention(store_, prefix + ".self", cfg_.d_model, cfg_.heads);
    layer.ln_self = SublayerNorm::create(store_, prefix + ".self", cfg_.d_model);
    for (Stream s : {Stream::Context, Stream::Video, Stream::Spotting}) {
      if (!cfg_.has(s)) continue;
      std::string cname = concat(prefix, ".cross_", stream_name(s));
      layer.cross_attn.emplace(s, MultiHeadAttention(store_, cname, cfg_.d_model, cfg_.heads));
      layer.ln_cross.emplace(s, SublayerNorm::create(store_, cname, cfg_.d_model));
    }
    layer.ff = FeedForward::create(store_, prefix + ".ff", cfg_.d_model, cfg_.d_ff);
    layer.ln_ff = SublayerNorm::create(store_, prefix + ".ff", cfg_.d_model);
    decoder_.push_back(std::move(layer));
  }
  out_w_ = store_.create("out.weight", {cfg_.d_model, cfg_.vocab_size});
  out_b_ = store_.create("out.bias", {cfg_.vocab_size});
  init_weights(seed);
}

void TranslationModel::init_weights(std::uint64_t seed) {
  Rng rng = make_rng(derive_seed(seed, "init"));
  for (auto& p : store_.all()) {
    auto& data = p.tensor.data();
    const auto& name = p.name;
    const bool is_gain = name.size() >= 7 && name.rfind(".ln_gain") == name.size() - 8;
    if (is_gain) {
      std::fill(data.begin(), data.end(), 1.0);
      continue;
    }
    if (name == "embed.word") {
      std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(cfg_.d_model));
      for (auto& v : data) v = dist(rng);
      continue;
    }
    if (p.tensor.rank() == 2) {
      const int fan_in = p.tensor.dim(0), fan_out = p.tensor.dim(1);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (auto& v : data) v = dist(rng);
      continue;
    }
    // biases and ln_bias stay zero
  }
}

Tensor TranslationModel::apply_dropout(const Tensor& x) {
  return ops::dropout(x, cfg_.dropout, rng_, training_);
}

Tensor TranslationModel::residual_norm(const SublayerNorm& ln, const Tensor& x,
                                       const Tensor& sub) {
  return ops::layer_norm(ops::add(x, apply_dropout(sub)), ln.gain, ln.bias);
}

Tensor TranslationModel::feed_forward(const FeedForward& ff, const Tensor& x) {
  return ops::linear_forward(ops::relu(ops::linear_forward(x, ff.w1, ff.b1)), ff.w2, ff.b2);
}

Tensor TranslationModel::run_encoder(Stream s, Tensor x) {
  BoolMat self_mask(x.rows(), x.rows(), true);
  for (auto& layer : encoders_.at(s)) {
    x = residual_norm(layer.ln_attn, x, layer.self_attn.forward(x, x, x, self_mask));
    x = residual_norm(layer.ln_ff, x, feed_forward(layer.ff, x));
  }
  return x;
}

Tensor TranslationModel::encode_text_stream(Stream s, const std::vector<int>& tokens) {
  std::vector<int> with_null;
  with_null.reserve(tokens.size() + 1);
  with_null.push_back(SpecialTokens::Bos);
  for (int t : tokens) with_null.push_back(t);
  if (static_cast<int>(with_null.size()) > cfg_.max_positions) {
    throw ValueError(concat(stream_name(s), " stream length ", with_null.size(),
                            " exceeds max_positions ", cfg_.max_positions));
  }
  Tensor x = positional_encode(word_embed(with_null, word_table_));
  return run_encoder(s, apply_dropout(x));
}

Tensor TranslationModel::encode_video_stream(const Tensor& windows) {
  if (windows.rank() != 2 || windows.dim(1) != cfg_.feature_dim) {
    throw ShapeError(concat("video windows ", shape_str(windows.shape()),
                            " vs configured feature_dim ", cfg_.feature_dim));
  }
  if (windows.dim(0) > cfg_.max_positions) {
    throw ValueError(concat("video stream length ", windows.dim(0), " exceeds max_positions ",
                            cfg_.max_positions));
  }
  Tensor x = positional_encode(feature_embed_.forward(windows));
  return run_encoder(Stream::Video, apply_dropout(x));
}

EncodedStreams TranslationModel::encode(const ModelInput& input) {
  EncodedStreams out;
  if (cfg_.has(Stream::Context)) {
    Tensor h = encode_text_stream(Stream::Context, input.context_tokens);
    out.lengths[Stream::Context] = h.dim(0);
    out.h[Stream::Context] = std::move(h);
  }
  if (cfg_.has(Stream::Video)) {
    if (!input.video_windows.defined()) {
      throw ValueError("sample schema: video stream enabled but no video features given");
    }
    Tensor h = encode_video_stream(input.video_windows);
    out.lengths[Stream::Video] = h.dim(0);
    out.h[Stream::Video] = std::move(h);
  }
  if (cfg_.has(Stream::Spotting)) {
    Tensor h = encode_text_stream(Stream::Spotting, input.spotting_tokens);
    out.lengths[Stream::Spotting] = h.dim(0);
    out.h[Stream::Spotting] = std::move(h);
  }
  return out;
}

Tensor TranslationModel::decoder_logits(const EncodedStreams& encoded,
                                        const std::vector<int>& prefix) {
  if (prefix.empty() || prefix[0] != SpecialTokens::Bos) {
    throw ValueError("decoder prefix must begin with BOS");
  }
  const int t_len = static_cast<int>(prefix.size());
  if (t_len > cfg_.max_positions) {
    throw ValueError(concat("prefix length ", t_len, " exceeds max_positions ",
                            cfg_.max_positions));
  }
  for (Stream s : cfg_.enabled_streams) {
    if (!encoded.h.count(s)) {
      throw ValueError(concat("encoded streams missing ", stream_name(s)));
    }
  }
  MaskSet masks = make_masks(encoded.lengths, t_len);
  Tensor x = apply_dropout(positional_encode(word_embed(prefix, word_table_)));
  for (auto& layer : decoder_) {
    x = residual_norm(layer.ln_self, x, layer.self_attn.forward(x, x, x, masks.causal));
    for (Stream s : {Stream::Context, Stream::Video, Stream::Spotting}) {
      if (!cfg_.has(s)) continue;
      const Tensor& h = encoded.h.at(s);
      x = residual_norm(layer.ln_cross.at(s), x,
                        layer.cross_attn.at(s).forward(x, h, h, masks.cross.at(s)));
    }
    x = residual_norm(layer.ln_ff, x, feed_forward(layer.ff, x));
  }
  return ops::linear_forward(x, out_w_, out_b_);
}

Tensor TranslationModel::decode_step(const EncodedStreams& encoded,
                                     const std::vector<int>& prefix) {
  Tensor logits = decoder_logits(encoded, prefix);
  return ops::slice_rows(logits, logits.dim(0) - 1, 1);
}

}  // namespace cslt
