#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cslt/attention.hpp"
#include "cslt/embedding.hpp"
#include "cslt/optim.hpp"
#include "cslt/rng.hpp"
#include "cslt/tensor.hpp"

namespace cslt {

struct ModelConfig {
  int d_model = 512;
  int d_ff = 1024;
  int layers = 2;
  int heads = 8;
  double dropout = 0.1;
  int vocab_size = 0;
  int max_positions = 512;
  // Width of one video window vector (reducer output), required when the
  // video stream is enabled.
  int feature_dim = 0;
  int window = 16;
  int stride = 4;
  std::set<Stream> enabled_streams = {Stream::Context, Stream::Video, Stream::Spotting};

  void validate() const;
  bool has(Stream s) const { return enabled_streams.count(s) > 0; }
};

// Inputs for one sample, already tokenized / windowed. Empty text streams
// are allowed; the model prepends a learned null token to every text
// stream so a length-0 source becomes length-1.
struct ModelInput {
  std::vector<int> context_tokens;
  Tensor video_windows;  // [W, feature_dim]; undefined when video disabled
  std::vector<int> spotting_tokens;
};

struct EncodedStreams {
  std::map<Stream, Tensor> h;
  std::map<Stream, int> lengths;
};

struct FeedForward {
  Tensor w1, b1, w2, b2;
  static FeedForward create(ParameterStore& store, const std::string& prefix, int d_model,
                            int d_ff);
};

struct SublayerNorm {
  Tensor gain, bias;
  static SublayerNorm create(ParameterStore& store, const std::string& prefix, int d_model);
};

struct EncoderLayer {
  MultiHeadAttention self_attn;
  SublayerNorm ln_attn;
  FeedForward ff;
  SublayerNorm ln_ff;
};

struct DecoderLayer {
  MultiHeadAttention self_attn;
  SublayerNorm ln_self;
  // Cross-attention exists exactly for enabled streams, applied in fixed
  // cascade order context -> video -> spotting; each block's output is the
  // next block's query.
  std::map<Stream, MultiHeadAttention> cross_attn;
  std::map<Stream, SublayerNorm> ln_cross;
  FeedForward ff;
  SublayerNorm ln_ff;
};

class TranslationModel {
 public:
  explicit TranslationModel(ModelConfig cfg, std::uint64_t seed = 1);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  EmbeddingTable& word_table() { return word_table_; }

  void set_train_mode(bool training) { training_ = training; }
  bool train_mode() const { return training_; }
  void reseed(std::uint64_t seed) { rng_ = make_rng(seed); }

  // Runs every enabled stream's embedding + encoder stack.
  EncodedStreams encode(const ModelInput& input);

  // Full teacher-forced decoder pass over prefix (must begin with BOS);
  // returns logits [len(prefix), vocab].
  Tensor decoder_logits(const EncodedStreams& encoded, const std::vector<int>& prefix);

  // Last-position logits [vocab] for the next token after prefix.
  Tensor decode_step(const EncodedStreams& encoded, const std::vector<int>& prefix);

 private:
  Tensor encode_text_stream(Stream s, const std::vector<int>& tokens);
  Tensor encode_video_stream(const Tensor& windows);
  Tensor run_encoder(Stream s, Tensor x);
  Tensor apply_dropout(const Tensor& x);
  Tensor residual_norm(const SublayerNorm& ln, const Tensor& x, const Tensor& sub);
  Tensor feed_forward(const FeedForward& ff, const Tensor& x);
  void init_weights(std::uint64_t seed);

  ModelConfig cfg_;
  ParameterStore store_;
  EmbeddingTable word_table_;
  FeatureEmbedding feature_embed_;
  std::map<Stream, std::vector<EncoderLayer>> encoders_;
  std::vector<DecoderLayer> decoder_;
  Tensor out_w_, out_b_;
  bool training_ = false;
  Rng rng_;
};

// Token id conventions shared across the pipeline.
struct SpecialTokens {
  static constexpr int Pad = 0;
  static constexpr int Bos = 1;
  static constexpr int Eos = 2;
  static constexpr int Unk = 3;
  static constexpr int Sep = 4;
  static constexpr int Count = 5;
};

}  // namespace cslt
