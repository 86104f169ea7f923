#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cslt/attention.hpp"
#include "cslt/checkpoint.hpp"
#include "cslt/errors.hpp"
#include "cslt/gradcheck.hpp"
#include "cslt/model.hpp"
#include "cslt/ops.hpp"
#include "cslt/rng.hpp"

using namespace cslt;

namespace {

ModelConfig small_config(std::set<Stream> streams = {Stream::Context, Stream::Video,
                                                     Stream::Spotting}) {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.dropout = 0.0;
  cfg.vocab_size = 12;
  cfg.max_positions = 64;
  cfg.feature_dim = 5;
  cfg.enabled_streams = std::move(streams);
  return cfg;
}

Tensor random_windows(int rows, int cols, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t = Tensor::zeros({rows, cols});
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

ModelInput sample_input(const ModelConfig& cfg, std::uint64_t seed = 5) {
  ModelInput input;
  if (cfg.has(Stream::Context)) input.context_tokens = {5, 6, 7};
  if (cfg.has(Stream::Video)) input.video_windows = random_windows(4, cfg.feature_dim, seed);
  if (cfg.has(Stream::Spotting)) input.spotting_tokens = {8, 9};
  return input;
}

}  // namespace

TEST_CASE("attention with a single key ignores the query") {
  ParameterStore store;
  MultiHeadAttention attn(store, "attn", 8, 2);
  Rng rng = make_rng(1);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& p : store.all()) {
    for (auto& v : p.tensor.data()) v = dist(rng);
  }
  Tensor k = random_windows(1, 8, 2);
  Tensor v = random_windows(1, 8, 3);
  Tensor q1 = random_windows(1, 8, 4);
  Tensor q2 = random_windows(1, 8, 5);
  BoolMat mask(1, 1, true);
  Tensor o1 = attn.forward(q1, k, v, mask);
  Tensor o2 = attn.forward(q2, k, v, mask);
  for (int j = 0; j < 8; ++j) CHECK(o1.at(0, j) == o2.at(0, j));
}

TEST_CASE("projection-free attention over two identical keys averages the values") {
  Tensor q = random_windows(1, 4, 6);
  Tensor k = Tensor::from_data({2, 4}, {1, 2, 3, 4, 1, 2, 3, 4});
  Tensor v = Tensor::from_data({2, 4}, {0, 0, 0, 8, 2, 0, 0, 0});
  BoolMat mask(1, 2, true);
  Tensor out = scaled_dot_attention(q, k, v, mask, 1);
  CHECK(out.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.at(0, 3) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("attention is row-stochastic: equal values pass through exactly") {
  Tensor q = random_windows(3, 4, 7);
  Tensor k = random_windows(5, 4, 8);
  Tensor v = Tensor::zeros({5, 4});
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) v.data()[i * 4 + j] = j + 1.0;
  BoolMat mask(3, 5, true);
  Tensor out = scaled_dot_attention(q, k, v, mask, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) CHECK(out.at(i, j) == doctest::Approx(j + 1.0).epsilon(1e-12));
}

TEST_CASE("causal mask is lower-triangular inclusive") {
  BoolMat m1 = causal_mask(1);
  CHECK(m1.at(0, 0));

  BoolMat m3 = causal_mask(3);
  const bool expect[3][3] = {{true, false, false}, {true, true, false}, {true, true, true}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(m3.at(i, j) == expect[i][j]);
}

TEST_CASE("make_masks: empty stream collapses to the null token only") {
  // a length-0 spotting stream arrives as length 1 after the null prepend
  MaskSet set = make_masks({{Stream::Spotting, 1}}, 4);
  const BoolMat& cross = set.cross.at(Stream::Spotting);
  CHECK(cross.rows == 4);
  CHECK(cross.cols == 1);
  for (int i = 0; i < 4; ++i) CHECK(cross.at(i, 0));
}

TEST_CASE("key padding mask forbids attending to pad positions") {
  BoolMat m = key_padding_mask(2, 3, 5);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(m.at(i, j));
    for (int j = 3; j < 5; ++j) CHECK(!m.at(i, j));
  }
}

TEST_CASE("attention with key padding equals attention on the unpadded keys") {
  Tensor q = random_windows(2, 4, 21);
  Tensor k = random_windows(5, 4, 22);
  Tensor v = random_windows(5, 4, 23);
  Tensor k3 = ops::slice_rows(k, 0, 3);
  Tensor v3 = ops::slice_rows(v, 0, 3);
  Tensor padded = scaled_dot_attention(q, k, v, key_padding_mask(2, 3, 5), 2);
  Tensor unpadded = scaled_dot_attention(q, k3, v3, BoolMat(2, 3, true), 2);
  for (std::size_t i = 0; i < padded.data().size(); ++i) {
    CHECK(padded.data()[i] == doctest::Approx(unpadded.data()[i]).epsilon(1e-14));
  }
}

TEST_CASE("video-only config encodes exactly the video stream") {
  ModelConfig cfg = small_config({Stream::Video});
  TranslationModel model(cfg, 3);
  ModelInput input = sample_input(cfg);
  EncodedStreams enc = model.encode(input);
  CHECK(enc.h.size() == 1);
  CHECK(enc.h.count(Stream::Video) == 1);
  CHECK(enc.h.at(Stream::Video).dim(0) == input.video_windows.dim(0));
  CHECK(enc.h.at(Stream::Video).dim(1) == cfg.d_model);
}

TEST_CASE("encoder output shape equals its input shape across lengths") {
  ModelConfig cfg = small_config({Stream::Context});
  TranslationModel model(cfg, 4);
  for (int len : {0, 1, 2, 5, 17}) {
    ModelInput input;
    input.context_tokens.assign(len, 5);
    EncodedStreams enc = model.encode(input);
    CHECK(enc.h.at(Stream::Context).dim(0) == len + 1);  // null token prepended
    CHECK(enc.h.at(Stream::Context).dim(1) == cfg.d_model);
  }
}

TEST_CASE("missing video features raise a sample-schema error") {
  ModelConfig cfg = small_config({Stream::Video});
  TranslationModel model(cfg, 3);
  ModelInput input;  // no windows
  CHECK_THROWS_WITH_AS(model.encode(input), doctest::Contains("video"), ValueError);
}

TEST_CASE("encode is deterministic in eval mode") {
  ModelConfig cfg = small_config();
  ModelInput input = sample_input(cfg);
  TranslationModel a(cfg, 99);
  TranslationModel b(cfg, 99);
  a.set_train_mode(false);
  b.set_train_mode(false);
  EncodedStreams ea = a.encode(input);
  EncodedStreams eb = b.encode(input);
  for (Stream s : {Stream::Context, Stream::Video, Stream::Spotting}) {
    const auto& da = ea.h.at(s).data();
    const auto& db = eb.h.at(s).data();
    REQUIRE(da.size() == db.size());
    for (std::size_t i = 0; i < da.size(); ++i) CHECK(da[i] == db[i]);
  }
}

TEST_CASE("decode_step: zeroed output projection gives uniform logits") {
  ModelConfig cfg = small_config();
  TranslationModel model(cfg, 7);
  auto& out_w = model.parameters().at("out.weight").tensor;
  auto& out_b = model.parameters().at("out.bias").tensor;
  std::fill(out_w.data().begin(), out_w.data().end(), 0.0);
  std::fill(out_b.data().begin(), out_b.data().end(), 0.0);
  EncodedStreams enc = model.encode(sample_input(cfg));
  Tensor logits = model.decode_step(enc, {SpecialTokens::Bos, 5});
  for (double v : logits.data()) CHECK(v == 0.0);
}

TEST_CASE("causality: logits are bitwise invariant to tokens beyond the prefix") {
  ModelConfig cfg = small_config();
  TranslationModel model(cfg, 11);
  model.set_train_mode(false);
  EncodedStreams enc = model.encode(sample_input(cfg));

  std::vector<int> prefix = {SpecialTokens::Bos, 5, 9};
  Tensor short_logits = model.decoder_logits(enc, prefix);

  std::vector<int> extended = prefix;
  extended.insert(extended.end(), {7, 3, 10});
  Tensor long_logits = model.decoder_logits(enc, extended);

  const int vocab = cfg.vocab_size;
  for (int t = 0; t < static_cast<int>(prefix.size()); ++t) {
    for (int v = 0; v < vocab; ++v) {
      CHECK(short_logits.at(t, v) == long_logits.at(t, v));
    }
  }
}

TEST_CASE("decode_step equals the teacher-forced logits at each position") {
  ModelConfig cfg = small_config();
  TranslationModel model(cfg, 13);
  model.set_train_mode(false);
  EncodedStreams enc = model.encode(sample_input(cfg));

  std::vector<int> full = {SpecialTokens::Bos, 4, 6, 8, 10};
  Tensor batch = model.decoder_logits(enc, full);
  for (int t = 1; t <= static_cast<int>(full.size()); ++t) {
    std::vector<int> prefix(full.begin(), full.begin() + t);
    Tensor step = model.decode_step(enc, prefix);
    for (int v = 0; v < cfg.vocab_size; ++v) {
      CHECK(step.at(0, v) == batch.at(t - 1, v));
    }
  }
}

TEST_CASE("perturbing the encoded video changes the logits") {
  ModelConfig cfg = small_config();
  TranslationModel model(cfg, 15);
  model.set_train_mode(false);
  ModelInput input = sample_input(cfg);
  EncodedStreams enc = model.encode(input);
  Tensor before = model.decode_step(enc, {SpecialTokens::Bos});

  ModelInput other = input;
  other.video_windows = random_windows(4, cfg.feature_dim, 999);
  EncodedStreams enc2 = model.encode(other);
  Tensor after = model.decode_step(enc2, {SpecialTokens::Bos});
  bool any_diff = false;
  for (std::size_t i = 0; i < before.data().size(); ++i) {
    if (before.data()[i] != after.data()[i]) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("disabled streams are structurally absent: input changes cannot matter") {
  ModelConfig cfg = small_config({Stream::Context, Stream::Video});
  TranslationModel model(cfg, 17);
  model.set_train_mode(false);

  ModelInput a = sample_input(cfg);
  ModelInput b = a;
  b.spotting_tokens = {1, 2, 3, 4, 5};  // ignored: stream disabled

  Tensor la = model.decode_step(model.encode(a), {SpecialTokens::Bos, 5});
  Tensor lb = model.decode_step(model.encode(b), {SpecialTokens::Bos, 5});
  for (std::size_t i = 0; i < la.data().size(); ++i) CHECK(la.data()[i] == lb.data()[i]);

  // and no decoder parameter for the spotting cascade exists
  for (const auto& p : model.parameters().all()) {
    CHECK(p.name.find("cross_spotting") == std::string::npos);
  }
}

TEST_CASE("cascade parameters exist in fixed order for enabled streams") {
  ModelConfig cfg = small_config();
  TranslationModel model(cfg, 19);
  CHECK(model.parameters().contains("decoder.layer0.cross_context.wq"));
  CHECK(model.parameters().contains("decoder.layer0.cross_video.wq"));
  CHECK(model.parameters().contains("decoder.layer0.cross_spotting.wq"));
}

TEST_CASE("prefix validation: BOS required, max_positions enforced") {
  ModelConfig cfg = small_config();
  cfg.max_positions = 8;
  TranslationModel model(cfg, 23);
  EncodedStreams enc = model.encode(sample_input(cfg));
  CHECK_THROWS_AS(model.decoder_logits(enc, {5, 6}), ValueError);
  std::vector<int> too_long(9, 5);
  too_long[0] = SpecialTokens::Bos;
  CHECK_THROWS_WITH_AS(model.decoder_logits(enc, too_long), doctest::Contains("max_positions"),
                       ValueError);
}

TEST_CASE("end-to-end gradient check: full three-stream model at d_model 8") {
  ModelConfig cfg = small_config();
  TranslationModel model(cfg, 29);
  model.set_train_mode(true);  // dropout is 0, so training mode stays deterministic
  ModelInput input = sample_input(cfg);
  const std::vector<int> prefix = {SpecialTokens::Bos, 5, 7};
  const std::vector<int> targets = {5, 7, SpecialTokens::Eos};

  auto f = [&] {
    EncodedStreams enc = model.encode(input);
    Tensor logits = model.decoder_logits(enc, prefix);
    return ops::cross_entropy_label_smoothed(logits, targets, 0.1, SpecialTokens::Pad);
  };
  GradCheckOptions opts;
  opts.max_coords_per_parameter = 6;
  auto result = gradient_check(f, model.parameters(), opts);
  INFO("worst parameter: ", result.worst_parameter);
  CHECK(result.max_rel_error <= 1e-4);
}

TEST_CASE("checkpoint round-trip restores parameters and config bitwise") {
  namespace fs = std::filesystem;
  ModelConfig cfg = small_config();
  TranslationModel model(cfg, 31);
  model.set_train_mode(false);
  std::vector<std::string> vocab = {"<pad>", "<bos>", "<eos>", "<unk>", "<sep>",
                                    "a", "b", "c", "d", "e", "f", "g"};

  const auto path = (fs::temp_directory_path() / "cslt_model_test.ckpt").string();
  save_checkpoint(path, model, vocab, {{"note", "test"}});

  CheckpointHeader header;
  auto loaded = load_checkpoint(path, &header);
  CHECK(header.vocab == vocab);
  CHECK(header.config.d_model == cfg.d_model);
  CHECK(header.config.enabled_streams == cfg.enabled_streams);
  CHECK(header.metadata.at("note") == "test");

  ModelInput input = sample_input(cfg);
  loaded->set_train_mode(false);
  Tensor a = model.decode_step(model.encode(input), {SpecialTokens::Bos, 5});
  Tensor b = loaded->decode_step(loaded->encode(input), {SpecialTokens::Bos, 5});
  for (std::size_t i = 0; i < a.data().size(); ++i) CHECK(a.data()[i] == b.data()[i]);
  fs::remove(path);
}

TEST_CASE("invalid configurations are rejected") {
  ModelConfig cfg = small_config();
  cfg.heads = 3;  // 8 % 3 != 0
  CHECK_THROWS_AS(TranslationModel(cfg, 1), ConfigError);

  cfg = small_config();
  cfg.enabled_streams.clear();
  CHECK_THROWS_AS(TranslationModel(cfg, 1), ConfigError);

  cfg = small_config({Stream::Video});
  cfg.feature_dim = 0;
  CHECK_THROWS_AS(TranslationModel(cfg, 1), ConfigError);
}
