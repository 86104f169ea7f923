#include "cslt/attention.hpp"

#include <cmath>

#include "cslt/errors.hpp"

namespace cslt {

const char* stream_name(Stream s) {
  switch (s) {
    case Stream::Context: return "context";
    case Stream::Video: return "video";
    case Stream::Spotting: return "spotting";
  }
  return "?";
}

Stream stream_from_name(const std::string& name) {
  if (name == "context") return Stream::Context;
  if (name == "video") return Stream::Video;
  if (name == "spotting") return Stream::Spotting;
  throw ConfigError(concat("unknown stream: ", name));
}

BoolMat causal_mask(int n) {
  BoolMat m(n, n, false);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) m.set(i, j, true);
  return m;
}

BoolMat key_padding_mask(int query_rows, int valid_len, int padded_len) {
  if (valid_len < 0 || padded_len < valid_len) {
    throw ConfigError(concat("key_padding_mask: valid ", valid_len, " padded ", padded_len));
  }
  BoolMat m(query_rows, padded_len, false);
  for (int i = 0; i < query_rows; ++i)
    for (int j = 0; j < valid_len; ++j) m.set(i, j, true);
  return m;
}

MaskSet make_masks(const std::map<Stream, int>& src_lengths, int tgt_length,
                   const std::map<Stream, int>& padded_lengths) {
  if (tgt_length < 1) throw ConfigError(concat("make_masks: target length ", tgt_length));
  MaskSet set;
  set.causal = causal_mask(tgt_length);
  for (const auto& [stream, len] : src_lengths) {
    int padded = len;
    auto it = padded_lengths.find(stream);
    if (it != padded_lengths.end()) padded = it->second;
    set.cross[stream] = key_padding_mask(tgt_length, len, padded);
  }
  return set;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const BoolMat& mask, int heads) {
  const int d = q.cols();
  if (k.cols() != d || v.cols() != d) {
    throw ShapeError(concat("attention: widths disagree q", shape_str(q.shape()), " k",
                            shape_str(k.shape()), " v", shape_str(v.shape())));
  }
  if (k.rows() != v.rows()) {
    throw ShapeError(concat("attention: ", k.rows(), " keys vs ", v.rows(), " values"));
  }
  if (heads < 1 || d % heads != 0) {
    throw ConfigError(concat("attention: width ", d, " not divisible by ", heads, " heads"));
  }
  if (mask.rows != q.rows() || mask.cols != k.rows()) {
    throw ShapeError(concat("attention: mask ", mask.rows, "x", mask.cols, " vs ", q.rows(),
                            " queries and ", k.rows(), " keys"));
  }
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> head_outs;
  head_outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Tensor qh = ops::slice_cols(q, h * dh, dh);
    Tensor kh = ops::slice_cols(k, h * dh, dh);
    Tensor vh = ops::slice_cols(v, h * dh, dh);
    Tensor scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), scale);
    Tensor weights = ops::softmax_rows_masked(scores, mask);
    head_outs.push_back(ops::matmul(weights, vh));
  }
  return heads == 1 ? head_outs[0] : ops::concat_cols(head_outs);
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& prefix,
                                       int d_model, int heads)
    : d_model_(d_model), heads_(heads) {
  if (heads < 1 || d_model % heads != 0) {
    throw ConfigError(concat(prefix, ": d_model ", d_model, " not divisible by ", heads,
                             " heads"));
  }
  wq_ = store.create(prefix + ".wq", {d_model, d_model});
  bq_ = store.create(prefix + ".bq", {d_model});
  wk_ = store.create(prefix + ".wk", {d_model, d_model});
  bk_ = store.create(prefix + ".bk", {d_model});
  wv_ = store.create(prefix + ".wv", {d_model, d_model});
  bv_ = store.create(prefix + ".bv", {d_model});
  wo_ = store.create(prefix + ".wo", {d_model, d_model});
  bo_ = store.create(prefix + ".bo", {d_model});
}

Tensor MultiHeadAttention::forward(const Tensor& query, const Tensor& key, const Tensor& value,
                                   const BoolMat& mask) const {
  Tensor q = ops::linear_forward(query, wq_, bq_);
  Tensor k = ops::linear_forward(key, wk_, bk_);
  Tensor v = ops::linear_forward(value, wv_, bv_);
  Tensor mixed = scaled_dot_attention(q, k, v, mask, heads_);
  return ops::linear_forward(mixed, wo_, bo_);
}

}  // namespace cslt
