#pragma once

#include <map>
#include <string>

#include "cslt/ops.hpp"
#include "cslt/optim.hpp"

namespace cslt {

enum class Stream { Context, Video, Spotting };

const char* stream_name(Stream s);
Stream stream_from_name(const std::string& name);

// Lower-triangular inclusive causal mask [n, n].
BoolMat causal_mask(int n);

// Key-padding mask [query_rows, padded_len] allowing columns < valid_len.
BoolMat key_padding_mask(int query_rows, int valid_len, int padded_len);

struct MaskSet {
  BoolMat causal;                     // [T, T]
  std::map<Stream, BoolMat> cross;    // [T, source length] per stream
};

// Builds the decoder-side masks for one sample. Source lengths are
// post-null-token (so >= 1); a padded length < valid length is an error.
MaskSet make_masks(const std::map<Stream, int>& src_lengths, int tgt_length,
                   const std::map<Stream, int>& padded_lengths = {});

// Standard multi-head scaled dot-product attention with learned
// projections. Scale is 1/sqrt(d/heads); masked positions are excluded
// from the softmax support.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& prefix, int d_model, int heads);

  Tensor forward(const Tensor& query, const Tensor& key, const Tensor& value,
                 const BoolMat& mask) const;

  int heads() const { return heads_; }

 private:
  Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
  int d_model_ = 0;
  int heads_ = 0;
};

// Projection-free attention core, used directly by tests.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const BoolMat& mask, int heads);

}  // namespace cslt
