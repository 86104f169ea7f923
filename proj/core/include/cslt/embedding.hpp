#pragma once

#include <vector>

#include "cslt/optim.hpp"
#include "cslt/tensor.hpp"

namespace cslt {

// One token-embedding table shared by every text input stream (context,
// spottings, shifted targets). Copies of this struct alias the same
// parameter storage.
struct EmbeddingTable {
  int vocab_size = 0;
  int dim = 0;
  Tensor weights;  // [vocab_size, dim]

  static EmbeddingTable create(ParameterStore& store, const std::string& name, int vocab_size,
                               int dim);
};

// Row-gather against the shared table; gradients scatter-add back.
Tensor word_embed(const std::vector<int>& tokens, const EmbeddingTable& table);

// Adds the fixed sinusoid table: PE[pos, 2i] = sin(pos / 10000^(2i/d)),
// PE[pos, 2i+1] = cos(pos / 10000^(2i/d)). No learned parameters and no
// embedding scaling beforehand.
Tensor positional_encode(const Tensor& x);

// The PE table itself (rows [positions, d]); exposed for tests.
Tensor positional_encoding_table(int positions, int d_model);

// Linear projection into model width followed by layer norm.
struct FeatureEmbedding {
  Tensor weight;  // [D, d_model]
  Tensor bias;    // [d_model]
  Tensor ln_gain;
  Tensor ln_bias;

  static FeatureEmbedding create(ParameterStore& store, const std::string& prefix, int in_dim,
                                 int d_model);
  Tensor forward(const Tensor& windows) const;
};

}  // namespace cslt
