#include "cslt/embedding.hpp"

#include <cmath>

#include "cslt/errors.hpp"
#include "cslt/ops.hpp"

namespace cslt {

EmbeddingTable EmbeddingTable::create(ParameterStore& store, const std::string& name,
                                      int vocab_size, int dim) {
  if (vocab_size < 1 || dim < 1) {
    throw ConfigError(concat("embedding table ", name, ": vocab ", vocab_size, ", dim ", dim));
  }
  EmbeddingTable t;
  t.vocab_size = vocab_size;
  t.dim = dim;
  t.weights = store.create(name, {vocab_size, dim});
  return t;
}

Tensor word_embed(const std::vector<int>& tokens, const EmbeddingTable& table) {
  return ops::row_gather(table.weights, tokens);
}

Tensor positional_encoding_table(int positions, int d_model) {
  if (d_model % 2 != 0) {
    throw ConfigError(concat("positional encoding needs even d_model, got ", d_model));
  }
  if (positions < 1) throw ConfigError(concat("positional encoding positions: ", positions));
  Tensor pe = Tensor::zeros({positions, d_model});
  auto& d = pe.data();
  for (int pos = 0; pos < positions; ++pos) {
    for (int i = 0; i < d_model / 2; ++i) {
      const double angle = pos / std::pow(10000.0, (2.0 * i) / d_model);
      d[static_cast<std::size_t>(pos) * d_model + 2 * i] = std::sin(angle);
      d[static_cast<std::size_t>(pos) * d_model + 2 * i + 1] = std::cos(angle);
    }
  }
  return pe;
}

Tensor positional_encode(const Tensor& x) {
  if (x.rank() != 2) {
    throw ShapeError(concat("positional_encode: expected [N, d], got ", shape_str(x.shape())));
  }
  Tensor pe = positional_encoding_table(x.dim(0), x.dim(1));
  return ops::add(x, pe);
}

FeatureEmbedding FeatureEmbedding::create(ParameterStore& store, const std::string& prefix,
                                          int in_dim, int d_model) {
  FeatureEmbedding fe;
  fe.weight = store.create(prefix + ".weight", {in_dim, d_model});
  fe.bias = store.create(prefix + ".bias", {d_model});
  fe.ln_gain = store.create(prefix + ".ln_gain", {d_model});
  fe.ln_bias = store.create(prefix + ".ln_bias", {d_model});
  return fe;
}

Tensor FeatureEmbedding::forward(const Tensor& windows) const {
  Tensor projected = ops::linear_forward(windows, weight, bias);
  return ops::layer_norm(projected, ln_gain, ln_bias);
}

}  // namespace cslt
