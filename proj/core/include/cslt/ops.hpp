#pragma once

#include <cstdint>
#include <vector>

#include "cslt/rng.hpp"
#include "cslt/tensor.hpp"

namespace cslt {

// Row-major boolean matrix; true = attend-allowed.
struct BoolMat {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> v;

  BoolMat() = default;
  BoolMat(int r, int c, bool fill = true)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill ? 1 : 0) {}

  bool at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c] != 0; }
  void set(int r, int c, bool b) { v[static_cast<std::size_t>(r) * cols + c] = b ? 1 : 0; }
};

namespace ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// a [m,k] x b [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// x [*, in] . w [in, out] + b [out] -> [*, out]; rank of x is 1 or 2.
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int start, int len);
Tensor slice_rows(const Tensor& a, int start, int len);

// table [V, d], ids in [0, V) -> [ids.size(), d]; backward scatter-adds.
Tensor row_gather(const Tensor& table, const std::vector<int>& ids);

// Per-row normalization with population variance; constant rows map to
// gain*0 + bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor softmax_rows(const Tensor& x);
// Masked variant: disallowed positions get probability 0. A row with no
// allowed position is a degenerate mask and throws.
Tensor softmax_rows_masked(const Tensor& x, const BoolMat& mask);

Tensor relu(const Tensor& x);

// Inverted dropout; identity when !training or rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

Tensor sum_all(const Tensor& x);

// sum_i w[i] * x[i] with constant weights; handy for reducing any output
// to a scalar in gradient checks.
Tensor dot_const(const Tensor& x, const std::vector<double>& w);

// Label-smoothed cross entropy over logits [T, V] vs targets (length T).
// Pad positions are excluded; the result is the mean over non-pad rows.
Tensor cross_entropy_label_smoothed(const Tensor& logits, const std::vector<int>& targets,
                                    double smoothing, int pad_id);

// Sum form plus the non-pad count, for combining samples into one batch
// mean without padding waste.
struct CeSum {
  Tensor sum;
  int count = 0;
};
CeSum cross_entropy_sum(const Tensor& logits, const std::vector<int>& targets, double smoothing,
                        int pad_id);

}  // namespace ops
}  // namespace cslt
