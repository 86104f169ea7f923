#include "cslt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cslt/errors.hpp"

namespace cslt::ops {

namespace {

bool wants_grad(const Tensor& t) { return t.requires_grad(); }

void finish(Tensor& out, const char* op) {
  if (finite_checks_enabled()) out.check_finite(op);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(concat(op, ": shape mismatch ", shape_str(a.shape()), " vs ",
                            shape_str(b.shape())));
  }
}

// Rows/cols view of a rank-1 or rank-2 tensor.
struct Mat {
  int rows;
  int cols;
};

Mat as_mat(const Tensor& t, const char* op) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw ShapeError(concat(op, ": expected rank 1 or 2, got ", shape_str(t.shape())));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::make_node(a.shape(), wants_grad(a) || wants_grad(b));
  const auto& ad = a.data();
  const auto& bd = b.data();
  auto& od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + bd[i];
  if (out.requires_grad()) {
    auto& n = out.node();
    n.parents = {a.node_ptr(), b.node_ptr()};
    n.backward_fn = [](Tensor::Node& self) {
      for (auto& p : self.parents) {
        if (!p->requires_grad) continue;
        for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
      }
    };
  }
  finish(out, "add");
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::make_node(a.shape(), wants_grad(a) || wants_grad(b));
  const auto& ad = a.data();
  const auto& bd = b.data();
  auto& od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] - bd[i];
  if (out.requires_grad()) {
    auto& n = out.node();
    n.parents = {a.node_ptr(), b.node_ptr()};
    n.backward_fn = [](Tensor::Node& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (pa.requires_grad) pa.grad[i] += self.grad[i];
        if (pb.requires_grad) pb.grad[i] -= self.grad[i];
      }
    };
  }
  finish(out, "sub");
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::make_node(a.shape(), wants_grad(a) || wants_grad(b));
  const auto& ad = a.data();
  const auto& bd = b.data();
  auto& od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * bd[i];
  if (out.requires_grad()) {
    auto& n = out.node();
    n.parents = {a.node_ptr(), b.node_ptr()};
    n.backward_fn = [](Tensor::Node& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.data[i];
        if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.data[i];
      }
    };
  }
  finish(out, "mul");
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = Tensor::make_node(a.shape(), wants_grad(a));
  const auto& ad = a.data();
  auto& od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * s;
  if (out.requires_grad()) {
    auto& n = out.node();
    n.parents = {a.node_ptr()};
    n.backward_fn = [s](Tensor::Node& self) {
      auto& p = *self.parents[0];
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * s;
    };
  }
  finish(out, "scale");
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError(concat("matmul: expected rank-2 operands, got ", shape_str(a.shape()),
                            " and ", shape_str(b.shape())));
  }
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw ShapeError(concat("matmul: inner extents disagree ", shape_str(a.shape()), " x ",
                            shape_str(b.shape())));
  }
  Tensor out = Tensor::make_node({m, n}, wants_grad(a) || wants_grad(b));
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  double* od = out.data().data();
  for (int i = 0; i < m; ++i) {
    double* orow = od + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ad[static_cast<std::size_t>(i) * k + kk];
      if (av == 0.0) continue;
      const double* brow = bd + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {a.node_ptr(), b.node_ptr()};
    nd.backward_fn = [m, k, n](Tensor::Node& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      const double* g = self.grad.data();
      if (pa.requires_grad) {
        // dA = G . B^T
        for (int i = 0; i < m; ++i) {
          for (int kk = 0; kk < k; ++kk) {
            double acc = 0.0;
            const double* grow = g + static_cast<std::size_t>(i) * n;
            const double* brow = pb.data.data() + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
            pa.grad[static_cast<std::size_t>(i) * k + kk] += acc;
          }
        }
      }
      if (pb.requires_grad) {
        // dB = A^T . G
        for (int i = 0; i < m; ++i) {
          const double* arow = pa.data.data() + static_cast<std::size_t>(i) * k;
          const double* grow = g + static_cast<std::size_t>(i) * n;
          for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            double* brow = pb.grad.data() + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
          }
        }
      }
    };
  }
  finish(out, "matmul");
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError(concat("transpose: expected rank-2, got ", shape_str(a.shape())));
  }
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = Tensor::make_node({n, m}, wants_grad(a));
  const auto& ad = a.data();
  auto& od = out.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      od[static_cast<std::size_t>(j) * m + i] = ad[static_cast<std::size_t>(i) * n + j];
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {a.node_ptr()};
    nd.backward_fn = [m, n](Tensor::Node& self) {
      auto& p = *self.parents[0];
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          p.grad[static_cast<std::size_t>(i) * n + j] +=
              self.grad[static_cast<std::size_t>(j) * m + i];
    };
  }
  return out;
}

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  Mat xm = as_mat(x, "linear_forward");
  if (w.rank() != 2) {
    throw ShapeError(concat("linear_forward: weight must be rank-2, got ", shape_str(w.shape())));
  }
  const int in = w.dim(0), out_dim = w.dim(1);
  if (xm.cols != in) {
    throw ShapeError(concat("linear_forward: x ", shape_str(x.shape()), " vs w ",
                            shape_str(w.shape())));
  }
  if (b.rank() != 1 || b.dim(0) != out_dim) {
    throw ShapeError(concat("linear_forward: bias ", shape_str(b.shape()), " vs w ",
                            shape_str(w.shape())));
  }
  std::vector<int> out_shape = (x.rank() == 1) ? std::vector<int>{out_dim}
                                               : std::vector<int>{xm.rows, out_dim};
  Tensor out =
      Tensor::make_node(out_shape, wants_grad(x) || wants_grad(w) || wants_grad(b));
  const double* xd = x.data().data();
  const double* wd = w.data().data();
  const double* bd = b.data().data();
  double* od = out.data().data();
  for (int i = 0; i < xm.rows; ++i) {
    double* orow = od + static_cast<std::size_t>(i) * out_dim;
    for (int j = 0; j < out_dim; ++j) orow[j] = bd[j];
    const double* xrow = xd + static_cast<std::size_t>(i) * in;
    for (int kk = 0; kk < in; ++kk) {
      const double xv = xrow[kk];
      if (xv == 0.0) continue;
      const double* wrow = wd + static_cast<std::size_t>(kk) * out_dim;
      for (int j = 0; j < out_dim; ++j) orow[j] += xv * wrow[j];
    }
  }
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {x.node_ptr(), w.node_ptr(), b.node_ptr()};
    const int rows = xm.rows;
    nd.backward_fn = [rows, in, out_dim](Tensor::Node& self) {
      auto& px = *self.parents[0];
      auto& pw = *self.parents[1];
      auto& pb = *self.parents[2];
      const double* g = self.grad.data();
      for (int i = 0; i < rows; ++i) {
        const double* grow = g + static_cast<std::size_t>(i) * out_dim;
        const double* xrow = px.data.data() + static_cast<std::size_t>(i) * in;
        if (px.requires_grad) {
          double* xgrow = px.grad.data() + static_cast<std::size_t>(i) * in;
          for (int kk = 0; kk < in; ++kk) {
            const double* wrow = pw.data.data() + static_cast<std::size_t>(kk) * out_dim;
            double acc = 0.0;
            for (int j = 0; j < out_dim; ++j) acc += grow[j] * wrow[j];
            xgrow[kk] += acc;
          }
        }
        if (pw.requires_grad) {
          for (int kk = 0; kk < in; ++kk) {
            const double xv = xrow[kk];
            if (xv == 0.0) continue;
            double* wgrow = pw.grad.data() + static_cast<std::size_t>(kk) * out_dim;
            for (int j = 0; j < out_dim; ++j) wgrow[j] += xv * grow[j];
          }
        }
        if (pb.requires_grad) {
          for (int j = 0; j < out_dim; ++j) pb.grad[j] += grow[j];
        }
      }
    };
  }
  finish(out, "linear_forward");
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  int cols = parts[0].cols();
  int rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw ShapeError(concat("concat_rows: column mismatch ", cols, " vs ", p.cols()));
    }
    rows += p.rows();
    rg = rg || p.requires_grad();
  }
  Tensor out = Tensor::make_node({rows, cols}, rg);
  auto& od = out.data();
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& pd = p.data();
    std::copy(pd.begin(), pd.end(), od.begin() + off);
    off += pd.size();
  }
  if (rg) {
    auto& nd = out.node();
    for (const auto& p : parts) nd.parents.push_back(p.node_ptr());
    nd.backward_fn = [](Tensor::Node& self) {
      std::size_t off2 = 0;
      for (auto& p : self.parents) {
        const std::size_t n = p->data.size();
        if (p->requires_grad) {
          for (std::size_t i = 0; i < n; ++i) p->grad[i] += self.grad[off2 + i];
        }
        off2 += n;
      }
    };
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  int rows = parts[0].rows();
  int cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError(concat("concat_cols: row mismatch ", rows, " vs ", p.rows()));
    }
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Tensor out = Tensor::make_node({rows, cols}, rg);
  auto& od = out.data();
  int coff = 0;
  for (const auto& p : parts) {
    const auto& pd = p.data();
    const int pc = p.cols();
    for (int i = 0; i < rows; ++i) {
      std::copy(pd.begin() + static_cast<std::size_t>(i) * pc,
                pd.begin() + static_cast<std::size_t>(i + 1) * pc,
                od.begin() + static_cast<std::size_t>(i) * cols + coff);
    }
    coff += pc;
  }
  if (rg) {
    auto& nd = out.node();
    for (const auto& p : parts) nd.parents.push_back(p.node_ptr());
    nd.backward_fn = [rows, cols](Tensor::Node& self) {
      int coff2 = 0;
      for (auto& p : self.parents) {
        const int pc = static_cast<int>(p->data.size()) / rows;
        if (p->requires_grad) {
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < pc; ++j)
              p->grad[static_cast<std::size_t>(i) * pc + j] +=
                  self.grad[static_cast<std::size_t>(i) * cols + coff2 + j];
        }
        coff2 += pc;
      }
    };
  }
  return out;
}

Tensor slice_cols(const Tensor& a, int start, int len) {
  Mat m = as_mat(a, "slice_cols");
  if (start < 0 || len <= 0 || start + len > m.cols) {
    throw ShapeError(concat("slice_cols: [", start, ",", start + len, ") out of ", m.cols));
  }
  Tensor out = Tensor::make_node({m.rows, len}, wants_grad(a));
  const auto& ad = a.data();
  auto& od = out.data();
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < len; ++j)
      od[static_cast<std::size_t>(i) * len + j] =
          ad[static_cast<std::size_t>(i) * m.cols + start + j];
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {a.node_ptr()};
    const int cols = m.cols, rows = m.rows;
    nd.backward_fn = [rows, cols, start, len](Tensor::Node& self) {
      auto& p = *self.parents[0];
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < len; ++j)
          p.grad[static_cast<std::size_t>(i) * cols + start + j] +=
              self.grad[static_cast<std::size_t>(i) * len + j];
    };
  }
  return out;
}

Tensor slice_rows(const Tensor& a, int start, int len) {
  if (a.rank() != 2) {
    throw ShapeError(concat("slice_rows: expected rank-2, got ", shape_str(a.shape())));
  }
  const int rows = a.dim(0), cols = a.dim(1);
  if (start < 0 || len <= 0 || start + len > rows) {
    throw ShapeError(concat("slice_rows: [", start, ",", start + len, ") out of ", rows));
  }
  Tensor out = Tensor::make_node({len, cols}, wants_grad(a));
  const auto& ad = a.data();
  auto& od = out.data();
  std::copy(ad.begin() + static_cast<std::size_t>(start) * cols,
            ad.begin() + static_cast<std::size_t>(start + len) * cols, od.begin());
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {a.node_ptr()};
    nd.backward_fn = [start, len, cols](Tensor::Node& self) {
      auto& p = *self.parents[0];
      for (std::size_t i = 0; i < static_cast<std::size_t>(len) * cols; ++i)
        p.grad[static_cast<std::size_t>(start) * cols + i] += self.grad[i];
    };
  }
  return out;
}

Tensor row_gather(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) {
    throw ShapeError(concat("row_gather: table must be rank-2, got ", shape_str(table.shape())));
  }
  const int vocab = table.dim(0), d = table.dim(1);
  for (int id : ids) {
    if (id < 0 || id >= vocab) {
      throw VocabError(concat("token id ", id, " outside vocabulary of size ", vocab));
    }
  }
  if (ids.empty()) throw ShapeError("row_gather: empty id list");
  const int u = static_cast<int>(ids.size());
  Tensor out = Tensor::make_node({u, d}, wants_grad(table));
  const auto& td = table.data();
  auto& od = out.data();
  for (int i = 0; i < u; ++i)
    std::copy(td.begin() + static_cast<std::size_t>(ids[i]) * d,
              td.begin() + static_cast<std::size_t>(ids[i] + 1) * d,
              od.begin() + static_cast<std::size_t>(i) * d);
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {table.node_ptr()};
    nd.backward_fn = [ids, d](Tensor::Node& self) {
      auto& p = *self.parents[0];
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < d; ++j)
          p.grad[static_cast<std::size_t>(ids[i]) * d + j] += self.grad[i * d + j];
    };
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  Mat m = as_mat(x, "layer_norm");
  const int d = m.cols;
  if (d == 0) throw ShapeError("layer_norm: empty normalized dimension");
  if (eps <= 0.0) throw ValueError("layer_norm: eps must be positive");
  if (gain.rank() != 1 || gain.dim(0) != d || bias.rank() != 1 || bias.dim(0) != d) {
    throw ShapeError(concat("layer_norm: gain/bias ", shape_str(gain.shape()), "/",
                            shape_str(bias.shape()), " vs row width ", d));
  }
  Tensor out =
      Tensor::make_node(x.shape(), wants_grad(x) || wants_grad(gain) || wants_grad(bias));
  std::vector<double> xhat(static_cast<std::size_t>(m.rows) * d);
  std::vector<double> inv_std(m.rows);
  const auto& xd = x.data();
  const auto& gd = gain.data();
  const auto& bd = bias.data();
  auto& od = out.data();
  for (int i = 0; i < m.rows; ++i) {
    const double* row = xd.data() + static_cast<std::size_t>(i) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += row[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= d;
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[i] = istd;
    for (int j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * istd;
      xhat[static_cast<std::size_t>(i) * d + j] = h;
      od[static_cast<std::size_t>(i) * d + j] = gd[j] * h + bd[j];
    }
  }
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {x.node_ptr(), gain.node_ptr(), bias.node_ptr()};
    const int rows = m.rows;
    nd.backward_fn = [rows, d, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)](Tensor::Node& self) {
      auto& px = *self.parents[0];
      auto& pg = *self.parents[1];
      auto& pb = *self.parents[2];
      for (int i = 0; i < rows; ++i) {
        const double* g = self.grad.data() + static_cast<std::size_t>(i) * d;
        const double* h = xhat.data() + static_cast<std::size_t>(i) * d;
        if (pg.requires_grad || pb.requires_grad) {
          for (int j = 0; j < d; ++j) {
            if (pg.requires_grad) pg.grad[j] += g[j] * h[j];
            if (pb.requires_grad) pb.grad[j] += g[j];
          }
        }
        if (px.requires_grad) {
          double sum_dh = 0.0, sum_dh_h = 0.0;
          for (int j = 0; j < d; ++j) {
            const double dh = g[j] * pg.data[j];
            sum_dh += dh;
            sum_dh_h += dh * h[j];
          }
          const double inv_d = 1.0 / d;
          for (int j = 0; j < d; ++j) {
            const double dh = g[j] * pg.data[j];
            px.grad[static_cast<std::size_t>(i) * d + j] +=
                inv_std[i] * (dh - inv_d * sum_dh - h[j] * inv_d * sum_dh_h);
          }
        }
      }
    };
  }
  finish(out, "layer_norm");
  return out;
}

namespace {

Tensor softmax_impl(const Tensor& x, const BoolMat* mask) {
  Mat m = as_mat(x, "softmax");
  const int n = m.cols;
  if (n < 1) throw ShapeError("softmax: empty axis");
  if (mask && (mask->rows != m.rows || mask->cols != n)) {
    throw ShapeError(concat("softmax: mask ", mask->rows, "x", mask->cols, " vs input ",
                            m.rows, "x", n));
  }
  Tensor out = Tensor::make_node(x.shape(), wants_grad(x));
  const auto& xd = x.data();
  auto& od = out.data();
  for (int i = 0; i < m.rows; ++i) {
    const double* row = xd.data() + static_cast<std::size_t>(i) * n;
    double* orow = od.data() + static_cast<std::size_t>(i) * n;
    double mx = -std::numeric_limits<double>::infinity();
    int allowed = 0;
    for (int j = 0; j < n; ++j) {
      if (mask && !mask->at(i, j)) continue;
      ++allowed;
      mx = std::max(mx, row[j]);
    }
    if (allowed == 0) {
      throw ValueError(concat("softmax: mask row ", i, " has no allowed positions"));
    }
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
      if (mask && !mask->at(i, j)) {
        orow[j] = 0.0;
        continue;
      }
      const double e = std::exp(row[j] - mx);
      orow[j] = e;
      denom += e;
    }
    for (int j = 0; j < n; ++j) orow[j] /= denom;
  }
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {x.node_ptr()};
    // y_j = 0 on masked entries, which makes the standard formula mask-safe.
    std::vector<double> y = out.data();
    const int rows = m.rows;
    nd.backward_fn = [rows, n, y = std::move(y)](Tensor::Node& self) {
      auto& p = *self.parents[0];
      for (int i = 0; i < rows; ++i) {
        const double* g = self.grad.data() + static_cast<std::size_t>(i) * n;
        const double* yr = y.data() + static_cast<std::size_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += g[j] * yr[j];
        for (int j = 0; j < n; ++j)
          p.grad[static_cast<std::size_t>(i) * n + j] += yr[j] * (g[j] - dot);
      }
    };
  }
  finish(out, "softmax");
  return out;
}

}  // namespace

Tensor softmax_rows(const Tensor& x) { return softmax_impl(x, nullptr); }

Tensor softmax_rows_masked(const Tensor& x, const BoolMat& mask) {
  return softmax_impl(x, &mask);
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::make_node(x.shape(), wants_grad(x));
  const auto& xd = x.data();
  auto& od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {x.node_ptr()};
    nd.backward_fn = [](Tensor::Node& self) {
      auto& p = *self.parents[0];
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (p.data[i] > 0.0) p.grad[i] += self.grad[i];
    };
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw ValueError(concat("dropout: rate ", rate, " not in [0,1)"));
  if (!training || rate == 0.0) return x;
  Tensor out = Tensor::make_node(x.shape(), wants_grad(x));
  const double keep = 1.0 - rate;
  const double inv_keep = 1.0 / keep;
  std::bernoulli_distribution dist(keep);
  std::vector<std::uint8_t> mask(x.numel());
  const auto& xd = x.data();
  auto& od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) {
    mask[i] = dist(rng) ? 1 : 0;
    od[i] = mask[i] ? xd[i] * inv_keep : 0.0;
  }
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {x.node_ptr()};
    nd.backward_fn = [mask = std::move(mask), inv_keep](Tensor::Node& self) {
      auto& p = *self.parents[0];
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (mask[i]) p.grad[i] += self.grad[i] * inv_keep;
    };
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  Tensor out = Tensor::make_node({1}, wants_grad(x));
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  out.data()[0] = acc;
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {x.node_ptr()};
    nd.backward_fn = [](Tensor::Node& self) {
      auto& p = *self.parents[0];
      const double g = self.grad[0];
      for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
    };
  }
  finish(out, "sum_all");
  return out;
}

Tensor dot_const(const Tensor& x, const std::vector<double>& w) {
  if (w.size() != x.numel()) {
    throw ShapeError(concat("dot_const: ", w.size(), " weights vs ", x.numel(), " elements"));
  }
  Tensor out = Tensor::make_node({1}, wants_grad(x));
  double acc = 0.0;
  const auto& xd = x.data();
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * xd[i];
  out.data()[0] = acc;
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {x.node_ptr()};
    nd.backward_fn = [w](Tensor::Node& self) {
      auto& p = *self.parents[0];
      const double g = self.grad[0];
      for (std::size_t i = 0; i < w.size(); ++i) p.grad[i] += g * w[i];
    };
  }
  finish(out, "dot_const");
  return out;
}

CeSum cross_entropy_sum(const Tensor& logits, const std::vector<int>& targets, double smoothing,
                        int pad_id) {
  if (logits.rank() != 2) {
    throw ShapeError(concat("cross_entropy: logits must be rank-2, got ",
                            shape_str(logits.shape())));
  }
  const int t_len = logits.dim(0), vocab = logits.dim(1);
  if (static_cast<int>(targets.size()) != t_len) {
    throw ShapeError(concat("cross_entropy: ", targets.size(), " targets vs ", t_len,
                            " logit rows"));
  }
  if (smoothing < 0.0 || smoothing >= 1.0) {
    throw ValueError(concat("cross_entropy: smoothing ", smoothing, " not in [0,1)"));
  }
  if (smoothing > 0.0 && vocab < 2) {
    throw ConfigError("cross_entropy: smoothing needs vocabulary size >= 2");
  }
  int count = 0;
  for (int tgt : targets) {
    if (tgt == pad_id) continue;
    if (tgt < 0 || tgt >= vocab) {
      throw VocabError(concat("target id ", tgt, " outside vocabulary of size ", vocab));
    }
    ++count;
  }
  if (count == 0) throw ValueError("cross_entropy: all positions padded, mean undefined");

  Tensor out = Tensor::make_node({1}, wants_grad(logits));
  const auto& xd = logits.data();
  // probs saved for the backward pass; pad rows stay zero.
  std::vector<double> probs(static_cast<std::size_t>(t_len) * vocab, 0.0);
  const double off_mass = (vocab > 1) ? smoothing / (vocab - 1) : 0.0;
  const double on_mass = 1.0 - smoothing;
  double total = 0.0;
  for (int t = 0; t < t_len; ++t) {
    if (targets[t] == pad_id) continue;
    const double* row = xd.data() + static_cast<std::size_t>(t) * vocab;
    double mx = row[0];
    for (int v = 1; v < vocab; ++v) mx = std::max(mx, row[v]);
    double denom = 0.0;
    for (int v = 0; v < vocab; ++v) denom += std::exp(row[v] - mx);
    const double log_z = mx + std::log(denom);
    double row_sum = 0.0;
    for (int v = 0; v < vocab; ++v) {
      probs[static_cast<std::size_t>(t) * vocab + v] = std::exp(row[v] - log_z);
      row_sum += row[v];
    }
    // -sum_v q(v) log p(v) with q = (1-s) on target, s/(V-1) elsewhere.
    const double x_tgt = row[targets[t]];
    total += log_z - on_mass * x_tgt - off_mass * (row_sum - x_tgt);
  }
  out.data()[0] = total;
  if (out.requires_grad()) {
    auto& nd = out.node();
    nd.parents = {logits.node_ptr()};
    nd.backward_fn = [t_len, vocab, targets, pad_id, on_mass, off_mass,
                      probs = std::move(probs)](Tensor::Node& self) {
      auto& p = *self.parents[0];
      const double g = self.grad[0];
      for (int t = 0; t < t_len; ++t) {
        if (targets[t] == pad_id) continue;
        for (int v = 0; v < vocab; ++v) {
          const double q = (v == targets[t]) ? on_mass : off_mass;
          p.grad[static_cast<std::size_t>(t) * vocab + v] +=
              g * (probs[static_cast<std::size_t>(t) * vocab + v] - q);
        }
      }
    };
  }
  finish(out, "cross_entropy");
  return {out, count};
}

Tensor cross_entropy_label_smoothed(const Tensor& logits, const std::vector<int>& targets,
                                    double smoothing, int pad_id) {
  CeSum s = cross_entropy_sum(logits, targets, smoothing, pad_id);
  return scale(s.sum, 1.0 / s.count);
}

}  // namespace cslt::ops
