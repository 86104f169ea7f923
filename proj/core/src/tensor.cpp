#include "cslt/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "cslt/errors.hpp"

namespace cslt {

namespace {
std::atomic<bool> g_finite_checks{true};
}

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError(concat("non-positive extent in shape ", shape_str(shape)));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::make_node(std::vector<int> shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  std::size_t count = shape_numel(shape);
  n->shape = std::move(shape);
  n->data.assign(count, 0.0);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return make_node(std::move(shape), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t = make_node(std::move(shape), requires_grad);
  std::fill(t.data().begin(), t.data().end(), value);
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  std::size_t count = shape_numel(shape);
  if (count != data.size()) {
    throw ShapeError(concat("shape ", shape_str(shape), " wants ", count, " values, got ",
                            data.size()));
  }
  Tensor t = make_node(std::move(shape), requires_grad);
  t.data() = std::move(data);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor::Node& Tensor::node() {
  if (!node_) throw ValueError("use of undefined tensor");
  return *node_;
}

const Tensor::Node& Tensor::node() const {
  if (!node_) throw ValueError("use of undefined tensor");
  return *node_;
}

int Tensor::dim(int i) const {
  const auto& s = node().shape;
  if (i < 0 || i >= static_cast<int>(s.size())) {
    throw ShapeError(concat("dim ", i, " out of range for ", shape_str(s)));
  }
  return s[i];
}

std::vector<double>& Tensor::grad() {
  if (!node().requires_grad) throw ValueError("tensor does not carry a gradient");
  if (node().grad.empty()) throw ValueError("gradient not populated (no backward pass yet)");
  return node().grad;
}

const std::vector<double>& Tensor::grad() const {
  if (!node().requires_grad) throw ValueError("tensor does not carry a gradient");
  if (node().grad.empty()) throw ValueError("gradient not populated (no backward pass yet)");
  return node().grad;
}

double Tensor::value() const {
  if (numel() != 1) throw ShapeError(concat("value() on non-scalar ", shape_str(shape())));
  return data()[0];
}

double Tensor::at(int i) const {
  if (i < 0 || static_cast<std::size_t>(i) >= numel()) {
    throw ShapeError(concat("index ", i, " out of range for ", shape_str(shape())));
  }
  return data()[static_cast<std::size_t>(i)];
}

double Tensor::at(int i, int j) const {
  if (rank() != 2) throw ShapeError(concat("at(i,j) on rank-", rank(), " tensor"));
  int r = dim(0), c = dim(1);
  if (i < 0 || i >= r || j < 0 || j >= c) {
    throw ShapeError(concat("index (", i, ",", j, ") out of range for ", shape_str(shape())));
  }
  return data()[static_cast<std::size_t>(i) * c + j];
}

int Tensor::rows() const {
  if (rank() == 1) return 1;
  if (rank() == 2) return dim(0);
  throw ShapeError(concat("rows() on rank-", rank(), " tensor"));
}

int Tensor::cols() const {
  if (rank() == 1) return dim(0);
  if (rank() == 2) return dim(1);
  throw ShapeError(concat("cols() on rank-", rank(), " tensor"));
}

void Tensor::zero_grad() {
  if (node().requires_grad) node().grad.clear();
}

void Tensor::check_finite(const char* what) const {
  for (double v : data()) {
    if (!std::isfinite(v)) {
      throw ValueError(concat("non-finite value in ", what, " ", shape_str(shape())));
    }
  }
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ShapeError(concat("backward() from non-scalar ", shape_str(shape())));
  }
  Node* root = node_.get();
  if (!root->requires_grad) {
    throw ValueError("backward() on a tensor with no gradient path");
  }

  // Iterative post-order DFS over parents; reverse gives topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx].get();
      ++idx;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->requires_grad && n->grad.empty()) n->grad.assign(n->data.size(), 0.0);
  }
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }

  if (finite_checks_enabled()) {
    for (Node* n : order) {
      if (!n->requires_grad) continue;
      for (double g : n->grad) {
        if (!std::isfinite(g)) {
          throw ValueError(concat("non-finite gradient after backward ", shape_str(n->shape)));
        }
      }
    }
  }
}

}  // namespace cslt
