#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace cslt {

// Dense row-major tensor of doubles with an optional reverse-mode tape.
//
// A Tensor is a cheap handle onto shared storage: copies alias the same
// node, which is what lets one embedding table serve several input
// streams. Ops record a backward closure and their parent handles; calling
// backward() on a scalar walks the recorded graph in reverse topological
// order and accumulates into each requires-grad node's grad buffer.
// Gradients accumulate additively across backward calls until cleared.
class Tensor {
 public:
  struct Node {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized like data iff requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
  };

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node().shape; }
  int rank() const { return static_cast<int>(node().shape.size()); }
  int dim(int i) const;
  std::size_t numel() const { return node().data.size(); }

  std::vector<double>& data() { return node().data; }
  const std::vector<double>& data() const { return node().data; }
  // Gradient buffer; allocated by the first backward pass that reaches
  // this node and released by zero_grad(). Throws when not populated.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool grad_populated() const { return node().requires_grad && !node().grad.empty(); }
  bool requires_grad() const { return node().requires_grad; }

  // Value of a one-element tensor.
  double value() const;
  double at(int i) const;
  double at(int i, int j) const;

  // Rows x cols of a rank-2 tensor (rank-1 counts as one row).
  int rows() const;
  int cols() const;

  void zero_grad();

  // Reverse pass from a scalar; seeds d(self)/d(self) = 1 and accumulates
  // into every reachable requires-grad node.
  void backward() const;

  // Throws ValueError if any element is non-finite.
  void check_finite(const char* what) const;

  // True if both handles share storage.
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  // Op-construction surface (used by ops.cpp).
  static Tensor make_node(std::vector<int> shape, bool requires_grad);
  Node& node();
  const Node& node() const;
  std::shared_ptr<Node> node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Global toggle for per-op output finiteness checks (default on; desk-scale
// tensors make the scan cheap).
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

}  // namespace cslt
