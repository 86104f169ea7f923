#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cslt/tensor.hpp"

namespace cslt {

// A trainable leaf tensor plus its Adam moment buffers.
struct Parameter {
  std::string name;
  Tensor tensor;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  long step_count = 0;

  Parameter() = default;
  Parameter(std::string n, Tensor t);
};

// Owns a model's parameters; names are unique dotted paths.
class ParameterStore {
 public:
  Tensor create(const std::string& name, std::vector<int> shape);
  Tensor add(const std::string& name, Tensor t);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;

  void zero_grad();
  double grad_norm() const;
  double value_norm() const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update in place; clears gradients afterwards.
// Throws ValueError if a parameter has no populated gradient buffer.
void adam_step(ParameterStore& params, double lr, const AdamConfig& cfg = {});

}  // namespace cslt
