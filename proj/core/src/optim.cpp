#include "cslt/optim.hpp"

#include <cmath>

#include "cslt/errors.hpp"

namespace cslt {

Parameter::Parameter(std::string n, Tensor t) : name(std::move(n)), tensor(std::move(t)) {
  adam_m.assign(tensor.numel(), 0.0);
  adam_v.assign(tensor.numel(), 0.0);
}

Tensor ParameterStore::create(const std::string& name, std::vector<int> shape) {
  return add(name, Tensor::zeros(std::move(shape), /*requires_grad=*/true));
}

Tensor ParameterStore::add(const std::string& name, Tensor t) {
  if (index_.count(name)) throw ConfigError(concat("duplicate parameter name: ", name));
  if (!t.requires_grad()) throw ConfigError(concat("parameter must require grad: ", name));
  index_[name] = params_.size();
  params_.emplace_back(name, t);
  return t;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError(concat("unknown parameter: ", name));
  return params_[it->second];
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError(concat("unknown parameter: ", name));
  return params_[it->second];
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

double ParameterStore::grad_norm() const {
  double acc = 0.0;
  for (const auto& p : params_) {
    if (!p.tensor.grad_populated()) continue;
    for (double g : p.tensor.grad()) acc += g * g;
  }
  return std::sqrt(acc);
}

double ParameterStore::value_norm() const {
  double acc = 0.0;
  for (const auto& p : params_)
    for (double v : p.tensor.data()) acc += v * v;
  return std::sqrt(acc);
}

void adam_step(ParameterStore& params, double lr, const AdamConfig& cfg) {
  for (auto& p : params.all()) {
    auto& t = p.tensor;
    if (!t.grad_populated()) {
      throw ValueError(concat("uninitialized gradient for parameter ", p.name,
                              " (no completed backward pass)"));
    }
    p.step_count += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step_count));
    auto& data = t.data();
    auto& grad = t.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      p.adam_m[i] = cfg.beta1 * p.adam_m[i] + (1.0 - cfg.beta1) * g;
      p.adam_v[i] = cfg.beta2 * p.adam_v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = p.adam_m[i] / bc1;
      const double v_hat = p.adam_v[i] / bc2;
      data[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
    if (finite_checks_enabled()) t.check_finite(p.name.c_str());
  }
  params.zero_grad();
}

}  // namespace cslt
