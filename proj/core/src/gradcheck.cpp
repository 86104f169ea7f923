#include "cslt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cslt/errors.hpp"
#include "cslt/rng.hpp"

namespace cslt {

GradCheckResult gradient_check(const std::function<Tensor()>& f, ParameterStore& params,
                               const GradCheckOptions& opts) {
  params.zero_grad();
  Tensor loss = f();
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params.all()) {
    // a parameter the computation never touches has zero gradient
    analytic.push_back(p.tensor.grad_populated() ? p.tensor.grad()
                                                 : std::vector<double>(p.tensor.numel(), 0.0));
  }
  params.zero_grad();

  GradCheckResult result;
  Rng rng = make_rng(opts.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params.all()[pi];
    const std::size_t n = p.tensor.numel();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (opts.max_coords_per_parameter > 0 &&
        n > static_cast<std::size_t>(opts.max_coords_per_parameter)) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(opts.max_coords_per_parameter));
    }
    auto& data = p.tensor.data();
    for (std::size_t c : coords) {
      const double saved = data[c];
      data[c] = saved + opts.h;
      const double up = f().value();
      data[c] = saved - opts.h;
      const double down = f().value();
      data[c] = saved;
      const double numeric = (up - down) / (2.0 * opts.h);
      const double a = analytic[pi][c];
      const double rel =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = p.name;
        result.worst_coordinate = static_cast<int>(c);
      }
    }
  }
  return result;
}

}  // namespace cslt
