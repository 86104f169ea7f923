#pragma once

#include <functional>
#include <string>

#include "cslt/optim.hpp"
#include "cslt/tensor.hpp"

namespace cslt {

struct GradCheckOptions {
  double h = 1e-5;
  // Coordinates sampled per parameter; <=0 checks every coordinate.
  int max_coords_per_parameter = 0;
  std::uint64_t seed = 17;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  int worst_coordinate = -1;
};

// Central-difference check of the tape against f, a deterministic scalar
// computation rebuilt on every call. Relative error per coordinate is
// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult gradient_check(const std::function<Tensor()>& f, ParameterStore& params,
                               const GradCheckOptions& opts = {});

}  // namespace cslt
