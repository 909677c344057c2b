#pragma once

#include <functional>
#include <string>

#include "diswm/diffcore/tape.hpp"

namespace diswm {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Builds a scalar loss on the supplied tape. Must be deterministic: any
/// randomness has to come from generators constructed inside the call.
using LossFn = std::function<Tensor(Tape&)>;

/// Compares reverse-mode gradients of `loss` against central differences
/// (f(θ+ε) − f(θ−ε)) / 2ε on every coordinate of `params`. Relative error
/// uses a max(|analytic|, |numeric|, 1e−8) denominator. When
/// `max_coords_per_param` is nonzero only that many evenly spaced
/// coordinates of each parameter are probed.
GradCheckResult grad_check(const LossFn& loss, const ParamRefs& params, double eps = 1e-5,
                           std::size_t max_coords_per_param = 0);

}  // namespace diswm
