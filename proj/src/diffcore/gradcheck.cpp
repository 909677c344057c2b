#include "diswm/diffcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

GradCheckResult grad_check(const LossFn& loss, const ParamRefs& params, double eps, std::size_t max_coords_per_param) {
  Gradients grads;
  {
    Tape tape;
    tape.track_only(std::span<Param* const>(params));
    const Tensor value = loss(tape);
    grads = tape.backward(value);
  }
  auto evaluate = [&] {
    Tape tape;
    tape.track_only(std::span<Param* const>{});
    return loss(tape).item();
  };

  GradCheckResult result;
  for (Param* p : params) {
    const std::vector<double> analytic = grads.get(*p);
    const std::size_t n = p->numel();
    const std::size_t stride = max_coords_per_param == 0 || n <= max_coords_per_param ? 1 : n / max_coords_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      const double original = p->value()[i];
      p->mutable_value()[i] = original + eps;
      const double up = evaluate();
      p->mutable_value()[i] = original - eps;
      const double down = evaluate();
      p->mutable_value()[i] = original;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic[i] - numeric) / denom;
      ++result.coordinates;
      if (err > result.max_relative_error || !std::isfinite(err)) {
        result.max_relative_error = std::isfinite(err) ? err : INFINITY;
        result.worst_param = p->name();
        result.worst_index = i;
        result.worst_analytic = analytic[i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace diswm
