#include "diswm/diffcore/optim.hpp"

#include <cmath>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

double Adam::step(const ParamRefs& params, const Gradients& grads) {
  double sq = 0.0;
  for (const Param* p : params) {
    for (double g : grads.of(*p)) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericAbort("non-finite gradient norm");
  const double clip = config_.clip_norm > 0.0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (Param* p : params) {
    auto [it, inserted] = moments_.try_emplace(p->name());
    Moments& m = it->second;
    if (inserted || m.first.size() != p->numel()) {
      m.first.assign(p->numel(), 0.0);
      m.second.assign(p->numel(), 0.0);
    }
    const auto g = grads.of(*p);
    if (config_.lr == 0.0) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        m.first[i] = config_.beta1 * m.first[i] + (1.0 - config_.beta1) * g[i] * clip;
        m.second[i] = config_.beta2 * m.second[i] + (1.0 - config_.beta2) * g[i] * clip * g[i] * clip;
      }
      continue;
    }
    auto w = p->mutable_value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i] * clip;
      m.first[i] = config_.beta1 * m.first[i] + (1.0 - config_.beta1) * gi;
      m.second[i] = config_.beta2 * m.second[i] + (1.0 - config_.beta2) * gi * gi;
      const double mhat = m.first[i] / c1;
      const double vhat = m.second[i] / c2;
      w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
  return norm;
}

}  // namespace diswm
