#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "diswm/diffcore/tape.hpp"

namespace diswm {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; 0 disables clipping.
  double clip_norm = 100.0;
};

/// Adaptive moment estimation with global-norm clipping. Moments are keyed
/// by parameter name so optimizer state survives checkpoint round-trips.
class Adam {
 public:
  struct Moments {
    std::vector<double> first;
    std::vector<double> second;
  };

  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Applies one update to `params`; parameters absent from `grads` get a
  /// zero gradient. Returns the pre-clip global gradient norm.
  double step(const ParamRefs& params, const Gradients& grads);

  const AdamConfig& config() const noexcept { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  std::uint64_t steps() const noexcept { return steps_; }
  void set_steps(std::uint64_t steps) { steps_ = steps; }
  const std::map<std::string, Moments>& moments() const noexcept { return moments_; }
  std::map<std::string, Moments>& moments() noexcept { return moments_; }

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace diswm
