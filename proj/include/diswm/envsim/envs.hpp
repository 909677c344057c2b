#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "diswm/envsim/render.hpp"

namespace diswm {

struct EnvState {
  FactorVector factors;
  std::size_t step_index = 0;
  ColorScheme color_scheme = ColorScheme::A;
  bool started = false;
};

struct TargetEnvConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t episode_length = 100;
  /// Position change per step at full action (v·Δ).
  double speed = 0.1;
  double action_penalty = 0.01;
  double distractor_step = 0.03;
  double agent_radius = 0.2;
  double goal_radius = 0.15;
  double distractor_radius = 0.1;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  /// 0 only on the final step of an episode.
  double cont = 1.0;
};

/// Action-conditioned reaching task: a disk-shaped agent moves toward a
/// square goal while a square distractor drifts at random. Reward is the
/// negative agent-goal distance minus a quadratic action penalty.
class TargetEnv {
 public:
  static constexpr std::size_t kActionDim = 2;

  explicit TargetEnv(TargetEnvConfig config = {});

  Observation reset(Rng& rng);
  /// Throws ContractError before reset or after the terminal step.
  StepResult step(std::span<const double> action, Rng& rng);

  const FactorVector& factors() const noexcept { return state_.factors; }
  const EnvState& state() const noexcept { return state_; }
  const TargetEnvConfig& config() const noexcept { return config_; }
  bool done() const noexcept { return state_.started && state_.step_index >= config_.episode_length; }

  void set_color_scheme(ColorScheme scheme) noexcept { state_.color_scheme = scheme; }
  ColorScheme color_scheme() const noexcept { return state_.color_scheme; }
  /// Reinstates a saved state (checkpoint resume, scripted probes).
  void restore(const EnvState& state);

  Observation render() const;
  static Observation render(const FactorVector& f, const TargetEnvConfig& config);
  double reward_lower_bound() const;
  std::size_t obs_dim() const { return config_.height * config_.width * 3; }

 private:
  TargetEnvConfig config_;
  EnvState state_;
};

struct SourceEnvConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t episode_length = 50;
  bool move_y = true;
  bool distractor = true;
  double amplitude = 0.4;
  /// Lissajous angular frequencies are drawn from [min, max] rad/frame.
  double min_frequency = 0.05;
  double max_frequency = 0.15;
  double agent_radius = 0.25;
  double distractor_radius = 0.18;
};

struct SourceClip {
  std::vector<Observation> frames;
  std::vector<FactorVector> factors;
};

/// Scripted, action-free video source: a square sprite follows a seeded
/// Lissajous path while an independent disk distractor follows another.
/// Hues are drawn once per clip. Exposes no step or action interface.
class SourceEnv {
 public:
  explicit SourceEnv(SourceEnvConfig config = {});

  /// T ≥ 2 frames. Throws ContractError otherwise.
  SourceClip rollout(Rng& rng, std::size_t frames) const;

  void set_color_scheme(ColorScheme scheme) noexcept { scheme_ = scheme; }
  ColorScheme color_scheme() const noexcept { return scheme_; }
  const SourceEnvConfig& config() const noexcept { return config_; }

  static Observation render(const FactorVector& f, const SourceEnvConfig& config);
  /// Largest per-frame displacement of any sprite coordinate, in pixels.
  double max_step_px() const;

 private:
  SourceEnvConfig config_;
  ColorScheme scheme_ = ColorScheme::A;
};

}  // namespace diswm
