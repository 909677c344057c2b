#include "diswm/envsim/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

namespace {

constexpr std::array<double, 3> kGoalRgb{1.0, 1.0, 1.0};

std::array<double, 3> background_rgb(double hue) { return hsv_to_rgb(hue, 0.6, 0.2); }
std::array<double, 3> agent_rgb(double hue) { return hsv_to_rgb(hue, 1.0, 1.0); }
std::array<double, 3> distractor_rgb(double hue) { return hsv_to_rgb(hue, 0.6, 0.7); }

}  // namespace

TargetEnv::TargetEnv(TargetEnvConfig config) : config_(config) {
  if (config_.episode_length == 0) throw ConfigError("episode_length must be positive");
}

Observation TargetEnv::reset(Rng& rng) {
  FactorVector& f = state_.factors;
  f.agent_x = rng.uniform();
  f.agent_y = rng.uniform();
  f.goal_x = rng.uniform();
  f.goal_y = rng.uniform();
  f.agent_hue = draw_hue(state_.color_scheme, rng);
  f.background_hue = draw_hue(state_.color_scheme, rng);
  f.distractor_hue = draw_hue(state_.color_scheme, rng);
  f.distractor_x = rng.uniform();
  f.distractor_y = rng.uniform();
  state_.step_index = 0;
  state_.started = true;
  return render();
}

StepResult TargetEnv::step(std::span<const double> action, Rng& rng) {
  if (!state_.started) throw ContractError("step before reset");
  if (done()) throw ContractError("step after terminal step; call reset");
  if (action.size() != kActionDim) {
    throw ContractError("target env expects a 2-dim action, got " + std::to_string(action.size()));
  }
  const double ax = std::clamp(action[0], -1.0, 1.0);
  const double ay = std::clamp(action[1], -1.0, 1.0);
  FactorVector& f = state_.factors;
  f.agent_x = std::clamp(f.agent_x + config_.speed * ax, 0.0, 1.0);
  f.agent_y = std::clamp(f.agent_y + config_.speed * ay, 0.0, 1.0);
  f.distractor_x = std::clamp(f.distractor_x + rng.uniform(-1.0, 1.0) * config_.distractor_step, 0.0, 1.0);
  f.distractor_y = std::clamp(f.distractor_y + rng.uniform(-1.0, 1.0) * config_.distractor_step, 0.0, 1.0);
  ++state_.step_index;

  StepResult out;
  out.reward = -std::hypot(f.agent_x - f.goal_x, f.agent_y - f.goal_y) - config_.action_penalty * (ax * ax + ay * ay);
  out.cont = state_.step_index == config_.episode_length ? 0.0 : 1.0;
  out.observation = render();
  return out;
}

void TargetEnv::restore(const EnvState& state) {
  if (state.step_index > config_.episode_length) throw ContractError("restored step_index exceeds episode length");
  state_ = state;
}

Observation TargetEnv::render() const { return render(state_.factors, config_); }

Observation TargetEnv::render(const FactorVector& f, const TargetEnvConfig& c) {
  const std::array<Sprite, 3> sprites{
      Sprite{SpriteShape::square, f.goal_x, f.goal_y, c.goal_radius, kGoalRgb},
      Sprite{SpriteShape::square, f.distractor_x, f.distractor_y, c.distractor_radius, distractor_rgb(f.distractor_hue)},
      Sprite{SpriteShape::disk, f.agent_x, f.agent_y, c.agent_radius, agent_rgb(f.agent_hue)},
  };
  return render_sprites(c.height, c.width, background_rgb(f.background_hue), sprites);
}

double TargetEnv::reward_lower_bound() const {
  return -(std::numbers::sqrt2 + config_.action_penalty * static_cast<double>(kActionDim));
}

SourceEnv::SourceEnv(SourceEnvConfig config) : config_(config) {
  if (config_.min_frequency > config_.max_frequency) throw ConfigError("source min_frequency > max_frequency");
}

SourceClip SourceEnv::rollout(Rng& rng, std::size_t frames) const {
  if (frames < 2) throw ContractError("source rollout needs at least 2 frames");
  const double two_pi = 2.0 * std::numbers::pi;
  auto freq = [&] { return rng.uniform(config_.min_frequency, config_.max_frequency); };
  const double wx = freq(), wy = freq(), px = rng.uniform(0.0, two_pi), py = rng.uniform(0.0, two_pi);
  const double dwx = freq(), dwy = freq(), dpx = rng.uniform(0.0, two_pi), dpy = rng.uniform(0.0, two_pi);
  FactorVector base;
  base.agent_hue = draw_hue(scheme_, rng);
  base.background_hue = draw_hue(scheme_, rng);
  base.distractor_hue = draw_hue(scheme_, rng);

  SourceClip clip;
  clip.frames.reserve(frames);
  clip.factors.reserve(frames);
  const double a = config_.amplitude;
  for (std::size_t t = 0; t < frames; ++t) {
    const double tt = static_cast<double>(t);
    FactorVector f = base;
    f.agent_x = 0.5 + a * std::sin(wx * tt + px);
    f.agent_y = config_.move_y ? 0.5 + a * std::sin(wy * tt + py) : 0.5;
    if (config_.distractor) {
      f.distractor_x = 0.5 + a * std::sin(dwx * tt + dpx);
      f.distractor_y = 0.5 + a * std::sin(dwy * tt + dpy);
    }
    clip.frames.push_back(render(f, config_));
    clip.factors.push_back(f);
  }
  return clip;
}

Observation SourceEnv::render(const FactorVector& f, const SourceEnvConfig& c) {
  std::vector<Sprite> sprites;
  if (c.distractor) {
    sprites.push_back({SpriteShape::disk, f.distractor_x, f.distractor_y, c.distractor_radius,
                       distractor_rgb(f.distractor_hue)});
  }
  sprites.push_back({SpriteShape::square, f.agent_x, f.agent_y, c.agent_radius, agent_rgb(f.agent_hue)});
  return render_sprites(c.height, c.width, background_rgb(f.background_hue), sprites);
}

double SourceEnv::max_step_px() const {
  const double span = static_cast<double>(config_.width) * (1.0 - 2.0 * std::min(config_.agent_radius, config_.distractor_radius));
  return config_.amplitude * config_.max_frequency * span;
}

}  // namespace diswm
