#pragma once

#include <filesystem>
#include <string>

#include "diswm/behavior/actor_critic.hpp"
#include "diswm/diffcore/optim.hpp"
#include "diswm/envsim/video_dataset.hpp"
#include "diswm/pretrain/video_predictor.hpp"
#include "diswm/worldmodel/world_model.hpp"

namespace diswm {

struct ModelSettings {
  std::size_t code_dim = 8;
  std::size_t z_dim = 8;
  std::size_t h_dim = 64;
  std::vector<std::size_t> trunk{128, 128};
  std::vector<std::size_t> head{128};
  double min_std = kDefaultMinStd;
};

struct PretrainSettings {
  /// K₁.
  std::size_t steps = 5000;
  std::size_t batch = 16;
  std::size_t length = 16;
  double beta1 = 1.0;
  double beta2 = 0.015;
  double lr = 3e-4;
};

struct FinetuneSettings {
  std::size_t total_env_steps = 30000;
  /// K₂ gradient steps per environment episode.
  std::size_t inner_steps = 10;
  std::size_t batch = 16;
  std::size_t length = 16;
  double alpha = 1.0;
  double beta = 0.015;
  double lr = 3e-4;
  /// Random-policy episodes collected before the first update.
  std::size_t seed_episodes = 5;
  std::size_t buffer_capacity = 1000000;
  /// Fraction of total_env_steps at which the colour scheme switches to B.
  double color_switch_fraction = 0.5;
  std::size_t eval_every_episodes = 10;
  std::size_t eval_episodes = 5;
  std::size_t baseline_episodes = 20;
  /// 0 writes only the final checkpoint.
  std::size_t checkpoint_every_episodes = 0;
};

/// Every hyperparameter of a run. Parsed from a JSON document with nested
/// sections; every key has a default and unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  TargetEnvConfig env;
  VideoDatasetConfig videos;
  ModelSettings model;
  PretrainSettings pretrain;
  FinetuneSettings finetune;
  DistillConfig distill;
  BehaviorConfig behavior;
  AdamConfig optim;

  VideoPredictorConfig video_predictor() const;
  WorldModelConfig world_model() const;
  std::size_t finetune_episodes() const;
  std::size_t finetune_steps() const;
  std::size_t color_switch_env_step() const;
};

/// Throws ConfigError naming the offending key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical JSON with every key, suitable for parse_config.
std::string dump_config(const RunConfig& config);
void validate(const RunConfig& config);

}  // namespace diswm
