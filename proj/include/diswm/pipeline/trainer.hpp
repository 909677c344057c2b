#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "diswm/behavior/actor_critic.hpp"
#include "diswm/pipeline/config.hpp"
#include "diswm/pipeline/metrics.hpp"
#include "diswm/pipeline/replay_buffer.hpp"

namespace diswm {

using ProgressFn = std::function<void(const std::string&)>;

/// K₁ β-VAE video-predictor updates on the source dataset. Per-step loss
/// terms are logged as pretrain_* rows on the pretrain step clock.
VideoPredictor run_pretrain(const RunConfig& config, const VideoDataset& dataset, MetricsLog& metrics,
                            const ProgressFn& progress = {});

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> returns;
};

/// Mode actions, posterior means filtered incrementally one step at a time.
EvalResult evaluate(const Actor& actor, const WorldModel& wm, TargetEnv& env, std::size_t episodes, Rng& rng);

/// Controller reading the true positions and heading straight for the goal;
/// an upper-bound sanity reference for learned policies.
EvalResult evaluate_greedy(TargetEnv& env, std::size_t episodes, Rng& rng);

/// The finetune loop state: models, optimizers, buffer, streams and
/// counters. Checkpoints are written at episode boundaries and capture
/// everything needed to continue bit-identically.
class Trainer {
 public:
  /// Fresh run: initializes every model, seeds the buffer and records the
  /// random-policy baseline. `metrics` may already hold pretrain rows.
  Trainer(RunConfig config, const VideoPredictor& teacher, MetricsLog metrics = {});

  static Trainer from_checkpoint(const Checkpoint& ckpt);

  /// K₂ model/behavior updates followed by one environment episode, the
  /// evaluation and checkpoint hooks. Throws NumericAbort on divergence.
  void run_episode();
  bool finished() const { return episode_ >= config_.finetune_episodes(); }

  Checkpoint snapshot() const;
  void write_checkpoint(const std::filesystem::path& run_dir) const;

  const RunConfig& config() const { return config_; }
  const MetricsLog& metrics() const { return metrics_; }
  const WorldModel& world_model() const { return wm_; }
  const Actor& actor() const { return actor_; }
  const Critic& critic() const { return critic_; }
  const FrozenEncoder& teacher() const { return teacher_; }
  const VideoPredictor& teacher_model() const { return teacher_model_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  std::uint64_t grad_steps() const { return grad_step_; }
  std::uint64_t env_steps() const { return env_step_; }
  std::uint64_t episodes() const { return episode_; }
  ColorScheme color_scheme() const { return env_.color_scheme(); }
  /// Human-readable dump of the last loss reports and stream states.
  std::string diagnostics() const;

 private:
  Trainer() = default;
  void update_step();
  void collect_episode();

  RunConfig config_;
  VideoPredictor teacher_model_;
  FrozenEncoder teacher_;
  WorldModel wm_;
  Actor actor_;
  Critic critic_;
  Adam wm_opt_, actor_opt_, critic_opt_;
  ReplayBuffer buffer_;
  TargetEnv env_;
  Rng finetune_rng_, env_rng_, eval_rng_, buffer_rng_;
  MetricsLog metrics_;
  std::uint64_t grad_step_ = 0;
  std::uint64_t env_step_ = 0;
  std::uint64_t episode_ = 0;
  bool switched_ = false;
  WmLossReport last_wm_;
  BehaviorReport last_behavior_;
};

struct TrainOptions {
  /// Teacher checkpoint; when absent the pretrain loop runs first.
  std::optional<std::filesystem::path> teacher;
  std::optional<std::filesystem::path> resume;
  ProgressFn progress;
};

/// Full run into run_dir: config.echo, metrics.csv, checkpoints/step_N.dwmc
/// and images/. On NumericAbort an abort.txt bundle is written first.
void train(const RunConfig& config, const VideoDataset* videos, const std::filesystem::path& run_dir,
           const TrainOptions& options = {});

/// Latest checkpoints/step_N.dwmc of a run directory.
std::filesystem::path latest_checkpoint(const std::filesystem::path& run_dir);

// Keeps large freed blocks in the heap instead of returning them to the OS.
void retain_heap_memory();

void save_adam(Checkpoint& ckpt, const std::string& prefix, const Adam& opt);
void load_adam(const Checkpoint& ckpt, const std::string& prefix, Adam& opt);
void save_rng(Checkpoint& ckpt, const std::string& name, const Rng& rng);
Rng load_rng(const Checkpoint& ckpt, const std::string& name);
void put_text(Checkpoint& ckpt, const std::string& name, const std::string& text);
std::string get_text(const Checkpoint& ckpt, const std::string& name);

/// Anchor frames for traversal grids: target-env resets from a fixed stream.
std::vector<Tensor> traversal_anchors(const RunConfig& config, std::size_t count);

}  // namespace diswm
