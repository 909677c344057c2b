#pragma once

#include <deque>
#include <span>
#include <vector>

#include "diswm/diffcore/checkpoint.hpp"
#include "diswm/envsim/envs.hpp"
#include "diswm/worldmodel/world_model.hpp"

namespace diswm {

/// One environment episode as stored steps. Step i holds o_i, the action
/// a_{i−1} that produced it (zeros at i = 0), r_i and the continue flag
/// (1 at the reset step, 0 on the terminal step).
struct EpisodeRecord {
  std::size_t obs_dim = 0;
  std::size_t action_dim = 0;
  std::vector<float> obs;
  std::vector<float> actions;
  std::vector<float> rewards;
  std::vector<float> continues;

  EpisodeRecord() = default;
  EpisodeRecord(std::size_t obs_dim, std::size_t action_dim) : obs_dim(obs_dim), action_dim(action_dim) {}

  void append(const Observation& o, std::span<const double> action, double reward, double cont);
  std::size_t size() const { return rewards.size(); }
  /// Sum of r_1..r_T.
  double total_reward() const;
};

/// Episodes kept in arrival order with oldest-first eviction once the
/// stored step count exceeds the capacity.
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(std::size_t capacity_steps, std::size_t obs_dim, std::size_t action_dim);

  void add(EpisodeRecord episode);

  /// B windows of L contiguous steps, uniform over every valid
  /// (episode, offset) pair; episodes shorter than L are never sampled.
  SequenceBatch sample(std::size_t batch, std::size_t length, Rng& rng) const;
  /// Episode index and offset of one uniform draw.
  std::pair<std::size_t, std::size_t> sample_window(std::size_t length, Rng& rng) const;
  std::size_t window_count(std::size_t length) const;

  std::size_t episodes() const { return episodes_.size(); }
  std::size_t steps() const { return steps_; }
  std::size_t capacity() const { return capacity_; }
  const EpisodeRecord& episode(std::size_t i) const { return episodes_.at(i); }

  void save(Checkpoint& ckpt, const std::string& prefix) const;
  static ReplayBuffer load(const Checkpoint& ckpt, const std::string& prefix);

 private:
  std::size_t capacity_ = 0;
  std::size_t obs_dim_ = 0;
  std::size_t action_dim_ = 0;
  std::size_t steps_ = 0;
  std::deque<EpisodeRecord> episodes_;
};

/// Collects episodes with uniform random actions in [−1, 1]² until at least
/// n_steps environment steps are stored. n_steps must cover one episode.
ReplayBuffer seed_buffer(TargetEnv& env, Rng& rng, std::size_t n_steps, std::size_t capacity);

/// Returns of `episodes` uniform-random-action episodes.
std::vector<double> random_policy_returns(TargetEnv& env, Rng& rng, std::size_t episodes);

}  // namespace diswm
