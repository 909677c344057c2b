#include "diswm/pipeline/replay_buffer.hpp"

#include <algorithm>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

void EpisodeRecord::append(const Observation& o, std::span<const double> action, double reward, double cont) {
  if (o.size() != obs_dim || action.size() != action_dim) throw ShapeError("episode step has the wrong shape");
  obs.insert(obs.end(), o.pixels.begin(), o.pixels.end());
  for (double a : action) actions.push_back(static_cast<float>(a));
  rewards.push_back(static_cast<float>(reward));
  continues.push_back(static_cast<float>(cont));
}

double EpisodeRecord::total_reward() const {
  double s = 0.0;
  for (std::size_t i = 1; i < rewards.size(); ++i) s += rewards[i];
  return s;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity_steps, std::size_t obs_dim, std::size_t action_dim)
    : capacity_(capacity_steps), obs_dim_(obs_dim), action_dim_(action_dim) {
  if (capacity_ == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::add(EpisodeRecord episode) {
  if (episode.obs_dim != obs_dim_ || episode.action_dim != action_dim_) {
    throw ShapeError("episode shape does not match the replay buffer");
  }
  if (episode.size() == 0) return;
  steps_ += episode.size();
  episodes_.push_back(std::move(episode));
  while (steps_ > capacity_ && episodes_.size() > 1) {
    steps_ -= episodes_.front().size();
    episodes_.pop_front();
  }
}

std::size_t ReplayBuffer::window_count(std::size_t length) const {
  std::size_t n = 0;
  for (const auto& e : episodes_) {
    if (e.size() >= length) n += e.size() - length + 1;
  }
  return n;
}

std::pair<std::size_t, std::size_t> ReplayBuffer::sample_window(std::size_t length, Rng& rng) const {
  const std::size_t total = window_count(length);
  if (length == 0 || total == 0) {
    throw ContractError("replay buffer holds no episode with " + std::to_string(length) + " steps");
  }
  std::size_t k = rng.below(total);
  for (std::size_t i = 0; i < episodes_.size(); ++i) {
    const std::size_t n = episodes_[i].size();
    if (n < length) continue;
    const std::size_t w = n - length + 1;
    if (k < w) return {i, k};
    k -= w;
  }
  throw ContractError("window index out of range");
}

SequenceBatch ReplayBuffer::sample(std::size_t batch, std::size_t length, Rng& rng) const {
  SequenceBatch out;
  out.batch = batch;
  out.length = length;
  const std::size_t rows = batch * length;
  std::vector<double> obs(rows * obs_dim_), act(rows * action_dim_), rew(rows), cont(rows);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto [ei, off] = sample_window(length, rng);
    const EpisodeRecord& e = episodes_[ei];
    for (std::size_t t = 0; t < length; ++t) {
      const std::size_t row = t * batch + b;
      const std::size_t s = off + t;
      std::copy_n(e.obs.begin() + static_cast<std::ptrdiff_t>(s * obs_dim_), obs_dim_,
                  obs.begin() + static_cast<std::ptrdiff_t>(row * obs_dim_));
      std::copy_n(e.actions.begin() + static_cast<std::ptrdiff_t>(s * action_dim_), action_dim_,
                  act.begin() + static_cast<std::ptrdiff_t>(row * action_dim_));
      rew[row] = e.rewards[s];
      cont[row] = e.continues[s];
    }
  }
  out.obs = Tensor({rows, obs_dim_}, std::move(obs));
  out.actions = Tensor({rows, action_dim_}, std::move(act));
  out.rewards = Tensor({rows, 1}, std::move(rew));
  out.continues = Tensor({rows, 1}, std::move(cont));
  return out;
}

void ReplayBuffer::save(Checkpoint& ckpt, const std::string& prefix) const {
  const std::vector<std::uint64_t> meta{capacity_, obs_dim_, action_dim_, episodes_.size()};
  ckpt.put_u64(prefix + "meta", meta);
  for (std::size_t i = 0; i < episodes_.size(); ++i) {
    const EpisodeRecord& e = episodes_[i];
    const std::string p = prefix + "episode_" + std::to_string(i) + "/";
    const std::size_t n = e.size();
    ckpt.put_f32(p + "obs", {n, obs_dim_}, e.obs);
    ckpt.put_f32(p + "actions", {n, action_dim_}, e.actions);
    ckpt.put_f32(p + "rewards", {n}, e.rewards);
    ckpt.put_f32(p + "continues", {n}, e.continues);
  }
}

ReplayBuffer ReplayBuffer::load(const Checkpoint& ckpt, const std::string& prefix) {
  const auto& meta = ckpt.u64(prefix + "meta");
  if (meta.size() != 4) throw LoadError("replay buffer metadata has " + std::to_string(meta.size()) + " values");
  ReplayBuffer buf(meta[0], meta[1], meta[2]);
  for (std::uint64_t i = 0; i < meta[3]; ++i) {
    const std::string p = prefix + "episode_" + std::to_string(i) + "/";
    EpisodeRecord e(buf.obs_dim_, buf.action_dim_);
    e.obs = ckpt.f32(p + "obs");
    e.actions = ckpt.f32(p + "actions");
    e.rewards = ckpt.f32(p + "rewards");
    e.continues = ckpt.f32(p + "continues");
    const std::size_t n = e.rewards.size();
    if (e.obs.size() != n * buf.obs_dim_ || e.actions.size() != n * buf.action_dim_ || e.continues.size() != n) {
      throw LoadError("replay buffer episode " + std::to_string(i) + " is inconsistent");
    }
    buf.steps_ += n;
    buf.episodes_.push_back(std::move(e));
  }
  return buf;
}

namespace {

EpisodeRecord random_episode(TargetEnv& env, Rng& rng, double& ret) {
  ret = 0.0;
  EpisodeRecord rec(env.obs_dim(), TargetEnv::kActionDim);
  std::array<double, TargetEnv::kActionDim> action{};
  rec.append(env.reset(rng), action, 0.0, 1.0);
  while (!env.done()) {
    for (double& a : action) a = rng.uniform(-1.0, 1.0);
    const StepResult r = env.step(action, rng);
    rec.append(r.observation, action, r.reward, r.cont);
    ret += r.reward;
  }
  return rec;
}

}  // namespace

ReplayBuffer seed_buffer(TargetEnv& env, Rng& rng, std::size_t n_steps, std::size_t capacity) {
  if (n_steps < env.config().episode_length) throw ContractError("seed_buffer needs at least one episode of steps");
  ReplayBuffer buf(capacity, env.obs_dim(), TargetEnv::kActionDim);
  std::size_t env_steps = 0;
  while (env_steps < n_steps) {
    double ret = 0.0;
    EpisodeRecord rec = random_episode(env, rng, ret);
    env_steps += rec.size() - 1;
    buf.add(std::move(rec));
  }
  return buf;
}

std::vector<double> random_policy_returns(TargetEnv& env, Rng& rng, std::size_t episodes) {
  std::vector<double> out;
  for (std::size_t i = 0; i < episodes; ++i) {
    double ret = 0.0;
    random_episode(env, rng, ret);
    out.push_back(ret);
  }
  return out;
}

}  // namespace diswm
