#pragma once

#include <vector>

#include "diswm/diffcore/optim.hpp"
#include "diswm/worldmodel/world_model.hpp"

namespace diswm {

struct BehaviorConfig {
  double lambda = 0.95;
  double gamma = 0.99;
  std::size_t horizon = 15;
  double actor_lr = 8e-5;
  double critic_lr = 8e-5;
  /// Weight of the dynamics-backprop term; 1 − rho weights REINFORCE.
  double rho = 1.0;
  double entropy_scale = 1e-4;
  std::vector<std::size_t> hidden{128, 128};
  double min_std = kDefaultMinStd;
};

/// tanh-squashed diagonal Gaussian policy over [h, z].
class Actor {
 public:
  Actor() = default;
  Actor(std::size_t feature_dim, std::size_t action_dim, const std::vector<std::size_t>& hidden, Rng& rng,
        double min_std = kDefaultMinStd);

  /// Pre-squash Gaussian.
  GaussianParams distribution(Tape& tape, const Tensor& features) const;
  /// Reparameterized action in (−1, 1) with its entropy estimate and its
  /// log-density, the latter evaluated at the detached sample.
  PolicyOutput sample(Tape& tape, const Tensor& features, Rng& rng) const;
  /// tanh(mean), used for evaluation.
  Tensor mode(const Tensor& features) const;
  std::size_t action_dim() const { return head_.dim(); }

  void collect(ParamRefs& out) { head_.collect(out); }
  void collect(ConstParamRefs& out) const { head_.collect(out); }

 private:
  GaussianHead head_;
};

/// Adapts an actor to the imagination interface.
Policy actor_policy(const Actor& actor);

/// Gaussian entropy of the pre-squash distribution plus the sampled
/// log-Jacobian Σ log(1 − tanh²(u)), per row.
Tensor squashed_entropy(const GaussianParams& dist, const Tensor& pre_squash);
/// log π(tanh(u)) for a pre-squash sample u.
Tensor squashed_log_prob(const GaussianParams& dist, const Tensor& pre_squash);

class Critic {
 public:
  Critic() = default;
  Critic(std::size_t feature_dim, const std::vector<std::size_t>& hidden, Rng& rng);

  /// [N, 1].
  Tensor forward(Tape& tape, const Tensor& features) const;

  void collect(ParamRefs& out) { mlp_.collect(out); }
  void collect(ConstParamRefs& out) const { mlp_.collect(out); }

 private:
  Mlp mlp_;
};

/// Backward recursion V_t = r_t + γ_t·[(1 − λ)·v_{t+1} + λ·V_{t+1}] with
/// V_H = v_H. Inputs hold H ≥ 2 equally shaped entries; returns V_1..V_{H−1}.
std::vector<Tensor> lambda_targets(const std::vector<Tensor>& rewards, const std::vector<Tensor>& values,
                                   const std::vector<Tensor>& discounts, double lambda);

/// Negated objective mean_t[β·H_t + ρ·V_t + (1 − ρ)·ln π(â_t)·sg(V_t − v_t)]
/// over t = 1..H−1 and the batch. `values` are v(ẑ_1..ẑ_H).
Tensor actor_loss(const Trajectory& traj, const std::vector<Tensor>& targets, const std::vector<Tensor>& values,
                  const BehaviorConfig& cfg);

/// mean_t ½(v(ẑ_t) − sg(V_t))² over t = 1..H−1. `values` may hold H or
/// H−1 entries; only the first H−1 are used.
Tensor critic_loss(const std::vector<Tensor>& values, const std::vector<Tensor>& targets);

struct BehaviorReport {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double mean_target = 0.0;
  double mean_value = 0.0;
  double mean_entropy = 0.0;
  double mean_imagined_reward = 0.0;
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
};

/// One imagination rollout from detached start states, then a critic update
/// and an actor update. World-model parameters enter both tapes as constants.
/// Throws NumericAbort on a non-finite loss.
BehaviorReport behavior_step(const WorldModel& wm, Actor& actor, Critic& critic, const RssmState& start,
                             const BehaviorConfig& cfg, Adam& actor_opt, Adam& critic_opt, Rng& rng);

}  // namespace diswm
