#pragma once

#include <functional>
#include <vector>

#include "diswm/diffcore/checkpoint.hpp"
#include "diswm/nets/vae.hpp"

namespace diswm {

struct WorldModelConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t action_dim = 2;
  /// Encoder code 𝐳; must equal the teacher's code size.
  std::size_t code_dim = 8;
  std::size_t z_dim = 8;
  std::size_t h_dim = 64;
  std::vector<std::size_t> trunk{128, 128};
  std::vector<std::size_t> head{128};
  double min_std = kDefaultMinStd;

  std::size_t obs_dim() const { return height * width * 3; }
  std::size_t feature_dim() const { return h_dim + z_dim; }
};

/// Recurrent state-space model with a β-VAE observation encoder:
///   h_t = f(h_{t−1}, z_{t−1}, a_{t−1}),  𝐳_t ~ e(o_t),
///   z_t ~ q(z_t | h_t, 𝐳_t),  ẑ_t ~ p(ẑ_t | h_t),
///   ô_t, r̂_t, γ̂_t from (h_t, z_t).
class WorldModel {
 public:
  WorldModel() = default;
  WorldModel(const WorldModelConfig& config, Rng& rng);

  const WorldModelConfig& config() const noexcept { return config_; }

  GruCell gru;
  BetaVaeEncoder encoder;
  GaussianHead posterior;
  GaussianHead prior;
  Decoder decoder;
  ScalarHead reward;
  ScalarHead discount;

  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;

 private:
  WorldModelConfig config_;
};

struct RssmState {
  Tensor h;
  Tensor z;

  static RssmState zeros(const WorldModelConfig& config, std::size_t batch);
  /// [batch, h_dim + z_dim].
  Tensor features() const;
  std::size_t batch() const { return h.dim(0); }
};

RssmState stop_gradient(const RssmState& s);

/// B sequences of length L stored time-major (row t·B + b). actions[t] is
/// the action that led to obs[t] (zeros at an episode start); rewards[t]
/// and continues[t] arrive together with obs[t].
struct SequenceBatch {
  Tensor obs;        ///< [L·B, obs_dim]
  Tensor actions;    ///< [L·B, action_dim]
  Tensor rewards;    ///< [L·B, 1]
  Tensor continues;  ///< [L·B, 1]
  std::size_t batch = 0;
  std::size_t length = 0;
};

/// Posterior filtering results, time-major [L·B, ·].
struct ObserveResult {
  Tensor h;
  Tensor z;
  GaussianParams posterior;
  GaussianParams prior;
  GaussianParams code;
  Tensor code_sample;

  Tensor features() const;
  /// Every posterior state, detached; the imagination starting points.
  RssmState detached_states() const;
};

/// h₀ = 0, z₀ = 0.
ObserveResult observe(Tape& tape, const WorldModel& wm, const Tensor& obs, const Tensor& actions,
                      std::size_t batch, Rng& rng);
ObserveResult observe(Tape& tape, const WorldModel& wm, const SequenceBatch& batch, Rng& rng);

/// One filtering step for acting in the environment: transition with the
/// previous action, then condition on the new observation. With
/// `sample == false` the code and the posterior contribute their means.
RssmState observe_step(const WorldModel& wm, const RssmState& prev, const Tensor& action, const Tensor& obs,
                       Rng& rng, bool sample);

/// Prior transition h' = gru(h, [z, a]), ẑ ~ p(ẑ | h').
RssmState imagine_step(Tape& tape, const WorldModel& wm, const RssmState& prev, const Tensor& action, Rng& rng);

enum class DistillMode { gaussian_kl, literal_vector_kl };

struct DistillConfig {
  DistillMode mode = DistillMode::gaussian_kl;
  double eta_start = 0.1;
  double eta_end = 0.01;
};

/// gaussian_kl: mean over rows of KL(teacher ‖ student). literal_vector_kl:
/// softmax both means and take Σ p·log(p/q) per row, averaged. The teacher
/// enters through stop_gradient. Mismatched code sizes raise ConfigError.
Tensor distill_loss(const GaussianParams& teacher, const GaussianParams& student, DistillMode mode);

/// Linear from eta_start at step 0 to eta_end at total_steps, clamped.
double eta_schedule(std::size_t step, std::size_t total_steps, const DistillConfig& cfg);

struct WmLossWeights {
  double alpha = 1.0;
  double beta = 0.015;
  double eta = 0.1;
};

struct WmLossReport {
  double total = 0.0;
  double recon = 0.0;
  double reward_nll = 0.0;
  double discount_nll = 0.0;
  double kl_dyn = 0.0;
  double kl_disen = 0.0;
  double distill = 0.0;
  WmLossWeights weights;

  double weighted_sum() const {
    return recon + reward_nll + discount_nll + weights.alpha * kl_dyn + weights.beta * kl_disen +
           weights.eta * distill;
  }
};

struct WmLoss {
  Tensor total;
  WmLossReport report;
  ObserveResult observed;
};

/// Every term is summed over its event dimensions and averaged over batch
/// and time. `teacher` is the frozen encoder's output on batch.obs.
WmLoss wm_loss(Tape& tape, const WorldModel& wm, const GaussianParams& teacher, const SequenceBatch& batch,
               Rng& rng, const WmLossWeights& weights, DistillMode mode = DistillMode::gaussian_kl);

std::string describe(const WmLossReport& report);

/// Action chosen at an imagined state, with the policy's log-density of
/// that action and its entropy estimate (both [N] or undefined).
struct PolicyOutput {
  Tensor action;
  Tensor log_prob;
  Tensor entropy;
  /// Sample before any squashing, when the policy has one.
  Tensor pre_squash;
};

using Policy = std::function<PolicyOutput(Tape&, const Tensor& features, Rng&)>;

/// states[0] is the start; policy[i] and actions[i] belong to states[i] and
/// lead to states[i + 1]. rewards[i] and discounts[i] are predicted at
/// states[i + 1]; discounts are the head's probability times γ.
struct Trajectory {
  std::vector<RssmState> states;
  std::vector<PolicyOutput> policy;
  std::vector<Tensor> rewards;
  std::vector<Tensor> discounts;

  std::size_t horizon() const { return rewards.size(); }
  /// Features of states[1..H] stacked time-major, [H·N, feature_dim].
  Tensor imagined_features() const;
};

/// H ≥ 1 prior transitions from detached start states. Reads no observations.
Trajectory imagine(Tape& tape, const WorldModel& wm, const RssmState& start, const Policy& policy,
                   std::size_t horizon, double gamma, Rng& rng);

void save_world_model(Checkpoint& ckpt, const std::string& prefix, const WorldModel& wm);
/// Restores parameters into an already constructed model of matching shape.
void load_world_model(const Checkpoint& ckpt, const std::string& prefix, WorldModel& wm);

}  // namespace diswm
