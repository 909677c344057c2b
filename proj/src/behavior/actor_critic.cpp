#include "diswm/behavior/actor_critic.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "diswm/diffcore/errors.hpp"
#include "diswm/diffcore/ops.hpp"

namespace diswm {

Actor::Actor(std::size_t feature_dim, std::size_t action_dim, const std::vector<std::size_t>& hidden, Rng& rng,
             double min_std)
    : head_("actor", feature_dim, hidden, action_dim, rng, min_std) {}

GaussianParams Actor::distribution(Tape& tape, const Tensor& features) const { return head_.forward(tape, features); }


namespace {

Tensor log_tanh_jacobian(const Tensor& u) {
  // log(1 − tanh²u) = 2·(ln 2 − u − softplus(−2u)), stable for large |u|
  return sum(2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)), {1});
}

}  // namespace

Tensor squashed_log_prob(const GaussianParams& dist, const Tensor& pre_squash) {
  return gaussian_log_prob(dist, pre_squash) - log_tanh_jacobian(pre_squash);
}

PolicyOutput Actor::sample(Tape& tape, const Tensor& features, Rng& rng) const {
  const GaussianParams dist = distribution(tape, features);
  const Tensor u = gaussian_sample(dist, rng);
  PolicyOutput out;
  out.action = tanh(u);
  out.pre_squash = u;
  // score-function term: the density moves, the drawn sample does not
  out.log_prob = squashed_log_prob(dist, stop_gradient(u));
  out.entropy = squashed_entropy(dist, u);
  return out;
}

Tensor squashed_entropy(const GaussianParams& dist, const Tensor& u) {
  return gaussian_entropy(dist) + log_tanh_jacobian(u);
}

Tensor Actor::mode(const Tensor& features) const {
  Tape tape(Tape::NoGrad{});
  return tanh(distribution(tape, features).mean);
}

Policy actor_policy(const Actor& actor) {
  return [&actor](Tape& tape, const Tensor& features, Rng& rng) { return actor.sample(tape, features, rng); };
}

Critic::Critic(std::size_t feature_dim, const std::vector<std::size_t>& hidden, Rng& rng)
    : mlp_("critic", layer_sizes(feature_dim, hidden, 1), rng) {}

Tensor Critic::forward(Tape& tape, const Tensor& features) const { return mlp_.forward(tape, features); }

std::vector<Tensor> lambda_targets(const std::vector<Tensor>& rewards, const std::vector<Tensor>& values,
                                   const std::vector<Tensor>& discounts, double lambda) {
  const std::size_t H = rewards.size();
  if (values.size() != H || discounts.size() != H) {
    throw ShapeError("lambda_targets: rewards, values and discounts differ in length (" + std::to_string(H) + ", " +
                     std::to_string(values.size()) + ", " + std::to_string(discounts.size()) + ")");
  }
  if (H < 2) throw ShapeError("lambda_targets needs a horizon of at least 2");
  for (std::size_t t = 0; t < H; ++t) {
    if (values[t].shape() != rewards[t].shape() || discounts[t].shape() != rewards[t].shape()) {
      throw ShapeError("lambda_targets: entry " + std::to_string(t) + " shapes disagree");
    }
  }
  std::vector<Tensor> out(H - 1);
  Tensor next = values[H - 1];
  for (std::size_t t = H - 1; t-- > 0;) {
    out[t] = rewards[t] + discounts[t] * ((1.0 - lambda) * values[t + 1] + lambda * next);
    next = out[t];
  }
  return out;
}

Tensor actor_loss(const Trajectory& traj, const std::vector<Tensor>& targets, const std::vector<Tensor>& values,
                  const BehaviorConfig& cfg) {
  const std::size_t H = traj.horizon();
  if (targets.size() + 1 != H || values.size() != H) throw ShapeError("actor_loss: targets/values do not match horizon");
  std::vector<Tensor> terms;
  terms.reserve(H - 1);
  for (std::size_t t = 0; t + 1 < H; ++t) {
    // targets[t] is V at states[t + 1], where the policy entry t + 1 was drawn
    const PolicyOutput& pi = traj.policy[t + 1];
    const Tensor v = reshape(targets[t], {targets[t].numel()});
    Tensor objective = cfg.rho * v;
    if (cfg.entropy_scale != 0.0) objective = objective + cfg.entropy_scale * pi.entropy;
    if (cfg.rho != 1.0) {
      const Tensor adv = stop_gradient(v - reshape(values[t], {values[t].numel()}));
      objective = objective + (1.0 - cfg.rho) * pi.log_prob * adv;
    }
    terms.push_back(objective);
  }
  return -mean_all(concat(terms, 0));
}

Tensor critic_loss(const std::vector<Tensor>& values, const std::vector<Tensor>& targets) {
  if (values.size() < targets.size() || targets.empty()) throw ShapeError("critic_loss: fewer values than targets");
  std::vector<Tensor> terms;
  terms.reserve(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    terms.push_back(0.5 * square(values[t] - stop_gradient(targets[t])));
  }
  return mean_all(concat(terms, 0));
}

namespace {

std::vector<Tensor> split_rows(const Tensor& stacked, std::size_t parts) {
  const std::size_t n = stacked.dim(0) / parts;
  std::vector<Tensor> out;
  out.reserve(parts);
  for (std::size_t i = 0; i < parts; ++i) out.push_back(slice(stacked, 0, i * n, n));
  return out;
}

double mean_of(const std::vector<Tensor>& ts) {
  double s = 0.0;
  std::size_t n = 0;
  for (const Tensor& t : ts) {
    for (double v : t.data()) s += v;
    n += t.numel();
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

std::string describe(const BehaviorReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "actor_loss=" << r.actor_loss << " critic_loss=" << r.critic_loss << " mean_target=" << r.mean_target
     << " mean_value=" << r.mean_value << " mean_entropy=" << r.mean_entropy;
  return os.str();
}

}  // namespace

BehaviorReport behavior_step(const WorldModel& wm, Actor& actor, Critic& critic, const RssmState& start,
                             const BehaviorConfig& cfg, Adam& actor_opt, Adam& critic_opt, Rng& rng) {
  const ParamRefs actor_params = params_of(actor);
  const ParamRefs critic_params = params_of(critic);
  const std::size_t H = cfg.horizon;
  BehaviorReport report;

  Tape actor_tape;
  actor_tape.track_only(actor_params);
  const Trajectory traj = imagine(actor_tape, wm, start, actor_policy(actor), H, cfg.gamma, rng);
  const Tensor feats = traj.imagined_features();
  const std::vector<Tensor> values = split_rows(critic.forward(actor_tape, feats), H);
  const std::vector<Tensor> targets = lambda_targets(traj.rewards, values, traj.discounts, cfg.lambda);
  const Tensor a_loss = actor_loss(traj, targets, values, cfg);

  Tape critic_tape;
  critic_tape.track_only(critic_params);
  std::vector<Tensor> fixed_targets;
  fixed_targets.reserve(targets.size());
  for (const Tensor& t : targets) fixed_targets.push_back(stop_gradient(t));
  const std::size_t n = start.batch();
  const Tensor critic_in = stop_gradient(slice(feats, 0, 0, (H - 1) * n));
  const std::vector<Tensor> critic_values = split_rows(critic.forward(critic_tape, critic_in), H - 1);
  const Tensor c_loss = critic_loss(critic_values, fixed_targets);

  report.actor_loss = a_loss.item();
  report.critic_loss = c_loss.item();
  report.mean_target = mean_of(fixed_targets);
  report.mean_value = mean_of(critic_values);
  report.mean_imagined_reward = mean_of(traj.rewards);
  std::vector<Tensor> entropies;
  for (std::size_t t = 1; t < H; ++t) entropies.push_back(traj.policy[t].entropy);
  report.mean_entropy = mean_of(entropies);
  if (!std::isfinite(report.actor_loss) || !std::isfinite(report.critic_loss)) {
    throw NumericAbort("behavior loss is not finite: " + describe(report));
  }

  const Gradients critic_grads = critic_tape.backward(c_loss);
  const Gradients actor_grads = actor_tape.backward(a_loss);
  try {
    critic_opt.set_lr(cfg.critic_lr);
    report.critic_grad_norm = critic_opt.step(critic_params, critic_grads);
    actor_opt.set_lr(cfg.actor_lr);
    report.actor_grad_norm = actor_opt.step(actor_params, actor_grads);
  } catch (const NumericAbort& e) {
    throw NumericAbort(std::string(e.what()) + "; behavior terms: " + describe(report));
  }
  return report;
}

}  // namespace diswm
