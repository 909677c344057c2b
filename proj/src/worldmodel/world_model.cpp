#include "diswm/worldmodel/world_model.hpp"

#include <algorithm>
#include <sstream>

#include "diswm/diffcore/errors.hpp"
#include "diswm/diffcore/ops.hpp"

namespace diswm {

WorldModel::WorldModel(const WorldModelConfig& c, Rng& rng)
    : gru("gru", c.z_dim + c.action_dim, c.h_dim, rng),
      encoder("encoder", c.obs_dim(), c.trunk, c.code_dim, rng, c.min_std),
      posterior("posterior", c.h_dim + c.code_dim, c.head, c.z_dim, rng, c.min_std),
      prior("prior", c.h_dim, c.head, c.z_dim, rng, c.min_std),
      decoder("decoder", c.feature_dim(), c.trunk, c.obs_dim(), rng),
      reward("reward", c.feature_dim(), c.head, rng),
      discount("discount", c.feature_dim(), c.head, rng),
      config_(c) {}

void WorldModel::collect(ParamRefs& out) {
  gru.collect(out);
  encoder.collect(out);
  posterior.collect(out);
  prior.collect(out);
  decoder.collect(out);
  reward.collect(out);
  discount.collect(out);
}

void WorldModel::collect(ConstParamRefs& out) const {
  gru.collect(out);
  encoder.collect(out);
  posterior.collect(out);
  prior.collect(out);
  decoder.collect(out);
  reward.collect(out);
  discount.collect(out);
}

RssmState RssmState::zeros(const WorldModelConfig& c, std::size_t batch) {
  return {Tensor::zeros({batch, c.h_dim}), Tensor::zeros({batch, c.z_dim})};
}

Tensor RssmState::features() const { return concat({h, z}, 1); }

RssmState stop_gradient(const RssmState& s) {
  return {s.h.on_tape() ? stop_gradient(s.h) : s.h, s.z.on_tape() ? stop_gradient(s.z) : s.z};
}

Tensor ObserveResult::features() const { return concat({h, z}, 1); }

RssmState ObserveResult::detached_states() const { return stop_gradient(RssmState{h, z}); }

ObserveResult observe(Tape& tape, const WorldModel& wm, const Tensor& obs, const Tensor& actions,
                      std::size_t batch, Rng& rng) {
  const auto& c = wm.config();
  if (batch == 0 || obs.rank() != 2 || obs.dim(0) % batch != 0) {
    throw ShapeError("observe: obs " + shape_str(obs.shape()) + " is not a time-major stack of " +
                     std::to_string(batch) + " sequences");
  }
  if (actions.rank() != 2 || actions.dim(0) != obs.dim(0) || actions.dim(1) != c.action_dim) {
    throw ShapeError("observe: actions " + shape_str(actions.shape()) + " do not match obs " +
                     shape_str(obs.shape()));
  }
  const std::size_t L = obs.dim(0) / batch;
  ObserveResult r;
  r.code = wm.encoder.forward(tape, obs);
  r.code_sample = gaussian_sample(r.code, rng);

  RssmState s = RssmState::zeros(c, batch);
  std::vector<Tensor> hs, zs, means, stds;
  for (std::size_t t = 0; t < L; ++t) {
    const Tensor a = slice(actions, 0, t * batch, batch);
    s.h = wm.gru.step(tape, s.h, concat({s.z, a}, 1));
    const GaussianParams post =
        wm.posterior.forward(tape, concat({s.h, slice(r.code_sample, 0, t * batch, batch)}, 1));
    s.z = gaussian_sample(post, rng);
    hs.push_back(s.h);
    zs.push_back(s.z);
    means.push_back(post.mean);
    stds.push_back(post.stddev);
  }
  r.h = concat(hs, 0);
  r.z = concat(zs, 0);
  r.posterior = {concat(means, 0), concat(stds, 0)};
  r.prior = wm.prior.forward(tape, r.h);
  return r;
}

ObserveResult observe(Tape& tape, const WorldModel& wm, const SequenceBatch& batch, Rng& rng) {
  return observe(tape, wm, batch.obs, batch.actions, batch.batch, rng);
}

RssmState observe_step(const WorldModel& wm, const RssmState& prev, const Tensor& action, const Tensor& obs,
                       Rng& rng, bool sample) {
  Tape tape(Tape::NoGrad{});
  const Tensor h = wm.gru.step(tape, prev.h, concat({prev.z, action}, 1));
  const GaussianParams code = wm.encoder.forward(tape, obs);
  const Tensor c = sample ? gaussian_sample(code, rng) : code.mean;
  const GaussianParams post = wm.posterior.forward(tape, concat({h, c}, 1));
  const Tensor z = sample ? gaussian_sample(post, rng) : post.mean;
  return {h, z};
}

RssmState imagine_step(Tape& tape, const WorldModel& wm, const RssmState& prev, const Tensor& action, Rng& rng) {
  RssmState next;
  next.h = wm.gru.step(tape, prev.h, concat({prev.z, action}, 1));
  next.z = gaussian_sample(wm.prior.forward(tape, next.h), rng);
  return next;
}

namespace {

Tensor log_softmax_rows(const Tensor& x) {
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<double> maxes(rows);
  const auto v = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    maxes[r] = *std::max_element(v.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                 v.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
  }
  // the shift is a constant: softmax is invariant to it
  const Tensor shifted = x - Tensor({rows, 1}, std::move(maxes));
  return shifted - log(sum(exp(shifted), {1}, true));
}

}  // namespace

Tensor distill_loss(const GaussianParams& teacher, const GaussianParams& student, DistillMode mode) {
  if (teacher.mean.shape() != student.mean.shape()) {
    throw ConfigError("distillation needs equal teacher and student code shapes, got " +
                      shape_str(teacher.mean.shape()) + " and " + shape_str(student.mean.shape()));
  }
  const GaussianParams t = stop_gradient(teacher);
  if (mode == DistillMode::gaussian_kl) return mean_all(gaussian_kl(t, student));
  const Tensor log_p = log_softmax_rows(t.mean);
  const Tensor log_q = log_softmax_rows(student.mean);
  return mean_all(sum(exp(log_p) * (log_p - log_q), {1}));
}

double eta_schedule(std::size_t step, std::size_t total_steps, const DistillConfig& cfg) {
  if (total_steps == 0) return cfg.eta_start;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  const double eta = cfg.eta_start + (cfg.eta_end - cfg.eta_start) * frac;
  return std::clamp(eta, std::min(cfg.eta_start, cfg.eta_end), std::max(cfg.eta_start, cfg.eta_end));
}

WmLoss wm_loss(Tape& tape, const WorldModel& wm, const GaussianParams& teacher, const SequenceBatch& batch,
               Rng& rng, const WmLossWeights& w, DistillMode mode) {
  ObserveResult obs = observe(tape, wm, batch, rng);
  const Tensor feats = obs.features();
  const double inv_rows = 1.0 / static_cast<double>(batch.obs.dim(0));
  const Tensor recon = sum_all(gaussian_nll_unit(wm.decoder.forward(tape, feats), batch.obs)) * inv_rows;
  const Tensor reward_nll = sum_all(gaussian_nll_unit(wm.reward.forward(tape, feats), batch.rewards)) * inv_rows;
  const Tensor discount_nll = sum_all(bernoulli_nll(wm.discount.forward(tape, feats), batch.continues)) * inv_rows;
  const Tensor kl_dyn = mean_all(gaussian_kl(obs.posterior, obs.prior));
  const Tensor kl_disen = mean_all(gaussian_kl(obs.code, standard_normal(obs.code.batch(), obs.code.dim())));
  const Tensor distill = distill_loss(teacher, obs.code, mode);

  WmLoss out;
  out.total = recon + reward_nll + discount_nll + w.alpha * kl_dyn + w.beta * kl_disen + w.eta * distill;
  out.report = {out.total.item(), recon.item(),   reward_nll.item(), discount_nll.item(),
                kl_dyn.item(),    kl_disen.item(), distill.item(),   w};
  out.observed = std::move(obs);
  return out;
}

std::string describe(const WmLossReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "total=" << r.total << " recon=" << r.recon << " reward_nll=" << r.reward_nll
     << " discount_nll=" << r.discount_nll << " kl_dyn=" << r.kl_dyn << " kl_disen=" << r.kl_disen
     << " distill=" << r.distill << " alpha=" << r.weights.alpha << " beta=" << r.weights.beta
     << " eta=" << r.weights.eta;
  return os.str();
}

Tensor Trajectory::imagined_features() const {
  std::vector<Tensor> feats;
  feats.reserve(states.size() - 1);
  for (std::size_t i = 1; i < states.size(); ++i) feats.push_back(states[i].features());
  return concat(feats, 0);
}

Trajectory imagine(Tape& tape, const WorldModel& wm, const RssmState& start, const Policy& policy,
                   std::size_t horizon, double gamma, Rng& rng) {
  if (horizon < 1) throw ConfigError("imagination horizon must be at least 1");
  Trajectory traj;
  traj.states.push_back(stop_gradient(start));
  for (std::size_t i = 0; i < horizon; ++i) {
    const RssmState& s = traj.states.back();
    PolicyOutput out = policy(tape, s.features(), rng);
    RssmState next = imagine_step(tape, wm, s, out.action, rng);
    traj.policy.push_back(std::move(out));
    traj.states.push_back(std::move(next));
  }
  const std::size_t n = start.batch();
  const Tensor feats = traj.imagined_features();
  const Tensor rewards = wm.reward.forward(tape, feats);
  const Tensor discounts = gamma * sigmoid(wm.discount.forward(tape, feats));
  for (std::size_t i = 0; i < horizon; ++i) {
    traj.rewards.push_back(slice(rewards, 0, i * n, n));
    traj.discounts.push_back(slice(discounts, 0, i * n, n));
  }
  return traj;
}

void save_world_model(Checkpoint& ckpt, const std::string& prefix, const WorldModel& wm) {
  ckpt.add_params(prefix, params_of(wm));
}

void load_world_model(const Checkpoint& ckpt, const std::string& prefix, WorldModel& wm) {
  ckpt.restore_params(prefix, params_of(wm));
}

}  // namespace diswm
