#include "diswm/pipeline/gradcheck_suite.hpp"

#include "diswm/behavior/actor_critic.hpp"
#include "diswm/diffcore/errors.hpp"
#include "diswm/diffcore/gaussian.hpp"
#include "diswm/diffcore/ops.hpp"
#include "diswm/pretrain/video_predictor.hpp"

namespace diswm {

namespace {

constexpr std::size_t kB = 2;
constexpr std::size_t kL = 3;
constexpr std::size_t kSide = 4;
constexpr std::size_t kObs = kSide * kSide * 3;

Param random_param(const std::string& name, Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Param(name, std::move(shape), std::move(v));
}

std::vector<GradCheckCase> diffcore_cases() {
  std::vector<GradCheckCase> out;
  Rng rng(101);
  Param a = random_param("a", {3, 4}, rng);
  Param b = random_param("b", {4, 2}, rng);
  Param pos = random_param("pos", {3, 2}, rng, 0.5, 2.0);
  ParamRefs ps{&a, &b, &pos};
  out.push_back({"diffcore", "elementwise and matmul chain", grad_check(
                                                                [&](Tape& t) {
                                                                  const Tensor m = matmul(t.bind(a), t.bind(b));
                                                                  const Tensor p = t.bind(pos);
                                                                  const Tensor u = tanh(m) * sigmoid(m) + elu(m) +
                                                                                   softplus(m) * log(p) + exp(m * 0.3) / p;
                                                                  return sum_all(square(u));
                                                                },
                                                                ps)});
  out.push_back({"diffcore", "reductions, concat, slice, reshape",
                 grad_check(
                     [&](Tape& t) {
                       const Tensor x = concat({t.bind(a), reshape(t.bind(b), {2, 4})}, 0);
                       const Tensor s = slice(x, 0, 1, 3);
                       return mean_all(sum(square(s), {1}) + mean(s, {1}));
                     },
                     ps)});
  Param qm = random_param("q_mean", {2, 3}, rng), qs = random_param("q_std", {2, 3}, rng, 0.3, 1.5);
  Param pm = random_param("p_mean", {2, 3}, rng), pstd = random_param("p_std", {2, 3}, rng, 0.3, 1.5);
  Param x = random_param("x", {2, 3}, rng);
  out.push_back({"diffcore", "gaussian kl, log-prob, entropy",
                 grad_check(
                     [&](Tape& t) {
                       const GaussianParams q{t.bind(qm), t.bind(qs)}, p{t.bind(pm), t.bind(pstd)};
                       return sum_all(gaussian_kl(q, p) + gaussian_log_prob(q, t.bind(x)) + gaussian_entropy(p));
                     },
                     {&qm, &qs, &pm, &pstd, &x})});
  return out;
}

WorldModelConfig toy_world_model() {
  WorldModelConfig c;
  c.height = c.width = kSide;
  c.code_dim = 2;
  c.z_dim = 2;
  c.h_dim = 3;
  c.trunk = {5};
  c.head = {4};
  return c;
}

std::vector<GradCheckCase> loss_cases() {
  std::vector<GradCheckCase> out;
  Rng data(202);

  {
    VideoPredictorConfig c;
    c.height = c.width = kSide;
    c.code_dim = 2;
    c.z_dim = 2;
    c.trunk = {5};
    c.head = {4};
    Rng init(203);
    VideoPredictor vp(c, init);
    const VideoBatch video{data.uniform_tensor({kL * kB, kObs}, 0.0, 1.0), kB, kL};
    out.push_back({"losses", "pretrain loss", grad_check(
                                                  [&](Tape& t) {
                                                    Rng rng(204);
                                                    return pretrain_loss(t, vp, video, rng, 1.0, 0.015).total;
                                                  },
                                                  params_of(vp))});
  }

  const auto wc = toy_world_model();
  Rng init(205);
  WorldModel wm(wc, init);
  SequenceBatch seq;
  seq.batch = kB;
  seq.length = kL;
  seq.obs = data.uniform_tensor({kL * kB, kObs}, 0.0, 1.0);
  seq.actions = data.uniform_tensor({kL * kB, wc.action_dim}, -1.0, 1.0);
  seq.rewards = data.uniform_tensor({kL * kB, 1}, -1.0, 0.0);
  std::vector<double> cont(kL * kB, 1.0);
  cont.back() = 0.0;
  seq.continues = Tensor({kL * kB, 1}, std::move(cont));
  const GaussianParams teacher{data.normal_tensor({kL * kB, wc.code_dim}),
                               data.uniform_tensor({kL * kB, wc.code_dim}, 0.2, 1.5)};

  for (DistillMode mode : {DistillMode::gaussian_kl, DistillMode::literal_vector_kl}) {
    const std::string tag = mode == DistillMode::gaussian_kl ? "gaussian_kl" : "literal_vector_kl";
    out.push_back({"losses", "distill loss (" + tag + ")",
                   grad_check(
                       [&](Tape& t) {
                         const GaussianParams student = wm.encoder.forward(t, seq.obs);
                         return distill_loss(teacher, student, mode);
                       },
                       params_of(wm.encoder))});
    out.push_back({"losses", "world-model loss (" + tag + ")",
                   grad_check(
                       [&](Tape& t) {
                         Rng rng(206);
                         return wm_loss(t, wm, teacher, seq, rng, {1.0, 0.015, 0.1}, mode).total;
                       },
                       params_of(wm))});
  }

  Actor actor(wc.feature_dim(), wc.action_dim, {4}, init);
  Critic critic(wc.feature_dim(), {4}, init);
  const RssmState start{data.uniform_tensor({kB, wc.h_dim}, -0.5, 0.5), data.normal_tensor({kB, wc.z_dim})};
  BehaviorConfig cfg;
  cfg.horizon = kL;
  cfg.entropy_scale = 0.1;
  auto values_of = [&](Tape& t, const Trajectory& traj) {
    std::vector<Tensor> v;
    for (std::size_t i = 1; i < traj.states.size(); ++i) v.push_back(critic.forward(t, traj.states[i].features()));
    return v;
  };
  out.push_back({"losses", "actor loss (dynamics backprop)",
                 grad_check(
                     [&](Tape& t) {
                       Rng rng(207);
                       const Trajectory traj = imagine(t, wm, start, actor_policy(actor), cfg.horizon, cfg.gamma, rng);
                       const auto values = values_of(t, traj);
                       return actor_loss(traj, lambda_targets(traj.rewards, values, traj.discounts, cfg.lambda),
                                         values, cfg);
                     },
                     params_of(actor))});

  std::vector<Tensor> features, targets;
  {
    Tape base(Tape::NoGrad{});
    Rng rng(208);
    const Trajectory traj = imagine(base, wm, start, actor_policy(actor), cfg.horizon, cfg.gamma, rng);
    const auto values = values_of(base, traj);
    targets = lambda_targets(traj.rewards, values, traj.discounts, cfg.lambda);
    for (std::size_t i = 1; i < cfg.horizon; ++i) features.push_back(stop_gradient(traj.states[i].features()));
    for (Tensor& x : targets) x = stop_gradient(x);
  }
  out.push_back({"losses", "critic loss", grad_check(
                                              [&](Tape& t) {
                                                std::vector<Tensor> v;
                                                for (const Tensor& f : features) v.push_back(critic.forward(t, f));
                                                return critic_loss(v, targets);
                                              },
                                              params_of(critic))});
  return out;
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(const std::string& module) {
  if (module != "all" && module != "diffcore" && module != "losses") {
    throw ConfigError("gradcheck module must be all, diffcore or losses (got '" + module + "')");
  }
  std::vector<GradCheckCase> out;
  if (module != "losses") {
    auto d = diffcore_cases();
    out.insert(out.end(), d.begin(), d.end());
  }
  if (module != "diffcore") {
    auto l = loss_cases();
    out.insert(out.end(), l.begin(), l.end());
  }
  return out;
}

}  // namespace diswm
