#include <doctest.h>

#include <cmath>

#include "diswm/diffcore/errors.hpp"
#include "diswm/diffcore/gradcheck.hpp"
#include "diswm/diffcore/ops.hpp"
#include "diswm/diffcore/optim.hpp"
#include "diswm/pretrain/video_predictor.hpp"
#include "diswm/worldmodel/world_model.hpp"

using namespace diswm;

namespace {

WorldModelConfig toy_config() {
  WorldModelConfig c;
  c.height = 4;
  c.width = 4;
  c.code_dim = 2;
  c.z_dim = 2;
  c.h_dim = 3;
  c.trunk = {5};
  c.head = {4};
  return c;
}

SequenceBatch random_batch(const WorldModelConfig& c, std::size_t b, std::size_t l, Rng& rng) {
  SequenceBatch s;
  s.batch = b;
  s.length = l;
  s.obs = rng.uniform_tensor({b * l, c.obs_dim()}, 0.0, 1.0);
  s.actions = rng.uniform_tensor({b * l, c.action_dim}, -1.0, 1.0);
  s.rewards = rng.uniform_tensor({b * l, 1}, -1.0, 0.0);
  std::vector<double> cont(b * l, 1.0);
  cont.back() = 0.0;
  s.continues = Tensor({b * l, 1}, cont);
  return s;
}

GaussianParams random_teacher(std::size_t rows, std::size_t dim, Rng& rng) {
  return {rng.normal_tensor({rows, dim}), shift(rng.uniform_tensor({rows, dim}, 0.0, 1.0), 0.2)};
}

bool same(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

Policy fixed_policy(std::size_t action_dim, double value) {
  return [action_dim, value](Tape&, const Tensor& feats, Rng&) {
    return PolicyOutput{Tensor::full({feats.dim(0), action_dim}, value), {}, {}, {}};
  };
}

// Independent softmax KL on plain arrays.
double softmax_kl(const std::vector<double>& a, const std::vector<double>& b) {
  auto softmax = [](const std::vector<double>& x) {
    std::vector<double> p(x.size());
    double s = 0.0;
    for (double v : x) s += std::exp(v);
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = std::exp(x[i]) / s;
    return p;
  };
  const auto p = softmax(a), q = softmax(b);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return kl;
}

}  // namespace

TEST_CASE("observe base case and determinism") {
  Rng init(1);
  const auto cfg = toy_config();
  const WorldModel wm(cfg, init);
  Rng data(2);
  const SequenceBatch one = random_batch(cfg, 2, 1, data);
  Tape tape;
  Rng rng(3);
  const ObserveResult r = observe(tape, wm, one, rng);
  Tape probe(Tape::NoGrad{});
  const Tensor h1 = wm.gru.step(probe, Tensor::zeros({2, 3}), concat({Tensor::zeros({2, 2}), one.actions}, 1));
  CHECK(same(stop_gradient(r.h), h1));
  CHECK(r.prior.mean.shape() == Shape{2, 2});

  const SequenceBatch seq = random_batch(cfg, 2, 4, data);
  Tape t1, t2;
  Rng a(5), b(5);
  const ObserveResult x = observe(t1, wm, seq, a);
  const ObserveResult y = observe(t2, wm, seq, b);
  CHECK(same(x.h, y.h));
  CHECK(same(x.z, y.z));
  for (double v : x.h.data()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(observe(t1, wm, seq.obs, slice(seq.actions, 0, 0, 6), 2, a), ShapeError);
}

TEST_CASE("prior at t ignores o_t") {
  Rng init(6);
  const auto cfg = toy_config();
  const WorldModel wm(cfg, init);
  Rng data(7);
  SequenceBatch seq = random_batch(cfg, 2, 3, data);
  Tape t1;
  Rng a(8);
  const ObserveResult x = observe(t1, wm, seq, a);
  // replace the last observation of both sequences
  seq.obs = concat({slice(seq.obs, 0, 0, 4), data.uniform_tensor({2, cfg.obs_dim()}, 0.0, 1.0)}, 0);
  Tape t2;
  Rng b(8);
  const ObserveResult y = observe(t2, wm, seq, b);
  CHECK(same(slice(x.prior.mean, 0, 4, 2), slice(y.prior.mean, 0, 4, 2)));
  CHECK(same(slice(x.prior.stddev, 0, 4, 2), slice(y.prior.stddev, 0, 4, 2)));
  CHECK_FALSE(same(slice(x.posterior.mean, 0, 4, 2), slice(y.posterior.mean, 0, 4, 2)));
}

TEST_CASE("distillation loss examples") {
  Rng rng(9);
  const GaussianParams p = random_teacher(3, 4, rng);
  CHECK(distill_loss(p, p, DistillMode::gaussian_kl).item() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(distill_loss(p, p, DistillMode::literal_vector_kl).item()) <= 1e-12);

  const GaussianParams t{Tensor::full({1, 3}, 1.0), Tensor::full({1, 3}, 1.0)};
  const GaussianParams s{Tensor::zeros({1, 3}), Tensor::full({1, 3}, 1.0)};
  CHECK(distill_loss(t, s, DistillMode::gaussian_kl).item() == doctest::Approx(1.5).epsilon(1e-12));

  const GaussianParams lt{Tensor({1, 2}, {1.0, 2.0}), Tensor::full({1, 2}, 1.0)};
  const GaussianParams ls{Tensor({1, 2}, {2.0, 1.0}), Tensor::full({1, 2}, 1.0)};
  const double oracle = softmax_kl({1.0, 2.0}, {2.0, 1.0});
  // (p₂ − p₁)·ln(p₂/p₁) with p₂/p₁ = e
  CHECK(oracle == doctest::Approx(std::tanh(0.5)).epsilon(1e-14));
  CHECK(distill_loss(lt, ls, DistillMode::literal_vector_kl).item() == doctest::Approx(oracle).epsilon(1e-13));

  for (int i = 0; i < 50; ++i) {
    const GaussianParams a = random_teacher(1, 5, rng), b = random_teacher(1, 5, rng);
    const std::vector<double> am(a.mean.data().begin(), a.mean.data().end());
    const std::vector<double> bm(b.mean.data().begin(), b.mean.data().end());
    const double lit = distill_loss(a, b, DistillMode::literal_vector_kl).item();
    CHECK(lit == doctest::Approx(softmax_kl(am, bm)).epsilon(1e-12));
    CHECK(lit >= 0.0);
    CHECK(distill_loss(a, b, DistillMode::gaussian_kl).item() >= 0.0);
  }
  CHECK_THROWS_AS(distill_loss(random_teacher(2, 3, rng), random_teacher(2, 4, rng), DistillMode::gaussian_kl),
                  ConfigError);
}

TEST_CASE("eta schedule") {
  const DistillConfig cfg;
  CHECK(eta_schedule(0, 1000, cfg) == 0.1);
  CHECK(eta_schedule(1000, 1000, cfg) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(eta_schedule(500, 1000, cfg) == doctest::Approx(0.055).epsilon(1e-15));
  CHECK(eta_schedule(5000, 1000, cfg) == doctest::Approx(0.01).epsilon(1e-15));
  double prev = 1.0;
  for (std::size_t s = 0; s <= 100; ++s) {
    const double e = eta_schedule(s, 100, cfg);
    CHECK(e <= prev);
    CHECK(std::abs(e - (0.1 - 0.09 * static_cast<double>(s) / 100.0)) <= 1e-12);
    prev = e;
  }
}

TEST_CASE("world-model loss identity and weight zeros") {
  Rng init(10);
  const auto cfg = toy_config();
  const WorldModel wm(cfg, init);
  Rng data(11);
  const SequenceBatch seq = random_batch(cfg, 2, 3, data);
  const GaussianParams teacher = random_teacher(6, 2, data);
  for (DistillMode mode : {DistillMode::gaussian_kl, DistillMode::literal_vector_kl}) {
    Tape tape;
    Rng rng(12);
    const WmLoss loss = wm_loss(tape, wm, teacher, seq, rng, {1.0, 0.015, 0.07}, mode);
    const auto& r = loss.report;
    CHECK(std::abs(r.total - r.weighted_sum()) <= 1e-9);
    CHECK(r.kl_dyn >= 0.0);
    CHECK(r.kl_disen >= 0.0);
    CHECK(r.distill >= 0.0);
  }
  Tape tape;
  Rng rng(12);
  const WmLoss elbo = wm_loss(tape, wm, teacher, seq, rng, {1.0, 0.0, 0.0});
  const auto& r = elbo.report;
  CHECK(r.total == r.recon + r.reward_nll + r.discount_nll + 1.0 * r.kl_dyn);
}

TEST_CASE("world-model loss gradient matches finite differences") {
  Rng init(13);
  const auto cfg = toy_config();
  WorldModel wm(cfg, init);
  Rng data(14);
  const SequenceBatch seq = random_batch(cfg, 2, 3, data);
  const GaussianParams teacher = random_teacher(6, 2, data);
  for (DistillMode mode : {DistillMode::gaussian_kl, DistillMode::literal_vector_kl}) {
    const auto result = grad_check(
        [&](Tape& tape) {
          Rng rng(15);
          return wm_loss(tape, wm, teacher, seq, rng, {1.0, 0.015, 0.1}, mode).total;
        },
        params_of(wm));
    INFO("worst " << result.worst_param << "[" << result.worst_index << "] analytic " << result.worst_analytic
                  << " numeric " << result.worst_numeric);
    CHECK(result.max_relative_error < 1e-4);
  }
}

TEST_CASE("distillation never reaches the teacher") {
  VideoPredictorConfig pc;
  pc.height = pc.width = 4;
  pc.code_dim = 2;
  pc.z_dim = 2;
  pc.trunk = {5};
  pc.head = {4};
  Rng init(16);
  const FrozenEncoder teacher = freeze_encoder(VideoPredictor(pc, init));
  const auto cfg = toy_config();
  WorldModel wm(cfg, init);
  Rng data(17);
  const SequenceBatch seq = random_batch(cfg, 2, 3, data);

  Tape tape;
  const Tensor obs = tape.leaf(seq.obs);
  SequenceBatch on_tape = seq;
  on_tape.obs = obs;
  Rng rng(18);
  const WmLoss loss = wm_loss(tape, wm, teacher.forward(obs), on_tape, rng, {1.0, 0.015, 0.1});
  const Gradients g = tape.backward(loss.total);
  for (const Param* p : teacher.params()) CHECK_FALSE(g.contains(*p));
  for (const Param* p : params_of(std::as_const(wm.encoder))) CHECK(g.contains(*p));
}

TEST_CASE("imagination") {
  Rng init(19);
  const auto cfg = toy_config();
  const WorldModel wm(cfg, init);
  Rng data(20);
  const RssmState start{data.uniform_tensor({5, 3}, -0.5, 0.5), data.normal_tensor({5, 2})};

  Tape tape;
  Rng r1(21);
  const Trajectory one = imagine(tape, wm, start, fixed_policy(2, 0.3), 1, 0.99, r1);
  CHECK(one.states.size() == 2);
  CHECK(one.horizon() == 1);
  CHECK_THROWS_AS(imagine(tape, wm, start, fixed_policy(2, 0.3), 0, 0.99, r1), ConfigError);

  Tape ta, tb;
  Rng ra(22), rb(22);
  const Trajectory x = imagine(ta, wm, start, fixed_policy(2, -0.4), 15, 0.99, ra);
  const Trajectory y = imagine(tb, wm, start, fixed_policy(2, -0.4), 15, 0.99, rb);
  for (std::size_t i = 0; i <= 15; ++i) {
    CHECK(same(x.states[i].h, y.states[i].h));
    CHECK(same(x.states[i].z, y.states[i].z));
  }
  for (const Tensor& d : x.discounts) {
    for (double v : d.data()) {
      CHECK(v > 0.0);
      CHECK(v < 0.99);
    }
  }
  const auto enc = params_of(wm.encoder);
  CHECK(ta.count_param_leaves(enc) == 0);
  CHECK(ta.count_param_leaves(params_of(wm.gru)) == 2);
}

TEST_CASE("distillation on a fixed batch decreases when training only the encoder") {
  const auto cfg = toy_config();
  int decreased = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng init(seed, streams::init);
    WorldModel wm(cfg, init);
    Rng data(seed, streams::buffer);
    const SequenceBatch seq = random_batch(cfg, 4, 4, data);
    const GaussianParams teacher = random_teacher(16, 2, data);
    Adam opt(AdamConfig{1e-2});
    const ParamRefs enc = params_of(wm.encoder);
    std::vector<double> trace;
    for (int step = 0; step < 100; ++step) {
      Tape tape;
      tape.track_only(enc);
      Rng rng(seed, streams::finetune);
      const WmLoss loss = wm_loss(tape, wm, teacher, seq, rng, {1.0, 0.015, 0.1});
      trace.push_back(loss.report.distill);
      const Tensor d = distill_loss(teacher, loss.observed.code, DistillMode::gaussian_kl);
      opt.step(enc, tape.backward(d));
    }
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 10; ++i) {
      first += trace[i];
      last += trace[90 + i];
    }
    if (last < first) ++decreased;
  }
  CHECK(decreased == 3);
}
