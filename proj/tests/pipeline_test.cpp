#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "diswm/diffcore/errors.hpp"
#include "diswm/pipeline/config.hpp"
#include "diswm/pipeline/gradcheck_suite.hpp"
#include "diswm/pipeline/images.hpp"
#include "diswm/pipeline/metrics.hpp"
#include "diswm/pipeline/mig.hpp"
#include "diswm/pipeline/replay_buffer.hpp"
#include "diswm/pipeline/trainer.hpp"

using namespace diswm;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("diswm_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig tiny_config() {
  return parse_config(R"({
    "seed": 3,
    "env": {"height": 8, "width": 8, "episode_length": 20},
    "videos": {"total_frames": 400, "source": {"episode_length": 20}},
    "model": {"code_dim": 3, "z_dim": 3, "h_dim": 8, "trunk": [16], "head": [16]},
    "pretrain": {"steps": 10, "batch": 4, "length": 6},
    "finetune": {"total_env_steps": 200, "inner_steps": 2, "batch": 3, "length": 6, "seed_episodes": 2,
                 "eval_every_episodes": 2, "eval_episodes": 2, "baseline_episodes": 4},
    "behavior": {"horizon": 4, "hidden": [16]}
  })");
}

VideoPredictor tiny_teacher(const RunConfig& cfg) {
  Rng rng = Rng(cfg.seed).split(streams::dataset);
  const VideoDataset ds = gen_video_dataset(cfg.videos, rng);
  MetricsLog m;
  return run_pretrain(cfg, ds, m);
}

EpisodeRecord tagged_episode(std::size_t steps, double tag) {
  EpisodeRecord e(3, 2);
  const Observation o{1, 1, {0.f, 0.f, 0.f}};
  for (std::size_t i = 0; i < steps; ++i) {
    Observation oi = o;
    oi.pixels[0] = static_cast<float>(i);
    const std::array<double, 2> a{0.5, -0.5};
    e.append(oi, a, tag, i + 1 == steps ? 0.0 : 1.0);
  }
  return e;
}

bool bits_equal(const ConstParamRefs& a, const ConstParamRefs& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = a[i]->value(), y = b[i]->value();
    if (x.size() != y.size() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config: defaults, round trip and rejection") {
  const RunConfig d = parse_config("{}");
  CHECK(d.pretrain.beta1 == 1.0);
  CHECK(d.pretrain.beta2 == 0.015);
  CHECK(d.finetune.alpha == 1.0);
  CHECK(d.finetune.beta == 0.015);
  CHECK(d.distill.eta_start == 0.1);
  CHECK(d.distill.eta_end == 0.01);
  CHECK(d.behavior.lambda == 0.95);
  CHECK(d.behavior.gamma == 0.99);
  CHECK(d.behavior.horizon == 15);
  CHECK(d.finetune.lr == 3e-4);
  CHECK(d.behavior.actor_lr == 8e-5);
  CHECK(d.model.z_dim == 8);
  CHECK(d.finetune.inner_steps == 10);
  CHECK(d.finetune.batch == 16);
  CHECK(d.finetune.length == 16);

  const std::string text = dump_config(tiny_config());
  CHECK(dump_config(parse_config(text)) == text);

  CHECK_THROWS_AS(parse_config(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"finetune": {"inner_step": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"behavior": {"lambda": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"pretrain": {"steps": -1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"pretrain": {"steps": "many"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"distill": {"mode": "cosine"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  try {
    parse_config(R"({"videos": {"source": {"wobble": true}}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("videos.source.wobble") != std::string::npos);
  }
  CHECK(parse_config(R"({"env": {"height": 12}})").videos.source.height == 12);
}

TEST_CASE("replay buffer: eviction, contiguity, short episodes") {
  ReplayBuffer buf(30, 3, 2);
  buf.add(tagged_episode(10, 1.0));
  buf.add(tagged_episode(3, 2.0));
  buf.add(tagged_episode(12, 3.0));
  CHECK(buf.steps() == 25);
  buf.add(tagged_episode(10, 4.0));
  CHECK(buf.episodes() == 3);
  CHECK(buf.steps() == 25);
  CHECK(buf.episode(0).rewards[0] == 2.0f);

  Rng rng(5);
  const SequenceBatch s = buf.sample(64, 5, rng);
  CHECK(s.obs.shape() == Shape{5 * 64, 3});
  for (std::size_t b = 0; b < 64; ++b) {
    const double tag = s.rewards.at(b, 0);
    CHECK(tag != 2.0);
    for (std::size_t t = 1; t < 5; ++t) {
      CHECK(s.rewards.at(t * 64 + b, 0) == tag);
      CHECK(s.obs.at(t * 64 + b, 0) == s.obs.at((t - 1) * 64 + b, 0) + 1.0);
    }
  }
  CHECK_THROWS_AS(buf.sample(1, 13, rng), ContractError);
}

TEST_CASE("replay buffer windows are uniform over (episode, offset) pairs") {
  ReplayBuffer buf(1000, 3, 2);
  for (std::size_t n : {5u, 8u, 2u, 12u}) buf.add(tagged_episode(n, static_cast<double>(n)));
  const std::size_t L = 4;
  const std::size_t cells = buf.window_count(L);
  REQUIRE(cells == 2 + 5 + 9);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
  Rng rng(99);
  const std::size_t draws = 100000;
  for (std::size_t i = 0; i < draws; ++i) ++counts[buf.sample_window(L, rng)];
  CHECK(counts.size() == cells);
  const double expected = static_cast<double>(draws) / static_cast<double>(cells);
  double chi2 = 0.0;
  for (const auto& [k, c] : counts) {
    CHECK(buf.episode(k.first).size() >= L);
    chi2 += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  }
  // 15 degrees of freedom, upper 1% point
  CHECK(chi2 < 30.578);
}

TEST_CASE("replay buffer checkpoint round trip") {
  ReplayBuffer buf(100, 3, 2);
  buf.add(tagged_episode(7, 1.0));
  buf.add(tagged_episode(9, 2.0));
  Checkpoint ck;
  buf.save(ck, "buffer/");
  const ReplayBuffer back = ReplayBuffer::load(Checkpoint::deserialize(ck.serialize()), "buffer/");
  CHECK(back.steps() == buf.steps());
  Rng a(1), b(1);
  const SequenceBatch x = buf.sample(4, 3, a), y = back.sample(4, 3, b);
  CHECK(std::equal(x.obs.data().begin(), x.obs.data().end(), y.obs.data().begin()));
  CHECK(std::equal(x.actions.data().begin(), x.actions.data().end(), y.actions.data().begin()));
}

TEST_CASE("seed buffer collects bounded random episodes") {
  TargetEnvConfig ec;
  ec.episode_length = 25;
  TargetEnv env(ec);
  Rng rng(8);
  const ReplayBuffer buf = seed_buffer(env, rng, 60, 10000);
  CHECK(buf.steps() - buf.episodes() >= 60);
  CHECK(buf.episodes() == 3);
  for (std::size_t i = 0; i < buf.episodes(); ++i) {
    const auto& e = buf.episode(i);
    CHECK(e.size() == 26);
    for (float a : e.actions) CHECK(std::abs(a) <= 1.0f);
    CHECK(e.continues.front() == 1.0f);
    CHECK(e.continues.back() == 0.0f);
    for (std::size_t t = 1; t + 1 < e.size(); ++t) CHECK(e.continues[t] == 1.0f);
    for (std::size_t t = 1; t < e.size(); ++t) CHECK(e.rewards[t] >= env.reward_lower_bound());
  }
  CHECK_THROWS_AS(seed_buffer(env, rng, 10, 1000), ContractError);
}

TEST_CASE("metrics log: csv schema, monotone steps, checkpoint order") {
  MetricsLog log;
  log.append(0, "a", 0.1);
  log.append(0, "b", 1.0 / 3.0);
  log.append(5, "a", -2.5e-300);
  log.append(5, "a", 7.0);
  CHECK_THROWS_AS(log.append(4, "a", 1.0), ContractError);
  CHECK_THROWS_AS(log.append(9, "x,y", 1.0), ContractError);
  const std::string csv = log.to_csv();
  CHECK(csv.rfind("step,name,value\n0,a,0.10000000000000001\n0,b,0.33333333333333331\n", 0) == 0);

  const fs::path dir = temp_dir("metrics");
  log.write_csv(dir / "m.csv");
  const MetricsLog back = MetricsLog::read_csv(dir / "m.csv");
  CHECK(back.rows() == log.rows());

  Checkpoint ck;
  log.save(ck, "metrics/");
  CHECK(MetricsLog::load(ck, "metrics/").to_csv() == csv);
}

TEST_CASE("MIG: identity, noise, permutation, degenerate dims") {
  Rng rng(21);
  const std::size_t n = 10000;
  std::vector<std::vector<double>> factors(3, std::vector<double>(n));
  for (auto& f : factors) {
    for (double& v : f) v = rng.uniform();
  }
  const std::vector<std::string> names{"f0", "f1", "f2"};
  const MigReport id = mig_from_samples(factors, factors, names, 20);
  CHECK(id.mig >= 0.9);
  CHECK(id.mig <= 1.0);

  std::vector<std::vector<double>> noise(4, std::vector<double>(n));
  for (auto& d : noise) {
    for (double& v : d) v = rng.normal();
  }
  const MigReport nz = mig_from_samples(noise, factors, names, 20);
  CHECK(nz.mig < 0.05);
  CHECK(nz.mig >= 0.0);
  for (const auto& row : nz.mutual_info) {
    for (double mi : row) CHECK(mi >= 0.0);
  }

  std::vector<std::vector<double>> mixed{noise[0], factors[2], factors[0], noise[1], factors[1]};
  std::vector<std::vector<double>> permuted{factors[1], noise[1], factors[0], noise[0], factors[2]};
  CHECK(mig_from_samples(mixed, factors, names, 20).mig ==
        doctest::Approx(mig_from_samples(permuted, factors, names, 20).mig).epsilon(1e-12));

  std::vector<std::vector<double>> with_const{std::vector<double>(n, 0.25), factors[0]};
  const MigReport c = mig_from_samples(with_const, {factors[0]}, {"f0"}, 20);
  CHECK(c.mutual_info[0][0] == 0.0);
  CHECK(quantile_bins(std::vector<double>(50, 1.0), 20) == std::vector<std::size_t>(50, 19));
  CHECK_THROWS_AS(mig_from_samples(factors, {std::vector<double>(n, 1.0)}, {"flat"}, 20), ConfigError);
}

TEST_CASE("traversal export: grid geometry, quantization, reproducibility") {
  RunConfig cfg = tiny_config();
  const VideoPredictor teacher = tiny_teacher(cfg);
  const auto& c = teacher.config();
  const auto values = default_traversal_values();
  const fs::path dir = temp_dir("images");
  const auto anchors = traversal_anchors(cfg, 2);
  const auto files = export_traversals(traversal_fn(teacher), c.code_dim, c.height, c.width, anchors, values, dir);
  REQUIRE(files.size() == 2);
  const RgbImage img = read_ppm(files[0]);
  CHECK(img.height == c.code_dim * c.height);
  CHECK(img.width == values.size() * c.width);
  const auto again = export_traversals(traversal_fn(teacher), c.code_dim, c.height, c.width, anchors, values,
                                       dir / "again");
  CHECK(slurp(files[0]) == slurp(again[0]));
  CHECK(slurp(files[1]) == slurp(again[1]));

  const RgbImage q = quantize_frame(Tensor({1, 3}, {-0.5, 0.5, 2.0}), 1, 1);
  CHECK(q.pixels == std::vector<std::uint8_t>{0, 128, 255});
  CHECK_THROWS_AS(export_traversals(traversal_fn(teacher), c.code_dim, c.height, c.width, anchors, values,
                                    files[0] / "sub"),
                  IoError);
}

TEST_CASE("gradient-check suite passes") {
  for (const auto& c : run_gradcheck_suite("all")) {
    INFO(c.module << " / " << c.name << " worst " << c.result.worst_param);
    CHECK(c.result.max_relative_error < kGradCheckTolerance);
  }
  CHECK_THROWS_AS(run_gradcheck_suite("everything"), ConfigError);
}

TEST_CASE("training run: metrics contract, frozen teacher, resume determinism") {
  const RunConfig cfg = tiny_config();
  const VideoPredictor teacher = tiny_teacher(cfg);
  const fs::path root = temp_dir("train");
  Checkpoint tck;
  save_video_predictor(tck, teacher);
  tck.save(root / "teacher.dwmc");

  RunConfig ck_cfg = cfg;
  ck_cfg.finetune.checkpoint_every_episodes = 3;
  TrainOptions opts;
  opts.teacher = root / "teacher.dwmc";
  train(ck_cfg, nullptr, root / "a", opts);
  train(ck_cfg, nullptr, root / "b", opts);
  const std::string csv = slurp(root / "a" / "metrics.csv");
  CHECK(csv == slurp(root / "b" / "metrics.csv"));
  CHECK(slurp(root / "a" / "config.echo") == dump_config(ck_cfg));

  const MetricsLog log = MetricsLog::read_csv(root / "a" / "metrics.csv");
  const std::size_t S = cfg.finetune_steps();
  REQUIRE(S == 16);
  const auto eta = log.series("eta");
  REQUIRE(eta.size() == S);
  CHECK(eta.front().value == 0.1);
  CHECK(std::abs(eta.back().value - 0.01) <= 1e-12);
  for (std::size_t s = 0; s < S; ++s) {
    CHECK(eta[s].step == s);
    CHECK(std::abs(eta[s].value - (0.1 + (0.01 - 0.1) * static_cast<double>(s) / static_cast<double>(S - 1))) <=
          1e-12);
  }
  CHECK(log.series("episode_return").size() == cfg.finetune_episodes() / cfg.finetune.eval_every_episodes);
  const auto sw = log.series("color_scheme_switch");
  REQUIRE(sw.size() == 1);
  CHECK(sw[0].step == cfg.color_switch_env_step());

  const auto total = log.series("wm_total");
  const auto recon = log.series("wm_recon"), rew = log.series("wm_reward_nll"), disc = log.series("wm_discount_nll");
  const auto kd = log.series("wm_kl_dyn"), ke = log.series("wm_kl_disen"), di = log.series("wm_distill");
  for (std::size_t s = 0; s < S; ++s) {
    const double sum = recon[s].value + rew[s].value + disc[s].value + cfg.finetune.alpha * kd[s].value +
                       cfg.finetune.beta * ke[s].value + eta[s].value * di[s].value;
    CHECK(std::abs(total[s].value - sum) <= 1e-9);
  }

  TargetEnv env(cfg.env);
  Rng brng = Rng(cfg.seed).split(streams::evaluation).split(1);
  const auto returns = random_policy_returns(env, brng, cfg.finetune.baseline_episodes);
  double m = 0.0;
  for (double r : returns) m += r;
  CHECK(log.series("random_baseline").at(0).value == doctest::Approx(m / static_cast<double>(returns.size())));

  const Trainer final_state = Trainer::from_checkpoint(Checkpoint::load(latest_checkpoint(root / "a")));
  CHECK(bits_equal(final_state.teacher().params(), params_of(teacher.encoder)));
  CHECK(final_state.finished());

  const fs::path mid = root / "a" / "checkpoints" / "step_100.dwmc";
  REQUIRE(fs::exists(mid));
  TrainOptions resume;
  resume.resume = mid;
  train(ck_cfg, nullptr, root / "c", resume);
  CHECK(slurp(root / "c" / "metrics.csv") == csv);
  CHECK(slurp(latest_checkpoint(root / "c")) == slurp(latest_checkpoint(root / "a")));

  RunConfig other = ck_cfg;
  other.seed = 4;
  resume.resume = mid;
  CHECK_THROWS_AS(train(other, nullptr, root / "d", resume), ConfigError);
}

TEST_CASE("evaluation: deterministic, bounded by the scripted controller") {
  const RunConfig cfg = tiny_config();
  const Trainer t(cfg, tiny_teacher(cfg));
  TargetEnv e1(cfg.env), e2(cfg.env);
  Rng r1(31), r2(31);
  const EvalResult a = evaluate(t.actor(), t.world_model(), e1, 6, r1);
  const EvalResult b = evaluate(t.actor(), t.world_model(), e2, 6, r2);
  CHECK(a.returns == b.returns);
  Rng g(31);
  const EvalResult greedy = evaluate_greedy(e1, 6, g);
  CHECK(greedy.mean >= a.mean);
}

TEST_CASE("non-finite training state aborts with a diagnostic bundle") {
  RunConfig cfg = tiny_config();
  cfg.finetune.lr = 1e300;
  cfg.optim.clip_norm = 0.0;
  const VideoPredictor teacher = tiny_teacher(cfg);
  const fs::path root = temp_dir("abort");
  Checkpoint tck;
  save_video_predictor(tck, teacher);
  tck.save(root / "teacher.dwmc");
  TrainOptions opts;
  opts.teacher = root / "teacher.dwmc";
  CHECK_THROWS_AS(train(cfg, nullptr, root / "run", opts), NumericAbort);
  const std::string bundle = slurp(root / "run" / "abort.txt");
  CHECK(bundle.find("numeric abort") != std::string::npos);
  CHECK(bundle.find("finetune_rng") != std::string::npos);
  CHECK(bundle.find("\"seed\": 3") != std::string::npos);
}
