#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "diswm/diffcore/errors.hpp"
#include "diswm/envsim/envs.hpp"
#include "diswm/envsim/video_dataset.hpp"

using namespace diswm;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("diswm_envsim_" + name);
}

}  // namespace

TEST_CASE("reset is deterministic and draws uniform positions") {
  TargetEnv a, b;
  Rng ra(11, streams::environment), rb(11, streams::environment);
  CHECK(a.reset(ra) == b.reset(rb));
  CHECK(a.factors() == b.factors());
  CHECK(a.state().step_index == 0);

  TargetEnv env;
  Rng rng(3);
  double sx = 0.0, sy = 0.0;
  for (int i = 0; i < 1000; ++i) {
    env.reset(rng);
    sx += env.factors().agent_x;
    sy += env.factors().agent_y;
  }
  CHECK(sx / 1000 >= 0.45);
  CHECK(sx / 1000 <= 0.55);
  CHECK(sy / 1000 >= 0.45);
  CHECK(sy / 1000 <= 0.55);
}

TEST_CASE("color palettes are disjoint after jitter") {
  Rng rng(5);
  double max_a = 0.0, min_b = 1.0;
  for (int i = 0; i < 2000; ++i) {
    const double ha = draw_hue(ColorScheme::A, rng);
    const double hb = draw_hue(ColorScheme::B, rng);
    // scheme A's hue 0 wraps below zero into [0.98, 1)
    if (ha < 0.5) max_a = std::max(max_a, ha);
    else CHECK(ha >= 0.98);
    min_b = std::min(min_b, hb);
    CHECK(hb <= 0.87);
  }
  CHECK(max_a < min_b);
  for (double x : hue_palette(ColorScheme::A)) {
    for (double y : hue_palette(ColorScheme::B)) CHECK(std::abs(x - y) > 4 * kHueJitter);
  }
}

TEST_CASE("step reward examples") {
  TargetEnv env;
  Rng rng(1);
  env.reset(rng);
  const std::array<double, 2> zero{0.0, 0.0};

  EnvState s = env.state();
  s.factors.agent_x = s.factors.goal_x = 0.3;
  s.factors.agent_y = s.factors.goal_y = 0.6;
  env.restore(s);
  CHECK(env.step(zero, rng).reward == 0.0);

  s.factors.agent_x = s.factors.agent_y = 0.0;
  s.factors.goal_x = s.factors.goal_y = 1.0;
  env.restore(s);
  CHECK(env.step(zero, rng).reward == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-15));

  // clipped action of norm² 2 costs 0.02
  env.restore(s);
  const std::array<double, 2> big{-3.0, -3.0};
  CHECK(env.step(big, rng).reward == doctest::Approx(-std::sqrt(2.0) - 0.02).epsilon(1e-15));
}

TEST_CASE("greedy controller strictly reduces distance until contact") {
  TargetEnv env;
  Rng rng(17, streams::environment);
  for (int ep = 0; ep < 100; ++ep) {
    Rng ep_rng = rng.split(ep);
    env.reset(ep_rng);
    double prev = std::hypot(env.factors().agent_x - env.factors().goal_x, env.factors().agent_y - env.factors().goal_y);
    double prev_reward = -1e9;
    while (!env.done()) {
      const auto& f = env.factors();
      const double dx = f.goal_x - f.agent_x, dy = f.goal_y - f.agent_y;
      const double d = std::hypot(dx, dy);
      if (d < 1e-12) break;
      const double step = std::min(1.0, d / env.config().speed);
      const std::array<double, 2> a{step * dx / d, step * dy / d};
      const auto res = env.step(a, ep_rng);
      const double now = std::hypot(env.factors().agent_x - env.factors().goal_x,
                                    env.factors().agent_y - env.factors().goal_y);
      if (prev < 1e-9) break;
      CHECK(now < prev);
      // penalty shrinks with the action, so reward rises too
      CHECK(res.reward > prev_reward);
      prev = now;
      prev_reward = res.reward;
    }
  }
}

TEST_CASE("episode termination and contracts") {
  TargetEnvConfig cfg;
  cfg.episode_length = 5;
  TargetEnv env(cfg);
  Rng rng(4);
  const std::array<double, 2> a{0.3, -0.2};
  CHECK_THROWS_AS(env.step(a, rng), ContractError);
  env.reset(rng);
  for (int t = 1; t <= 5; ++t) {
    const auto r = env.step(a, rng);
    CHECK(r.cont == (t == 5 ? 0.0 : 1.0));
  }
  CHECK(env.done());
  CHECK_THROWS_AS(env.step(a, rng), ContractError);
  env.reset(rng);
  const std::array<double, 3> wrong{0, 0, 0};
  CHECK_THROWS_AS(env.step(wrong, rng), ContractError);
}

TEST_CASE("reward bound and action clipping") {
  TargetEnv env;
  Rng rng(8);
  const double lo = env.reward_lower_bound();
  CHECK(lo == doctest::Approx(-(std::sqrt(2.0) + 0.02)));
  for (int ep = 0; ep < 20; ++ep) {
    env.reset(rng);
    while (!env.done()) {
      const std::array<double, 2> a{rng.uniform(-5, 5), rng.uniform(-5, 5)};
      const auto r = env.step(a, rng);
      CHECK(r.reward <= 0.0);
      CHECK(r.reward >= lo);
      const auto& f = env.factors();
      CHECK(f.agent_x >= 0.0);
      CHECK(f.agent_x <= 1.0);
    }
  }
}

TEST_CASE("rendering is pure and factor query is read-only") {
  TargetEnv env;
  Rng rng(9);
  env.reset(rng);
  const FactorVector before = env.factors();
  const Observation o1 = env.render();
  const Observation o2 = env.render();
  CHECK(o1 == o2);
  CHECK(env.factors() == before);
  CHECK(before.agent_hue >= 0.0);
  CHECK(before.agent_hue < 1.0);
  CHECK(before.background_hue < 1.0);
  CHECK(before.distractor_hue < 1.0);
  for (float p : o1.pixels) {
    CHECK(p >= 0.0f);
    CHECK(p <= 1.0f);
  }
  CHECK(o1.size() == 16 * 16 * 3);
}

TEST_CASE("source rollouts") {
  SourceEnv src;
  Rng rng(21, streams::dataset);
  CHECK_THROWS_AS(src.rollout(rng, 1), ContractError);

  const double bound = src.max_step_px();
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Rng r = rng.split(i);
    const SourceClip clip = src.rollout(r, 20);
    for (std::size_t t = 0; t < clip.factors.size(); ++t) {
      CHECK(clip.factors[t].background_hue == clip.factors[0].background_hue);
      CHECK(clip.factors[t].agent_hue == clip.factors[0].agent_hue);
    }
    for (std::size_t t = 1; t < clip.frames.size(); ++t) {
      for (std::size_t k = 0; k < clip.frames[t].size(); ++k) {
        worst = std::max(worst, static_cast<double>(std::abs(clip.frames[t].pixels[k] - clip.frames[t - 1].pixels[k])));
      }
      // sprite coordinates move at most `bound` pixels per frame
      const auto& a = clip.factors[t];
      const auto& b = clip.factors[t - 1];
      const double agent_span = 16.0 * (1.0 - 2.0 * src.config().agent_radius);
      const double distractor_span = 16.0 * (1.0 - 2.0 * src.config().distractor_radius);
      CHECK(std::abs(a.agent_x - b.agent_x) * agent_span <= bound + 1e-12);
      CHECK(std::abs(a.distractor_y - b.distractor_y) * distractor_span <= bound + 1e-12);
    }
  }
  // coverage ramps are one pixel wide: each of the two sprites changes a
  // pixel's coverage by at most its x plus y displacement in pixels
  CHECK(worst <= 4.0 * bound);

  int differ = 0;
  for (int i = 0; i < 100; ++i) {
    Rng r1 = rng.split(1000 + 2 * i), r2 = rng.split(1001 + 2 * i);
    if (src.rollout(r1, 2).factors[0] != src.rollout(r2, 2).factors[0]) ++differ;
  }
  CHECK(differ == 100);
}

TEST_CASE("video dataset round-trip and regeneration") {
  VideoDatasetConfig cfg;
  cfg.total_frames = 237;
  cfg.source.episode_length = 50;
  Rng rng(31, streams::dataset);
  const VideoDataset ds = gen_video_dataset(cfg, rng);
  CHECK(ds.frame_count() == 237);
  CHECK(ds.episodes.size() == 5);
  CHECK(ds.episodes.back().frames.size() == 37);

  const auto path = temp_path("rt.dwmv");
  save_video_dataset(path, ds);
  const VideoDataset back = load_video_dataset(path);
  REQUIRE(back.episodes.size() == ds.episodes.size());
  for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
    CHECK(back.episodes[e].frames == ds.episodes[e].frames);
    CHECK(back.episodes[e].factors == ds.episodes[e].factors);
    for (std::size_t t = 0; t < ds.episodes[e].frames.size(); ++t) {
      CHECK(SourceEnv::render(back.episodes[e].factors[t], cfg.source) == back.episodes[e].frames[t]);
    }
  }
  // first half scheme A, second half scheme B
  const double h0 = ds.episodes[0].factors[0].background_hue;
  CHECK((h0 < 0.5 || h0 >= 0.98));
  CHECK(ds.episodes[4].factors[0].background_hue > 0.5);
  CHECK(ds.episodes[4].factors[0].background_hue < 0.9);

  const auto manifest = temp_path("rt.manifest");
  save_manifest(manifest, {path.filename(), path.filename()});
  const VideoDataset twice = load_video_dataset(manifest);
  CHECK(twice.frame_count() == 2 * 237);

  std::vector<unsigned char> bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto cut = temp_path("cut.dwmv");
  Rng frng(77);
  for (int i = 0; i < 30; ++i) {
    const std::size_t n = 4 + frng.below(bytes.size() - 4);
    std::ofstream(cut, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(n));
    CHECK_THROWS_AS(load_video_dataset(cut), LoadError);
  }
  CHECK_THROWS_AS(load_video_dataset(temp_path("missing.dwmv")), IoError);
  std::filesystem::remove(path);
  std::filesystem::remove(manifest);
  std::filesystem::remove(cut);
}
