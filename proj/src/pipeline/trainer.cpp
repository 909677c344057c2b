#include "diswm/pipeline/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "diswm/diffcore/errors.hpp"
#include "diswm/diffcore/ops.hpp"
#include "diswm/pipeline/images.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace diswm {

namespace fs = std::filesystem;

namespace {

namespace init_streams {
constexpr std::uint64_t teacher = 0;
constexpr std::uint64_t world_model = 1;
constexpr std::uint64_t actor = 2;
constexpr std::uint64_t critic = 3;
}  // namespace init_streams

constexpr std::uint64_t kBaselineStream = 1;
constexpr std::uint64_t kAnchorStream = 2;

Rng root_rng(const RunConfig& c) { return Rng(c.seed); }

Adam make_adam(const RunConfig& c, double lr) {
  AdamConfig a = c.optim;
  a.lr = lr;
  return Adam(a);
}

Tensor obs_row(const Observation& o) {
  return Tensor({1, o.size()}, std::vector<double>(o.pixels.begin(), o.pixels.end()));
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::string rng_text(const char* name, const Rng& r) {
  std::ostringstream s;
  s << name << ": seed=" << r.seed() << " stream=" << r.stream() << " counter=" << r.counter() << "\n";
  return s.str();
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create '" + p.string() + "': " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + p.string() + "'");
}

}  // namespace

VideoPredictor run_pretrain(const RunConfig& config, const VideoDataset& dataset, MetricsLog& metrics,
                            const ProgressFn& progress) {
  if (dataset.height != config.env.height || dataset.width != config.env.width) {
    throw ConfigError("video dataset is " + std::to_string(dataset.height) + "x" + std::to_string(dataset.width) +
                      " but the config expects " + std::to_string(config.env.height) + "x" +
                      std::to_string(config.env.width));
  }
  const Rng root = root_rng(config);
  Rng init = root.split(streams::init).split(init_streams::teacher);
  Rng rng = root.split(streams::pretrain);
  VideoPredictor model(config.video_predictor(), init);
  Adam opt = make_adam(config, config.pretrain.lr);
  const auto& p = config.pretrain;
  for (std::size_t s = 0; s < p.steps; ++s) {
    const VideoBatch batch = sample_video_batch(dataset, p.batch, p.length, rng);
    const PretrainLossReport r = pretrain_step(model, opt, batch, rng, p.beta1, p.beta2);
    metrics.append(s, "pretrain_total", r.total);
    metrics.append(s, "pretrain_recon", r.recon);
    metrics.append(s, "pretrain_kl_dyn", r.kl_dyn);
    metrics.append(s, "pretrain_kl_disen", r.kl_disen);
    if (progress && (s + 1) % 500 == 0) {
      progress("pretrain step " + std::to_string(s + 1) + "/" + std::to_string(p.steps) +
               " loss=" + std::to_string(r.total));
    }
  }
  return model;
}

EvalResult evaluate(const Actor& actor, const WorldModel& wm, TargetEnv& env, std::size_t episodes, Rng& rng) {
  EvalResult out;
  const auto& c = wm.config();
  for (std::size_t e = 0; e < episodes; ++e) {
    RssmState state = RssmState::zeros(c, 1);
    Tensor action = Tensor::zeros({1, c.action_dim});
    state = observe_step(wm, state, action, obs_row(env.reset(rng)), rng, false);
    double ret = 0.0;
    while (!env.done()) {
      action = actor.mode(state.features());
      const StepResult r = env.step(action.data(), rng);
      ret += r.reward;
      state = observe_step(wm, state, action, obs_row(r.observation), rng, false);
    }
    out.returns.push_back(ret);
  }
  out.mean = mean_of(out.returns);
  out.stddev = stddev_of(out.returns);
  return out;
}

EvalResult evaluate_greedy(TargetEnv& env, std::size_t episodes, Rng& rng) {
  EvalResult out;
  for (std::size_t e = 0; e < episodes; ++e) {
    env.reset(rng);
    double ret = 0.0;
    while (!env.done()) {
      const auto& f = env.factors();
      const double dx = f.goal_x - f.agent_x, dy = f.goal_y - f.agent_y;
      const double d = std::hypot(dx, dy);
      std::array<double, 2> a{0.0, 0.0};
      if (d > 0.0) {
        const double step = std::min(1.0, d / env.config().speed);
        a = {step * dx / d, step * dy / d};
      }
      ret += env.step(a, rng).reward;
    }
    out.returns.push_back(ret);
  }
  out.mean = mean_of(out.returns);
  out.stddev = stddev_of(out.returns);
  return out;
}

Trainer::Trainer(RunConfig config, const VideoPredictor& teacher, MetricsLog metrics)
    : config_(std::move(config)), teacher_model_(teacher), teacher_(freeze_encoder(teacher)),
      metrics_(std::move(metrics)) {
  validate(config_);
  const auto wc = config_.world_model();
  const auto& tc = teacher.config();
  if (tc.code_dim != wc.code_dim || tc.obs_dim() != wc.obs_dim()) {
    throw ConfigError("teacher (code " + std::to_string(tc.code_dim) + ", obs " + std::to_string(tc.obs_dim()) +
                      ") does not match the config (code " + std::to_string(wc.code_dim) + ", obs " +
                      std::to_string(wc.obs_dim()) + ")");
  }
  const Rng root = root_rng(config_);
  const Rng init = root.split(streams::init);
  Rng wm_init = init.split(init_streams::world_model);
  Rng actor_init = init.split(init_streams::actor);
  Rng critic_init = init.split(init_streams::critic);
  wm_ = WorldModel(wc, wm_init);
  actor_ = Actor(wc.feature_dim(), wc.action_dim, config_.behavior.hidden, actor_init, config_.behavior.min_std);
  critic_ = Critic(wc.feature_dim(), config_.behavior.hidden, critic_init);
  wm_opt_ = make_adam(config_, config_.finetune.lr);
  actor_opt_ = make_adam(config_, config_.behavior.actor_lr);
  critic_opt_ = make_adam(config_, config_.behavior.critic_lr);
  finetune_rng_ = root.split(streams::finetune);
  env_rng_ = root.split(streams::environment);
  eval_rng_ = root.split(streams::evaluation);
  buffer_rng_ = root.split(streams::buffer);
  env_ = TargetEnv(config_.env);

  const auto& f = config_.finetune;
  buffer_ = seed_buffer(env_, env_rng_, f.seed_episodes * config_.env.episode_length, f.buffer_capacity);
  env_step_ = buffer_.steps() - buffer_.episodes();

  TargetEnv baseline_env(config_.env);
  Rng baseline_rng = eval_rng_.split(kBaselineStream);
  const auto returns = random_policy_returns(baseline_env, baseline_rng, f.baseline_episodes);
  metrics_.append(0, "random_baseline", mean_of(returns));
  metrics_.append(0, "random_baseline_std", stddev_of(returns));
}

void Trainer::update_step() {
  const auto& f = config_.finetune;
  const std::size_t total = config_.finetune_steps();
  const double eta = eta_schedule(grad_step_, total > 0 ? total - 1 : 0, config_.distill);
  const SequenceBatch batch = buffer_.sample(f.batch, f.length, buffer_rng_);
  const GaussianParams teacher_code = teacher_.forward(batch.obs);

  const ParamRefs wm_params = params_of(wm_);
  Tape tape;
  tape.track_only(wm_params);
  const WmLossWeights weights{f.alpha, f.beta, eta};
  WmLoss loss = wm_loss(tape, wm_, teacher_code, batch, finetune_rng_, weights, config_.distill.mode);
  last_wm_ = loss.report;
  if (!std::isfinite(loss.report.total)) throw NumericAbort("world-model loss is not finite: " + describe(loss.report));
  const Gradients grads = tape.backward(loss.total);
  double wm_norm = 0.0;
  try {
    wm_norm = wm_opt_.step(wm_params, grads);
  } catch (const NumericAbort& e) {
    throw NumericAbort(std::string(e.what()) + "; world-model terms: " + describe(loss.report));
  }

  const RssmState start = loss.observed.detached_states();
  last_behavior_ = behavior_step(wm_, actor_, critic_, start, config_.behavior, actor_opt_, critic_opt_, finetune_rng_);

  const std::uint64_t s = grad_step_;
  const WmLossReport& r = loss.report;
  metrics_.append(s, "eta", eta);
  metrics_.append(s, "wm_total", r.total);
  metrics_.append(s, "wm_recon", r.recon);
  metrics_.append(s, "wm_reward_nll", r.reward_nll);
  metrics_.append(s, "wm_discount_nll", r.discount_nll);
  metrics_.append(s, "wm_kl_dyn", r.kl_dyn);
  metrics_.append(s, "wm_kl_disen", r.kl_disen);
  metrics_.append(s, "wm_distill", r.distill);
  metrics_.append(s, "wm_grad_norm", wm_norm);
  const BehaviorReport& b = last_behavior_;
  metrics_.append(s, "actor_loss", b.actor_loss);
  metrics_.append(s, "critic_loss", b.critic_loss);
  metrics_.append(s, "imagined_reward", b.mean_imagined_reward);
  metrics_.append(s, "lambda_target", b.mean_target);
  metrics_.append(s, "actor_entropy", b.mean_entropy);
  ++grad_step_;
}

void Trainer::collect_episode() {
  if (!switched_ && env_step_ >= config_.color_switch_env_step()) {
    env_.set_color_scheme(ColorScheme::B);
    switched_ = true;
    metrics_.append(env_step_, "color_scheme_switch", 1.0);
  }
  const auto& c = wm_.config();
  EpisodeRecord rec(env_.obs_dim(), c.action_dim);
  RssmState state = RssmState::zeros(c, 1);
  Tensor action = Tensor::zeros({1, c.action_dim});
  Observation obs = env_.reset(env_rng_);
  rec.append(obs, action.data(), 0.0, 1.0);
  state = observe_step(wm_, state, action, obs_row(obs), finetune_rng_, true);
  double ret = 0.0;
  while (!env_.done()) {
    {
      Tape tape(Tape::NoGrad{});
      action = stop_gradient(actor_.sample(tape, state.features(), finetune_rng_).action);
    }
    const StepResult r = env_.step(action.data(), env_rng_);
    ret += r.reward;
    rec.append(r.observation, action.data(), r.reward, r.cont);
    state = observe_step(wm_, state, action, obs_row(r.observation), finetune_rng_, true);
  }
  env_step_ += rec.size() - 1;
  buffer_.add(std::move(rec));
  metrics_.append(env_step_, "train_return", ret);
}

void Trainer::run_episode() {
  if (finished()) throw ContractError("training already finished");
  for (std::size_t k = 0; k < config_.finetune.inner_steps; ++k) update_step();
  collect_episode();
  ++episode_;
  if (episode_ % config_.finetune.eval_every_episodes == 0) {
    TargetEnv eval_env(config_.env);
    eval_env.set_color_scheme(env_.color_scheme());
    const EvalResult ev = evaluate(actor_, wm_, eval_env, config_.finetune.eval_episodes, eval_rng_);
    metrics_.append(env_step_, "episode_return", ev.mean);
    metrics_.append(env_step_, "episode_return_std", ev.stddev);
  }
}

std::string Trainer::diagnostics() const {
  std::ostringstream s;
  s << "grad_step=" << grad_step_ << " env_step=" << env_step_ << " episode=" << episode_ << "\n";
  s << "world model: " << describe(last_wm_) << "\n";
  const auto& b = last_behavior_;
  s << "behavior: actor_loss=" << b.actor_loss << " critic_loss=" << b.critic_loss << " mean_target=" << b.mean_target
    << " mean_value=" << b.mean_value << " mean_entropy=" << b.mean_entropy
    << " actor_grad_norm=" << b.actor_grad_norm << " critic_grad_norm=" << b.critic_grad_norm << "\n";
  s << rng_text("finetune_rng", finetune_rng_) << rng_text("env_rng", env_rng_) << rng_text("eval_rng", eval_rng_)
    << rng_text("buffer_rng", buffer_rng_);
  return s.str();
}

void save_adam(Checkpoint& ckpt, const std::string& prefix, const Adam& opt) {
  const std::vector<std::uint64_t> steps{opt.steps()};
  ckpt.put_u64(prefix + "steps", steps);
  for (const auto& [name, m] : opt.moments()) {
    ckpt.put(prefix + "m/" + name, {m.first.size()}, m.first);
    ckpt.put(prefix + "v/" + name, {m.second.size()}, m.second);
  }
}

void load_adam(const Checkpoint& ckpt, const std::string& prefix, Adam& opt) {
  const auto& steps = ckpt.u64(prefix + "steps");
  if (steps.size() != 1) throw LoadError(prefix + "steps is malformed");
  opt.set_steps(steps[0]);
  opt.moments().clear();
  const std::string mp = prefix + "m/";
  for (const std::string& key : ckpt.names()) {
    if (key.rfind(mp, 0) != 0) continue;
    const std::string name = key.substr(mp.size());
    Adam::Moments m;
    m.first = ckpt.f64(key);
    m.second = ckpt.f64(prefix + "v/" + name);
    if (m.first.size() != m.second.size()) throw LoadError("optimizer moments of '" + name + "' disagree");
    opt.moments()[name] = std::move(m);
  }
}

void save_rng(Checkpoint& ckpt, const std::string& name, const Rng& rng) {
  const std::vector<std::uint64_t> v{rng.seed(), rng.stream(), rng.counter()};
  ckpt.put_u64(name, v);
}

Rng load_rng(const Checkpoint& ckpt, const std::string& name) {
  const auto& v = ckpt.u64(name);
  if (v.size() != 3) throw LoadError(name + " must hold seed, stream and counter");
  return Rng(v[0], v[1], v[2]);
}

void put_text(Checkpoint& ckpt, const std::string& name, const std::string& text) {
  const std::vector<std::uint64_t> bytes(text.begin(), text.end());
  if (bytes.empty()) throw ContractError("empty text entry '" + name + "'");
  ckpt.put_u64(name, bytes);
}

std::string get_text(const Checkpoint& ckpt, const std::string& name) {
  std::string out;
  for (std::uint64_t b : ckpt.u64(name)) {
    if (b > 255) throw LoadError(name + " holds a non-byte value");
    out.push_back(static_cast<char>(b));
  }
  return out;
}

Checkpoint Trainer::snapshot() const {
  Checkpoint ck;
  put_text(ck, "run/config", dump_config(config_));
  const std::vector<std::uint64_t> counters{grad_step_, env_step_, episode_, switched_ ? 1u : 0u,
                                            static_cast<std::uint64_t>(env_.color_scheme())};
  ck.put_u64("run/counters", counters);
  save_video_predictor(ck, teacher_model_);
  save_world_model(ck, "wm/", wm_);
  ck.add_params("actor/", params_of(actor_));
  ck.add_params("critic/", params_of(critic_));
  save_adam(ck, "optim/wm/", wm_opt_);
  save_adam(ck, "optim/actor/", actor_opt_);
  save_adam(ck, "optim/critic/", critic_opt_);
  save_rng(ck, "rng/finetune", finetune_rng_);
  save_rng(ck, "rng/env", env_rng_);
  save_rng(ck, "rng/eval", eval_rng_);
  save_rng(ck, "rng/buffer", buffer_rng_);
  buffer_.save(ck, "buffer/");
  metrics_.save(ck, "metrics/");
  return ck;
}

Trainer Trainer::from_checkpoint(const Checkpoint& ck) {
  Trainer t;
  t.config_ = parse_config(get_text(ck, "run/config"));
  const auto& counters = ck.u64("run/counters");
  if (counters.size() != 5) throw LoadError("run/counters must hold 5 values");
  t.grad_step_ = counters[0];
  t.env_step_ = counters[1];
  t.episode_ = counters[2];
  t.switched_ = counters[3] != 0;
  t.teacher_model_ = load_video_predictor(ck);
  t.teacher_ = freeze_encoder(t.teacher_model_);
  const auto wc = t.config_.world_model();
  Rng scratch;
  t.wm_ = WorldModel(wc, scratch);
  load_world_model(ck, "wm/", t.wm_);
  t.actor_ = Actor(wc.feature_dim(), wc.action_dim, t.config_.behavior.hidden, scratch, t.config_.behavior.min_std);
  ck.restore_params("actor/", params_of(t.actor_));
  t.critic_ = Critic(wc.feature_dim(), t.config_.behavior.hidden, scratch);
  ck.restore_params("critic/", params_of(t.critic_));
  t.wm_opt_ = make_adam(t.config_, t.config_.finetune.lr);
  t.actor_opt_ = make_adam(t.config_, t.config_.behavior.actor_lr);
  t.critic_opt_ = make_adam(t.config_, t.config_.behavior.critic_lr);
  load_adam(ck, "optim/wm/", t.wm_opt_);
  load_adam(ck, "optim/actor/", t.actor_opt_);
  load_adam(ck, "optim/critic/", t.critic_opt_);
  t.finetune_rng_ = load_rng(ck, "rng/finetune");
  t.env_rng_ = load_rng(ck, "rng/env");
  t.eval_rng_ = load_rng(ck, "rng/eval");
  t.buffer_rng_ = load_rng(ck, "rng/buffer");
  t.env_ = TargetEnv(t.config_.env);
  t.env_.set_color_scheme(counters[4] == 0 ? ColorScheme::A : ColorScheme::B);
  t.buffer_ = ReplayBuffer::load(ck, "buffer/");
  t.metrics_ = MetricsLog::load(ck, "metrics/");
  return t;
}

void Trainer::write_checkpoint(const fs::path& run_dir) const {
  const fs::path dir = run_dir / "checkpoints";
  ensure_dir(dir);
  snapshot().save(dir / ("step_" + std::to_string(env_step_) + ".dwmc"));
}

fs::path latest_checkpoint(const fs::path& run_dir) {
  const fs::path dir = run_dir / "checkpoints";
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("no checkpoints directory in '" + run_dir.string() + "'");
  const std::regex pattern(R"(step_(\d+)\.dwmc)");
  fs::path best;
  unsigned long long best_step = 0;
  bool found = false;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    const unsigned long long step = std::stoull(m[1].str());
    if (!found || step > best_step) {
      best = entry.path();
      best_step = step;
      found = true;
    }
  }
  if (!found) throw IoError("no step_N.dwmc checkpoint in '" + dir.string() + "'");
  return best;
}

std::vector<Tensor> traversal_anchors(const RunConfig& config, std::size_t count) {
  TargetEnv env(config.env);
  Rng rng = root_rng(config).split(streams::evaluation).split(kAnchorStream);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i) {
    env.set_color_scheme(i % 2 == 0 ? ColorScheme::A : ColorScheme::B);
    out.push_back(obs_row(env.reset(rng)));
  }
  return out;
}

void train(const RunConfig& config, const VideoDataset* videos, const fs::path& run_dir,
           const TrainOptions& options) {
  ensure_dir(run_dir);
  const auto say = [&](const std::string& s) {
    if (options.progress) options.progress(s);
  };

  std::optional<Trainer> trainer;
  if (options.resume) {
    trainer.emplace(Trainer::from_checkpoint(Checkpoint::load(*options.resume)));
    if (dump_config(trainer->config()) != dump_config(config)) {
      throw ConfigError("config differs from the one stored in '" + options.resume->string() + "'");
    }
    say("resumed at env step " + std::to_string(trainer->env_steps()));
  } else {
    MetricsLog metrics;
    VideoPredictor teacher;
    if (options.teacher) {
      teacher = load_video_predictor(Checkpoint::load(*options.teacher));
    } else {
      if (videos == nullptr) throw ConfigError("train needs either a teacher checkpoint or a video dataset");
      teacher = run_pretrain(config, *videos, metrics, options.progress);
    }
    trainer.emplace(config, teacher, std::move(metrics));
  }
  write_text(run_dir / "config.echo", dump_config(config));

  Trainer& t = *trainer;
  try {
    while (!t.finished()) {
      t.run_episode();
      const std::size_t every = config.finetune.checkpoint_every_episodes;
      if (every > 0 && t.episodes() % every == 0 && !t.finished()) t.write_checkpoint(run_dir);
      if (t.episodes() % config.finetune.eval_every_episodes == 0) {
        t.metrics().write_csv(run_dir / "metrics.csv");
        const auto ev = t.metrics().series("episode_return");
        say("episode " + std::to_string(t.episodes()) + "/" + std::to_string(config.finetune_episodes()) +
            " env_step " + std::to_string(t.env_steps()) + " eval_return " +
            (ev.empty() ? std::string("-") : std::to_string(ev.back().value)));
      }
    }
  } catch (const NumericAbort& e) {
    write_text(run_dir / "abort.txt", std::string("numeric abort: ") + e.what() + "\n\nconfig:\n" +
                                          dump_config(config) + "\n" + t.diagnostics());
    t.metrics().write_csv(run_dir / "metrics.csv");
    throw;
  }
  t.write_checkpoint(run_dir);
  t.metrics().write_csv(run_dir / "metrics.csv");
  const auto wc = config.world_model();
  export_traversals(traversal_fn(t.world_model()), wc.code_dim, wc.height, wc.width, traversal_anchors(config, 2),
                    default_traversal_values(), run_dir / "images", "world_model");
}

void retain_heap_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, -1);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

}  // namespace diswm
