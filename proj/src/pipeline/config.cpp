#include "diswm/pipeline/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

namespace {

using nlohmann::json;

/// Reads typed fields from one JSON object and reports unknown keys.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + where() + "' must be an object");
  }

  template <typename T>
  void field(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer() || (it->is_number_integer() && it->template get<long long>() < 0)) {
          throw ConfigError("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      } else {
        if (!it->is_array()) throw ConfigError("");
        for (const auto& v : *it) {
          if (!v.is_number_integer() || v.template get<long long>() <= 0) throw ConfigError("");
        }
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw ConfigError("'" + where(key) + "' has the wrong type or sign");
    }
  }

  Section child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    static const json empty = json::object();
    return Section(it == j_.end() ? empty : *it, where(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError("unknown config key '" + where(it.key()) + "'");
    }
  }

 private:
  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string schemes_name(SchemeMix m) {
  switch (m) {
    case SchemeMix::a: return "a";
    case SchemeMix::b: return "b";
    case SchemeMix::both: return "both";
  }
  return "both";
}

SchemeMix parse_schemes(const std::string& s) {
  if (s == "a") return SchemeMix::a;
  if (s == "b") return SchemeMix::b;
  if (s == "both") return SchemeMix::both;
  throw ConfigError("videos.schemes must be one of a, b, both (got '" + s + "')");
}

std::string mode_name(DistillMode m) { return m == DistillMode::gaussian_kl ? "gaussian_kl" : "literal_vector_kl"; }

DistillMode parse_mode(const std::string& s) {
  if (s == "gaussian_kl") return DistillMode::gaussian_kl;
  if (s == "literal_vector_kl") return DistillMode::literal_vector_kl;
  throw ConfigError("distill.mode must be gaussian_kl or literal_vector_kl (got '" + s + "')");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

VideoPredictorConfig RunConfig::video_predictor() const {
  VideoPredictorConfig c;
  c.height = env.height;
  c.width = env.width;
  c.code_dim = model.code_dim;
  c.z_dim = model.z_dim;
  c.trunk = model.trunk;
  c.head = model.head;
  c.min_std = model.min_std;
  return c;
}

WorldModelConfig RunConfig::world_model() const {
  WorldModelConfig c;
  c.height = env.height;
  c.width = env.width;
  c.action_dim = TargetEnv::kActionDim;
  c.code_dim = model.code_dim;
  c.z_dim = model.z_dim;
  c.h_dim = model.h_dim;
  c.trunk = model.trunk;
  c.head = model.head;
  c.min_std = model.min_std;
  return c;
}

std::size_t RunConfig::finetune_episodes() const {
  const std::size_t total = finetune.total_env_steps / env.episode_length;
  return total > finetune.seed_episodes ? total - finetune.seed_episodes : 0;
}

std::size_t RunConfig::finetune_steps() const { return finetune_episodes() * finetune.inner_steps; }

std::size_t RunConfig::color_switch_env_step() const {
  return static_cast<std::size_t>(finetune.color_switch_fraction * static_cast<double>(finetune.total_env_steps));
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section top(root, "");
  top.field("seed", c.seed);

  Section env = top.child("env");
  env.field("height", c.env.height);
  env.field("width", c.env.width);
  env.field("episode_length", c.env.episode_length);
  env.field("speed", c.env.speed);
  env.field("action_penalty", c.env.action_penalty);
  env.field("distractor_step", c.env.distractor_step);
  env.field("agent_radius", c.env.agent_radius);
  env.field("goal_radius", c.env.goal_radius);
  env.field("distractor_radius", c.env.distractor_radius);
  env.finish();

  Section videos = top.child("videos");
  videos.field("total_frames", c.videos.total_frames);
  std::string schemes = schemes_name(c.videos.schemes);
  videos.field("schemes", schemes);
  c.videos.schemes = parse_schemes(schemes);
  Section src = videos.child("source");
  src.field("episode_length", c.videos.source.episode_length);
  src.field("move_y", c.videos.source.move_y);
  src.field("distractor", c.videos.source.distractor);
  src.field("amplitude", c.videos.source.amplitude);
  src.field("min_frequency", c.videos.source.min_frequency);
  src.field("max_frequency", c.videos.source.max_frequency);
  src.field("agent_radius", c.videos.source.agent_radius);
  src.field("distractor_radius", c.videos.source.distractor_radius);
  src.finish();
  videos.finish();

  Section model = top.child("model");
  model.field("code_dim", c.model.code_dim);
  model.field("z_dim", c.model.z_dim);
  model.field("h_dim", c.model.h_dim);
  model.field("trunk", c.model.trunk);
  model.field("head", c.model.head);
  model.field("min_std", c.model.min_std);
  model.finish();

  Section pre = top.child("pretrain");
  pre.field("steps", c.pretrain.steps);
  pre.field("batch", c.pretrain.batch);
  pre.field("length", c.pretrain.length);
  pre.field("beta1", c.pretrain.beta1);
  pre.field("beta2", c.pretrain.beta2);
  pre.field("lr", c.pretrain.lr);
  pre.finish();

  Section ft = top.child("finetune");
  ft.field("total_env_steps", c.finetune.total_env_steps);
  ft.field("inner_steps", c.finetune.inner_steps);
  ft.field("batch", c.finetune.batch);
  ft.field("length", c.finetune.length);
  ft.field("alpha", c.finetune.alpha);
  ft.field("beta", c.finetune.beta);
  ft.field("lr", c.finetune.lr);
  ft.field("seed_episodes", c.finetune.seed_episodes);
  ft.field("buffer_capacity", c.finetune.buffer_capacity);
  ft.field("color_switch_fraction", c.finetune.color_switch_fraction);
  ft.field("eval_every_episodes", c.finetune.eval_every_episodes);
  ft.field("eval_episodes", c.finetune.eval_episodes);
  ft.field("baseline_episodes", c.finetune.baseline_episodes);
  ft.field("checkpoint_every_episodes", c.finetune.checkpoint_every_episodes);
  ft.finish();

  Section dist = top.child("distill");
  std::string mode = mode_name(c.distill.mode);
  dist.field("mode", mode);
  c.distill.mode = parse_mode(mode);
  dist.field("eta_start", c.distill.eta_start);
  dist.field("eta_end", c.distill.eta_end);
  dist.finish();

  Section beh = top.child("behavior");
  beh.field("lambda", c.behavior.lambda);
  beh.field("gamma", c.behavior.gamma);
  beh.field("horizon", c.behavior.horizon);
  beh.field("actor_lr", c.behavior.actor_lr);
  beh.field("critic_lr", c.behavior.critic_lr);
  beh.field("rho", c.behavior.rho);
  beh.field("entropy_scale", c.behavior.entropy_scale);
  beh.field("hidden", c.behavior.hidden);
  beh.field("min_std", c.behavior.min_std);
  beh.finish();

  Section opt = top.child("optim");
  opt.field("beta1", c.optim.beta1);
  opt.field("beta2", c.optim.beta2);
  opt.field("eps", c.optim.eps);
  opt.field("clip_norm", c.optim.clip_norm);
  opt.finish();

  top.finish();
  c.videos.source.height = c.env.height;
  c.videos.source.width = c.env.width;
  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  require(c.env.height >= 2 && c.env.width >= 2, "env.height and env.width must be at least 2");
  require(c.env.episode_length >= 1, "env.episode_length must be positive");
  require(c.env.speed > 0.0, "env.speed must be positive");
  require(c.env.action_penalty >= 0.0, "env.action_penalty must be nonnegative");
  require(c.videos.total_frames >= 1, "videos.total_frames must be positive");
  require(c.videos.source.episode_length >= 2, "videos.source.episode_length must be at least 2");
  require(c.videos.source.min_frequency <= c.videos.source.max_frequency,
          "videos.source.min_frequency exceeds max_frequency");
  require(c.model.code_dim >= 1 && c.model.z_dim >= 1 && c.model.h_dim >= 1, "model dimensions must be positive");
  require(c.model.min_std > 0.0, "model.min_std must be positive");
  require(c.pretrain.batch >= 1 && c.pretrain.length >= 2, "pretrain.batch ≥ 1 and pretrain.length ≥ 2 required");
  require(c.pretrain.length <= c.videos.source.episode_length, "pretrain.length exceeds the source clip length");
  require(c.pretrain.beta1 >= 0.0 && c.pretrain.beta2 >= 0.0, "pretrain KL scales must be nonnegative");
  require(c.pretrain.lr >= 0.0, "pretrain.lr must be nonnegative");
  require(c.finetune.batch >= 1 && c.finetune.length >= 1, "finetune.batch and finetune.length must be positive");
  require(c.finetune.length <= c.env.episode_length + 1, "finetune.length exceeds the stored episode length");
  require(c.finetune.seed_episodes >= 1, "finetune.seed_episodes must be at least 1");
  require(c.finetune.alpha >= 0.0 && c.finetune.beta >= 0.0, "finetune KL scales must be nonnegative");
  require(c.finetune.lr >= 0.0, "finetune.lr must be nonnegative");
  require(c.finetune.buffer_capacity >= c.env.episode_length + 1, "finetune.buffer_capacity below one episode");
  require(c.finetune.color_switch_fraction >= 0.0 && c.finetune.color_switch_fraction <= 1.0,
          "finetune.color_switch_fraction must lie in [0, 1]");
  require(c.finetune.eval_every_episodes >= 1 && c.finetune.eval_episodes >= 1,
          "finetune evaluation interval and count must be positive");
  require(c.finetune.baseline_episodes >= 1, "finetune.baseline_episodes must be positive");
  require(c.distill.eta_start >= 0.0 && c.distill.eta_end >= 0.0, "distill eta values must be nonnegative");
  require(c.distill.eta_end <= c.distill.eta_start, "distill.eta_end must not exceed eta_start");
  require(c.behavior.lambda >= 0.0 && c.behavior.lambda <= 1.0, "behavior.lambda must lie in [0, 1]");
  require(c.behavior.gamma >= 0.0 && c.behavior.gamma <= 1.0, "behavior.gamma must lie in [0, 1]");
  require(c.behavior.rho >= 0.0 && c.behavior.rho <= 1.0, "behavior.rho must lie in [0, 1]");
  require(c.behavior.horizon >= 2, "behavior.horizon must be at least 2");
  require(c.behavior.actor_lr >= 0.0 && c.behavior.critic_lr >= 0.0, "behavior learning rates must be nonnegative");
  require(c.behavior.min_std > 0.0, "behavior.min_std must be positive");
  require(c.optim.beta1 >= 0.0 && c.optim.beta1 < 1.0 && c.optim.beta2 >= 0.0 && c.optim.beta2 < 1.0,
          "optim betas must lie in [0, 1)");
  require(c.optim.eps > 0.0, "optim.eps must be positive");
  require(c.optim.clip_norm >= 0.0, "optim.clip_norm must be nonnegative");
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string dump_config(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["env"] = {{"height", c.env.height},
              {"width", c.env.width},
              {"episode_length", c.env.episode_length},
              {"speed", c.env.speed},
              {"action_penalty", c.env.action_penalty},
              {"distractor_step", c.env.distractor_step},
              {"agent_radius", c.env.agent_radius},
              {"goal_radius", c.env.goal_radius},
              {"distractor_radius", c.env.distractor_radius}};
  const auto& s = c.videos.source;
  j["videos"] = {{"total_frames", c.videos.total_frames},
                 {"schemes", schemes_name(c.videos.schemes)},
                 {"source",
                  {{"episode_length", s.episode_length},
                   {"move_y", s.move_y},
                   {"distractor", s.distractor},
                   {"amplitude", s.amplitude},
                   {"min_frequency", s.min_frequency},
                   {"max_frequency", s.max_frequency},
                   {"agent_radius", s.agent_radius},
                   {"distractor_radius", s.distractor_radius}}}};
  j["model"] = {{"code_dim", c.model.code_dim}, {"z_dim", c.model.z_dim},     {"h_dim", c.model.h_dim},
                {"trunk", c.model.trunk},       {"head", c.model.head},       {"min_std", c.model.min_std}};
  j["pretrain"] = {{"steps", c.pretrain.steps}, {"batch", c.pretrain.batch}, {"length", c.pretrain.length},
                   {"beta1", c.pretrain.beta1}, {"beta2", c.pretrain.beta2}, {"lr", c.pretrain.lr}};
  const auto& f = c.finetune;
  j["finetune"] = {{"total_env_steps", f.total_env_steps},
                   {"inner_steps", f.inner_steps},
                   {"batch", f.batch},
                   {"length", f.length},
                   {"alpha", f.alpha},
                   {"beta", f.beta},
                   {"lr", f.lr},
                   {"seed_episodes", f.seed_episodes},
                   {"buffer_capacity", f.buffer_capacity},
                   {"color_switch_fraction", f.color_switch_fraction},
                   {"eval_every_episodes", f.eval_every_episodes},
                   {"eval_episodes", f.eval_episodes},
                   {"baseline_episodes", f.baseline_episodes},
                   {"checkpoint_every_episodes", f.checkpoint_every_episodes}};
  j["distill"] = {{"mode", mode_name(c.distill.mode)},
                  {"eta_start", c.distill.eta_start},
                  {"eta_end", c.distill.eta_end}};
  const auto& b = c.behavior;
  j["behavior"] = {{"lambda", b.lambda},       {"gamma", b.gamma},         {"horizon", b.horizon},
                   {"actor_lr", b.actor_lr},   {"critic_lr", b.critic_lr}, {"rho", b.rho},
                   {"entropy_scale", b.entropy_scale}, {"hidden", b.hidden}, {"min_std", b.min_std}};
  j["optim"] = {{"beta1", c.optim.beta1},
                {"beta2", c.optim.beta2},
                {"eps", c.optim.eps},
                {"clip_norm", c.optim.clip_norm}};
  return j.dump(2) + "\n";
}

}  // namespace diswm
