#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "diswm/diffcore/errors.hpp"
#include "diswm/pipeline/config.hpp"
#include "diswm/pipeline/gradcheck_suite.hpp"
#include "diswm/pipeline/images.hpp"
#include "diswm/pipeline/mig.hpp"
#include "diswm/pipeline/trainer.hpp"

using namespace diswm;
namespace fs = std::filesystem;

namespace {

enum Exit : int { ok = 0, failure = 1, config_error = 2, numeric_error = 3, io_error = 4 };

RunConfig config_from(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << text;
}

void progress(const std::string& line) { std::cerr << line << std::endl; }

int cmd_gen_videos(const std::string& config_path, const fs::path& out) {
  const RunConfig cfg = config_from(config_path);
  Rng rng = Rng(cfg.seed).split(streams::dataset);
  const VideoDataset ds = gen_video_dataset(cfg.videos, rng);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_video_dataset(out, ds);
  std::cout << "wrote " << ds.frame_count() << " frames in " << ds.episodes.size() << " clips to " << out.string()
            << "\n";
  return ok;
}

int cmd_pretrain(const std::string& config_path, const fs::path& videos, const fs::path& out) {
  const RunConfig cfg = config_from(config_path);
  const VideoDataset ds = load_video_dataset(videos);
  fs::create_directories(out);
  write_file(out / "config.echo", dump_config(cfg));
  MetricsLog metrics;
  const VideoPredictor model = run_pretrain(cfg, ds, metrics, progress);
  metrics.write_csv(out / "metrics.csv");
  Checkpoint ck;
  save_video_predictor(ck, model);
  ck.save(out / "teacher.dwmc");
  const auto& c = model.config();
  export_traversals(traversal_fn(model), c.code_dim, c.height, c.width, traversal_anchors(cfg, 2),
                    default_traversal_values(), out / "images", "teacher");
  std::cout << "teacher checkpoint: " << (out / "teacher.dwmc").string() << "\n";
  return ok;
}

int cmd_train(const std::string& config_path, const std::string& videos, const std::string& teacher,
              const std::string& resume, const fs::path& out) {
  const RunConfig cfg = config_from(config_path);
  TrainOptions opts;
  opts.progress = progress;
  if (!teacher.empty()) opts.teacher = teacher;
  if (!resume.empty()) opts.resume = resume;
  std::optional<VideoDataset> ds;
  if (!videos.empty() && teacher.empty() && resume.empty()) ds = load_video_dataset(videos);
  train(cfg, ds ? &*ds : nullptr, out, opts);
  std::cout << "run directory: " << out.string() << "\n";
  return ok;
}

int cmd_eval(const fs::path& run, std::size_t episodes, std::uint64_t seed) {
  const fs::path ckpt = latest_checkpoint(run);
  const Trainer t = Trainer::from_checkpoint(Checkpoint::load(ckpt));
  TargetEnv env(t.config().env);
  env.set_color_scheme(t.color_scheme());
  Rng rng = Rng(seed).split(streams::evaluation);
  const EvalResult r = evaluate(t.actor(), t.world_model(), env, episodes, rng);
  std::printf("checkpoint %s\nepisodes %zu\nmean_return %.6f\nstddev_return %.6f\n", ckpt.string().c_str(), episodes,
              r.mean, r.stddev);
  return ok;
}

int cmd_traverse(const fs::path& ckpt_path, const fs::path& out, std::size_t anchors) {
  const Checkpoint ck = Checkpoint::load(ckpt_path);
  std::vector<fs::path> written;
  if (ck.contains("run/config")) {
    const Trainer t = Trainer::from_checkpoint(ck);
    const auto& c = t.world_model().config();
    written = export_traversals(traversal_fn(t.world_model()), c.code_dim, c.height, c.width,
                                traversal_anchors(t.config(), anchors), default_traversal_values(), out,
                                "world_model");
  } else {
    const VideoPredictor model = load_video_predictor(ck);
    const auto& c = model.config();
    RunConfig cfg;
    cfg.env.height = c.height;
    cfg.env.width = c.width;
    written = export_traversals(traversal_fn(model), c.code_dim, c.height, c.width, traversal_anchors(cfg, anchors),
                                default_traversal_values(), out, "teacher");
  }
  for (const auto& p : written) std::cout << p.string() << "\n";
  return ok;
}

int cmd_mig(const fs::path& ckpt_path, const fs::path& dataset, const std::vector<std::string>& factors_in,
            std::size_t bins, std::size_t samples) {
  const Checkpoint ck = Checkpoint::load(ckpt_path);
  const FrozenEncoder encoder = ck.contains("run/config") ? FrozenEncoder(Trainer::from_checkpoint(ck).world_model().encoder)
                                                          : freeze_encoder(load_video_predictor(ck));
  const VideoDataset ds = load_video_dataset(dataset);
  const auto factors = factors_in.empty() ? varying_factors(ds) : factors_in;
  const MigReport r = mig_score(encoder, ds, factors, bins, samples);
  for (std::size_t f = 0; f < r.factors.size(); ++f) {
    std::printf("%-16s H=%.4f gap=%.4f MI:", r.factors[f].c_str(), r.factor_entropy[f], r.gaps[f]);
    for (double mi : r.mutual_info[f]) std::printf(" %.4f", mi);
    std::printf("\n");
  }
  std::printf("MIG %.6f\n", r.mig);
  return ok;
}

int cmd_gradcheck(const std::string& module) {
  bool all_ok = true;
  for (const auto& c : run_gradcheck_suite(module)) {
    const bool pass = c.result.max_relative_error < kGradCheckTolerance;
    all_ok = all_ok && pass;
    std::printf("%s %-10s %-40s max_rel_err=%.3e (%zu coords)\n", pass ? "PASS" : "FAIL", c.module.c_str(),
                c.name.c_str(), c.result.max_relative_error, c.result.coordinates);
  }
  return all_ok ? ok : numeric_error;
}

}  // namespace

int main(int argc, char** argv) {
  retain_heap_memory();
  CLI::App app{"Disentangled world-model pipeline on procedural sprite tasks"};
  app.require_subcommand(1);

  std::string config, videos, teacher, resume, ckpt, dataset, module = "all";
  std::string out;
  std::size_t episodes = 10, anchors = 2, bins = 20, samples = 10000;
  std::uint64_t eval_seed = 12345;
  std::vector<std::string> factors;

  auto* gen = app.add_subcommand("gen-videos", "render the distracting source video dataset");
  gen->add_option("--config", config, "run config (JSON)");
  gen->add_option("--out", out, "dataset file")->required();

  auto* pre = app.add_subcommand("pretrain", "pretrain the video predictor (teacher)");
  pre->add_option("--config", config, "run config (JSON)");
  pre->add_option("--videos", videos, "dataset file or manifest")->required();
  pre->add_option("--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "finetune world model and behavior");
  tr->add_option("--config", config, "run config (JSON)");
  tr->add_option("--videos", videos, "dataset used to pretrain when no teacher is given");
  tr->add_option("--teacher", teacher, "pretrained teacher checkpoint");
  tr->add_option("--resume", resume, "continue from a run checkpoint");
  tr->add_option("--out", out, "run directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate the latest checkpoint of a run");
  ev->add_option("--run", out, "run directory")->required();
  ev->add_option("--episodes", episodes, "evaluation episodes");
  ev->add_option("--seed", eval_seed, "evaluation seed");

  auto* trv = app.add_subcommand("traverse", "export latent traversal grids");
  trv->add_option("--ckpt", ckpt, "teacher or run checkpoint")->required();
  trv->add_option("--out", out, "image directory")->required();
  trv->add_option("--anchors", anchors, "number of anchor frames");

  auto* mig = app.add_subcommand("mig", "mutual information gap of an encoder");
  mig->add_option("--ckpt", ckpt, "teacher or run checkpoint")->required();
  mig->add_option("--dataset", dataset, "dataset file or manifest")->required();
  mig->add_option("--factors", factors, "factor names (default: every varying factor)")->delimiter(',');
  mig->add_option("--bins", bins, "quantile bins");
  mig->add_option("--samples", samples, "maximum number of frames");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gc->add_option("--module", module, "all, diffcore or losses");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*gen) return cmd_gen_videos(config, out);
    if (*pre) return cmd_pretrain(config, videos, out);
    if (*tr) return cmd_train(config, videos, teacher, resume, out);
    if (*ev) return cmd_eval(out, episodes, eval_seed);
    if (*trv) return cmd_traverse(ckpt, out, anchors);
    if (*mig) return cmd_mig(ckpt, dataset, factors, bins, samples);
    if (*gc) return cmd_gradcheck(module);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return numeric_error;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return io_error;
  } catch (const LoadError& e) {
    std::cerr << "load error: " << e.what() << "\n";
    return io_error;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return io_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
  return failure;
}
