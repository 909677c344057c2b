#include "diswm/pretrain/video_predictor.hpp"

#include <cmath>
#include <sstream>

#include "diswm/diffcore/errors.hpp"
#include "diswm/diffcore/ops.hpp"

namespace diswm {

VideoPredictor::VideoPredictor(const VideoPredictorConfig& config, Rng& rng)
    : encoder("encoder", config.obs_dim(), config.trunk, config.code_dim, rng, config.min_std),
      posterior("posterior", config.z_dim + config.code_dim, config.head, config.z_dim, rng, config.min_std),
      prior("prior", config.z_dim, config.head, config.z_dim, rng, config.min_std),
      decoder("decoder", config.z_dim, config.trunk, config.obs_dim(), rng),
      config_(config) {}

void VideoPredictor::collect(ParamRefs& out) {
  encoder.collect(out);
  posterior.collect(out);
  prior.collect(out);
  decoder.collect(out);
}

void VideoPredictor::collect(ConstParamRefs& out) const {
  encoder.collect(out);
  posterior.collect(out);
  prior.collect(out);
  decoder.collect(out);
}

Tensor VideoBatch::at(std::size_t t) const {
  if (t >= length) throw ContractError("time index " + std::to_string(t) + " outside clip of length " + std::to_string(length));
  return slice(frames, 0, t * batch, batch);
}

VideoBatch video_batch_from(const Tensor& video) {
  if (video.rank() != 3) throw ShapeError("video must be [B, T, obs], got " + shape_str(video.shape()));
  const std::size_t b = video.dim(0), t = video.dim(1), d = video.dim(2);
  std::vector<double> out(b * t * d);
  const auto src = video.data();
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t s = 0; s < t; ++s) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((i * t + s) * d), d,
                  out.begin() + static_cast<std::ptrdiff_t>((s * b + i) * d));
    }
  }
  return {Tensor({t * b, d}, std::move(out)), b, t};
}

VideoBatch sample_video_batch(const VideoDataset& dataset, std::size_t batch, std::size_t length, Rng& rng) {
  if (batch == 0 || length == 0) throw ConfigError("video batch size and length must be positive");
  std::vector<std::size_t> starts;  // cumulative window counts
  std::size_t total = 0;
  for (const auto& ep : dataset.episodes) {
    if (ep.frames.size() >= length) total += ep.frames.size() - length + 1;
    starts.push_back(total);
  }
  if (total == 0) throw ConfigError("no video episode holds a window of " + std::to_string(length) + " frames");
  const std::size_t d = dataset.obs_dim();
  std::vector<double> out(batch * length * d);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t k = rng.below(total);
    const std::size_t e = static_cast<std::size_t>(std::upper_bound(starts.begin(), starts.end(), k) - starts.begin());
    const std::size_t offset = k - (e == 0 ? 0 : starts[e - 1]);
    const auto& frames = dataset.episodes[e].frames;
    for (std::size_t t = 0; t < length; ++t) {
      const auto& px = frames[offset + t].pixels;
      std::copy(px.begin(), px.end(), out.begin() + static_cast<std::ptrdiff_t>((t * batch + b) * d));
    }
  }
  return {Tensor({length * batch, d}, std::move(out)), batch, length};
}

PretrainRollout pretrain_rollout(Tape& tape, const VideoPredictor& model, const VideoBatch& video, Rng& rng) {
  const std::size_t B = video.batch, T = video.length;
  if (T == 0 || video.frames.dim(0) != B * T) throw ShapeError("video batch rows do not equal B·T");
  PretrainRollout r;
  r.batch = B;
  r.length = T;
  r.code = model.encoder.forward(tape, video.frames);
  r.code_sample = gaussian_sample(r.code, rng);

  const std::size_t zd = model.config().z_dim;
  Tensor z_prev = Tensor::zeros({B, zd});
  std::vector<Tensor> means, stds, zs, prevs;
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor code_t = slice(r.code_sample, 0, t * B, B);
    GaussianParams post = model.posterior.forward(tape, concat({z_prev, code_t}, 1));
    Tensor z = gaussian_sample(post, rng);
    means.push_back(post.mean);
    stds.push_back(post.stddev);
    prevs.push_back(z_prev);
    zs.push_back(z);
    z_prev = z;
  }
  r.posterior = {concat(means, 0), concat(stds, 0)};
  r.prior = model.prior.forward(tape, concat(prevs, 0));
  r.z = concat(zs, 0);
  return r;
}

PretrainLoss pretrain_loss(Tape& tape, const VideoPredictor& model, const VideoBatch& video, Rng& rng, double beta1,
                           double beta2) {
  const PretrainRollout r = pretrain_rollout(tape, model, video, rng);
  const double rows = static_cast<double>(video.batch * video.length);
  const Tensor recon = sum_all(gaussian_nll_unit(model.decoder.forward(tape, r.z), video.frames)) * (1.0 / rows);
  const Tensor kl_dyn = mean_all(gaussian_kl(r.posterior, r.prior));
  const Tensor kl_disen = mean_all(gaussian_kl(r.code, standard_normal(r.code.batch(), r.code.dim())));
  PretrainLoss out{recon + beta1 * kl_dyn + beta2 * kl_disen, {}};
  out.report = {out.total.item(), recon.item(), kl_dyn.item(), kl_disen.item(), beta1, beta2};
  return out;
}

namespace {

std::string describe(const PretrainLossReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "total=" << r.total << " recon=" << r.recon << " kl_dyn=" << r.kl_dyn << " kl_disen=" << r.kl_disen
     << " beta1=" << r.beta1 << " beta2=" << r.beta2;
  return os.str();
}

}  // namespace

PretrainLossReport pretrain_step(VideoPredictor& model, Adam& optimizer, const VideoBatch& video, Rng& rng,
                                 double beta1, double beta2) {
  Tape tape;
  PretrainLoss loss = pretrain_loss(tape, model, video, rng, beta1, beta2);
  if (!std::isfinite(loss.report.total)) throw NumericAbort("pretrain loss is not finite: " + describe(loss.report));
  const Gradients grads = tape.backward(loss.total);
  try {
    optimizer.step(params_of(model), grads);
  } catch (const NumericAbort& e) {
    throw NumericAbort(std::string(e.what()) + "; pretrain terms: " + describe(loss.report));
  }
  return loss.report;
}

std::vector<double> default_traversal_values() {
  std::vector<double> v(8);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = -3.0 + 6.0 * static_cast<double>(i) / 7.0;
  return v;
}

Tensor decode_code(const VideoPredictor& model, const Tensor& code) {
  Tape tape(Tape::NoGrad{});
  const Tensor z0 = Tensor::zeros({code.dim(0), model.config().z_dim});
  const GaussianParams post = model.posterior.forward(tape, concat({z0, code}, 1));
  return stop_gradient(model.decoder.forward(tape, post.mean));
}

namespace {

Tensor as_row(const Tensor& obs) { return obs.rank() == 2 ? obs : reshape(obs, {1, obs.numel()}); }

Tensor code_mean(const BetaVaeEncoder& encoder, const Tensor& obs) {
  Tape tape(Tape::NoGrad{});
  return stop_gradient(encoder.forward(tape, as_row(obs)).mean);
}

}  // namespace

Tensor reconstruct(const VideoPredictor& model, const Tensor& obs) {
  return decode_code(model, code_mean(model.encoder, obs));
}

std::vector<Tensor> traversal(const VideoPredictor& model, const Tensor& obs, std::size_t dim,
                              const std::vector<double>& values) {
  if (dim >= model.config().code_dim) {
    throw ContractError("traversal dim " + std::to_string(dim) + " outside code of size " +
                        std::to_string(model.config().code_dim));
  }
  const Tensor mean = code_mean(model.encoder, obs);
  std::vector<Tensor> row;
  row.reserve(values.size());
  for (double v : values) {
    std::vector<double> code(mean.data().begin(), mean.data().begin() + static_cast<std::ptrdiff_t>(mean.dim(1)));
    code[dim] = v;
    const std::size_t n = code.size();
    row.push_back(decode_code(model, Tensor({1, n}, std::move(code))));
  }
  return row;
}

FrozenEncoder::FrozenEncoder(BetaVaeEncoder encoder) : encoder_(std::move(encoder)) {
  for (Param* p : params_of(encoder_)) p->freeze();
}

GaussianParams FrozenEncoder::forward(const Tensor& obs) const {
  Tape tape(Tape::NoGrad{});
  const Tensor input = obs.on_tape() ? stop_gradient(obs) : obs;
  return encoder_.forward(tape, input);
}

ParamRefs FrozenEncoder::mutable_params() { throw ContractError("the distillation teacher is frozen"); }

FrozenEncoder freeze_encoder(const VideoPredictor& model) { return FrozenEncoder(model.encoder); }

void save_video_predictor(Checkpoint& ckpt, const VideoPredictor& model) {
  const auto& c = model.config();
  const std::vector<std::uint64_t> sizes{c.height, c.width, c.code_dim, c.z_dim};
  ckpt.put_u64("pretrain/meta/sizes", sizes);
  const std::vector<std::uint64_t> trunk(c.trunk.begin(), c.trunk.end());
  const std::vector<std::uint64_t> head(c.head.begin(), c.head.end());
  if (!trunk.empty()) ckpt.put_u64("pretrain/meta/trunk", trunk);
  if (!head.empty()) ckpt.put_u64("pretrain/meta/head", head);
  ckpt.put_scalar("pretrain/meta/min_std", c.min_std);
  ckpt.add_params("pretrain/", params_of(model));
}

VideoPredictor load_video_predictor(const Checkpoint& ckpt) {
  const auto& sizes = ckpt.u64("pretrain/meta/sizes");
  if (sizes.size() != 4) throw LoadError("pretrain/meta/sizes must hold 4 values");
  VideoPredictorConfig c;
  c.height = sizes[0];
  c.width = sizes[1];
  c.code_dim = sizes[2];
  c.z_dim = sizes[3];
  c.trunk.clear();
  c.head.clear();
  if (ckpt.contains("pretrain/meta/trunk")) {
    for (auto v : ckpt.u64("pretrain/meta/trunk")) c.trunk.push_back(v);
  }
  if (ckpt.contains("pretrain/meta/head")) {
    for (auto v : ckpt.u64("pretrain/meta/head")) c.head.push_back(v);
  }
  c.min_std = ckpt.scalar("pretrain/meta/min_std");
  Rng scratch;
  VideoPredictor model(c, scratch);
  ckpt.restore_params("pretrain/", params_of(model));
  return model;
}

}  // namespace diswm
