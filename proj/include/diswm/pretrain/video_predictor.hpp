#pragma once

#include <vector>

#include "diswm/diffcore/checkpoint.hpp"
#include "diswm/diffcore/optim.hpp"
#include "diswm/envsim/video_dataset.hpp"
#include "diswm/nets/vae.hpp"

namespace diswm {

struct VideoPredictorConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  /// Dimension of the encoder code 𝐳.
  std::size_t code_dim = 8;
  /// Dimension of the latent state z.
  std::size_t z_dim = 8;
  std::vector<std::size_t> trunk{128, 128};
  std::vector<std::size_t> head{128};
  double min_std = kDefaultMinStd;

  std::size_t obs_dim() const { return height * width * 3; }
};

/// Action-free latent video model:
///   𝐳_t ~ e(o_t),  z_t ~ q(z_t | z_{t−1}, 𝐳_t),  ẑ_t ~ p(ẑ_t | z_{t−1}),  ô_t ~ p(ô_t | z_t).
class VideoPredictor {
 public:
  VideoPredictor() = default;
  VideoPredictor(const VideoPredictorConfig& config, Rng& rng);

  const VideoPredictorConfig& config() const noexcept { return config_; }

  BetaVaeEncoder encoder;
  GaussianHead posterior;
  GaussianHead prior;
  Decoder decoder;

  void collect(ParamRefs& out);
  void collect(ConstParamRefs& out) const;

 private:
  VideoPredictorConfig config_;
};

/// Frames of B clips of length T stored time-major: row t·B + b is clip b at time t.
struct VideoBatch {
  Tensor frames;
  std::size_t batch = 0;
  std::size_t length = 0;

  /// Rows of time step t, [B, obs].
  Tensor at(std::size_t t) const;
};

/// From [B, T, obs] (batch-major) to the time-major layout.
VideoBatch video_batch_from(const Tensor& video);

/// Uniform over every (episode, offset) pair with a full window of T frames.
VideoBatch sample_video_batch(const VideoDataset& dataset, std::size_t batch, std::size_t length, Rng& rng);

/// All distributions of one rollout, time-major [T·B, ·].
struct PretrainRollout {
  GaussianParams code;
  Tensor code_sample;
  GaussianParams posterior;
  GaussianParams prior;
  Tensor z;
  std::size_t batch = 0;
  std::size_t length = 0;
};

/// z₀ = 0. The encoder runs once over all frames; only the posterior
/// recursion is sequential.
PretrainRollout pretrain_rollout(Tape& tape, const VideoPredictor& model, const VideoBatch& video, Rng& rng);

struct PretrainLossReport {
  double total = 0.0;
  double recon = 0.0;
  double kl_dyn = 0.0;
  double kl_disen = 0.0;
  double beta1 = 1.0;
  double beta2 = 0.015;

  double weighted_sum() const { return recon + beta1 * kl_dyn + beta2 * kl_disen; }
};

struct PretrainLoss {
  Tensor total;
  PretrainLossReport report;
};

/// Terms are summed over pixels / latent dims and averaged over batch and time.
PretrainLoss pretrain_loss(Tape& tape, const VideoPredictor& model, const VideoBatch& video, Rng& rng, double beta1,
                           double beta2);

/// One Adam update. Throws NumericAbort with the per-term values when the
/// loss or its gradient is non-finite.
PretrainLossReport pretrain_step(VideoPredictor& model, Adam& optimizer, const VideoBatch& video, Rng& rng,
                                 double beta1, double beta2);

/// Evenly spaced values from −3 to 3 (8 points).
std::vector<double> default_traversal_values();

/// Decoded mean for the encoder code `code` ([1, code_dim]) with z₀ = 0.
Tensor decode_code(const VideoPredictor& model, const Tensor& code);
/// Plain reconstruction of one observation through the code's mean.
Tensor reconstruct(const VideoPredictor& model, const Tensor& obs);

/// Encodes `obs` to its code mean, overwrites coordinate `dim` with each
/// value and decodes. Returns one [1, obs_dim] image per value.
std::vector<Tensor> traversal(const VideoPredictor& model, const Tensor& obs, std::size_t dim,
                              const std::vector<double>& values);

/// Immutable copy of an encoder used as the distillation teacher. Its
/// parameters are frozen, so forward passes add no nodes to any tape.
class FrozenEncoder {
 public:
  FrozenEncoder() = default;
  explicit FrozenEncoder(BetaVaeEncoder encoder);

  GaussianParams forward(const Tensor& obs) const;
  const BetaVaeEncoder& encoder() const noexcept { return encoder_; }
  ConstParamRefs params() const { return params_of(encoder_); }
  /// Attempts to obtain mutable parameters; always throws ContractError.
  ParamRefs mutable_params();

 private:
  BetaVaeEncoder encoder_;
};

FrozenEncoder freeze_encoder(const VideoPredictor& model);

/// Parameters under "pretrain/" plus the architecture under "pretrain/meta/".
void save_video_predictor(Checkpoint& ckpt, const VideoPredictor& model);
VideoPredictor load_video_predictor(const Checkpoint& ckpt);

}  // namespace diswm
