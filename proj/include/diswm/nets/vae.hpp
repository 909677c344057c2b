#pragma once

#include "diswm/nets/layers.hpp"

namespace diswm {

/// Observation encoder producing a diagonal Gaussian over the latent code.
class BetaVaeEncoder {
 public:
  BetaVaeEncoder() = default;
  BetaVaeEncoder(const std::string& name, std::size_t obs_dim, const std::vector<std::size_t>& hidden,
                 std::size_t latent_dim, Rng& rng, double min_std = kDefaultMinStd);

  /// `obs` is [batch, obs_dim]. Throws ContractError on NaN input.
  GaussianParams forward(Tape& tape, const Tensor& obs) const;
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t latent_dim() const { return head_.dim(); }

  void collect(ParamRefs& out) { head_.collect(out); }
  void collect(ConstParamRefs& out) const { head_.collect(out); }

 private:
  GaussianHead head_;
  std::size_t obs_dim_ = 0;
};

/// Maps latents to the mean of a unit-variance Gaussian over pixels.
class Decoder {
 public:
  Decoder() = default;
  Decoder(const std::string& name, std::size_t latent_dim, const std::vector<std::size_t>& hidden,
          std::size_t obs_dim, Rng& rng);

  Tensor forward(Tape& tape, const Tensor& latent) const;
  std::size_t latent_dim() const { return mlp_.in_features(); }
  std::size_t obs_dim() const { return mlp_.out_features(); }

  void collect(ParamRefs& out) { mlp_.collect(out); }
  void collect(ConstParamRefs& out) const { mlp_.collect(out); }

 private:
  Mlp mlp_;
};

/// One-output MLP: a Gaussian mean (reward) or a Bernoulli logit (discount).
class ScalarHead {
 public:
  ScalarHead() = default;
  ScalarHead(const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden, Rng& rng);

  /// Shape [batch, 1].
  Tensor forward(Tape& tape, const Tensor& x) const;

  void collect(ParamRefs& out) { mlp_.collect(out); }
  void collect(ConstParamRefs& out) const { mlp_.collect(out); }

 private:
  Mlp mlp_;
};

/// 0.5 · ‖target − mean‖² per row (unit-variance Gaussian NLL, constant dropped).
Tensor gaussian_nll_unit(const Tensor& mean, const Tensor& target);

/// softplus(logit) − target · logit per row: Bernoulli NLL with logits.
Tensor bernoulli_nll(const Tensor& logit, const Tensor& target);

}  // namespace diswm
