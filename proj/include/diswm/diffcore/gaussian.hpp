#pragma once

#include "diswm/diffcore/rng.hpp"
#include "diswm/diffcore/tensor.hpp"

namespace diswm {

inline constexpr double kDefaultMinStd = 0.1;

/// Diagonal Gaussian over [batch, dim] latents.
struct GaussianParams {
  Tensor mean;
  Tensor stddev;

  std::size_t batch() const { return mean.dim(0); }
  std::size_t dim() const { return mean.dim(1); }
};

/// Splits raw [batch, 2*dim] head output into mean and softplus(raw) + min_std.
GaussianParams gaussian_from_raw(const Tensor& raw, double min_std = kDefaultMinStd);

/// N(0, I) with the given shape, as constants.
GaussianParams standard_normal(std::size_t batch, std::size_t dim);

/// Reparameterized draw mean + stddev * eps with eps ~ N(0, I) from rng.
Tensor gaussian_sample(const GaussianParams& p, Rng& rng);

/// Closed-form KL(q || p) summed over the latent dimension, shape [batch].
Tensor gaussian_kl(const GaussianParams& q, const GaussianParams& p);

/// Log density summed over the latent dimension, shape [batch].
Tensor gaussian_log_prob(const GaussianParams& p, const Tensor& x);

/// Differential entropy summed over the latent dimension, shape [batch].
Tensor gaussian_entropy(const GaussianParams& p);

GaussianParams stop_gradient(const GaussianParams& p);

}  // namespace diswm
