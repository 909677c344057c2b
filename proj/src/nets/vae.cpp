#include "diswm/nets/vae.hpp"

#include <cmath>

#include "diswm/diffcore/errors.hpp"
#include "diswm/diffcore/ops.hpp"

namespace diswm {

BetaVaeEncoder::BetaVaeEncoder(const std::string& name, std::size_t obs_dim, const std::vector<std::size_t>& hidden,
                               std::size_t latent_dim, Rng& rng, double min_std)
    : head_(name, obs_dim, hidden, latent_dim, rng, min_std), obs_dim_(obs_dim) {}

GaussianParams BetaVaeEncoder::forward(Tape& tape, const Tensor& obs) const {
  for (double v : obs.data()) {
    if (std::isnan(v)) throw ContractError("encoder input contains NaN");
  }
  return head_.forward(tape, obs);
}

Decoder::Decoder(const std::string& name, std::size_t latent_dim, const std::vector<std::size_t>& hidden,
                 std::size_t obs_dim, Rng& rng)
    : mlp_(name, layer_sizes(latent_dim, hidden, obs_dim), rng) {}

Tensor Decoder::forward(Tape& tape, const Tensor& latent) const { return mlp_.forward(tape, latent); }

ScalarHead::ScalarHead(const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden, Rng& rng)
    : mlp_(name, layer_sizes(in, hidden, 1), rng) {}

Tensor ScalarHead::forward(Tape& tape, const Tensor& x) const { return mlp_.forward(tape, x); }

Tensor gaussian_nll_unit(const Tensor& mean, const Tensor& target) {
  if (mean.shape() != target.shape()) {
    throw ShapeError("nll shape mismatch: " + shape_str(mean.shape()) + " vs " + shape_str(target.shape()));
  }
  return 0.5 * sum(square(target - mean), {1});
}

Tensor bernoulli_nll(const Tensor& logit, const Tensor& target) {
  if (logit.shape() != target.shape()) {
    throw ShapeError("nll shape mismatch: " + shape_str(logit.shape()) + " vs " + shape_str(target.shape()));
  }
  return sum(softplus(logit) - target * logit, {1});
}

}  // namespace diswm
