#include "diswm/diffcore/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "diswm/diffcore/errors.hpp"
#include "diswm/diffcore/ops.hpp"

namespace diswm {

namespace {

void check_same(const GaussianParams& q, const GaussianParams& p) {
  if (q.mean.shape() != p.mean.shape() || q.stddev.shape() != p.stddev.shape() ||
      q.mean.shape() != q.stddev.shape()) {
    throw ShapeError("gaussian shapes differ: " + shape_str(q.mean.shape()) + " vs " + shape_str(p.mean.shape()));
  }
}

}  // namespace

GaussianParams gaussian_from_raw(const Tensor& raw, double min_std) {
  if (raw.rank() != 2 || raw.dim(1) % 2 != 0) {
    throw ShapeError("gaussian head output must be [batch, 2*dim], got " + shape_str(raw.shape()));
  }
  const std::size_t d = raw.dim(1) / 2;
  return {slice(raw, 1, 0, d), shift(softplus(slice(raw, 1, d, d)), min_std)};
}

GaussianParams standard_normal(std::size_t batch, std::size_t dim) {
  return {Tensor::zeros({batch, dim}), Tensor::full({batch, dim}, 1.0)};
}

Tensor gaussian_sample(const GaussianParams& p, Rng& rng) {
  const Tensor eps = rng.normal_tensor(p.mean.shape());
  return p.mean + p.stddev * eps;
}

Tensor gaussian_kl(const GaussianParams& q, const GaussianParams& p) {
  check_same(q, p);
  const Tensor log_ratio = log(p.stddev) - log(q.stddev);
  const Tensor num = square(q.stddev) + square(q.mean - p.mean);
  const Tensor quad = num / (2.0 * square(p.stddev));
  return sum(log_ratio + quad - 0.5, {1});
}

Tensor gaussian_log_prob(const GaussianParams& p, const Tensor& x) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const Tensor z = (x - p.mean) / p.stddev;
  return sum(-0.5 * square(z) - log(p.stddev) - half_log_2pi, {1});
}

Tensor gaussian_entropy(const GaussianParams& p) {
  const double c = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  return sum(log(p.stddev) + c, {1});
}

GaussianParams stop_gradient(const GaussianParams& p) { return {stop_gradient(p.mean), stop_gradient(p.stddev)}; }

}  // namespace diswm
