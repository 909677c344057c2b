#include "diswm/diffcore/rng.hpp"

#include <cmath>
#include <numbers>

#include "diswm/diffcore/errors.hpp"

namespace diswm {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter)
    : seed_(seed), stream_(stream), counter_(counter), key_(mix64(seed ^ mix64(stream + kGamma))) {}

std::uint64_t Rng::next_u64() { return mix64(key_ + (++counter_) * kGamma); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ContractError("Rng::below(0)");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  // Box-Muller, cosine branch only: two counters per draw.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor Rng::normal_tensor(const Shape& shape) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = normal();
  return Tensor(shape, std::move(v));
}

Tensor Rng::uniform_tensor(const Shape& shape, double lo, double hi) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = uniform(lo, hi);
  return Tensor(shape, std::move(v));
}

Rng Rng::split(std::uint64_t stream) const { return Rng(seed_, mix64(stream_ * kGamma ^ mix64(stream + 1)), 0); }

}  // namespace diswm
