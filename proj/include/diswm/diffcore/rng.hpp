#pragma once

#include <cstdint>

#include "diswm/diffcore/tensor.hpp"

namespace diswm {

/// Counter-based splittable generator. The triple (seed, stream, counter)
/// fully determines every subsequent draw; split() derives an independent
/// stream without advancing the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0, std::uint64_t counter = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  Tensor normal_tensor(const Shape& shape);
  Tensor uniform_tensor(const Shape& shape, double lo, double hi);

  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
  std::uint64_t key_;
};

/// Well-known stream ids split off a run's root generator.
namespace streams {
inline constexpr std::uint64_t pretrain = 1;
inline constexpr std::uint64_t finetune = 2;
inline constexpr std::uint64_t environment = 3;
inline constexpr std::uint64_t evaluation = 4;
inline constexpr std::uint64_t init = 5;
inline constexpr std::uint64_t dataset = 6;
inline constexpr std::uint64_t buffer = 7;
}  // namespace streams

}  // namespace diswm
