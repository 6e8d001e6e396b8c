#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "cesdet/core_types.hpp"

namespace cesdet {

/// 64-bit finalizer used to derive substream seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seeded generator. Independent logical streams are derived from a master
/// seed plus a key path, e.g. substream(seed, {trial, kPrimaryStream}); the
/// derivation is a fixed hash chain, so a stream depends only on its keys.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng substream(std::uint64_t master, std::initializer_list<std::uint64_t> keys);

  std::uint64_t next_u64() { return engine_(); }
  double uniform() { return uniform_(engine_); }
  double normal() { return normal_(engine_); }
  /// Circular complex normal with E|z|^2 = 1.
  cplx complex_normal();
  /// Gamma with the given shape and unit scale.
  double gamma(double shape);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace cesdet
