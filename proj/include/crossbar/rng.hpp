// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace crossbar {

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seeded random stream with deterministic splitting.
///
/// `split(i)` depends only on the key this stream was created with and on
/// `i`, never on how many numbers have been drawn, so substreams handed to
/// workers are reproducible regardless of scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : key_(mix64(seed)), engine_(key_) {}

  RngStream split(std::uint64_t index) const {
    RngStream child;
    child.key_ = mix64(key_ ^ mix64(index + 0x632be59bd9b4e019ULL));
    child.engine_.seed(child.key_);
    return child;
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace crossbar
