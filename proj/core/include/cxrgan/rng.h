// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace cxrgan {

/// Counter-based random stream.
///
/// The n-th draw of a stream is a pure function of (key, n), so a stream can
/// be checkpointed as two integers and split into named or indexed children
/// without consuming parent draws. Module-level parallelism derives one child
/// per work item, which keeps serial and parallel runs identical.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  static Rng from_state(std::uint64_t key, std::uint64_t counter);

  Rng split(std::uint64_t index) const;
  Rng split(std::string_view name) const;
  Rng split(std::string_view name, std::uint64_t index) const {
    return split(name).split(index);
  }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (one variate per call).
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t hash_name(std::string_view name);

}  // namespace cxrgan
