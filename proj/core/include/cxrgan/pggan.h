// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "cxrgan/nn.h"

namespace cxrgan {

/// Current depth of a progressive network and how far the newest level has
/// been faded in. Resolution is 4 * 2^level.
struct BlendState {
  enum class Phase { kFading, kStable };

  int level = 0;
  double alpha = 1.0;
  Phase phase = Phase::kStable;

  static BlendState stable(int level);
  /// Requires level >= 1 and alpha in [0, 1].
  static BlendState fading(int level, double alpha);

  int resolution() const { return 4 << level; }
  bool is_fading() const { return phase == Phase::kFading; }
};

/// Linear fade-in coefficient: images_seen / budget, clamped to [0, 1].
double alpha_schedule(long images_seen_in_phase, long phase_budget);

struct GanArchitecture {
  int latent_dim = 64;
  int max_resolution = 64;
  int fmap_base = 128;  // channels at 4x4; halved per level
  int fmap_min = 8;
  double lrelu_slope = 0.2;
  double pixel_norm_eps = 1e-8;

  int max_level() const;
  int channels(int level) const;
  std::vector<std::string> validate() const;
};

/// Progressive generator: latent [N, L] -> grayscale image [N, 1, R, R].
/// No output activation; values are clamped to [-1, 1] only at export.
class Generator {
 public:
  Generator(const GanArchitecture& arch, std::uint64_t seed);

  Tensor generate(const Tensor& z, const BlendState& blend) const;

  /// Appends the next level with fresh weights; existing weights untouched.
  void grow();
  int built_levels() const { return static_cast<int>(blocks_.size()); }
  int latent_dim() const { return arch_.latent_dim; }
  const GanArchitecture& arch() const { return arch_; }
  std::uint64_t seed() const { return seed_; }

  ParameterList parameters() const;
  std::size_t parameter_count() const { return count_elements(parameters()); }
  /// Deep copy with independent parameter tensors.
  Generator clone() const;

 private:
  struct Block {
    EqualizedLinear dense;     // level 0 only
    EqualizedConv2d conv0;     // levels >= 1
    EqualizedConv2d conv1;
    EqualizedConv2d to_gray;
  };

  Block make_block(int level) const;
  Tensor block_forward(int level, const Tensor& h) const;
  Tensor act(const Tensor& h) const;

  GanArchitecture arch_;
  std::uint64_t seed_;
  std::vector<Block> blocks_;
};

/// Progressive critic: image [N, 1, R, R] -> score [N]. The final block
/// appends a minibatch standard-deviation map before its convolution.
class Discriminator {
 public:
  Discriminator(const GanArchitecture& arch, std::uint64_t seed);

  Tensor discriminate(const Tensor& images, const BlendState& blend) const;
  /// Activations feeding the final scalar head, [N, channels(0)].
  Tensor features(const Tensor& images, const BlendState& blend) const;
  const EqualizedLinear& head() const { return out_; }

  void grow();
  int built_levels() const { return static_cast<int>(blocks_.size()); }
  const GanArchitecture& arch() const { return arch_; }
  std::uint64_t seed() const { return seed_; }

  /// All weights except the final scalar head.
  ParameterList trunk_parameters() const;
  ParameterList parameters() const;
  std::size_t parameter_count() const { return count_elements(parameters()); }
  Discriminator clone() const;

 private:
  struct Block {
    EqualizedConv2d from_gray;
    EqualizedConv2d conv0;  // levels >= 1: C_l -> C_l; level 0: (C_0 + 1) -> C_0
    EqualizedConv2d conv1;  // levels >= 1: C_l -> C_{l-1}
  };

  Block make_block(int level) const;
  Tensor block_forward(int level, const Tensor& h) const;
  Tensor from_gray(int level, const Tensor& x) const;

  GanArchitecture arch_;
  std::uint64_t seed_;
  std::vector<Block> blocks_;
  EqualizedLinear dense_;  // [16 * C_0] -> C_0
  EqualizedLinear out_;    // C_0 -> 1
};

}  // namespace cxrgan
