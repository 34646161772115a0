// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/pggan.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cxrgan/error.h"

namespace cxrgan {
namespace {

const double kSqrt2 = std::numbers::sqrt2;

std::string level_prefix(int level) { return "level" + std::to_string(level); }

}  // namespace

BlendState BlendState::stable(int level) {
  if (level < 0) throw ConfigError("blend level must be non-negative");
  return BlendState{level, 1.0, Phase::kStable};
}

BlendState BlendState::fading(int level, double alpha) {
  if (level < 1) throw ConfigError("fading requires level >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("blend alpha must lie in [0,1]");
  return BlendState{level, alpha, Phase::kFading};
}

double alpha_schedule(long images_seen_in_phase, long phase_budget) {
  if (phase_budget <= 0) return 1.0;
  const double a = static_cast<double>(images_seen_in_phase) / static_cast<double>(phase_budget);
  return std::clamp(a, 0.0, 1.0);
}

int GanArchitecture::max_level() const {
  int level = 0;
  while ((4 << level) < max_resolution) ++level;
  return level;
}

int GanArchitecture::channels(int level) const { return std::max(fmap_base >> level, fmap_min); }

std::vector<std::string> GanArchitecture::validate() const {
  std::vector<std::string> errors;
  if (latent_dim < 1) errors.push_back("latent_dim must be >= 1");
  if (max_resolution < 4 || (4 << max_level()) != max_resolution) {
    errors.push_back("max_resolution must be 4 * 2^k, got " + std::to_string(max_resolution));
  }
  if (fmap_base < 1 || fmap_min < 1) errors.push_back("fmap_base and fmap_min must be >= 1");
  if (!(lrelu_slope >= 0.0 && lrelu_slope < 1.0)) errors.push_back("lrelu_slope must lie in [0,1)");
  if (!(pixel_norm_eps >= 0.0)) errors.push_back("pixel_norm_eps must be >= 0");
  return errors;
}

// ---------------------------------------------------------------- Generator

Generator::Generator(const GanArchitecture& arch, std::uint64_t seed) : arch_(arch), seed_(seed) {
  if (auto errors = arch.validate(); !errors.empty()) throw ConfigError(errors.front());
  blocks_.push_back(make_block(0));
}

Generator::Block Generator::make_block(int level) const {
  const Rng rng = Rng(seed_).split("generator", static_cast<std::uint64_t>(level));
  const int c = arch_.channels(level);
  Block b;
  if (level == 0) {
    b.dense = EqualizedLinear(arch_.latent_dim, 16 * c, kSqrt2, rng.split("dense"));
  } else {
    b.conv0 = EqualizedConv2d(arch_.channels(level - 1), c, 3, 1, kSqrt2, rng.split("conv0"));
  }
  b.conv1 = EqualizedConv2d(c, c, 3, 1, kSqrt2, rng.split("conv1"));
  b.to_gray = EqualizedConv2d(c, 1, 1, 0, 1.0, rng.split("to_gray"));
  return b;
}

void Generator::grow() {
  const int next = built_levels();
  if (next > arch_.max_level()) {
    throw ConfigError("cannot grow generator beyond " + std::to_string(arch_.max_resolution) + "x" +
                      std::to_string(arch_.max_resolution));
  }
  blocks_.push_back(make_block(next));
}

Tensor Generator::act(const Tensor& h) const {
  return pixel_norm(leaky_relu(h, arch_.lrelu_slope), arch_.pixel_norm_eps);
}

Tensor Generator::block_forward(int level, const Tensor& h) const {
  const Block& b = blocks_[static_cast<std::size_t>(level)];
  Tensor x;
  if (level == 0) {
    const int c = arch_.channels(0);
    x = act(reshape(b.dense.forward(pixel_norm(h, arch_.pixel_norm_eps)), {h.shape()[0], c, 4, 4}));
  } else {
    x = act(b.conv0.forward(upsample2x(h)));
  }
  return act(b.conv1.forward(x));
}

Tensor Generator::generate(const Tensor& z, const BlendState& blend) const {
  if (z.value().rank() != 2 || z.shape()[1] != arch_.latent_dim) {
    throw ShapeError("generate: latent batch must be [N," + std::to_string(arch_.latent_dim) + "], got " +
                     to_string(z.shape()));
  }
  if (blend.level >= built_levels()) {
    throw ConfigError("generate: level " + std::to_string(blend.level) + " exceeds built depth " +
                      std::to_string(built_levels() - 1));
  }
  Tensor h = block_forward(0, z);
  for (int l = 1; l < blend.level; ++l) h = block_forward(l, h);
  const int L = blend.level;
  if (L == 0) return blocks_[0].to_gray.forward(h);
  if (blend.is_fading()) {
    Tensor prior = upsample2x(blocks_[static_cast<std::size_t>(L - 1)].to_gray.forward(h));
    Tensor next = blocks_[static_cast<std::size_t>(L)].to_gray.forward(block_forward(L, h));
    return cxrgan::blend(prior, next, blend.alpha);
  }
  return blocks_[static_cast<std::size_t>(L)].to_gray.forward(block_forward(L, h));
}

ParameterList Generator::parameters() const {
  ParameterList out;
  for (int l = 0; l < built_levels(); ++l) {
    const Block& b = blocks_[static_cast<std::size_t>(l)];
    const std::string p = level_prefix(l);
    if (l == 0) {
      b.dense.collect(out, p + ".dense");
    } else {
      b.conv0.collect(out, p + ".conv0");
    }
    b.conv1.collect(out, p + ".conv1");
    b.to_gray.collect(out, p + ".to_gray");
  }
  return out;
}

Generator Generator::clone() const {
  Generator g = *this;
  for (auto& b : g.blocks_) {
    b.dense = b.dense.weight.defined() ? b.dense.clone() : b.dense;
    b.conv0 = b.conv0.weight.defined() ? b.conv0.clone() : b.conv0;
    b.conv1 = b.conv1.clone();
    b.to_gray = b.to_gray.clone();
  }
  return g;
}

// ------------------------------------------------------------ Discriminator

Discriminator::Discriminator(const GanArchitecture& arch, std::uint64_t seed) : arch_(arch), seed_(seed) {
  if (auto errors = arch.validate(); !errors.empty()) throw ConfigError(errors.front());
  const Rng rng = Rng(seed_).split("discriminator_head");
  const int c = arch_.channels(0);
  dense_ = EqualizedLinear(16 * c, c, kSqrt2, rng.split("dense"));
  out_ = EqualizedLinear(c, 1, 1.0, rng.split("out"));
  blocks_.push_back(make_block(0));
}

Discriminator::Block Discriminator::make_block(int level) const {
  const Rng rng = Rng(seed_).split("discriminator", static_cast<std::uint64_t>(level));
  const int c = arch_.channels(level);
  Block b;
  b.from_gray = EqualizedConv2d(1, c, 1, 0, kSqrt2, rng.split("from_gray"));
  if (level == 0) {
    b.conv0 = EqualizedConv2d(c + 1, c, 3, 1, kSqrt2, rng.split("conv0"));
  } else {
    b.conv0 = EqualizedConv2d(c, c, 3, 1, kSqrt2, rng.split("conv0"));
    b.conv1 = EqualizedConv2d(c, arch_.channels(level - 1), 3, 1, kSqrt2, rng.split("conv1"));
  }
  return b;
}

void Discriminator::grow() {
  const int next = built_levels();
  if (next > arch_.max_level()) {
    throw ConfigError("cannot grow discriminator beyond " + std::to_string(arch_.max_resolution) + "x" +
                      std::to_string(arch_.max_resolution));
  }
  blocks_.push_back(make_block(next));
}

Tensor Discriminator::from_gray(int level, const Tensor& x) const {
  return leaky_relu(blocks_[static_cast<std::size_t>(level)].from_gray.forward(x), arch_.lrelu_slope);
}

Tensor Discriminator::block_forward(int level, const Tensor& h) const {
  const Block& b = blocks_[static_cast<std::size_t>(level)];
  const double s = arch_.lrelu_slope;
  if (level == 0) {
    const int c = arch_.channels(0);
    Tensor x = leaky_relu(b.conv0.forward(minibatch_stddev(h)), s);
    return leaky_relu(dense_.forward(reshape(x, {h.shape()[0], 16 * c})), s);
  }
  Tensor x = leaky_relu(b.conv0.forward(h), s);
  x = leaky_relu(b.conv1.forward(x), s);
  return downsample2x(x);
}

Tensor Discriminator::features(const Tensor& images, const BlendState& blend) const {
  const int L = blend.level;
  if (L >= built_levels()) {
    throw ConfigError("discriminate: level " + std::to_string(L) + " exceeds built depth " +
                      std::to_string(built_levels() - 1));
  }
  const int r = blend.resolution();
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != 1 || s[2] != r || s[3] != r) {
    throw ShapeError("discriminate: expected images [N,1," + std::to_string(r) + "," + std::to_string(r) +
                     "], got " + to_string(s));
  }
  Tensor h = from_gray(L, images);
  if (L > 0) {
    h = block_forward(L, h);
    if (blend.is_fading()) h = cxrgan::blend(from_gray(L - 1, downsample2x(images)), h, blend.alpha);
  }
  for (int l = L - 1; l >= 1; --l) h = block_forward(l, h);
  return block_forward(0, h);
}

Tensor Discriminator::discriminate(const Tensor& images, const BlendState& blend) const {
  const Tensor score = out_.forward(features(images, blend));
  return reshape(score, {score.shape()[0]});
}

ParameterList Discriminator::trunk_parameters() const {
  ParameterList out;
  for (int l = 0; l < built_levels(); ++l) {
    const Block& b = blocks_[static_cast<std::size_t>(l)];
    const std::string p = level_prefix(l);
    b.from_gray.collect(out, p + ".from_gray");
    b.conv0.collect(out, p + ".conv0");
    if (l > 0) b.conv1.collect(out, p + ".conv1");
  }
  dense_.collect(out, "head.dense");
  return out;
}

ParameterList Discriminator::parameters() const {
  ParameterList out = trunk_parameters();
  out_.collect(out, "head.out");
  return out;
}

Discriminator Discriminator::clone() const {
  Discriminator d = *this;
  for (auto& b : d.blocks_) {
    b.from_gray = b.from_gray.clone();
    b.conv0 = b.conv0.clone();
    if (b.conv1.weight.defined()) b.conv1 = b.conv1.clone();
  }
  d.dense_ = dense_.clone();
  d.out_ = out_.clone();
  return d;
}

}  // namespace cxrgan
