// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "cxrgan/checkpoint.h"
#include "cxrgan/ops.h"
#include "cxrgan/rng.h"

namespace cxrgan {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedTensor>;

std::size_t count_elements(const ParameterList& params);
void zero_grads(const ParameterList& params);
void set_requires_grad(const ParameterList& params, bool on);
void save_parameters(const ParameterList& params, Checkpoint& ckpt, const std::string& prefix);
/// Copies stored values into existing tensors; shapes must agree.
void load_parameters(const ParameterList& params, const Checkpoint& ckpt, const std::string& prefix);

/// Conv layer with equalized learning rate: weights are drawn from N(0,1)
/// and multiplied at use time by gain / sqrt(fan_in).
class EqualizedConv2d {
 public:
  EqualizedConv2d() = default;
  EqualizedConv2d(int in_channels, int out_channels, int kernel, int pad, double gain, Rng rng);

  Tensor forward(const Tensor& x) const;
  EqualizedConv2d clone() const;
  /// Multiplies runtime_scale into the stored weight and resets it to 1: the
  /// same function with ordinary He-scaled parameters.
  void fold_scale();
  void collect(ParameterList& out, const std::string& prefix) const;
  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out]
  double runtime_scale = 1.0;
  int pad = 0;
};

/// Fully connected layer with equalized learning rate; weight is [in, out].
class EqualizedLinear {
 public:
  EqualizedLinear() = default;
  EqualizedLinear(int in_features, int out_features, double gain, Rng rng);

  Tensor forward(const Tensor& x) const;
  EqualizedLinear clone() const;
  void fold_scale();
  void collect(ParameterList& out, const std::string& prefix) const;
  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  Tensor weight;
  Tensor bias;
  double runtime_scale = 1.0;
};

}  // namespace cxrgan
