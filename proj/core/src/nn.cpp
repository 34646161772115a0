// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/nn.h"

#include <cmath>

#include "cxrgan/error.h"

namespace cxrgan {
namespace {

Tensor normal_leaf(const Shape& shape, Rng& rng) {
  Array a(shape);
  for (auto& v : a.data()) v = rng.normal();
  return Tensor(std::move(a), true);
}

Tensor copy_leaf(const Tensor& t) { return Tensor(t.value(), t.requires_grad()); }

}  // namespace

std::size_t count_elements(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

void set_requires_grad(const ParameterList& params, bool on) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.set_requires_grad(on);
  }
}

void save_parameters(const ParameterList& params, Checkpoint& ckpt, const std::string& prefix) {
  for (const auto& p : params) ckpt.put(prefix + p.name, p.tensor.value());
}

void load_parameters(const ParameterList& params, const Checkpoint& ckpt, const std::string& prefix) {
  for (const auto& p : params) {
    const Array& stored = ckpt.get(prefix + p.name);
    Tensor t = p.tensor;
    if (stored.shape() != t.shape()) {
      throw DataError("checkpoint array '" + prefix + p.name + "' has shape " + to_string(stored.shape()) +
                      ", model expects " + to_string(t.shape()));
    }
    t.mutable_value() = stored;
  }
}

EqualizedConv2d::EqualizedConv2d(int in_channels, int out_channels, int kernel, int pad_, double gain, Rng rng)
    : weight(normal_leaf({out_channels, in_channels, kernel, kernel}, rng)),
      bias(Array({out_channels}, 0.0), true),
      runtime_scale(gain / std::sqrt(static_cast<double>(in_channels) * kernel * kernel)),
      pad(pad_) {}

Tensor EqualizedConv2d::forward(const Tensor& x) const {
  return add_channel_bias(conv2d(x, scale(weight, runtime_scale), 1, pad), bias);
}

EqualizedConv2d EqualizedConv2d::clone() const {
  EqualizedConv2d c = *this;
  c.weight = copy_leaf(weight);
  c.bias = copy_leaf(bias);
  return c;
}

void EqualizedConv2d::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

void EqualizedConv2d::fold_scale() {
  Array& w = weight.mutable_value();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= runtime_scale;
  runtime_scale = 1.0;
}

EqualizedLinear::EqualizedLinear(int in_features, int out_features, double gain, Rng rng)
    : weight(normal_leaf({in_features, out_features}, rng)),
      bias(Array({out_features}, 0.0), true),
      runtime_scale(gain / std::sqrt(static_cast<double>(in_features))) {}

Tensor EqualizedLinear::forward(const Tensor& x) const {
  return linear(x, scale(weight, runtime_scale), bias);
}

EqualizedLinear EqualizedLinear::clone() const {
  EqualizedLinear c = *this;
  c.weight = copy_leaf(weight);
  c.bias = copy_leaf(bias);
  return c;
}

void EqualizedLinear::fold_scale() {
  Array& w = weight.mutable_value();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= runtime_scale;
  runtime_scale = 1.0;
}

void EqualizedLinear::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

}  // namespace cxrgan
