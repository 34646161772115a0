// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cxrgan/tensor.h"

// Differentiable tensor operations. Every backward rule is composed from the
// ops in this header, which is what makes double-backward (the gradient
// penalty) work without special cases.

namespace cxrgan {

// Elementwise, operands of identical shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);
/// Multiplication by a constant array of the same shape (no gradient to it).
Tensor mul_const(const Tensor& a, Array factor);
Tensor pow_scalar(const Tensor& a, double p);
/// a^p for a > 0 and 0 elsewhere, with the matching zero derivative.
Tensor safe_pow(const Tensor& a, double p);
/// Square root with derivative 0 at 0 instead of infinity.
Tensor sqrt(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// max(x, slope*x); the derivative at exactly 0 is slope.
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor clamp(const Tensor& a, double lo, double hi);

// Reductions and layout.
/// Sum of all elements, shape [1].
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Broadcast to `shape`; same rank, each source dim is 1 or equal.
Tensor expand(const Tensor& a, const Shape& shape);
/// Sum over the dims where `shape` has 1; inverse layout of expand.
Tensor sum_to(const Tensor& a, const Shape& shape);
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor transpose(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& a, int begin, int count);
Tensor pad_channels(const Tensor& a, int begin, int total);

// Network building blocks.
/// input [N,D] x weight [D,M] + bias [M].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);
/// Adds bias[C] along axis 1 of an [N,C,...] tensor.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

/// Cross-correlation of input [N,C,H,W] with kernel [F,C,k,k].
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride = 1, int pad = 0);
/// Adjoint of conv2d in its input argument (gradient w.r.t. the input).
Tensor conv_transpose2d(const Tensor& grad_output, const Tensor& kernel, int stride, int pad,
                        const Shape& input_shape);
/// Adjoint of conv2d in its kernel argument (gradient w.r.t. the kernel).
Tensor conv2d_weight_grad(const Tensor& input, const Tensor& grad_output, int stride, int pad,
                          const Shape& kernel_shape);

/// Nearest-neighbour 2x upsampling of [N,C,H,W].
Tensor upsample2x(const Tensor& a);
/// 2x2 mean pooling of [N,C,H,W]; H and W must be even.
Tensor downsample2x(const Tensor& a);

/// Divides each position's channel vector (axis 1) by sqrt(mean square + eps).
Tensor pixel_norm(const Tensor& x, double eps = 1e-8);
/// Appends one channel holding the mean over (C,H,W) of the per-position
/// population standard deviation across the batch.
Tensor minibatch_stddev(const Tensor& x);

/// alpha * next + (1 - alpha) * prior.
Tensor blend(const Tensor& prior, const Tensor& next, double alpha);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

}  // namespace cxrgan
