// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/ops.h"

#include <cmath>
#include <memory>

#include "cxrgan/error.h"

namespace cxrgan {
namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

template <class F>
Array map_unary(const Array& a, F f) {
  Array out(a.shape());
  const double* src = a.raw();
  double* dst = out.raw();
  for (std::size_t i = 0; i < a.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <class F>
Array map_binary(const Array& a, const Array& b, F f) {
  Array out(a.shape());
  const double* x = a.raw();
  const double* y = b.raw();
  double* dst = out.raw();
  for (std::size_t i = 0; i < a.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

void check_broadcastable(const char* op, const Shape& big, const Shape& small) {
  bool ok = big.size() == small.size();
  for (std::size_t i = 0; ok && i < big.size(); ++i) ok = small[i] == 1 || small[i] == big[i];
  if (!ok) {
    throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(small) + " to " +
                     to_string(big));
  }
}

// Visits every element of `big` together with its source offset in `small`.
template <class F>
void for_each_broadcast(const Shape& big, const Shape& small, F f) {
  const int r = static_cast<int>(big.size());
  std::vector<std::size_t> sstride(static_cast<std::size_t>(r));
  std::size_t acc = 1;
  for (int i = r - 1; i >= 0; --i) {
    sstride[i] = small[i] == 1 ? 0 : acc;
    acc *= static_cast<std::size_t>(small[i]);
  }
  const std::size_t inner = static_cast<std::size_t>(big[r - 1]);
  const std::size_t inner_stride = sstride[r - 1];
  const std::size_t outer = numel(big) / inner;
  std::vector<int> idx(static_cast<std::size_t>(r), 0);
  std::size_t boff = 0;
  std::size_t soff = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) f(boff + j, soff + j * inner_stride);
    boff += inner;
    for (int d = r - 2; d >= 0; --d) {
      ++idx[d];
      soff += sstride[d];
      if (idx[d] < big[d]) break;
      soff -= sstride[d] * static_cast<std::size_t>(big[d]);
      idx[d] = 0;
    }
  }
}

Shape ones_like_rank(std::size_t rank) { return Shape(rank, 1); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  return make_op_result("add", map_binary(a.value(), b.value(), [](double x, double y) { return x + y; }),
                        {a, b}, [](const BackwardContext& c) {
                          return std::vector<Tensor>{c.grad_output, c.grad_output};
                        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  return make_op_result("sub", map_binary(a.value(), b.value(), [](double x, double y) { return x - y; }),
                        {a, b}, [](const BackwardContext& c) {
                          return std::vector<Tensor>{c.grad_output,
                                                     c.needs[1] ? neg(c.grad_output) : Tensor()};
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  return make_op_result("mul", map_binary(a.value(), b.value(), [](double x, double y) { return x * y; }),
                        {a, b}, [](const BackwardContext& c) {
                          return std::vector<Tensor>{
                              c.needs[0] ? mul(c.grad_output, c.inputs[1]) : Tensor(),
                              c.needs[1] ? mul(c.grad_output, c.inputs[0]) : Tensor()};
                        });
}

Tensor scale(const Tensor& a, double k) {
  return make_op_result("scale", map_unary(a.value(), [k](double x) { return x * k; }), {a},
                        [k](const BackwardContext& c) {
                          return std::vector<Tensor>{scale(c.grad_output, k)};
                        });
}

Tensor add_scalar(const Tensor& a, double k) {
  return make_op_result("add_scalar", map_unary(a.value(), [k](double x) { return x + k; }), {a},
                        [](const BackwardContext& c) { return std::vector<Tensor>{c.grad_output}; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor mul_const(const Tensor& a, Array factor) {
  if (factor.shape() != a.shape()) {
    throw ShapeError("mul_const: shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(factor.shape()));
  }
  auto f = std::make_shared<const Array>(std::move(factor));
  Array out = map_binary(a.value(), *f, [](double x, double y) { return x * y; });
  return make_op_result("mul_const", std::move(out), {a}, [f](const BackwardContext& c) {
    return std::vector<Tensor>{mul_const(c.grad_output, *f)};
  });
}

Tensor pow_scalar(const Tensor& a, double p) {
  return make_op_result("pow", map_unary(a.value(), [p](double x) { return std::pow(x, p); }), {a},
                        [p](const BackwardContext& c) {
                          return std::vector<Tensor>{
                              mul(c.grad_output, scale(pow_scalar(c.inputs[0], p - 1.0), p))};
                        });
}

Tensor safe_pow(const Tensor& a, double p) {
  return make_op_result("safe_pow",
                        map_unary(a.value(), [p](double x) { return x > 0.0 ? std::pow(x, p) : 0.0; }),
                        {a}, [p](const BackwardContext& c) {
                          return std::vector<Tensor>{
                              mul(c.grad_output, scale(safe_pow(c.inputs[0], p - 1.0), p))};
                        });
}

Tensor sqrt(const Tensor& a) {
  Array out = map_unary(a.value(), [](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; });
  return make_op_result("sqrt", std::move(out), {a}, [](const BackwardContext& c) {
    return std::vector<Tensor>{mul(c.grad_output, scale(safe_pow(c.inputs[0], -0.5), 0.5))};
  });
}

Tensor log(const Tensor& a) {
  return make_op_result("log", map_unary(a.value(), [](double x) { return std::log(x); }), {a},
                        [](const BackwardContext& c) {
                          return std::vector<Tensor>{mul(c.grad_output, pow_scalar(c.inputs[0], -1.0))};
                        });
}

Tensor sigmoid(const Tensor& a) {
  Array out = map_unary(a.value(), [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return make_op_result("sigmoid", std::move(out), {a}, [](const BackwardContext& c) {
    const Tensor& s = c.self;
    return std::vector<Tensor>{mul(c.grad_output, mul(s, add_scalar(neg(s), 1.0)))};
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  if (!(slope >= 0.0 && slope < 1.0)) throw ConfigError("leaky_relu slope must lie in [0,1)");
  Array mask = map_unary(a.value(), [slope](double x) { return x > 0.0 ? 1.0 : slope; });
  Array out = map_binary(a.value(), mask, [](double x, double m) { return x * m; });
  auto m = std::make_shared<const Array>(std::move(mask));
  return make_op_result("leaky_relu", std::move(out), {a}, [m](const BackwardContext& c) {
    return std::vector<Tensor>{mul_const(c.grad_output, *m)};
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  Array mask = map_unary(a.value(), [lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
  Array out = map_unary(a.value(), [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); });
  auto m = std::make_shared<const Array>(std::move(mask));
  return make_op_result("clamp", std::move(out), {a}, [m](const BackwardContext& c) {
    return std::vector<Tensor>{mul_const(c.grad_output, *m)};
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return make_op_result("sum", Array::scalar(s), {a}, [](const BackwardContext& c) {
    const Shape& shape = c.inputs[0].shape();
    return std::vector<Tensor>{expand(reshape(c.grad_output, ones_like_rank(shape.size())), shape)};
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor expand(const Tensor& a, const Shape& shape) {
  check_broadcastable("expand", shape, a.shape());
  if (a.shape() == shape) return a;
  Array out(shape);
  const double* src = a.value().raw();
  double* dst = out.raw();
  for_each_broadcast(shape, a.shape(), [&](std::size_t bi, std::size_t si) { dst[bi] = src[si]; });
  return make_op_result("expand", std::move(out), {a}, [](const BackwardContext& c) {
    return std::vector<Tensor>{sum_to(c.grad_output, c.inputs[0].shape())};
  });
}

Tensor sum_to(const Tensor& a, const Shape& shape) {
  check_broadcastable("sum_to", a.shape(), shape);
  if (a.shape() == shape) return a;
  Array out(shape, 0.0);
  const double* src = a.value().raw();
  double* dst = out.raw();
  for_each_broadcast(a.shape(), shape, [&](std::size_t bi, std::size_t si) { dst[si] += src[bi]; });
  return make_op_result("sum_to", std::move(out), {a}, [](const BackwardContext& c) {
    return std::vector<Tensor>{expand(c.grad_output, c.inputs[0].shape())};
  });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  return make_op_result("reshape", a.value().reshaped(shape), {a}, [](const BackwardContext& c) {
    return std::vector<Tensor>{reshape(c.grad_output, c.inputs[0].shape())};
  });
}

Tensor transpose(const Tensor& a) {
  if (a.value().rank() != 2) throw ShapeError("transpose expects a 2-D tensor, got " + to_string(a.shape()));
  const int rows = a.shape()[0];
  const int cols = a.shape()[1];
  Array out({cols, rows});
  const double* src = a.value().raw();
  double* dst = out.raw();
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) dst[static_cast<std::size_t>(j) * rows + i] = src[static_cast<std::size_t>(i) * cols + j];
  return make_op_result("transpose", std::move(out), {a}, [](const BackwardContext& c) {
    return std::vector<Tensor>{transpose(c.grad_output)};
  });
}

namespace {

void check_channel_layout(const char* op, const Shape& a, const Shape& b) {
  bool ok = a.size() == b.size() && a.size() >= 2;
  for (std::size_t i = 0; ok && i < a.size(); ++i) ok = i == 1 || a[i] == b[i];
  if (!ok) throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

// Copies `count` channels between [N, Csrc, inner] and [N, Cdst, inner] buffers.
void copy_channels(const Array& src, int src_begin, Array& dst, int dst_begin, int count) {
  const int n = src.shape()[0];
  const int csrc = src.shape()[1];
  const int cdst = dst.shape()[1];
  const std::size_t inner = src.size() / (static_cast<std::size_t>(n) * csrc);
  for (int i = 0; i < n; ++i) {
    const double* s = src.raw() + (static_cast<std::size_t>(i) * csrc + src_begin) * inner;
    double* d = dst.raw() + (static_cast<std::size_t>(i) * cdst + dst_begin) * inner;
    std::copy(s, s + static_cast<std::size_t>(count) * inner, d);
  }
}

}  // namespace

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  check_channel_layout("concat_channels", a.shape(), b.shape());
  const int ca = a.shape()[1];
  const int cb = b.shape()[1];
  Shape shape = a.shape();
  shape[1] = ca + cb;
  Array out(shape);
  copy_channels(a.value(), 0, out, 0, ca);
  copy_channels(b.value(), 0, out, ca, cb);
  return make_op_result("concat_channels", std::move(out), {a, b}, [ca, cb](const BackwardContext& c) {
    return std::vector<Tensor>{c.needs[0] ? slice_channels(c.grad_output, 0, ca) : Tensor(),
                               c.needs[1] ? slice_channels(c.grad_output, ca, cb) : Tensor()};
  });
}

Tensor slice_channels(const Tensor& a, int begin, int count) {
  if (a.value().rank() < 2 || begin < 0 || count <= 0 || begin + count > a.shape()[1]) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                     ") outside " + to_string(a.shape()));
  }
  Shape shape = a.shape();
  const int total = shape[1];
  shape[1] = count;
  Array out(shape);
  copy_channels(a.value(), begin, out, 0, count);
  return make_op_result("slice_channels", std::move(out), {a}, [begin, total](const BackwardContext& c) {
    return std::vector<Tensor>{pad_channels(c.grad_output, begin, total)};
  });
}

Tensor pad_channels(const Tensor& a, int begin, int total) {
  if (a.value().rank() < 2 || begin < 0 || begin + a.shape()[1] > total) {
    throw ShapeError("pad_channels: cannot place " + to_string(a.shape()) + " at channel " +
                     std::to_string(begin) + " of " + std::to_string(total));
  }
  Shape shape = a.shape();
  const int count = shape[1];
  shape[1] = total;
  Array out(shape, 0.0);
  copy_channels(a.value(), 0, out, begin, count);
  return make_op_result("pad_channels", std::move(out), {a}, [begin, count](const BackwardContext& c) {
    return std::vector<Tensor>{slice_channels(c.grad_output, begin, count)};
  });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (bias.value().rank() != 1 || weight.value().rank() != 2 || bias.shape()[0] != weight.shape()[1]) {
    throw ShapeError("linear: weight " + to_string(weight.shape()) + " and bias " + to_string(bias.shape()) +
                     " disagree");
  }
  Tensor y = matmul(input, weight);
  return add(y, expand(reshape(bias, {1, bias.shape()[0]}), y.shape()));
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.value().rank() < 2 || bias.value().rank() != 1 || bias.shape()[0] != x.shape()[1]) {
    throw ShapeError("add_channel_bias: bias " + to_string(bias.shape()) + " does not match " +
                     to_string(x.shape()));
  }
  Shape b(x.shape().size(), 1);
  b[1] = bias.shape()[0];
  return add(x, expand(reshape(bias, b), x.shape()));
}

Tensor pixel_norm(const Tensor& x, double eps) {
  if (x.value().rank() < 2) throw ShapeError("pixel_norm expects [N,C,...], got " + to_string(x.shape()));
  Shape reduced = x.shape();
  const int channels = reduced[1];
  reduced[1] = 1;
  Tensor mean_sq = scale(sum_to(square(x), reduced), 1.0 / channels);
  Tensor inv_rms = pow_scalar(add_scalar(mean_sq, eps), -0.5);
  return mul(x, expand(inv_rms, x.shape()));
}

Tensor minibatch_stddev(const Tensor& x) {
  if (x.value().rank() != 4) throw ShapeError("minibatch_stddev expects [N,C,H,W], got " + to_string(x.shape()));
  const Shape& s = x.shape();
  const double n = s[0];
  Shape per_position = s;
  per_position[0] = 1;
  Tensor mu = scale(sum_to(x, per_position), 1.0 / n);
  Tensor centered = sub(x, expand(mu, s));
  Tensor var = scale(sum_to(square(centered), per_position), 1.0 / n);
  Tensor avg_sd = mean(sqrt(var));
  Tensor map = expand(reshape(avg_sd, {1, 1, 1, 1}), {s[0], 1, s[2], s[3]});
  return concat_channels(x, map);
}

Tensor blend(const Tensor& prior, const Tensor& next, double alpha) {
  require_same_shape("blend", prior, next);
  return add(scale(next, alpha), scale(prior, 1.0 - alpha));
}

}  // namespace cxrgan
