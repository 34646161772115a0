// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

// Dense kernels: matrix products and the conv2d family. The three conv ops
// are the three partial adjoints of one trilinear form <conv2d(x,w), g>, so
// each one's backward is expressed with the other two.

#include <Eigen/Core>

#include "cxrgan/error.h"
#include "cxrgan/ops.h"

namespace cxrgan {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;

struct ConvGeometry {
  int n, c, h, w;   // input
  int f, k;         // kernel
  int stride, pad;
  int ho, wo;       // output

  std::size_t patch() const { return static_cast<std::size_t>(c) * k * k; }
  std::size_t positions() const { return static_cast<std::size_t>(ho) * wo; }
  Shape input_shape() const { return {n, c, h, w}; }
  Shape output_shape() const { return {n, f, ho, wo}; }
  Shape kernel_shape() const { return {f, c, k, k}; }

  // Output columns ox whose input column ox * stride - pad + kj lies inside [0, w).
  std::pair<int, int> valid_columns(int kj) const {
    const int off = kj - pad;
    const int lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
    const int hi = w - 1 - off < 0 ? 0 : std::min(wo, (w - 1 - off) / stride + 1);
    return {std::min(lo, hi), hi};
  }
};

ConvGeometry make_geometry(const char* op, const Shape& input, const Shape& kernel, int stride, int pad) {
  if (input.size() != 4) throw ShapeError(std::string(op) + ": input must be [N,C,H,W], got " + to_string(input));
  if (kernel.size() != 4 || kernel[2] != kernel[3]) {
    throw ShapeError(std::string(op) + ": kernel must be [F,C,k,k], got " + to_string(kernel));
  }
  if (kernel[1] != input[1]) {
    throw ShapeError(std::string(op) + ": kernel expects " + std::to_string(kernel[1]) +
                     " input channels but input " + to_string(input) + " has " + std::to_string(input[1]));
  }
  if (stride < 1 || pad < 0) throw ShapeError(std::string(op) + ": stride must be >= 1 and pad >= 0");
  const int k = kernel[2];
  if (k > input[2] + 2 * pad || k > input[3] + 2 * pad) {
    throw ShapeError(std::string(op) + ": kernel size " + std::to_string(k) + " exceeds padded input " +
                     to_string(input));
  }
  ConvGeometry g{input[0], input[1], input[2], input[3], kernel[0], k, stride, pad, 0, 0};
  g.ho = (g.h + 2 * pad - k) / stride + 1;
  g.wo = (g.w + 2 * pad - k) / stride + 1;
  return g;
}

// cols[(c*k+ki)*k+kj][n*P + oy*wo + ox] = x[n,c,oy*s-p+ki,ox*s-p+kj] (0 outside).
RowMatrix im2col(const ConvGeometry& g, const double* x) {
  const std::size_t np = static_cast<std::size_t>(g.n) * g.positions();
  RowMatrix cols(static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(np));
  for (int c = 0; c < g.c; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        double* row = cols.data() + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * np;
        for (int n = 0; n < g.n; ++n) {
          const double* plane = x + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
          double* out = row + static_cast<std::size_t>(n) * g.positions();
          for (int oy = 0; oy < g.ho; ++oy) {
            const int iy = oy * g.stride - g.pad + ki;
            double* orow = out + static_cast<std::size_t>(oy) * g.wo;
            if (iy < 0 || iy >= g.h) {
              std::fill(orow, orow + g.wo, 0.0);
              continue;
            }
            const double* irow = plane + static_cast<std::size_t>(iy) * g.w;
            const auto [lo, hi] = g.valid_columns(kj);
            std::fill(orow, orow + lo, 0.0);
            std::fill(orow + hi, orow + g.wo, 0.0);
            const double* src = irow + kj - g.pad;
            if (g.stride == 1) {
              std::copy(src + lo, src + hi, orow + lo);
            } else {
              for (int ox = lo; ox < hi; ++ox) orow[ox] = src[ox * g.stride];
            }
          }
        }
      }
    }
  }
  return cols;
}

void col2im(const ConvGeometry& g, const RowMatrix& cols, double* x) {
  const std::size_t np = static_cast<std::size_t>(g.n) * g.positions();
  for (int c = 0; c < g.c; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const double* row = cols.data() + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * np;
        for (int n = 0; n < g.n; ++n) {
          double* plane = x + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
          const double* in = row + static_cast<std::size_t>(n) * g.positions();
          for (int oy = 0; oy < g.ho; ++oy) {
            const int iy = oy * g.stride - g.pad + ki;
            if (iy < 0 || iy >= g.h) continue;
            double* prow = plane + static_cast<std::size_t>(iy) * g.w;
            const double* crow = in + static_cast<std::size_t>(oy) * g.wo;
            const auto [lo, hi] = g.valid_columns(kj);
            double* dst = prow + kj - g.pad;
            for (int ox = lo; ox < hi; ++ox) dst[ox * g.stride] += crow[ox];
          }
        }
      }
    }
  }
}

// [N,F,P] (batch-major) <-> [F, N*P] (channel-major).
RowMatrix to_channel_major(const double* src, int n, int f, std::size_t p) {
  RowMatrix m(f, static_cast<Eigen::Index>(static_cast<std::size_t>(n) * p));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < f; ++j)
      std::copy(src + (static_cast<std::size_t>(i) * f + j) * p, src + (static_cast<std::size_t>(i) * f + j + 1) * p,
                m.data() + static_cast<std::size_t>(j) * n * p + static_cast<std::size_t>(i) * p);
  return m;
}

void from_channel_major(const RowMatrix& m, int n, int f, std::size_t p, double* dst) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < f; ++j) {
      const double* s = m.data() + static_cast<std::size_t>(j) * n * p + static_cast<std::size_t>(i) * p;
      std::copy(s, s + p, dst + (static_cast<std::size_t>(i) * f + j) * p);
    }
}

Array conv_forward(const ConvGeometry& g, const Array& x, const Array& w) {
  const RowMatrix cols = im2col(g, x.raw());
  ConstMapMatrix wm(w.raw(), g.f, static_cast<Eigen::Index>(g.patch()));
  RowMatrix y = wm * cols;
  Array out(g.output_shape());
  from_channel_major(y, g.n, g.f, g.positions(), out.raw());
  return out;
}

Array conv_input_grad(const ConvGeometry& g, const Array& grad_out, const Array& w) {
  const RowMatrix gm = to_channel_major(grad_out.raw(), g.n, g.f, g.positions());
  ConstMapMatrix wm(w.raw(), g.f, static_cast<Eigen::Index>(g.patch()));
  RowMatrix cols = wm.transpose() * gm;
  Array dx(g.input_shape(), 0.0);
  col2im(g, cols, dx.raw());
  return dx;
}

Array conv_kernel_grad(const ConvGeometry& g, const Array& x, const Array& grad_out) {
  const RowMatrix cols = im2col(g, x.raw());
  const RowMatrix gm = to_channel_major(grad_out.raw(), g.n, g.f, g.positions());
  Array dw(g.kernel_shape());
  MapMatrix dwm(dw.raw(), g.f, static_cast<Eigen::Index>(g.patch()));
  dwm.noalias() = gm * cols.transpose();
  return dw;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.value().rank() != 2 || b.value().rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: inner dimensions disagree for " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const int n = a.shape()[0];
  const int d = a.shape()[1];
  const int m = b.shape()[1];
  Array out({n, m});
  MapMatrix(out.raw(), n, m).noalias() = ConstMapMatrix(a.value().raw(), n, d) * ConstMapMatrix(b.value().raw(), d, m);
  return make_op_result("matmul", std::move(out), {a, b}, [](const BackwardContext& c) {
    return std::vector<Tensor>{
        c.needs[0] ? matmul(c.grad_output, transpose(c.inputs[1])) : Tensor(),
        c.needs[1] ? matmul(transpose(c.inputs[0]), c.grad_output) : Tensor()};
  });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  const ConvGeometry g = make_geometry("conv2d", input.shape(), kernel.shape(), stride, pad);
  Array out = conv_forward(g, input.value(), kernel.value());
  return make_op_result("conv2d", std::move(out), {input, kernel}, [stride, pad](const BackwardContext& c) {
    const Tensor& x = c.inputs[0];
    const Tensor& w = c.inputs[1];
    return std::vector<Tensor>{
        c.needs[0] ? conv_transpose2d(c.grad_output, w, stride, pad, x.shape()) : Tensor(),
        c.needs[1] ? conv2d_weight_grad(x, c.grad_output, stride, pad, w.shape()) : Tensor()};
  });
}

Tensor conv_transpose2d(const Tensor& grad_output, const Tensor& kernel, int stride, int pad,
                        const Shape& input_shape) {
  const ConvGeometry g = make_geometry("conv_transpose2d", input_shape, kernel.shape(), stride, pad);
  if (grad_output.shape() != g.output_shape()) {
    throw ShapeError("conv_transpose2d: expected " + to_string(g.output_shape()) + ", got " +
                     to_string(grad_output.shape()));
  }
  Array dx = conv_input_grad(g, grad_output.value(), kernel.value());
  return make_op_result("conv_transpose2d", std::move(dx), {grad_output, kernel},
                        [stride, pad](const BackwardContext& c) {
                          const Tensor& go = c.inputs[0];
                          const Tensor& w = c.inputs[1];
                          return std::vector<Tensor>{
                              c.needs[0] ? conv2d(c.grad_output, w, stride, pad) : Tensor(),
                              c.needs[1] ? conv2d_weight_grad(c.grad_output, go, stride, pad, w.shape())
                                         : Tensor()};
                        });
}

Tensor conv2d_weight_grad(const Tensor& input, const Tensor& grad_output, int stride, int pad,
                          const Shape& kernel_shape) {
  const ConvGeometry g = make_geometry("conv2d_weight_grad", input.shape(), kernel_shape, stride, pad);
  if (grad_output.shape() != g.output_shape()) {
    throw ShapeError("conv2d_weight_grad: expected " + to_string(g.output_shape()) + ", got " +
                     to_string(grad_output.shape()));
  }
  Array dw = conv_kernel_grad(g, input.value(), grad_output.value());
  return make_op_result("conv2d_weight_grad", std::move(dw), {input, grad_output},
                        [stride, pad](const BackwardContext& c) {
                          const Tensor& x = c.inputs[0];
                          const Tensor& go = c.inputs[1];
                          return std::vector<Tensor>{
                              c.needs[0] ? conv_transpose2d(go, c.grad_output, stride, pad, x.shape()) : Tensor(),
                              c.needs[1] ? conv2d(x, c.grad_output, stride, pad) : Tensor()};
                        });
}

Tensor upsample2x(const Tensor& a) {
  if (a.value().rank() != 4) throw ShapeError("upsample2x expects [N,C,H,W], got " + to_string(a.shape()));
  const Shape& s = a.shape();
  const int h = s[2];
  const int w = s[3];
  Array out({s[0], s[1], 2 * h, 2 * w});
  const std::size_t planes = static_cast<std::size_t>(s[0]) * s[1];
  const double* src = a.value().raw();
  double* dst = out.raw();
  for (std::size_t p = 0; p < planes; ++p) {
    const double* ip = src + p * h * w;
    double* op = dst + p * 4 * h * w;
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x) op[static_cast<std::size_t>(y) * 2 * w + x] = ip[static_cast<std::size_t>(y / 2) * w + x / 2];
  }
  return make_op_result("upsample2x", std::move(out), {a}, [](const BackwardContext& c) {
    return std::vector<Tensor>{scale(downsample2x(c.grad_output), 4.0)};
  });
}

Tensor downsample2x(const Tensor& a) {
  if (a.value().rank() != 4) throw ShapeError("downsample2x expects [N,C,H,W], got " + to_string(a.shape()));
  const Shape& s = a.shape();
  if (s[2] % 2 != 0 || s[3] % 2 != 0) {
    throw ShapeError("downsample2x requires even spatial dimensions, got " + to_string(s));
  }
  const int h = s[2] / 2;
  const int w = s[3] / 2;
  Array out({s[0], s[1], h, w});
  const std::size_t planes = static_cast<std::size_t>(s[0]) * s[1];
  const double* src = a.value().raw();
  double* dst = out.raw();
  for (std::size_t p = 0; p < planes; ++p) {
    const double* ip = src + p * 4 * h * w;
    double* op = dst + p * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double* r0 = ip + static_cast<std::size_t>(2 * y) * 2 * w + 2 * x;
        const double* r1 = r0 + 2 * w;
        op[static_cast<std::size_t>(y) * w + x] = 0.25 * ((r0[0] + r0[1]) + (r1[0] + r1[1]));
      }
  }
  return make_op_result("downsample2x", std::move(out), {a}, [](const BackwardContext& c) {
    return std::vector<Tensor>{scale(upsample2x(c.grad_output), 0.25)};
  });
}

}  // namespace cxrgan
