// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

// Central finite-difference oracle. Independent of the reverse sweep: it only
// evaluates the forward function.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cxrgan/ops.h"
#include "cxrgan/rng.h"

namespace cxrgan::testing {

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

inline Array random_array(const Shape& shape, Rng& rng, double scale = 1.0) {
  Array a(shape);
  for (auto& v : a.data()) v = scale * rng.normal();
  return a;
}

/// Largest relative error ||analytic - numeric|| / max(||analytic||, ||numeric||)
/// over the inputs, each compared as one vector.
inline double gradient_relative_error(const ScalarFn& f, const std::vector<Array>& points,
                                      double step = 1e-4) {
  std::vector<Tensor> leaves;
  for (const Array& p : points) leaves.emplace_back(p, true);
  const std::vector<Tensor> analytic = grad(f(leaves), leaves);

  double worst = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t j = 0; j < points[i].size(); ++j) {
      auto eval = [&](double delta) {
        std::vector<Tensor> shifted;
        for (std::size_t k = 0; k < points.size(); ++k) {
          Array p = points[k];
          if (k == i) p[j] += delta;
          shifted.emplace_back(std::move(p));
        }
        return f(shifted).item();
      };
      const double numeric = (eval(step) - eval(-step)) / (2.0 * step);
      const double a = analytic[i].value()[j];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    worst = std::max(worst, std::sqrt(diff2) / denom);
  }
  return worst;
}

/// Contracts a tensor against fixed random weights so every output element
/// contributes a distinct amount to the scalar.
inline Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul_const(t, random_array(t.shape(), rng)));
}

}  // namespace cxrgan::testing
