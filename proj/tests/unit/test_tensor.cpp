// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "cxrgan/error.h"
#include "cxrgan/ops.h"
#include "gradcheck.h"

using namespace cxrgan;
using cxrgan::testing::gradient_relative_error;
using cxrgan::testing::random_array;
using cxrgan::testing::weighted_sum;

TEST_CASE("conv2d with a 1x1 identity kernel returns the input") {
  Rng rng(1);
  Tensor x(random_array({1, 1, 3, 3}, rng));
  Tensor k(Array({1, 1, 1, 1}, 1.0));
  CHECK(conv2d(x, k).value() == x.value());
}

TEST_CASE("conv2d with a 2x2 sum kernel") {
  Tensor x(Array({1, 1, 2, 2}, {1, 2, 3, 4}));
  Tensor k(Array({1, 1, 2, 2}, 1.0));
  const Tensor y = conv2d(x, k);
  CHECK(y.shape() == Shape{1, 1, 1, 1});
  CHECK(y.item() == 10.0);
}

TEST_CASE("conv2d output geometry and shape errors") {
  Tensor x(Array({2, 3, 7, 7}, 0.5));
  CHECK(conv2d(x, Tensor(Array({4, 3, 3, 3})), 2, 1).shape() == Shape{2, 4, 4, 4});
  CHECK(conv2d(x, Tensor(Array({4, 3, 3, 3})), 1, 0).shape() == Shape{2, 4, 5, 5});
  CHECK_THROWS_AS(conv2d(x, Tensor(Array({4, 2, 3, 3}))), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor(Array({4, 3, 9, 9}))), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor(Array({4, 3, 3, 3})), 0, 0), ShapeError);
}

TEST_CASE("conv2d gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const int stride = 1 + static_cast<int>(seed % 2);
    const int pad = static_cast<int>(seed % 3);
    auto f = [&](const std::vector<Tensor>& in) { return weighted_sum(conv2d(in[0], in[1], stride, pad), 99); };
    const double err = gradient_relative_error(f, {random_array({1, 2, 5, 5}, rng), random_array({2, 2, 3, 3}, rng)});
    CHECK(err < 1e-4);
  }
}

TEST_CASE("linear forward and gradients") {
  Tensor x(Array({1, 2}, {1, 2}));
  Tensor w(Array({2, 1}, {1, 1}));
  Tensor b(Array({1}, {3}));
  CHECK(linear(x, w, b).value() == Array({1, 1}, {6}));

  Tensor eye(Array({2, 2}, {1, 0, 0, 1}));
  Tensor zero(Array({2}, 0.0));
  Tensor xs(Array({3, 2}, {1, -2, 3, 4, 5.5, 6}));
  CHECK(linear(xs, eye, zero).value() == xs.value());
  CHECK_THROWS_AS(linear(xs, Tensor(Array({3, 2})), zero), ShapeError);

  Rng rng(4);
  auto f = [](const std::vector<Tensor>& in) { return weighted_sum(linear(in[0], in[1], in[2]), 5); };
  CHECK(gradient_relative_error(f, {random_array({3, 4}, rng), random_array({4, 2}, rng), random_array({2}, rng)}) <
        1e-4);
}

TEST_CASE("leaky_relu values and subgradient at zero") {
  Tensor x(Array({3}, {5.0, -5.0, 0.0}), true);
  const Tensor y = leaky_relu(x, 0.2);
  CHECK(y.value()[0] == 5.0);
  CHECK(y.value()[1] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(y.value()[2] == 0.0);
  backward(sum(y));
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 0.2);
  CHECK(x.grad()[2] == 0.2);
  CHECK_THROWS_AS(leaky_relu(x, 1.0), ConfigError);
}

TEST_CASE("pixel_norm") {
  SUBCASE("zero input stays zero") {
    const Tensor y = pixel_norm(Tensor(Array({2, 3, 2, 2}, 0.0)));
    for (double v : y.value().data()) CHECK(v == 0.0);
  }
  SUBCASE("single channel normalizes to one") {
    const Tensor y = pixel_norm(Tensor(Array({1, 1, 1, 1}, 7.0)), 0.0);
    CHECK(y.item() == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("output RMS over channels is one for large inputs") {
    Rng rng(7);
    const Tensor y = pixel_norm(Tensor(random_array({3, 8, 4, 4}, rng, 100.0)), 1e-8);
    for (int n = 0; n < 3; ++n)
      for (int p = 0; p < 16; ++p) {
        double ms = 0.0;
        for (int c = 0; c < 8; ++c) {
          const double v = y.value()[(static_cast<std::size_t>(n) * 8 + c) * 16 + p];
          ms += v * v;
        }
        CHECK(std::abs(std::sqrt(ms / 8) - 1.0) < 1e-6);
      }
  }
}

TEST_CASE("minibatch_stddev") {
  SUBCASE("identical samples append a zero map") {
    Rng rng(3);
    Array one = random_array({1, 2, 3, 3}, rng);
    Array batch({2, 2, 3, 3});
    std::copy(one.raw(), one.raw() + one.size(), batch.raw());
    std::copy(one.raw(), one.raw() + one.size(), batch.raw() + one.size());
    const Tensor y = minibatch_stddev(Tensor(batch));
    CHECK(y.shape() == Shape{2, 3, 3, 3});
    for (int n = 0; n < 2; ++n)
      for (int p = 0; p < 9; ++p) CHECK(y.value()[(static_cast<std::size_t>(n) * 3 + 2) * 9 + p] == 0.0);
  }
  SUBCASE("two-point population std") {
    const Tensor y = minibatch_stddev(Tensor(Array({2, 1, 1, 1}, {1.0, 3.0})));
    CHECK(y.value() == Array({2, 2, 1, 1}, {1.0, 1.0, 3.0, 1.0}));
  }
  SUBCASE("appended map is constant and equals a direct recomputation") {
    Rng rng(11);
    const Array x = random_array({4, 3, 2, 2}, rng);
    const Tensor y = minibatch_stddev(Tensor(x));
    double expected = 0.0;
    for (int pos = 0; pos < 12; ++pos) {
      double m = 0.0;
      for (int n = 0; n < 4; ++n) m += x[static_cast<std::size_t>(n) * 12 + pos];
      m /= 4;
      double v = 0.0;
      for (int n = 0; n < 4; ++n) v += (x[static_cast<std::size_t>(n) * 12 + pos] - m) * (x[static_cast<std::size_t>(n) * 12 + pos] - m);
      expected += std::sqrt(v / 4);
    }
    expected /= 12;
    const double first = y.value()[3 * 4];
    CHECK(first == doctest::Approx(expected).epsilon(1e-12));
    for (int n = 0; n < 4; ++n)
      for (int p = 0; p < 4; ++p) CHECK(y.value()[(static_cast<std::size_t>(n) * 4 + 3) * 4 + p] == first);
  }
}

TEST_CASE("upsample2x and downsample2x") {
  CHECK(upsample2x(Tensor(Array({1, 1, 1, 1}, 1.0))).value() == Array({1, 1, 2, 2}, 1.0));
  CHECK(downsample2x(Tensor(Array({1, 1, 2, 2}, {1, 2, 3, 4}))).item() == 2.5);
  CHECK_THROWS_AS(downsample2x(Tensor(Array({1, 1, 3, 2}))), ShapeError);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Tensor x(random_array({2, 3, 4, 4}, rng, 1e3));
    CHECK(downsample2x(upsample2x(x)).value() == x.value());
  }
}

TEST_CASE("backward on simple losses") {
  Tensor x(Array({2}, {1.0, 2.0}), true);
  backward(sum(x));
  CHECK(x.grad() == Array({2}, 1.0));
  x.zero_grad();
  backward(sum(square(x)));
  CHECK(x.grad() == Array({2}, {2.0, 4.0}));
  backward(sum(square(x)));
  CHECK(x.grad() == Array({2}, {4.0, 8.0}));
  CHECK_THROWS_AS(backward(square(x)), ShapeError);
}

TEST_CASE("composite conv -> leaky_relu -> linear gradient") {
  Rng rng(21);
  auto f = [](const std::vector<Tensor>& in) {
    Tensor h = leaky_relu(add_channel_bias(conv2d(in[0], in[1], 1, 1), in[2]), 0.2);
    return weighted_sum(linear(reshape(h, {2, 3 * 4 * 4}), in[3], in[4]), 8);
  };
  const double err = gradient_relative_error(
      f, {random_array({2, 2, 4, 4}, rng), random_array({3, 2, 3, 3}, rng), random_array({3}, rng),
          random_array({48, 5}, rng), random_array({5}, rng)});
  CHECK(err < 1e-4);
}

TEST_CASE("second derivatives through conv, leaky_relu and sampling") {
  // The inner gradient with create_graph=true is itself differentiated; the
  // finite-difference oracle only evaluates the inner gradient.
  Rng rng(5);
  auto f = [](const std::vector<Tensor>& in) {
    const bool analytic = in[0].requires_grad();
    Tensor x = analytic ? in[0] : Tensor(in[0].value(), true);
    Tensor inner = weighted_sum(
        downsample2x(leaky_relu(conv2d(upsample2x(x), in[1], 1, 1), 0.2)), 17);
    Tensor g = grad(inner, {x}, analytic)[0];
    return sum(square(g));
  };
  const double err = gradient_relative_error(f, {random_array({1, 2, 2, 2}, rng), random_array({2, 2, 3, 3}, rng)});
  CHECK(err < 1e-4);
}

TEST_CASE("grad() leaves parameter gradients untouched") {
  Tensor w(Array({3}, 2.0), true);
  Tensor x(Array({3}, 1.0), true);
  const auto g = grad(sum(mul(w, x)), {x});
  CHECK(g[0].value() == Array({3}, 2.0));
  CHECK_FALSE(w.has_grad());
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("forward passes are deterministic") {
  Rng rng(9);
  const Tensor x(random_array({3, 2, 8, 8}, rng));
  const Tensor k(random_array({4, 2, 3, 3}, rng));
  const Array a = pixel_norm(leaky_relu(conv2d(x, k, 1, 1))).value();
  const Array b = pixel_norm(leaky_relu(conv2d(x, k, 1, 1))).value();
  CHECK(a == b);
}
