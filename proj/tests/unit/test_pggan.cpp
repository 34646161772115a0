// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "cxrgan/error.h"
#include "cxrgan/pggan.h"
#include "gradcheck.h"

using namespace cxrgan;
using cxrgan::testing::random_array;

namespace {

GanArchitecture small_arch() {
  GanArchitecture a;
  a.latent_dim = 8;
  a.max_resolution = 16;
  a.fmap_base = 16;
  a.fmap_min = 4;
  return a;
}

double max_abs_diff(const Array& a, const Array& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor latent(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor(random_array({n, dim}, rng));
}

}  // namespace

TEST_CASE("alpha_schedule is linear and clamped") {
  CHECK(alpha_schedule(0, 1000) == 0.0);
  CHECK(alpha_schedule(500, 1000) == 0.5);
  CHECK(alpha_schedule(1000, 1000) == 1.0);
  CHECK(alpha_schedule(1500, 1000) == 1.0);
  CHECK(alpha_schedule(0, 0) == 1.0);
}

TEST_CASE("BlendState construction") {
  CHECK(BlendState::stable(2).resolution() == 16);
  CHECK(BlendState::stable(2).alpha == 1.0);
  CHECK(BlendState::fading(1, 0.25).is_fading());
  CHECK_THROWS_AS(BlendState::fading(0, 0.5), ConfigError);
  CHECK_THROWS_AS(BlendState::fading(1, 1.5), ConfigError);
  CHECK_THROWS_AS(BlendState::stable(-1), ConfigError);
}

TEST_CASE("architecture channel widths and validation") {
  GanArchitecture a;
  CHECK(a.max_level() == 4);
  CHECK(a.channels(0) == 128);
  CHECK(a.channels(1) == 64);
  CHECK(a.channels(4) == 8);
  a.max_resolution = 48;
  CHECK_FALSE(a.validate().empty());
}

TEST_CASE("generator output shape doubles with each level") {
  Generator g(small_arch(), 3);
  const Tensor z = latent(2, 8, 1);
  CHECK(g.generate(z, BlendState::stable(0)).shape() == Shape{2, 1, 4, 4});
  g.grow();
  CHECK(g.generate(z, BlendState::stable(1)).shape() == Shape{2, 1, 8, 8});
  g.grow();
  CHECK(g.generate(z, BlendState::stable(2)).shape() == Shape{2, 1, 16, 16});
  CHECK_THROWS_AS(g.grow(), ConfigError);
  CHECK_THROWS_AS(g.generate(latent(2, 7, 1), BlendState::stable(0)), ShapeError);
}

TEST_CASE("generate rejects levels that are not built") {
  Generator g(small_arch(), 3);
  CHECK_THROWS_AS(g.generate(latent(1, 8, 1), BlendState::stable(1)), ConfigError);
}

TEST_CASE("generator blend endpoints and midpoint") {
  Generator g(small_arch(), 5);
  g.grow();
  const Tensor z = latent(3, 8, 2);
  const Array prior = upsample2x(g.generate(z, BlendState::stable(0))).value();
  const Array next = g.generate(z, BlendState::stable(1)).value();
  const Array at0 = g.generate(z, BlendState::fading(1, 0.0)).value();
  const Array at1 = g.generate(z, BlendState::fading(1, 1.0)).value();
  const Array mid = g.generate(z, BlendState::fading(1, 0.5)).value();
  CHECK(max_abs_diff(at0, prior) <= 1e-12);
  CHECK(max_abs_diff(at1, next) <= 1e-12);
  Array avg(prior.shape());
  for (std::size_t i = 0; i < avg.size(); ++i) avg[i] = 0.5 * (prior[i] + next[i]);
  CHECK(max_abs_diff(mid, avg) <= 1e-12);
}

TEST_CASE("discriminator blend endpoints match single-path scores") {
  Discriminator d(small_arch(), 5);
  d.grow();
  Rng rng(4);
  const Tensor x(random_array({3, 1, 8, 8}, rng));
  const Array low = d.discriminate(downsample2x(x), BlendState::stable(0)).value();
  const Array high = d.discriminate(x, BlendState::stable(1)).value();
  CHECK(max_abs_diff(d.discriminate(x, BlendState::fading(1, 0.0)).value(), low) <= 1e-12);
  CHECK(max_abs_diff(d.discriminate(x, BlendState::fading(1, 1.0)).value(), high) <= 1e-12);
  CHECK_THROWS_AS(d.discriminate(x, BlendState::stable(0)), ShapeError);
}

TEST_CASE("duplicated batch gives identical scores") {
  Discriminator d(small_arch(), 6);
  Rng rng(8);
  const Array one = random_array({1, 1, 4, 4}, rng);
  Array batch({4, 1, 4, 4});
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = one[i % one.size()];
  const Array s = d.discriminate(Tensor(batch), BlendState::stable(0)).value();
  for (int i = 1; i < 4; ++i) CHECK(s[static_cast<std::size_t>(i)] == s[0]);
  CHECK(d.features(Tensor(batch), BlendState::stable(0)).shape() == Shape{4, 16});
}

TEST_CASE("score gradient with respect to the input is finite and nonzero") {
  Discriminator d(small_arch(), 9);
  d.grow();
  Rng rng(10);
  Tensor x(random_array({2, 1, 8, 8}, rng), true);
  const Tensor g = grad(sum(d.discriminate(x, BlendState::fading(1, 0.3))), {x})[0];
  CHECK(g.value().all_finite());
  double norm = 0.0;
  for (double v : g.value().data()) norm += v * v;
  CHECK(norm > 0.0);
}

TEST_CASE("grow leaves existing outputs bit-identical and adds the analytic parameter count") {
  const GanArchitecture a = small_arch();
  Generator g(a, 11);
  Discriminator d(a, 11);
  const Tensor z = latent(2, 8, 3);
  Rng rng(5);
  const Tensor x(random_array({2, 1, 4, 4}, rng));
  const Array g_before = g.generate(z, BlendState::stable(0)).value();
  const Array d_before = d.discriminate(x, BlendState::stable(0)).value();

  for (int level = 1; level <= a.max_level(); ++level) {
    const std::size_t gp = g.parameter_count();
    const std::size_t dp = d.parameter_count();
    g.grow();
    d.grow();
    const std::size_t c = static_cast<std::size_t>(a.channels(level));
    const std::size_t p = static_cast<std::size_t>(a.channels(level - 1));
    const std::size_t g_block = (p * c * 9 + c) + (c * c * 9 + c) + (c + 1);
    const std::size_t d_block = (c + c) + (c * c * 9 + c) + (c * p * 9 + p);
    CHECK(g.parameter_count() - gp == g_block);
    CHECK(d.parameter_count() - dp == d_block);
    CHECK(g.generate(z, BlendState::stable(0)).value() == g_before);
    CHECK(d.discriminate(x, BlendState::stable(0)).value() == d_before);
  }
}

TEST_CASE("base network parameter counts") {
  const GanArchitecture a = small_arch();
  const std::size_t c = 16, l = 8;
  CHECK(Generator(a, 0).parameter_count() == (l * 16 * c + 16 * c) + (c * c * 9 + c) + (c + 1));
  CHECK(Discriminator(a, 0).parameter_count() ==
        (c + c) + ((c + 1) * c * 9 + c) + (16 * c * c + c) + (c + 1));
}

TEST_CASE("equalized learning rate rescaling is bit-identical") {
  Rng rng(12);
  EqualizedConv2d conv(3, 4, 3, 1, std::sqrt(2.0), rng.split("conv"));
  EqualizedLinear lin(5, 2, std::sqrt(2.0), rng.split("lin"));
  const Tensor x(random_array({2, 3, 6, 6}, rng));
  const Tensor v(random_array({3, 5}, rng));
  const Array conv_before = conv.forward(x).value();
  const Array lin_before = lin.forward(v).value();
  const double c = 4.0;
  for (auto* layer_weight : {&conv.weight, &lin.weight}) {
    for (auto& w : layer_weight->mutable_value().data()) w *= c;
  }
  conv.runtime_scale /= c;
  lin.runtime_scale /= c;
  CHECK(conv.forward(x).value() == conv_before);
  CHECK(lin.forward(v).value() == lin_before);
}

TEST_CASE("equalized layers draw unit normal weights and zero biases") {
  EqualizedConv2d conv(16, 32, 3, 1, std::sqrt(2.0), Rng(1));
  double s = 0.0, s2 = 0.0;
  const auto w = conv.weight.value().data();
  for (double v : w) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(w.size());
  CHECK(std::abs(s / n) < 0.05);
  CHECK(std::abs(s2 / n - 1.0) < 0.05);
  CHECK(conv.runtime_scale == doctest::Approx(std::sqrt(2.0) / std::sqrt(16.0 * 9.0)));
  for (double b : conv.bias.value().data()) CHECK(b == 0.0);
}

TEST_CASE("fixed seed gives bit-identical networks and images") {
  Generator a(small_arch(), 21);
  Generator b(small_arch(), 21);
  a.grow();
  b.grow();
  const Tensor z = latent(2, 8, 4);
  CHECK(a.generate(z, BlendState::fading(1, 0.7)).value() == b.generate(z, BlendState::fading(1, 0.7)).value());
  Generator c(small_arch(), 22);
  c.grow();
  CHECK_FALSE(a.generate(z, BlendState::stable(1)).value() == c.generate(z, BlendState::stable(1)).value());
}

TEST_CASE("clone owns independent parameters") {
  Generator g(small_arch(), 2);
  Generator h = g.clone();
  const Tensor z = latent(1, 8, 1);
  const Array before = h.generate(z, BlendState::stable(0)).value();
  for (const auto& p : g.parameters()) {
    Tensor t = p.tensor;
    for (auto& v : t.mutable_value().data()) v += 1.0;
  }
  CHECK(h.generate(z, BlendState::stable(0)).value() == before);
}

TEST_CASE("parameter round trip through a checkpoint") {
  Generator g(small_arch(), 2);
  g.grow();
  Checkpoint ck;
  save_parameters(g.parameters(), ck, "g/");
  const Checkpoint back = Checkpoint::deserialize(ck.serialize());
  Generator h(small_arch(), 99);
  h.grow();
  load_parameters(h.parameters(), back, "g/");
  const Tensor z = latent(2, 8, 1);
  CHECK(h.generate(z, BlendState::stable(1)).value() == g.generate(z, BlendState::stable(1)).value());
  Generator shallow(small_arch(), 1);
  CHECK_THROWS_AS(load_parameters(shallow.parameters(), Checkpoint{}, "g/"), DataError);
}
