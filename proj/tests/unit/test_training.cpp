// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "cxrgan/error.h"
#include "cxrgan/training.h"
#include "gradcheck.h"

using namespace cxrgan;
using cxrgan::testing::gradient_relative_error;
using cxrgan::testing::random_array;

namespace {

Tensor scores(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  return Tensor(Array({n}, std::move(v)));
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.arch.latent_dim = 8;
  c.arch.max_resolution = 8;
  c.arch.fmap_base = 8;
  c.arch.fmap_min = 4;
  c.phase_images = 32;
  c.batch_sizes = {8, 4};
  c.checkpoint_every = 48;
  c.seed = 17;
  return c;
}

Array tiny_images(int n, int r, std::uint64_t seed) {
  Rng rng(seed);
  Array a({n, 1, r, r});
  for (auto& v : a.data()) v = rng.uniform(-1.0, 1.0);
  return a;
}

std::vector<std::string> trace(GanTrainer& t, int max_steps = 1 << 30) {
  std::vector<std::string> rows;
  while (!t.done() && max_steps-- > 0) rows.push_back(to_csv_row(t.step()));
  return rows;
}

// Two-layer MLP critic with a smooth x*sigmoid(x) activation.
struct MlpCritic {
  Tensor w1, b1, w2, b2;
  explicit MlpCritic(int in, int hidden, Rng rng)
      : w1(random_array({in, hidden}, rng, 0.5), true),
        b1(random_array({hidden}, rng, 0.1), true),
        w2(random_array({hidden, 1}, rng, 0.5), true),
        b2(Array({1}, 0.0), true) {}
  Tensor operator()(const Tensor& x) const {
    const int n = x.shape()[0];
    const Tensor flat = reshape(x, {n, static_cast<int>(x.size()) / n});
    const Tensor h = linear(flat, w1, b1);
    return reshape(linear(h * sigmoid(h), w2, b2), {n});
  }
};

}  // namespace

TEST_CASE("critic_loss hand examples") {
  const Tensor zero_gp(Array::scalar(0.0));
  CHECK(critic_loss(scores({0.3, -1.2}), scores({0.3, -1.2}), zero_gp, 10.0, 0.0).item() == 0.0);
  CHECK(critic_loss(scores({1.0}), scores({0.0}), zero_gp, 10.0, 0.0).item() == -1.0);
  CHECK(critic_loss(scores({0.0, 0.0}), scores({0.0, 0.0}), Tensor(Array::scalar(0.25)), 10.0, 0.0).item() ==
        doctest::Approx(2.5).epsilon(1e-15));
  CHECK(critic_loss(scores({2.0}), scores({0.0}), zero_gp, 10.0, 0.001).item() ==
        doctest::Approx(-2.0 + 0.004).epsilon(1e-15));
}

TEST_CASE("critic_loss is invariant to batch permutation") {
  const Tensor gp(Array::scalar(0.1));
  const double a = critic_loss(scores({1, 2, 3}), scores({-1, 0, 5}), gp, 10, 0.001).item();
  const double b = critic_loss(scores({3, 1, 2}), scores({5, -1, 0}), gp, 10, 0.001).item();
  CHECK(a == doctest::Approx(b).epsilon(1e-15));
}

TEST_CASE("gradient penalty of a linear critic is (||w|| - 1)^2") {
  Rng rng(3);
  const Array w = random_array({1, 1, 3, 3}, rng);
  double norm2 = 0.0;
  for (double v : w.data()) norm2 += v * v;
  const double expected = (std::sqrt(norm2) - 1.0) * (std::sqrt(norm2) - 1.0);
  const Tensor wt(w);
  const CriticFn critic = [&](const Tensor& x) { return sum_to(x * expand(wt, x.shape()), {x.shape()[0], 1, 1, 1}); };
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng r(seed + 10);
    const Array real = random_array({4, 1, 3, 3}, r);
    const Array fake = random_array({4, 1, 3, 3}, r);
    const std::vector<double> u = {0.0, 0.3, 0.9, 1.0};
    CHECK(gradient_penalty(critic, real, fake, u).item() == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("gradient penalty of the zero critic is 1") {
  const CriticFn critic = [](const Tensor& x) { return sum_to(scale(x, 0.0), {x.shape()[0], 1, 1, 1}); };
  Rng r(1);
  const Array real = random_array({3, 1, 2, 2}, r);
  const Array fake = random_array({3, 1, 2, 2}, r);
  const std::vector<double> u = {0.5, 0.5, 0.5};
  const Tensor gp = gradient_penalty(critic, real, fake, u);
  CHECK(gp.item() == 1.0);
}

TEST_CASE("gradient penalty of an MLP critic matches a finite-difference input gradient") {
  Rng rng(5);
  const MlpCritic critic(6, 5, rng.split("critic"));
  const Array real = random_array({3, 1, 2, 3}, rng);
  const Array fake = random_array({3, 1, 2, 3}, rng);
  const std::vector<double> u = {0.2, 0.5, 0.8};
  const double gp = gradient_penalty(std::cref(critic), real, fake, u).item();

  // Oracle: central differences of the per-sample critic score.
  double oracle = 0.0;
  const double h = 1e-5;
  for (int n = 0; n < 3; ++n) {
    Array x({1, 1, 2, 3});
    for (std::size_t j = 0; j < 6; ++j) {
      const std::size_t k = static_cast<std::size_t>(n) * 6 + j;
      x[j] = u[static_cast<std::size_t>(n)] * real[k] + (1 - u[static_cast<std::size_t>(n)]) * fake[k];
    }
    double g2 = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      Array p = x, m = x;
      p[j] += h;
      m[j] -= h;
      const double d = (critic(Tensor(p)).item() - critic(Tensor(m)).item()) / (2 * h);
      g2 += d * d;
    }
    oracle += (std::sqrt(g2) - 1.0) * (std::sqrt(g2) - 1.0) / 3.0;
  }
  CHECK(std::abs(gp - oracle) <= 1e-3 * std::abs(oracle));
}

TEST_CASE("gradient penalty is differentiable with respect to critic parameters") {
  Rng rng(6);
  const Array w1 = random_array({4, 3}, rng, 0.7);
  const Array w2 = random_array({3, 1}, rng, 0.7);
  const Array real = random_array({2, 1, 2, 2}, rng);
  const Array fake = random_array({2, 1, 2, 2}, rng);
  const std::vector<double> u = {0.25, 0.75};
  auto f = [&](const std::vector<Tensor>& p) {
    const CriticFn critic = [&](const Tensor& x) {
      const Tensor h = linear(reshape(x, {2, 4}), p[0], Tensor(Array({3}, 0.1)));
      return reshape(linear(h * sigmoid(h), p[1], Tensor(Array({1}, 0.0))), {2});
    };
    return gradient_penalty(critic, real, fake, u);
  };
  CHECK(gradient_relative_error(f, {w1, w2}) < 1e-4);
}

TEST_CASE("gradient penalty through an op without a second derivative names the op") {
  const CriticFn critic = [](const Tensor& x) {
    Array v({x.shape()[0]});
    const std::size_t per = x.size() / v.size();
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t j = 0; j < per; ++j) v[i] += x.value()[i * per + j];
    }
    const Shape s = x.shape();
    return make_first_order_op("rowsum_first_order", std::move(v), {x},
                               [s](const Array& g, const std::vector<Tensor>&) {
                                 Array out(s);
                                 const std::size_t per = out.size() / g.size();
                                 for (std::size_t i = 0; i < out.size(); ++i) out[i] = g[i / per];
                                 return std::vector<Array>{out};
                               });
  };
  const Array a({2, 1, 2, 2}, 1.0);
  const std::vector<double> u = {0.5, 0.5};
  try {
    gradient_penalty(critic, a, a, u);
    FAIL("expected UnsupportedOpError");
  } catch (const UnsupportedOpError& e) {
    CHECK(e.op() == "rowsum_first_order");
    CHECK(std::string(e.what()).find("rowsum_first_order") != std::string::npos);
  }
}

TEST_CASE("gradient penalty rejects mismatched inputs") {
  const CriticFn critic = [](const Tensor& x) { return sum_to(x, {x.shape()[0], 1, 1, 1}); };
  const std::vector<double> u = {0.5};
  CHECK_THROWS_AS(gradient_penalty(critic, Array({1, 1, 2, 2}), Array({1, 1, 3, 3}), u), ShapeError);
}

TEST_CASE("adam: zero gradient is a fixed point") {
  std::vector<double> p = {1.5, -2.0};
  const std::vector<double> g = {0.0, 0.0};
  AdamMoments s;
  for (int i = 0; i < 3; ++i) adam_step(p, g, s, AdamConfig{});
  CHECK(p == std::vector<double>{1.5, -2.0});
}

TEST_CASE("adam: degenerate hyperparameters step by exactly lr") {
  std::vector<double> p = {0.75};
  const std::vector<double> g = {1.0};
  AdamMoments s;
  adam_step(p, g, s, AdamConfig{0.125, 0.0, 0.0, 0.0});
  CHECK(p[0] == 0.625);
}

TEST_CASE("adam: three steps on x^2 match the update rule and shrink |x|") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  std::vector<double> p = {1.0};
  AdamMoments s;
  // Oracle: the textbook recurrence written out independently.
  double x = 1.0, m = 0.0, v = 0.0;
  double prev = 1.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = 2.0 * x;
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    x -= cfg.lr * (m / (1 - std::pow(cfg.beta1, t))) / (std::sqrt(v / (1 - std::pow(cfg.beta2, t))) + cfg.eps);
    const std::vector<double> grad = {2.0 * p[0]};
    adam_step(p, grad, s, cfg);
    CHECK(p[0] == doctest::Approx(x).epsilon(1e-14));
    CHECK(std::abs(p[0]) < prev);
    prev = std::abs(p[0]);
  }
  CHECK(s.t == 3);
}

TEST_CASE("adam rejects mismatched moment sizes") {
  std::vector<double> p = {1.0, 2.0};
  const std::vector<double> g = {1.0, 2.0};
  AdamMoments s;
  s.m = {0.0};
  s.v = {0.0};
  CHECK_THROWS_AS(adam_step(p, g, s, AdamConfig{}), ShapeError);
}

TEST_CASE("ema_update endpoints and midpoint") {
  std::vector<double> e = {2.0};
  const std::vector<double> live = {4.0};
  ema_update(e, live, 1.0);
  CHECK(e[0] == 2.0);
  ema_update(e, live, 0.5);
  CHECK(e[0] == 3.0);
  ema_update(e, live, 0.0);
  CHECK(e[0] == 4.0);
  const std::vector<double> wrong = {1.0, 2.0};
  CHECK_THROWS_AS(ema_update(e, wrong, 0.5), ShapeError);
}

TEST_CASE("EMA generator gap shrinks by the decay factor against frozen weights") {
  GanArchitecture a = tiny_config().arch;
  Generator live(a, 1);
  EmaGenerator ema(live);
  for (const auto& p : live.parameters()) {
    Tensor t = p.tensor;
    for (auto& v : t.mutable_value().data()) v += 1.0;
  }
  auto gap = [&] {
    double s = 0.0;
    const auto e = ema.generator().parameters();
    const auto l = live.parameters();
    for (std::size_t i = 0; i < e.size(); ++i) {
      for (std::size_t j = 0; j < e[i].tensor.size(); ++j) {
        const double d = e[i].tensor.value()[j] - l[i].tensor.value()[j];
        s += d * d;
      }
    }
    return std::sqrt(s);
  };
  double g = gap();
  for (int i = 0; i < 5; ++i) {
    ema.update(live, 0.9);
    const double next = gap();
    CHECK(next == doctest::Approx(0.9 * g).epsilon(1e-9));
    g = next;
  }
  live.grow();
  CHECK_THROWS_AS(ema.update(live, 0.9), ShapeError);
  ema.grow(live);
  ema.update(live, 0.9);
  CHECK(ema.generator().built_levels() == 2);
}

TEST_CASE("train config validation and map round trip") {
  TrainConfig c = tiny_config();
  CHECK(c.validate().empty());
  std::vector<std::string> errors;
  const TrainConfig back = TrainConfig::from_map(c.to_map(), errors);
  CHECK(errors.empty());
  CHECK(back.to_map() == c.to_map());

  c.gp_weight = 0.0;
  c.ema_decay = 1.0;
  c.phase_images = -1;
  CHECK(c.validate().size() == 3);

  const TrainConfig bad = TrainConfig::from_map({{"lr", "fast"}, {"batch_sizes", "8,x"}}, errors);
  CHECK(errors.size() == 2);
  CHECK(bad.adam.lr == 1e-3);
}

TEST_CASE("schedule shape") {
  TrainConfig c = tiny_config();
  c.extra_images = 5;
  const auto s = build_schedule(c);
  REQUIRE(s.size() == 3);
  CHECK((s[0].level == 0 && !s[0].fading && s[0].budget == 32));
  CHECK((s[1].level == 1 && s[1].fading));
  CHECK((s[2].level == 1 && !s[2].fading && s[2].budget == 37));
  c.phase_images = 0;
  c.extra_images = 0;
  CHECK(build_schedule(c).empty());
}

TEST_CASE("zero budget at 4x4 returns initialized nets without steps") {
  TrainConfig c = tiny_config();
  c.arch.max_resolution = 4;
  c.phase_images = 0;
  GanTrainer t(c, tiny_images(4, 4, 1));
  CHECK(t.done());
  int steps = 0;
  t.run([&](const StepRecord&) { ++steps; });
  CHECK(steps == 0);
  CHECK(t.step_count() == 0);
  const LoadedGan g = load_gan(t.checkpoint());
  CHECK(g.generator.built_levels() == 1);
}

TEST_CASE("two-level run: alpha trace, checkpoints, level growth") {
  GanTrainer t(tiny_config(), tiny_images(20, 16, 2));
  std::vector<StepRecord> recs;
  std::vector<long> ckpt_at;
  t.run([&](const StepRecord& r) { recs.push_back(r); },
        [&](const GanTrainer& g) { ckpt_at.push_back(g.images_seen()); });
  // level 0: 32 images / batch 8; fade and stable at level 1: 32 / batch 4.
  REQUIRE(recs.size() == 4 + 8 + 8);
  for (int i = 0; i < 4; ++i) CHECK((recs[i].level == 0 && recs[i].alpha == 1.0));
  for (int i = 0; i < 8; ++i) {
    CHECK(recs[4 + i].level == 1);
    CHECK(recs[4 + i].alpha == doctest::Approx(i / 8.0).epsilon(1e-15));
  }
  for (int i = 12; i < 20; ++i) CHECK(recs[i].alpha == 1.0);
  CHECK(recs.back().images_seen == 96);
  // Boundaries at 32, 64, 96 plus the 48-image cadence.
  CHECK(ckpt_at == std::vector<long>{32, 48, 64, 96});
  CHECK(t.generator().built_levels() == 2);
  CHECK(t.ema_generator().built_levels() == 2);
  for (const auto& r : recs) {
    CHECK(std::isfinite(r.d_loss));
    CHECK(std::isfinite(r.g_loss));
    CHECK(r.gp >= 0.0);
  }
}

TEST_CASE("identical config and seed give an identical loss trace") {
  GanTrainer a(tiny_config(), tiny_images(12, 8, 3));
  GanTrainer b(tiny_config(), tiny_images(12, 8, 3));
  CHECK(trace(a) == trace(b));
}

TEST_CASE("resume continues the loss trace without a gap") {
  const Array images = tiny_images(12, 8, 4);
  GanTrainer full(tiny_config(), images);
  const auto expected = trace(full);

  GanTrainer first(tiny_config(), images);
  auto rows = trace(first, 7);
  const Checkpoint ck = Checkpoint::deserialize(first.checkpoint().serialize());
  GanTrainer resumed = GanTrainer::resume(ck, images);
  CHECK(resumed.step_count() == 7);
  const auto rest = trace(resumed);
  rows.insert(rows.end(), rest.begin(), rest.end());
  CHECK(rows == expected);
}

TEST_CASE("saved GAN reproduces generate bit-identically") {
  GanTrainer t(tiny_config(), tiny_images(12, 8, 5));
  trace(t, 6);
  const LoadedGan g = load_gan(Checkpoint::deserialize(t.checkpoint().serialize()));
  Rng rng(1);
  const Tensor z(random_array({3, 8}, rng));
  const BlendState b = t.blend();
  CHECK(g.blend.level == b.level);
  CHECK(g.blend.alpha == b.alpha);
  CHECK(g.generator.generate(z, b).value() == t.generator().generate(z, b).value());
  CHECK(g.ema.generate(z, b).value() == t.ema_generator().generate(z, b).value());
}

TEST_CASE("trainer input errors") {
  CHECK_THROWS_AS(GanTrainer(tiny_config(), tiny_images(3, 4, 1)), DataError);
  CHECK_THROWS_AS(GanTrainer(tiny_config(), tiny_images(3, 12, 1)), DataError);
  Array nan = tiny_images(3, 8, 1);
  nan[5] = std::nan("");
  CHECK_THROWS_AS(GanTrainer(tiny_config(), nan), DataError);
  TrainConfig c = tiny_config();
  c.batch_sizes = {1};
  CHECK_THROWS_AS(GanTrainer(c, tiny_images(3, 8, 1)), ConfigError);
  CHECK_THROWS_AS(GanTrainer::resume(Checkpoint{}, tiny_images(3, 8, 1)), DataError);
}

TEST_CASE("divergent training aborts with a numerical error") {
  TrainConfig c = tiny_config();
  c.adam.lr = 1e200;
  GanTrainer t(c, tiny_images(8, 8, 6));
  CHECK_THROWS_AS(trace(t), NumericalError);
}
