// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "cxrgan/error.h"
#include "cxrgan/latentopt.h"
#include "gradcheck.h"

using namespace cxrgan;
using cxrgan::testing::random_array;

namespace {

constexpr int kLatent = 6;

// Decoder that passes z through as a 1-channel image row.
Tensor identity_decode(const Tensor& z) { return reshape(z, {1, 1, 1, kLatent}); }

// Linear scorer: logits = flatten(image) * W, W [kLatent, 3].
struct LinearScorer {
  Array w;
  Tensor operator()(const Tensor& images) const {
    const Tensor flat = reshape(images, {1, kLatent});
    return matmul(flat, Tensor(w));
  }
};

LinearScorer make_linear(std::uint64_t seed) {
  Rng rng(seed);
  return {random_array({kLatent, 3}, rng)};
}

double dot_target(const LinearScorer& s, const Array& z, int k) {
  double v = 0.0;
  for (int i = 0; i < kLatent; ++i) v += z[static_cast<std::size_t>(i)] * s.w[static_cast<std::size_t>(i) * 3 + k];
  return v;
}

GanArchitecture small_arch() {
  GanArchitecture a;
  a.latent_dim = 8;
  a.max_resolution = 8;
  a.fmap_base = 8;
  a.fmap_min = 4;
  return a;
}

}  // namespace

TEST_CASE("zero steps returns the initial sample unmodified") {
  const LinearScorer s = make_linear(1);
  OptimSpec spec;
  spec.steps = 0;
  spec.n_restarts = 3;
  spec.target_class = 1;
  const OptimResult r = optimize_latent(spec, kLatent, identity_decode, s);
  REQUIRE(r.restarts.size() == 3);
  for (const auto& t : r.restarts) {
    CHECK(t.target_logits.empty());
    CHECK(t.final_z == t.initial_z);
    CHECK(std::abs(t.final_logit - dot_target(s, t.initial_z, 1)) < 1e-12);
    CHECK(t.initial_logit == t.final_logit);
  }
}

TEST_CASE("linear scorer: ascent raises the target logit every step") {
  const LinearScorer s = make_linear(2);
  OptimSpec spec;
  spec.steps = 50;
  spec.step_size = 0.01;
  spec.n_restarts = 2;
  spec.target_class = 0;
  const OptimResult r = optimize_latent(spec, kLatent, identity_decode, s);
  double w2 = 0.0;
  for (int i = 0; i < kLatent; ++i) w2 += s.w[static_cast<std::size_t>(i) * 3] * s.w[static_cast<std::size_t>(i) * 3];
  for (const auto& t : r.restarts) {
    REQUIRE(t.target_logits.size() == 50);
    for (std::size_t i = 1; i < t.target_logits.size(); ++i) {
      CHECK(t.target_logits[i] > t.target_logits[i - 1]);
      // Each step gains exactly step_size * ||w||^2.
      CHECK(std::abs(t.target_logits[i] - t.target_logits[i - 1] - 0.01 * w2) < 1e-12);
    }
    CHECK_FALSE(t.stopped_early);
    CHECK(std::abs(t.final_logit - dot_target(s, t.final_z, 0)) < 1e-12);
    CHECK(t.final_image.shape() == Shape{1, 1, 1, kLatent});
  }
}

TEST_CASE("prior keeps the ascent monotone below the stability bound") {
  const LinearScorer s = make_linear(3);
  OptimSpec spec;
  spec.steps = 200;
  spec.prior_weight = 0.5;
  spec.step_size = 0.5;  // bound is 1 / prior_weight = 2 for the quadratic objective
  spec.n_restarts = 1;
  spec.plateau_tol = 0.0;
  const OptimResult r = optimize_latent(spec, kLatent, identity_decode, s);
  // z converges to w / (2 * prior_weight), where the target logit is ||w_0||^2.
  double w2 = 0.0;
  for (int i = 0; i < kLatent; ++i) w2 += s.w[static_cast<std::size_t>(i) * 3] * s.w[static_cast<std::size_t>(i) * 3];
  CHECK(std::abs(r.restarts[0].final_logit - w2) < 1e-6);
}

TEST_CASE("suppression lowers the other classes") {
  const LinearScorer s = make_linear(4);
  OptimSpec spec;
  spec.steps = 30;
  spec.step_size = 0.05;
  spec.n_restarts = 1;
  const OptimResult plain = optimize_latent(spec, kLatent, identity_decode, s);
  spec.suppress_others = true;
  spec.suppression_weight = 2.0;
  const OptimResult supp = optimize_latent(spec, kLatent, identity_decode, s);
  CHECK(supp.restarts[0].suppressed_sums.back() < plain.restarts[0].suppressed_sums.back());
  CHECK(supp.restarts[0].initial_z == plain.restarts[0].initial_z);
}

TEST_CASE("plateau stops early and sets converged from the threshold") {
  const Scorer flat = [](const Tensor& images) { return reshape(scale(sum(images), 0.0), {1, 1}); };
  OptimSpec spec;
  spec.steps = 100;
  spec.n_restarts = 1;
  spec.plateau_window = 5;
  const OptimResult r = optimize_latent(spec, kLatent, identity_decode, flat);
  CHECK(r.restarts[0].stopped_early);
  CHECK(r.restarts[0].target_logits.size() == 6);
  CHECK_FALSE(r.restarts[0].converged);
  spec.success_logit = 0.0;
  CHECK(optimize_latent(spec, kLatent, identity_decode, flat).restarts[0].converged);
}

TEST_CASE("best restart is the exact argmax and runs are deterministic") {
  const LinearScorer s = make_linear(5);
  OptimSpec spec;
  spec.steps = 10;
  spec.n_restarts = 7;
  spec.seed = 11;
  const OptimResult r = optimize_latent(spec, kLatent, identity_decode, s);
  double best = -1e300;
  int arg = -1;
  for (std::size_t i = 0; i < r.restarts.size(); ++i) {
    if (r.restarts[i].final_logit > best) {
      best = r.restarts[i].final_logit;
      arg = static_cast<int>(i);
    }
  }
  CHECK(r.best == arg);
  CHECK(r.best_trace().final_logit == best);
  CHECK(optimize_latent(spec, kLatent, identity_decode, s).trace_csv() == r.trace_csv());
  CHECK(r.trace_csv().rfind("restart,step,target_logit,suppressed_sum\n0,0,", 0) == 0);
}

TEST_CASE("non-finite gradients trigger fresh draws and explicit failure") {
  // NaN whenever the first latent coordinate is positive.
  const Scorer picky = [](const Tensor& images) {
    const Tensor flat = reshape(images, {1, kLatent});
    const bool bad = flat.value()[0] > 0.0;
    return bad ? scale(flat, std::nan("")) : flat;
  };
  OptimSpec spec;
  spec.steps = 3;
  spec.step_size = 1e-3;
  spec.n_restarts = 8;
  spec.max_attempts = 4;
  const OptimResult r = optimize_latent(spec, kLatent, identity_decode, picky);
  int retried = 0;
  for (const auto& t : r.restarts) {
    if (!t.failed) {
      CHECK(t.initial_z[0] <= 0.0);
      CHECK(t.initial_z == restart_latent(spec.seed, t.restart, t.attempts - 1, kLatent));
    }
    retried += t.attempts > 1 ? 1 : 0;
  }
  CHECK(retried > 0);

  const Scorer broken = [](const Tensor& images) { return scale(reshape(images, {1, kLatent}), std::nan("")); };
  const OptimResult none = optimize_latent(spec, kLatent, identity_decode, broken);
  CHECK(none.best == -1);
  CHECK(none.restarts.size() == 8);
  for (const auto& t : none.restarts) CHECK(t.failed);
  CHECK_THROWS_AS(none.best_trace(), NumericalError);
}

TEST_CASE("generator weights are untouched by optimization") {
  Generator gen(small_arch(), 3);
  gen.grow();
  Discriminator disc(small_arch(), 4);
  disc.grow();
  Checkpoint before;
  save_parameters(gen.parameters(), before, "g/");
  const BlendState blend = BlendState::stable(1);
  const Scorer scorer = [&](const Tensor& images) { return reshape(disc.discriminate(images, blend), {1, 1}); };
  OptimSpec spec;
  spec.steps = 5;
  spec.n_restarts = 2;
  const OptimResult r = optimize_latent(spec, gen, scorer);
  Checkpoint after;
  save_parameters(gen.parameters(), after, "g/");
  CHECK(before.serialize() == after.serialize());
  CHECK(r.restarts[0].final_image == gen.generate(Tensor(r.restarts[0].final_z), blend).value());
  for (const auto& p : gen.parameters()) CHECK_FALSE(p.tensor.has_grad());
}

TEST_CASE("compare_paths pairs restarts and latents") {
  Generator gen(small_arch(), 1);
  const Scorer sa = [&](const Tensor& images) {
    return matmul(reshape(slice_channels(images, 0, 1), {1, 16}), Tensor(Array({16, 3}, 0.1)));
  };
  OptimSpec spec;
  spec.steps = 4;
  spec.n_restarts = 3;
  const PathComparison c = compare_paths(spec, gen, sa, sa);
  REQUIRE(c.classifier.restarts.size() == 3);
  REQUIRE(c.discriminator.restarts.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(c.classifier.restarts[i].initial_z == c.discriminator.restarts[i].initial_z);
  const std::string csv = c.csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 6);
  CHECK(c.classifier_summary.path == ScorerPath::kClassifier);
  CHECK(c.discriminator_summary.path == ScorerPath::kRepurposedDiscriminator);
}

TEST_CASE("random latent logits are deterministic") {
  Generator gen(small_arch(), 1);
  const Scorer s = [](const Tensor& images) { return reshape(mean(images), {1, 1}); };
  const auto x = random_latent_logits(gen, s, 0, 20, 5);
  CHECK(x.size() == 20);
  CHECK(x == random_latent_logits(gen, s, 0, 20, 5));
  CHECK(x != random_latent_logits(gen, s, 0, 20, 6));
}

TEST_CASE("optim spec validation and map round trip") {
  OptimSpec s;
  s.path = ScorerPath::kClassifier;
  s.suppress_others = true;
  s.prior_weight = 1e-3;
  std::vector<std::string> errors;
  CHECK(OptimSpec::from_map(s.to_map(), errors, OptimSpec{}).to_map() == s.to_map());
  CHECK(errors.empty());
  OptimSpec::from_map({{"path", "bogus"}}, errors, OptimSpec{});
  CHECK(errors.size() == 1);
  OptimSpec bad;
  bad.step_size = 0.0;
  CHECK_THROWS_AS(optimize_latent(bad, kLatent, identity_decode, make_linear(1)), ConfigError);
}
