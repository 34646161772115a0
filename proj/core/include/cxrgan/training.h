// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cxrgan/pggan.h"

namespace cxrgan {

// ------------------------------------------------------------------ Adam

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
};

/// One bias-corrected Adam update of `param` in place.
void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& state,
               const AdamConfig& config);

/// Adam over a named parameter list. Parameters that appear later (after a
/// network grows) start with fresh moments.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Updates every parameter that has an accumulated gradient.
  void step(const ParameterList& params);
  void set_lr(double lr) { config_.lr = lr; }
  const AdamConfig& config() const { return config_; }

  void save(Checkpoint& ckpt, const std::string& prefix) const;
  void load(const Checkpoint& ckpt, const std::string& prefix);

 private:
  AdamConfig config_;
  std::map<std::string, AdamMoments> state_;
};

// ------------------------------------------------------------------- EMA

/// ema <- decay * ema + (1 - decay) * live, elementwise.
void ema_update(std::span<double> ema, std::span<const double> live, double decay);

/// Shadow copy of a generator tracking an exponential moving average of its
/// weights. Used for evaluation-quality sampling.
class EmaGenerator {
 public:
  explicit EmaGenerator(const Generator& live);

  void update(const Generator& live, double decay);
  /// Follows a grow() of the live generator; the new level starts equal to it.
  void grow(const Generator& live);
  const Generator& generator() const { return shadow_; }
  Generator& generator() { return shadow_; }

 private:
  Generator shadow_;
};

// ----------------------------------------------------------------- Losses

/// mean(fake) - mean(real) + gp_weight * gp + drift_weight * mean(real^2).
Tensor critic_loss(const Tensor& real_scores, const Tensor& fake_scores, const Tensor& gp, double gp_weight,
                   double drift_weight);

using CriticFn = std::function<Tensor(const Tensor& images)>;

/// mean_n (||grad_x critic(x_n)||_2 - 1)^2 at x_n = u_n * real_n + (1 - u_n) * fake_n.
/// The result is differentiable with respect to the critic's parameters.
Tensor gradient_penalty(const CriticFn& critic, const Array& real, const Array& fake,
                        std::span<const double> u);
/// Draws u ~ U(0,1) per sample from rng.
Tensor gradient_penalty(const Discriminator& disc, const Array& real, const Array& fake, const BlendState& blend,
                        Rng& rng);

// ------------------------------------------------------------ Trainer

struct TrainConfig {
  GanArchitecture arch;
  long phase_images = 20000;  // per fade phase and per stabilize phase
  long extra_images = 0;      // appended to the final stabilize phase
  std::vector<int> batch_sizes{16};  // per level; the last entry repeats
  AdamConfig adam;
  double gp_weight = 10.0;
  double drift_weight = 0.001;
  double ema_decay = 0.999;
  int n_critic = 1;
  long checkpoint_every = 5000;
  std::uint64_t seed = 0;

  int batch_size(int level) const;
  std::vector<std::string> validate() const;

  /// Keys understood by to_map / from_map.
  static const std::vector<std::string>& keys();
  std::map<std::string, std::string> to_map() const;
  /// Overlays recognised keys onto `base`; problems are appended to `errors`
  /// (all of them, not just the first).
  static TrainConfig from_map(const std::map<std::string, std::string>& values, std::vector<std::string>& errors,
                              const TrainConfig& base);
  static TrainConfig from_map(const std::map<std::string, std::string>& values, std::vector<std::string>& errors);
};

struct PhaseSpec {
  int level = 0;
  bool fading = false;
  long budget = 0;
};

std::vector<PhaseSpec> build_schedule(const TrainConfig& config);

struct StepRecord {
  long step = 0;
  int level = 0;
  double alpha = 1.0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double gp = 0.0;
  long images_seen = 0;
};

extern const char* const kMetricsCsvHeader;
std::string to_csv_row(const StepRecord& r);

/// WGAN-GP training with progressive growing.
///
/// Images are [N, 1, R, R] in [-1, 1] at a native resolution that is a
/// power-of-two multiple of the configured maximum; each level trains on
/// mean-pooled copies. Every random draw of step s derives from
/// (seed, s), so a resumed run continues the exact loss trace.
class GanTrainer {
 public:
  GanTrainer(TrainConfig config, Array images);
  /// Restores a run from a trainer checkpoint.
  static GanTrainer resume(const Checkpoint& ckpt, Array images);

  bool done() const { return phase_index_ >= schedule_.size(); }
  /// One generator update preceded by n_critic critic updates.
  StepRecord step();

  /// Runs to completion. on_checkpoint fires at every phase boundary and
  /// whenever images_seen crosses a multiple of checkpoint_every.
  void run(const std::function<void(const StepRecord&)>& on_step,
           const std::function<void(const GanTrainer&)>& on_checkpoint = {});

  Checkpoint checkpoint() const;

  const TrainConfig& config() const { return config_; }
  const Generator& generator() const { return gen_; }
  const Generator& ema_generator() const { return ema_.generator(); }
  const Discriminator& discriminator() const { return disc_; }
  BlendState blend() const;
  long step_count() const { return step_; }
  long images_seen() const { return images_seen_; }
  std::size_t phase_index() const { return phase_index_; }

 private:
  void advance_phases();
  void build_pyramid(Array images);
  Array sample_real(Rng rng, int batch, const BlendState& blend) const;
  void grow_to(int level);
  Array sample_latent(Rng rng, int batch) const;

  TrainConfig config_;
  std::vector<PhaseSpec> schedule_;
  std::vector<Array> pyramid_;  // pyramid_[level] holds all images at 4 * 2^level
  Generator gen_;
  Discriminator disc_;
  EmaGenerator ema_;
  Adam opt_g_;
  Adam opt_d_;
  std::size_t phase_index_ = 0;
  long phase_seen_ = 0;
  long images_seen_ = 0;
  long step_ = 0;
};

/// Writes generator, EMA generator and discriminator weights plus the
/// architecture into `ckpt` (the evaluation subset of a trainer checkpoint).
void save_gan(Checkpoint& ckpt, const TrainConfig& config, const Generator& gen, const Generator& ema,
              const Discriminator& disc, const BlendState& blend);

struct LoadedGan {
  TrainConfig config;
  Generator generator;
  Generator ema;
  Discriminator discriminator;
  BlendState blend;
};

LoadedGan load_gan(const Checkpoint& ckpt);

}  // namespace cxrgan
