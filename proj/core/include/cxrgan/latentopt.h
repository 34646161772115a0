// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cxrgan/pggan.h"

namespace cxrgan {

/// Maps images [N, 1, R, R] to pre-sigmoid class scores [N, K],
/// differentiably.
using Scorer = std::function<Tensor(const Tensor& images)>;

enum class ScorerPath { kClassifier, kRepurposedDiscriminator };
const char* path_name(ScorerPath p);

struct OptimSpec {
  int target_class = 0;
  ScorerPath path = ScorerPath::kRepurposedDiscriminator;
  int steps = 500;
  double step_size = 0.05;
  bool suppress_others = false;
  double suppression_weight = 1.0;
  int n_restarts = 10;
  std::uint64_t seed = 0;
  bool use_adam = false;          // Adam on z instead of plain ascent
  double prior_weight = 0.0;      // penalty weight on ||z||^2; 1e-3 is the usual choice
  double plateau_tol = 1e-4;      // stop when the target logit gains less than this ...
  int plateau_window = 20;        // ... over this many steps
  double success_logit = 2.1972245773362196;  // logit of probability 0.9
  int max_attempts = 3;           // fresh z draws after a non-finite gradient

  std::vector<std::string> validate() const;
  static const std::vector<std::string>& keys();
  std::map<std::string, std::string> to_map() const;
  static OptimSpec from_map(const std::map<std::string, std::string>& values, std::vector<std::string>& errors,
                            const OptimSpec& base);
};

struct OptimTrace {
  int restart = 0;
  int attempts = 0;
  Array initial_z;                      // [1, L]
  std::vector<double> target_logits;    // one per step run, before that step's update
  std::vector<double> suppressed_sums;  // sum of the other classes' logits, same indexing
  double initial_logit = 0.0;
  double final_logit = 0.0;             // at final_z
  Array final_z;
  Array final_image;                    // generate(generator, final_z), [1, 1, R, R]
  bool stopped_early = false;
  bool converged = false;               // final_logit >= success_logit
  bool failed = false;                  // every attempt hit a non-finite gradient
};

struct OptimResult {
  std::vector<OptimTrace> restarts;
  int best = -1;  // argmax of final_logit over non-failed restarts; -1 if all failed

  const OptimTrace& best_trace() const;
  /// restart,step,target_logit,suppressed_sum
  std::string trace_csv() const;
};

/// Initial latent of a restart; depends on (seed, restart, attempt) only,
/// so every scorer path starts from the same z.
Array restart_latent(std::uint64_t seed, int restart, int attempt, int latent_dim);

/// Maps latents [1, L] to images, differentiably.
using LatentDecoder = std::function<Tensor(const Tensor& z)>;

/// Gradient ascent on the target logit of scorer(decode(z)) (minus
/// suppression and prior terms when enabled).
OptimResult optimize_latent(const OptimSpec& spec, int latent_dim, const LatentDecoder& decode, const Scorer& scorer);

/// Gradient ascent on the target logit of scorer(generate(z)) (minus
/// suppression and prior terms when enabled). The generator is only read.
/// Images are scored one at a time, at the generator's deepest level.
OptimResult optimize_latent(const OptimSpec& spec, const Generator& generator, const Scorer& scorer);

/// Target logits of `n` standard-normal latents, each scored alone.
std::vector<double> random_latent_logits(const Generator& generator, const Scorer& scorer, int target_class, int n,
                                         std::uint64_t seed);

struct PathSummary {
  ScorerPath path;
  double convergence_rate = 0.0;
  double median_final_logit = 0.0;
  double max_final_logit = 0.0;
};

struct PathComparison {
  OptimResult classifier;
  OptimResult discriminator;
  PathSummary classifier_summary;
  PathSummary discriminator_summary;

  /// path,restart,initial_logit,final_logit,steps,converged
  std::string csv() const;
};

/// Runs the same spec (same restarts and initial latents) through both
/// scorers.
PathComparison compare_paths(const OptimSpec& spec, const Generator& generator, const Scorer& classifier_scorer,
                             const Scorer& disc_scorer);

}  // namespace cxrgan
