// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/latentopt.h"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "cxrgan/error.h"
#include "cxrgan/kv.h"
#include "cxrgan/metrics.h"
#include "cxrgan/training.h"

namespace cxrgan {
namespace {

struct Evaluation {
  double target = 0.0;
  double others = 0.0;
  Array image;
  Array grad;  // d objective / dz; empty when not requested
};

Evaluation evaluate(const OptimSpec& spec, const LatentDecoder& decode, const Scorer& scorer, const Array& z_value,
                    bool want_grad) {
  std::optional<NoGradGuard> no_grad;
  if (!want_grad) no_grad.emplace();
  Tensor z(z_value, want_grad);
  const Tensor image = decode(z);
  const Tensor logits = scorer(image);
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[0] != 1 || spec.target_class >= s[1]) {
    throw ShapeError("scorer returned " + to_string(s) + "; expected [1,K] with K > " +
                     std::to_string(spec.target_class));
  }
  const int k = s[1];
  Array pick({1, k}, 0.0);
  pick[static_cast<std::size_t>(spec.target_class)] = 1.0;
  Array rest({1, k}, 1.0);
  rest[static_cast<std::size_t>(spec.target_class)] = 0.0;

  const Tensor target = sum(mul_const(logits, pick));
  const Tensor others = sum(mul_const(logits, rest));
  Evaluation e{target.item(), others.item(), image.value(), {}};
  if (want_grad) {
    Tensor objective = target;
    if (spec.suppress_others) objective = sub(objective, scale(others, spec.suppression_weight));
    if (spec.prior_weight > 0.0) objective = sub(objective, scale(sum(square(z)), spec.prior_weight));
    e.grad = grad(objective, {z})[0].value();
  }
  return e;
}

LatentDecoder generator_decoder(const Generator& generator) {
  const BlendState blend = BlendState::stable(generator.built_levels() - 1);
  return [&generator, blend](const Tensor& z) { return generator.generate(z, blend); };
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

PathSummary summarize_path(ScorerPath path, const OptimResult& r) {
  PathSummary s{path, 0.0, std::nan(""), std::nan("")};
  std::vector<double> finals;
  int converged = 0;
  for (const auto& t : r.restarts) {
    if (t.failed) continue;
    finals.push_back(t.final_logit);
    converged += t.converged ? 1 : 0;
  }
  if (!r.restarts.empty()) s.convergence_rate = static_cast<double>(converged) / static_cast<double>(r.restarts.size());
  if (!finals.empty()) {
    s.median_final_logit = median_of(finals);
    s.max_final_logit = *std::max_element(finals.begin(), finals.end());
  }
  return s;
}

}  // namespace

const char* path_name(ScorerPath p) {
  return p == ScorerPath::kClassifier ? "classifier" : "repurposed_discriminator";
}

std::vector<std::string> OptimSpec::validate() const {
  std::vector<std::string> e;
  if (target_class < 0) e.push_back("target_class must be >= 0");
  if (steps < 0) e.push_back("steps must be >= 0");
  if (!(step_size > 0.0)) e.push_back("step_size must be > 0");
  if (!(suppression_weight >= 0.0)) e.push_back("suppression_weight must be >= 0");
  if (n_restarts < 1) e.push_back("n_restarts must be >= 1");
  if (!(prior_weight >= 0.0)) e.push_back("prior_weight must be >= 0");
  if (!(plateau_tol >= 0.0)) e.push_back("plateau_tol must be >= 0");
  if (plateau_window < 1) e.push_back("plateau_window must be >= 1");
  if (max_attempts < 1) e.push_back("max_attempts must be >= 1");
  if (!std::isfinite(success_logit)) e.push_back("success_logit must be finite");
  return e;
}

const std::vector<std::string>& OptimSpec::keys() {
  static const std::vector<std::string> k = {
      "target_class", "path",       "steps",         "step_size",      "suppress_others", "suppression_weight",
      "n_restarts",   "seed",       "use_adam",      "prior_weight",   "plateau_tol",     "plateau_window",
      "success_logit", "max_attempts"};
  return k;
}

std::map<std::string, std::string> OptimSpec::to_map() const {
  using kv::format_double;
  return {
      {"target_class", std::to_string(target_class)},
      {"path", path == ScorerPath::kClassifier ? "classifier" : "discriminator"},
      {"steps", std::to_string(steps)},
      {"step_size", format_double(step_size)},
      {"suppress_others", suppress_others ? "true" : "false"},
      {"suppression_weight", format_double(suppression_weight)},
      {"n_restarts", std::to_string(n_restarts)},
      {"seed", std::to_string(seed)},
      {"use_adam", use_adam ? "true" : "false"},
      {"prior_weight", format_double(prior_weight)},
      {"plateau_tol", format_double(plateau_tol)},
      {"plateau_window", std::to_string(plateau_window)},
      {"success_logit", format_double(success_logit)},
      {"max_attempts", std::to_string(max_attempts)},
  };
}

OptimSpec OptimSpec::from_map(const std::map<std::string, std::string>& values, std::vector<std::string>& errors,
                              const OptimSpec& base) {
  OptimSpec s = base;
  kv::get(values, "target_class", s.target_class, errors);
  if (auto it = values.find("path"); it != values.end()) {
    if (it->second == "classifier") {
      s.path = ScorerPath::kClassifier;
    } else if (it->second == "discriminator" || it->second == "repurposed_discriminator") {
      s.path = ScorerPath::kRepurposedDiscriminator;
    } else {
      errors.push_back("path: expected 'classifier' or 'discriminator', got '" + it->second + "'");
    }
  }
  kv::get(values, "steps", s.steps, errors);
  kv::get(values, "step_size", s.step_size, errors);
  kv::get(values, "suppress_others", s.suppress_others, errors);
  kv::get(values, "suppression_weight", s.suppression_weight, errors);
  kv::get(values, "n_restarts", s.n_restarts, errors);
  kv::get(values, "seed", s.seed, errors);
  kv::get(values, "use_adam", s.use_adam, errors);
  kv::get(values, "prior_weight", s.prior_weight, errors);
  kv::get(values, "plateau_tol", s.plateau_tol, errors);
  kv::get(values, "plateau_window", s.plateau_window, errors);
  kv::get(values, "success_logit", s.success_logit, errors);
  kv::get(values, "max_attempts", s.max_attempts, errors);
  return s;
}

const OptimTrace& OptimResult::best_trace() const {
  if (best < 0) throw NumericalError("latent optimization failed in every restart");
  return restarts.at(static_cast<std::size_t>(best));
}

std::string OptimResult::trace_csv() const {
  std::ostringstream os;
  os << "restart,step,target_logit,suppressed_sum\n";
  for (const auto& t : restarts) {
    for (std::size_t i = 0; i < t.target_logits.size(); ++i) {
      os << t.restart << ',' << i << ',' << kv::format_double(t.target_logits[i]) << ','
         << kv::format_double(t.suppressed_sums[i]) << '\n';
    }
  }
  return os.str();
}

Array restart_latent(std::uint64_t seed, int restart, int attempt, int latent_dim) {
  Rng rng = Rng(seed).split("restart", static_cast<std::uint64_t>(restart)).split(static_cast<std::uint64_t>(attempt));
  Array z({1, latent_dim});
  for (auto& v : z.data()) v = rng.normal();
  return z;
}

OptimResult optimize_latent(const OptimSpec& spec, const Generator& generator, const Scorer& scorer) {
  return optimize_latent(spec, generator.latent_dim(), generator_decoder(generator), scorer);
}

OptimResult optimize_latent(const OptimSpec& spec, int latent_dim, const LatentDecoder& decode, const Scorer& scorer) {
  const auto errors = spec.validate();
  if (!errors.empty()) throw ConfigError("latent optimization: " + errors.front());
  if (latent_dim < 1) throw ConfigError("latent optimization: latent_dim must be >= 1");
  const AdamConfig adam{spec.step_size, 0.9, 0.999, 1e-8};

  OptimResult result;
  for (int r = 0; r < spec.n_restarts; ++r) {
    OptimTrace trace;
    trace.restart = r;
    trace.failed = true;
    for (int attempt = 0; attempt < spec.max_attempts && trace.failed; ++attempt) {
      OptimTrace t;
      t.restart = r;
      t.attempts = attempt + 1;
      t.initial_z = restart_latent(spec.seed, r, attempt, latent_dim);
      Array z = t.initial_z;
      AdamMoments moments;
      bool finite = true;
      for (int step = 0; step < spec.steps; ++step) {
        Evaluation e = evaluate(spec, decode, scorer, z, true);
        if (!std::isfinite(e.target) || !e.grad.all_finite()) {
          finite = false;
          break;
        }
        t.target_logits.push_back(e.target);
        t.suppressed_sums.push_back(e.others);
        if (spec.use_adam) {
          for (auto& g : e.grad.data()) g = -g;  // adam_step descends
          adam_step(z.data(), e.grad.data(), moments, adam);
        } else {
          for (std::size_t i = 0; i < z.size(); ++i) z[i] += spec.step_size * e.grad[i];
        }
        const std::size_t n = t.target_logits.size();
        const auto window = static_cast<std::size_t>(spec.plateau_window);
        if (n > window && t.target_logits[n - 1] - t.target_logits[n - 1 - window] < spec.plateau_tol) {
          t.stopped_early = true;
          break;
        }
      }
      if (!finite) continue;
      const Evaluation last = evaluate(spec, decode, scorer, z, false);
      if (!std::isfinite(last.target)) continue;
      t.initial_logit = t.target_logits.empty() ? last.target : t.target_logits.front();
      t.final_logit = last.target;
      t.final_z = z;
      t.final_image = last.image;
      t.converged = t.final_logit >= spec.success_logit;
      t.failed = false;
      trace = std::move(t);
    }
    if (trace.failed) trace.attempts = spec.max_attempts;
    result.restarts.push_back(std::move(trace));
  }
  for (std::size_t i = 0; i < result.restarts.size(); ++i) {
    const auto& t = result.restarts[i];
    if (t.failed) continue;
    if (result.best < 0 || t.final_logit > result.restarts[static_cast<std::size_t>(result.best)].final_logit) {
      result.best = static_cast<int>(i);
    }
  }
  return result;
}

std::vector<double> random_latent_logits(const Generator& generator, const Scorer& scorer, int target_class, int n,
                                         std::uint64_t seed) {
  OptimSpec spec;
  spec.target_class = target_class;
  const LatentDecoder decode = generator_decoder(generator);
  const Rng root = Rng(seed).split("random_latents");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    Array z({1, generator.latent_dim()});
    for (auto& v : z.data()) v = rng.normal();
    out.push_back(evaluate(spec, decode, scorer, z, false).target);
  }
  return out;
}

std::string PathComparison::csv() const {
  std::ostringstream os;
  os << "path,restart,initial_logit,final_logit,steps,converged\n";
  for (const auto* r : {&classifier, &discriminator}) {
    const char* name = r == &classifier ? "classifier" : "repurposed_discriminator";
    for (const auto& t : r->restarts) {
      os << name << ',' << t.restart << ',';
      if (t.failed) {
        os << "failed,failed," << t.target_logits.size() << ",0\n";
      } else {
        os << kv::format_double(t.initial_logit) << ',' << kv::format_double(t.final_logit) << ','
           << t.target_logits.size() << ',' << (t.converged ? 1 : 0) << '\n';
      }
    }
  }
  return os.str();
}

PathComparison compare_paths(const OptimSpec& spec, const Generator& generator, const Scorer& classifier_scorer,
                             const Scorer& disc_scorer) {
  OptimSpec a = spec, b = spec;
  a.path = ScorerPath::kClassifier;
  b.path = ScorerPath::kRepurposedDiscriminator;
  PathComparison c;
  c.classifier = optimize_latent(a, generator, classifier_scorer);
  c.discriminator = optimize_latent(b, generator, disc_scorer);
  c.classifier_summary = summarize_path(ScorerPath::kClassifier, c.classifier);
  c.discriminator_summary = summarize_path(ScorerPath::kRepurposedDiscriminator, c.discriminator);
  return c;
}

}  // namespace cxrgan
