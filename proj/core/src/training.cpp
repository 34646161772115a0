// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/training.h"

#include <cmath>
#include <sstream>

#include "cxrgan/error.h"
#include "cxrgan/kv.h"

namespace cxrgan {
namespace {

double grad_norm(const ParameterList& params) {
  double s = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad().data()) s += g * g;
  }
  return std::sqrt(s);
}

long parse_long_meta(const Checkpoint& ckpt, const std::string& key) {
  try {
    return std::stol(ckpt.meta(key));
  } catch (const std::logic_error&) {
    throw DataError("checkpoint metadata '" + key + "' is not an integer");
  }
}

const char* phase_name(BlendState::Phase p) { return p == BlendState::Phase::kFading ? "fading" : "stable"; }

}  // namespace

// ------------------------------------------------------------------ Adam

void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& state,
               const AdamConfig& config) {
  if (grad.size() != param.size()) throw ShapeError("adam_step: gradient size differs from parameter size");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
  }
  if (state.m.size() != param.size() || state.v.size() != param.size()) {
    throw ShapeError("adam_step: moment size differs from parameter size");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    param[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

void Adam::step(const ParameterList& params) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    Tensor t = p.tensor;
    adam_step(t.mutable_value().data(), t.grad().data(), state_[p.name], config_);
  }
}

void Adam::save(Checkpoint& ckpt, const std::string& prefix) const {
  for (const auto& [name, s] : state_) {
    const int n = static_cast<int>(s.m.size());
    ckpt.put(prefix + name + "/m", Array({n}, s.m));
    ckpt.put(prefix + name + "/v", Array({n}, s.v));
    ckpt.put(prefix + name + "/t", Array::scalar(static_cast<double>(s.t)));
  }
}

void Adam::load(const Checkpoint& ckpt, const std::string& prefix) {
  state_.clear();
  for (const auto& key : ckpt.names_with_prefix(prefix)) {
    if (key.size() < 2 || key.compare(key.size() - 2, 2, "/m") != 0) continue;
    const std::string name = key.substr(prefix.size(), key.size() - prefix.size() - 2);
    AdamMoments s;
    s.m = ckpt.get(key).storage();
    s.v = ckpt.get(prefix + name + "/v").storage();
    s.t = static_cast<long>(ckpt.get(prefix + name + "/t").item());
    state_[name] = std::move(s);
  }
}

// ------------------------------------------------------------------- EMA

void ema_update(std::span<double> ema, std::span<const double> live, double decay) {
  if (ema.size() != live.size()) {
    throw ShapeError("ema_update: shadow has " + std::to_string(ema.size()) + " elements, live has " +
                     std::to_string(live.size()));
  }
  for (std::size_t i = 0; i < ema.size(); ++i) ema[i] = decay * ema[i] + (1.0 - decay) * live[i];
}

EmaGenerator::EmaGenerator(const Generator& live) : shadow_(live.clone()) {
  set_requires_grad(shadow_.parameters(), false);
}

void EmaGenerator::update(const Generator& live, double decay) {
  const ParameterList s = shadow_.parameters();
  const ParameterList l = live.parameters();
  if (s.size() != l.size()) throw ShapeError("ema_update: shadow and live generators differ in depth");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].tensor.shape() != l[i].tensor.shape()) {
      throw ShapeError("ema_update: parameter '" + s[i].name + "' has shape " + to_string(s[i].tensor.shape()) +
                       ", live has " + to_string(l[i].tensor.shape()));
    }
    Tensor t = s[i].tensor;
    ema_update(t.mutable_value().data(), l[i].tensor.value().data(), decay);
  }
}

void EmaGenerator::grow(const Generator& live) {
  while (shadow_.built_levels() < live.built_levels()) {
    const std::string prefix = "level" + std::to_string(shadow_.built_levels()) + ".";
    shadow_.grow();
    const ParameterList s = shadow_.parameters();
    const ParameterList l = live.parameters();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i].name.rfind(prefix, 0) != 0) continue;
      Tensor t = s[i].tensor;
      t.mutable_value() = l[i].tensor.value();
      t.set_requires_grad(false);
    }
  }
}

// ----------------------------------------------------------------- Losses

Tensor critic_loss(const Tensor& real_scores, const Tensor& fake_scores, const Tensor& gp, double gp_weight,
                   double drift_weight) {
  Tensor loss = mean(fake_scores) - mean(real_scores) + gp_weight * gp;
  if (drift_weight != 0.0) loss = loss + drift_weight * mean(square(real_scores));
  return loss;
}

Tensor gradient_penalty(const CriticFn& critic, const Array& real, const Array& fake, std::span<const double> u) {
  if (real.shape() != fake.shape()) {
    throw ShapeError("gradient_penalty: real " + to_string(real.shape()) + " and fake " + to_string(fake.shape()) +
                     " differ in shape");
  }
  const int n = real.dim(0);
  if (u.size() != static_cast<std::size_t>(n)) throw ShapeError("gradient_penalty: need one coefficient per sample");
  const std::size_t per = real.size() / static_cast<std::size_t>(n);
  Array mixed(real.shape());
  for (int i = 0; i < n; ++i) {
    const double a = u[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < per; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * per + j;
      mixed[k] = a * real[k] + (1.0 - a) * fake[k];
    }
  }
  Tensor x(std::move(mixed), true);
  const Tensor score = critic(x);
  const Tensor g = grad(sum(score), {x}, true)[0];
  const Tensor per_sample = sum_to(square(reshape(g, {n, static_cast<int>(per)})), {n, 1});
  return mean(square(add_scalar(sqrt(per_sample), -1.0)));
}

Tensor gradient_penalty(const Discriminator& disc, const Array& real, const Array& fake, const BlendState& blend,
                        Rng& rng) {
  std::vector<double> u(static_cast<std::size_t>(real.dim(0)));
  for (auto& v : u) v = rng.uniform();
  return gradient_penalty([&](const Tensor& x) { return disc.discriminate(x, blend); }, real, fake, u);
}

// ----------------------------------------------------------- TrainConfig

int TrainConfig::batch_size(int level) const {
  if (batch_sizes.empty()) return 1;
  const std::size_t i = std::min(static_cast<std::size_t>(level), batch_sizes.size() - 1);
  return batch_sizes[i];
}

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> errors = arch.validate();
  if (phase_images < 0) errors.push_back("phase_images must be >= 0");
  if (extra_images < 0) errors.push_back("extra_images must be >= 0");
  if (batch_sizes.empty()) errors.push_back("batch_sizes must not be empty");
  for (int b : batch_sizes) {
    if (b < 2) {
      errors.push_back("batch sizes must be >= 2 (the minibatch deviation needs two samples)");
      break;
    }
  }
  if (!(adam.lr > 0.0)) errors.push_back("lr must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) errors.push_back("beta1 must lie in [0,1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) errors.push_back("beta2 must lie in [0,1)");
  if (!(adam.eps >= 0.0)) errors.push_back("adam_eps must be >= 0");
  if (!(gp_weight > 0.0)) errors.push_back("gp_weight must be > 0");
  if (!(drift_weight >= 0.0)) errors.push_back("drift_weight must be >= 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) errors.push_back("ema_decay must lie in (0,1)");
  if (n_critic < 1) errors.push_back("n_critic must be >= 1");
  if (checkpoint_every < 0) errors.push_back("checkpoint_every must be >= 0");
  return errors;
}

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = {
      "latent_dim", "max_resolution", "fmap_base", "fmap_min",     "phase_images", "extra_images",
      "batch_sizes", "lr",            "beta1",     "beta2",        "adam_eps",     "gp_weight",
      "drift_weight", "ema_decay",    "n_critic",  "checkpoint_every", "seed"};
  return k;
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  using kv::format_double;
  return {
      {"latent_dim", std::to_string(arch.latent_dim)},
      {"max_resolution", std::to_string(arch.max_resolution)},
      {"fmap_base", std::to_string(arch.fmap_base)},
      {"fmap_min", std::to_string(arch.fmap_min)},
      {"phase_images", std::to_string(phase_images)},
      {"extra_images", std::to_string(extra_images)},
      {"batch_sizes", kv::join(batch_sizes)},
      {"lr", format_double(adam.lr)},
      {"beta1", format_double(adam.beta1)},
      {"beta2", format_double(adam.beta2)},
      {"adam_eps", format_double(adam.eps)},
      {"gp_weight", format_double(gp_weight)},
      {"drift_weight", format_double(drift_weight)},
      {"ema_decay", format_double(ema_decay)},
      {"n_critic", std::to_string(n_critic)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"seed", std::to_string(seed)},
  };
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& values, std::vector<std::string>& errors,
                                  const TrainConfig& base) {
  TrainConfig c = base;
  kv::get(values, "latent_dim", c.arch.latent_dim, errors);
  kv::get(values, "max_resolution", c.arch.max_resolution, errors);
  kv::get(values, "fmap_base", c.arch.fmap_base, errors);
  kv::get(values, "fmap_min", c.arch.fmap_min, errors);
  kv::get(values, "phase_images", c.phase_images, errors);
  kv::get(values, "extra_images", c.extra_images, errors);
  kv::get(values, "batch_sizes", c.batch_sizes, errors);
  kv::get(values, "lr", c.adam.lr, errors);
  kv::get(values, "beta1", c.adam.beta1, errors);
  kv::get(values, "beta2", c.adam.beta2, errors);
  kv::get(values, "adam_eps", c.adam.eps, errors);
  kv::get(values, "gp_weight", c.gp_weight, errors);
  kv::get(values, "drift_weight", c.drift_weight, errors);
  kv::get(values, "ema_decay", c.ema_decay, errors);
  kv::get(values, "n_critic", c.n_critic, errors);
  kv::get(values, "checkpoint_every", c.checkpoint_every, errors);
  kv::get(values, "seed", c.seed, errors);
  return c;
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& values,
                                  std::vector<std::string>& errors) {
  return from_map(values, errors, TrainConfig{});
}

// -------------------------------------------------------------- Schedule

std::vector<PhaseSpec> build_schedule(const TrainConfig& config) {
  std::vector<PhaseSpec> all;
  all.push_back({0, false, config.phase_images});
  for (int l = 1; l <= config.arch.max_level(); ++l) {
    all.push_back({l, true, config.phase_images});
    all.push_back({l, false, config.phase_images});
  }
  all.back().budget += config.extra_images;
  std::vector<PhaseSpec> out;
  for (const auto& p : all) {
    if (p.budget > 0) out.push_back(p);
  }
  return out;
}

const char* const kMetricsCsvHeader = "step,level,alpha,d_loss,g_loss,gp,images_seen";

std::string to_csv_row(const StepRecord& r) {
  using kv::format_double;
  return std::to_string(r.step) + "," + std::to_string(r.level) + "," + format_double(r.alpha) + "," +
         format_double(r.d_loss) + "," + format_double(r.g_loss) + "," + format_double(r.gp) + "," +
         std::to_string(r.images_seen);
}

// --------------------------------------------------------------- Trainer

GanTrainer::GanTrainer(TrainConfig config, Array images)
    : config_(std::move(config)),
      schedule_(build_schedule(config_)),
      gen_(config_.arch, config_.seed),
      disc_(config_.arch, config_.seed),
      ema_(gen_),
      opt_g_(config_.adam),
      opt_d_(config_.adam) {
  if (auto errors = config_.validate(); !errors.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& e : errors) msg += " " + e + ";";
    throw ConfigError(msg);
  }
  build_pyramid(std::move(images));
  advance_phases();
}

void GanTrainer::build_pyramid(Array images) {
  const Shape& s = images.shape();
  const int top = config_.arch.max_resolution;
  if (s.size() != 4 || s[1] != 1 || s[2] != s[3] || s[2] < top) {
    throw DataError("training images must be [N,1,R,R] with R >= " + std::to_string(top) + ", got " +
                    to_string(s));
  }
  if (s[0] < 1) throw DataError("training set is empty");
  if (!images.all_finite()) throw DataError("training images contain non-finite values");
  NoGradGuard no_grad;
  Tensor x(std::move(images));
  while (x.shape()[2] > top) {
    if (x.shape()[2] % 2 != 0) throw DataError("native resolution must be a power-of-two multiple of max_resolution");
    x = downsample2x(x);
  }
  if (x.shape()[2] != top) throw DataError("native resolution must be a power-of-two multiple of max_resolution");
  const int levels = config_.arch.max_level() + 1;
  pyramid_.assign(static_cast<std::size_t>(levels), Array());
  for (int l = levels - 1; l >= 0; --l) {
    pyramid_[static_cast<std::size_t>(l)] = x.value();
    if (l > 0) x = downsample2x(x);
  }
}

void GanTrainer::grow_to(int level) {
  while (gen_.built_levels() <= level) gen_.grow();
  while (disc_.built_levels() <= level) disc_.grow();
  ema_.grow(gen_);
}

void GanTrainer::advance_phases() {
  while (phase_index_ < schedule_.size() && phase_seen_ >= schedule_[phase_index_].budget) {
    ++phase_index_;
    phase_seen_ = 0;
  }
  if (phase_index_ < schedule_.size()) grow_to(schedule_[phase_index_].level);
}

BlendState GanTrainer::blend() const {
  if (done()) return BlendState::stable(schedule_.empty() ? 0 : schedule_.back().level);
  const PhaseSpec& p = schedule_[phase_index_];
  if (p.fading) return BlendState::fading(p.level, alpha_schedule(phase_seen_, p.budget));
  return BlendState::stable(p.level);
}

Array GanTrainer::sample_real(Rng rng, int batch, const BlendState& blend) const {
  const Array& src = pyramid_[static_cast<std::size_t>(blend.level)];
  const int n = src.dim(0);
  const int r = blend.resolution();
  const std::size_t per = static_cast<std::size_t>(r) * static_cast<std::size_t>(r);
  Array out({batch, 1, r, r});
  std::vector<int> rows(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    rows[static_cast<std::size_t>(b)] = i;
    std::copy_n(src.raw() + static_cast<std::size_t>(i) * per, per, out.raw() + static_cast<std::size_t>(b) * per);
  }
  if (!blend.is_fading()) return out;
  // Fade reals the same way the generator output is faded.
  const Array& low = pyramid_[static_cast<std::size_t>(blend.level - 1)];
  const int h = r / 2;
  const double a = blend.alpha;
  for (int b = 0; b < batch; ++b) {
    const double* lo = low.raw() + static_cast<std::size_t>(rows[static_cast<std::size_t>(b)]) * per / 4;
    double* dst = out.raw() + static_cast<std::size_t>(b) * per;
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        double& v = dst[y * r + x];
        v = a * v + (1.0 - a) * lo[(y / 2) * h + x / 2];
      }
    }
  }
  return out;
}

Array GanTrainer::sample_latent(Rng rng, int batch) const {
  Array z({batch, config_.arch.latent_dim});
  for (auto& v : z.data()) v = rng.normal();
  return z;
}

StepRecord GanTrainer::step() {
  if (done()) throw ConfigError("training schedule already complete");
  const BlendState b = blend();
  const int batch = config_.batch_size(b.level);
  const Rng rng = Rng(config_.seed).split("step", static_cast<std::uint64_t>(step_));

  const ParameterList d_params = disc_.parameters();
  const ParameterList g_params = gen_.parameters();

  StepRecord rec;
  rec.step = step_;
  rec.level = b.level;
  rec.alpha = b.alpha;

  for (int k = 0; k < config_.n_critic; ++k) {
    const Rng crng = rng.split("critic", static_cast<std::uint64_t>(k));
    const Array real = sample_real(crng.split("real"), batch, b);
    Array fake;
    {
      NoGradGuard no_grad;
      fake = gen_.generate(Tensor(sample_latent(crng.split("z"), batch)), b).value();
    }
    zero_grads(d_params);
    const Tensor real_scores = disc_.discriminate(Tensor(real), b);
    const Tensor fake_scores = disc_.discriminate(Tensor(fake), b);
    Rng urng = crng.split("u");
    const Tensor gp = gradient_penalty(disc_, real, fake, b, urng);
    const Tensor loss = critic_loss(real_scores, fake_scores, gp, config_.gp_weight, config_.drift_weight);
    backward(loss);
    rec.d_loss = loss.item();
    rec.gp = gp.item();
    const double gn = grad_norm(d_params);
    if (!std::isfinite(rec.d_loss) || !std::isfinite(gn)) {
      std::ostringstream os;
      os << "non-finite critic loss at step " << step_ << " (level " << b.level << ", alpha " << b.alpha
         << "): d_loss=" << rec.d_loss << " gp=" << rec.gp << " critic grad norm=" << gn;
      throw NumericalError(os.str());
    }
    opt_d_.step(d_params);
  }

  set_requires_grad(d_params, false);
  zero_grads(g_params);
  const Tensor fake = gen_.generate(Tensor(sample_latent(rng.split("z_g"), batch)), b);
  const Tensor g_loss = neg(mean(disc_.discriminate(fake, b)));
  backward(g_loss);
  set_requires_grad(d_params, true);
  rec.g_loss = g_loss.item();
  const double gn = grad_norm(g_params);
  if (!std::isfinite(rec.g_loss) || !std::isfinite(gn)) {
    std::ostringstream os;
    os << "non-finite generator loss at step " << step_ << " (level " << b.level << ", alpha " << b.alpha
       << "): g_loss=" << rec.g_loss << " d_loss=" << rec.d_loss << " generator grad norm=" << gn;
    throw NumericalError(os.str());
  }
  opt_g_.step(g_params);
  ema_.update(gen_, config_.ema_decay);

  ++step_;
  phase_seen_ += batch;
  images_seen_ += batch;
  rec.images_seen = images_seen_;
  advance_phases();
  return rec;
}

void GanTrainer::run(const std::function<void(const StepRecord&)>& on_step,
                     const std::function<void(const GanTrainer&)>& on_checkpoint) {
  while (!done()) {
    const std::size_t phase_before = phase_index_;
    const long seen_before = images_seen_;
    const StepRecord rec = step();
    if (on_step) on_step(rec);
    const bool boundary = phase_index_ != phase_before;
    const bool cadence = config_.checkpoint_every > 0 &&
                         images_seen_ / config_.checkpoint_every != seen_before / config_.checkpoint_every;
    if (on_checkpoint && (boundary || cadence)) on_checkpoint(*this);
  }
}

Checkpoint GanTrainer::checkpoint() const {
  Checkpoint ckpt;
  save_gan(ckpt, config_, gen_, ema_.generator(), disc_, blend());
  opt_g_.save(ckpt, "adam_g/");
  opt_d_.save(ckpt, "adam_d/");
  ckpt.set_meta("trainer.step", std::to_string(step_));
  ckpt.set_meta("trainer.images_seen", std::to_string(images_seen_));
  ckpt.set_meta("trainer.phase_index", std::to_string(phase_index_));
  ckpt.set_meta("trainer.phase_seen", std::to_string(phase_seen_));
  return ckpt;
}

GanTrainer GanTrainer::resume(const Checkpoint& ckpt, Array images) {
  if (!ckpt.has_meta("trainer.step")) throw DataError("checkpoint holds no trainer state");
  LoadedGan g = load_gan(ckpt);
  GanTrainer t(g.config, std::move(images));
  t.grow_to(g.generator.built_levels() - 1);
  load_parameters(t.gen_.parameters(), ckpt, "generator/");
  load_parameters(t.ema_.generator().parameters(), ckpt, "ema/");
  load_parameters(t.disc_.parameters(), ckpt, "discriminator/");
  t.opt_g_.load(ckpt, "adam_g/");
  t.opt_d_.load(ckpt, "adam_d/");
  t.step_ = parse_long_meta(ckpt, "trainer.step");
  t.images_seen_ = parse_long_meta(ckpt, "trainer.images_seen");
  t.phase_index_ = static_cast<std::size_t>(parse_long_meta(ckpt, "trainer.phase_index"));
  t.phase_seen_ = parse_long_meta(ckpt, "trainer.phase_seen");
  if (t.phase_index_ > t.schedule_.size()) throw DataError("checkpoint phase index exceeds the schedule");
  return t;
}

// ------------------------------------------------------------ Save/load

void save_gan(Checkpoint& ckpt, const TrainConfig& config, const Generator& gen, const Generator& ema,
              const Discriminator& disc, const BlendState& blend) {
  for (const auto& [k, v] : config.to_map()) ckpt.set_meta("config." + k, v);
  ckpt.set_meta("kind", "gan");
  ckpt.set_meta("levels", std::to_string(gen.built_levels()));
  ckpt.set_meta("blend.level", std::to_string(blend.level));
  ckpt.set_meta("blend.alpha", kv::format_double(blend.alpha));
  ckpt.set_meta("blend.phase", phase_name(blend.phase));
  save_parameters(gen.parameters(), ckpt, "generator/");
  save_parameters(ema.parameters(), ckpt, "ema/");
  save_parameters(disc.parameters(), ckpt, "discriminator/");
}

LoadedGan load_gan(const Checkpoint& ckpt) {
  if (!ckpt.has_meta("kind") || ckpt.meta("kind") != "gan") throw DataError("checkpoint does not hold a GAN");
  std::map<std::string, std::string> values;
  for (const auto& k : TrainConfig::keys()) {
    if (ckpt.has_meta("config." + k)) values[k] = ckpt.meta("config." + k);
  }
  std::vector<std::string> errors;
  TrainConfig config = TrainConfig::from_map(values, errors);
  if (!errors.empty()) throw DataError("checkpoint config: " + errors.front());
  const long levels = parse_long_meta(ckpt, "levels");
  if (levels < 1 || levels > config.arch.max_level() + 1) throw DataError("checkpoint level count out of range");

  LoadedGan out{config, Generator(config.arch, config.seed), Generator(config.arch, config.seed),
                Discriminator(config.arch, config.seed), BlendState{}};
  for (long l = 1; l < levels; ++l) {
    out.generator.grow();
    out.ema.grow();
    out.discriminator.grow();
  }
  load_parameters(out.generator.parameters(), ckpt, "generator/");
  load_parameters(out.ema.parameters(), ckpt, "ema/");
  load_parameters(out.discriminator.parameters(), ckpt, "discriminator/");
  set_requires_grad(out.ema.parameters(), false);

  const int level = static_cast<int>(parse_long_meta(ckpt, "blend.level"));
  double alpha = 1.0;
  std::vector<std::string> alpha_errors;
  kv::get(std::map<std::string, std::string>{{"a", ckpt.meta("blend.alpha")}}, "a", alpha, alpha_errors);
  if (!alpha_errors.empty()) throw DataError("checkpoint blend alpha is malformed");
  try {
    out.blend = ckpt.meta("blend.phase") == "fading" ? BlendState::fading(level, alpha) : BlendState::stable(level);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint blend state: ") + e.what());
  }
  return out;
}

}  // namespace cxrgan
