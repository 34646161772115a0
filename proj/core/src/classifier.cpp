// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/classifier.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cxrgan/error.h"
#include "cxrgan/kv.h"

namespace cxrgan {
namespace {

void check_images(const Array& images, int resolution, const char* what) {
  const Shape& s = images.shape();
  if (s.size() != 4 || s[1] != 1 || s[2] != resolution || s[3] != resolution) {
    throw ShapeError(std::string(what) + ": expected images [N,1," + std::to_string(resolution) + "," +
                     std::to_string(resolution) + "], got " + to_string(s));
  }
}

Array rows_of(const Array& a, std::size_t begin, std::size_t count) {
  Shape s = a.shape();
  const std::size_t per = a.size() / static_cast<std::size_t>(s[0]);
  s[0] = static_cast<int>(count);
  Array out(s);
  std::copy(a.raw() + begin * per, a.raw() + (begin + count) * per, out.raw());
  return out;
}

Tensor global_average_pool(const Tensor& h) {
  const Shape& s = h.shape();
  const Tensor pooled = sum_to(h, {s[0], s[1], 1, 1});
  return reshape(scale(pooled, 1.0 / (static_cast<double>(s[2]) * s[3])), {s[0], s[1]});
}

long meta_long(const Checkpoint& ckpt, const std::string& key) {
  try {
    return std::stol(ckpt.meta(key));
  } catch (const std::logic_error&) {
    throw DataError("checkpoint metadata '" + key + "' is not an integer");
  }
}

std::uint64_t meta_u64(const Checkpoint& ckpt, const std::string& key) {
  try {
    return std::stoull(ckpt.meta(key));
  } catch (const std::logic_error&) {
    throw DataError("checkpoint metadata '" + key + "' is not an integer");
  }
}

}  // namespace

// ------------------------------------------------------------------ Loss

Rational Rational::make(std::int64_t num, std::int64_t den) {
  if (den <= 0 || num < 0) throw ConfigError("Rational: need num >= 0 and den > 0");
  const std::int64_t g = std::gcd(num, den);
  return {num / g, den / g};
}

Rational Rational::operator*(std::int64_t k) const {
  // Reduce before multiplying to stay within range.
  const std::int64_t g = std::gcd(k, den);
  return make(num * (k / g), den / g);
}

ClassWeights ClassWeights::from_counts(std::vector<std::int64_t> n_pos, std::vector<std::int64_t> n_neg) {
  if (n_pos.size() != n_neg.size()) throw ShapeError("ClassWeights: count vectors differ in length");
  ClassWeights w;
  for (std::size_t k = 0; k < n_pos.size(); ++k) {
    if (n_pos[k] < 0 || n_neg[k] < 0) throw DataError("ClassWeights: negative count");
    const std::int64_t total = n_pos[k] + n_neg[k];
    w.w_pos.push_back(n_pos[k] > 0 ? Rational::make(total, n_pos[k]) : Rational{1, 1});
    w.w_neg.push_back(n_neg[k] > 0 ? Rational::make(total, n_neg[k]) : Rational{1, 1});
  }
  w.n_pos = std::move(n_pos);
  w.n_neg = std::move(n_neg);
  return w;
}

ClassWeights ClassWeights::from_targets(const Array& targets) {
  if (targets.rank() != 2) throw ShapeError("ClassWeights: targets must be [N,K]");
  const int n = targets.dim(0), k = targets.dim(1);
  std::vector<std::int64_t> pos(static_cast<std::size_t>(k), 0), neg(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      if (targets[static_cast<std::size_t>(i) * k + j] >= 0.5) {
        ++pos[static_cast<std::size_t>(j)];
      } else {
        ++neg[static_cast<std::size_t>(j)];
      }
    }
  }
  return from_counts(std::move(pos), std::move(neg));
}

ClassWeights ClassWeights::unit(int classes) {
  ClassWeights w;
  w.n_pos.assign(static_cast<std::size_t>(classes), 0);
  w.n_neg.assign(static_cast<std::size_t>(classes), 0);
  w.w_pos.assign(static_cast<std::size_t>(classes), Rational{1, 1});
  w.w_neg.assign(static_cast<std::size_t>(classes), Rational{1, 1});
  return w;
}

Tensor weighted_bce(const Tensor& pred, const Array& target, const ClassWeights& weights) {
  if (pred.shape().size() != 2 || pred.shape() != target.shape()) {
    throw ShapeError("weighted_bce: pred " + to_string(pred.shape()) + " and target " + to_string(target.shape()) +
                     " must both be [N,K]");
  }
  const int n = target.dim(0), k = target.dim(1);
  if (weights.num_classes() != k) throw ShapeError("weighted_bce: weights cover a different class count");
  Array pos_factor(target.shape()), neg_factor(target.shape());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * k + j;
      const double y = target[idx];
      if (!(y >= 0.0 && y <= 1.0)) throw DataError("weighted_bce: target outside [0,1]");
      pos_factor[idx] = weights.w_pos[static_cast<std::size_t>(j)].value() * y;
      neg_factor[idx] = weights.w_neg[static_cast<std::size_t>(j)].value() * (1.0 - y);
    }
  }
  const Tensor p = clamp(pred, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const Tensor ll = add(mul_const(log(p), std::move(pos_factor)),
                        mul_const(log(add_scalar(neg(p), 1.0)), std::move(neg_factor)));
  return scale(sum(ll), -1.0 / static_cast<double>(target.size()));
}

double micro_auc(const Array& preds, const Array& targets) {
  if (preds.shape() != targets.shape()) throw ShapeError("micro_auc: preds and targets differ in shape");
  const std::size_t m = preds.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return preds[a] < preds[b]; });

  double pos = 0.0, rank_sum = 0.0;
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j + 1 < m && preds[order[j + 1]] == preds[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      const double y = targets[order[t]];
      if (y != 0.0 && y != 1.0) throw DataError("micro_auc: targets must be 0 or 1");
      if (!std::isfinite(preds[order[t]])) throw DataError("micro_auc: non-finite prediction");
      if (y == 1.0) {
        pos += 1.0;
        rank_sum += midrank;
      }
    }
    i = j + 1;
  }
  const double neg = static_cast<double>(m) - pos;
  if (pos == 0.0 || neg == 0.0) throw DataError("micro_auc: undefined without both positive and negative targets");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

// ------------------------------------------------------------ Network

std::vector<std::string> ClassifierArch::validate() const {
  std::vector<std::string> e;
  if (num_classes < 1) e.push_back("num_classes must be >= 1");
  if (widths.empty()) e.push_back("widths must not be empty");
  for (int w : widths) {
    if (w < 1) e.push_back("widths must be positive");
  }
  const int blocks = static_cast<int>(widths.size());
  if (resolution < 1 || blocks > 20 || resolution % (1 << std::min(blocks, 20)) != 0) {
    e.push_back("resolution must be a positive multiple of 2^(number of widths)");
  }
  if (!(lrelu_slope >= 0.0 && lrelu_slope < 1.0)) e.push_back("lrelu_slope must be in [0,1)");
  return e;
}

Classifier Classifier::cnn(const ClassifierArch& arch, std::uint64_t seed) {
  const auto errors = arch.validate();
  if (!errors.empty()) throw ConfigError("classifier architecture: " + errors.front());
  Classifier c;
  c.kind_ = Kind::kCnn;
  c.arch_ = arch;
  const Rng root(seed);
  int in = 1;
  for (std::size_t i = 0; i < arch.widths.size(); ++i) {
    c.convs_.emplace_back(in, arch.widths[i], 3, 1, std::sqrt(2.0), root.split("conv", i));
    c.convs_.back().fold_scale();
    in = arch.widths[i];
  }
  // Plain He-scaled parameters: under Adam at lr 1e-3 the equalized form
  // moves unit-variance weights too slowly for a classifier.
  c.head_ = EqualizedLinear(in, arch.num_classes, 1.0, root.split("head"));
  c.head_.fold_scale();
  return c;
}

Classifier Classifier::from_discriminator(const Discriminator& disc, int num_classes, std::uint64_t seed) {
  if (num_classes < 1) throw ConfigError("from_discriminator: num_classes must be >= 1");
  Classifier c;
  c.kind_ = Kind::kDiscriminator;
  c.disc_ = disc.clone();
  set_requires_grad(c.disc_->parameters(), true);
  c.disc_blend_ = BlendState::stable(disc.built_levels() - 1);
  c.arch_.resolution = c.disc_blend_.resolution();
  c.arch_.num_classes = num_classes;
  c.arch_.widths.clear();
  c.arch_.lrelu_slope = disc.arch().lrelu_slope;
  c.head_ = EqualizedLinear(disc.arch().channels(0), num_classes, 1.0, Rng(seed).split("head"));
  return c;
}

int Classifier::resolution() const { return arch_.resolution; }

void Classifier::check_input(const Tensor& images) const { check_images(images.value(), resolution(), "classifier"); }

Tensor Classifier::embed(const Tensor& images) const {
  check_input(images);
  if (kind_ == Kind::kDiscriminator) return disc_->features(images, disc_blend_);
  Tensor h = images;
  for (const auto& conv : convs_) h = downsample2x(leaky_relu(conv.forward(h), arch_.lrelu_slope));
  return global_average_pool(h);
}

Tensor Classifier::logits(const Tensor& images) const { return head_.forward(embed(images)); }

Array Classifier::classify(const Array& images) const {
  check_images(images, resolution(), "classify");
  NoGradGuard no_grad;
  const std::size_t n = static_cast<std::size_t>(images.dim(0));
  Array out({static_cast<int>(n), num_classes()});
  const std::size_t k = static_cast<std::size_t>(num_classes());
  for (std::size_t b = 0; b < n; b += kEvalBatch) {
    const std::size_t count = std::min<std::size_t>(kEvalBatch, n - b);
    const Array p = clamp(sigmoid(logits(Tensor(rows_of(images, b, count)))), kProbabilityClamp,
                          1.0 - kProbabilityClamp)
                        .value();
    std::copy(p.raw(), p.raw() + count * k, out.raw() + b * k);
  }
  return out;
}

Array Classifier::embed_all(const Array& images) const {
  check_images(images, resolution(), "embed");
  NoGradGuard no_grad;
  const std::size_t n = static_cast<std::size_t>(images.dim(0));
  const std::size_t e = static_cast<std::size_t>(embedding_dim());
  Array out({static_cast<int>(n), static_cast<int>(e)});
  for (std::size_t b = 0; b < n; b += kEvalBatch) {
    const std::size_t count = std::min<std::size_t>(kEvalBatch, n - b);
    const Array f = embed(Tensor(rows_of(images, b, count))).value();
    std::copy(f.raw(), f.raw() + count * e, out.raw() + b * e);
  }
  return out;
}

ParameterList Classifier::parameters() const {
  ParameterList out;
  if (kind_ == Kind::kDiscriminator) {
    for (auto& p : disc_->trunk_parameters()) out.push_back({"trunk." + p.name, p.tensor});
  } else {
    for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(out, "block" + std::to_string(i) + ".conv");
  }
  head_.collect(out, "head");
  return out;
}

Classifier Classifier::clone() const {
  Classifier c;
  c.kind_ = kind_;
  c.arch_ = arch_;
  for (const auto& conv : convs_) c.convs_.push_back(conv.clone());
  if (disc_) c.disc_ = disc_->clone();
  c.disc_blend_ = disc_blend_;
  c.head_ = head_.clone();
  return c;
}

void Classifier::save(Checkpoint& ckpt) const {
  ckpt.set_meta("kind", "classifier");
  ckpt.set_meta("classifier.kind", kind_ == Kind::kCnn ? "cnn" : "discriminator");
  ckpt.set_meta("classifier.num_classes", std::to_string(num_classes()));
  if (kind_ == Kind::kCnn) {
    ckpt.set_meta("classifier.resolution", std::to_string(arch_.resolution));
    ckpt.set_meta("classifier.widths", kv::join(arch_.widths));
    ckpt.set_meta("classifier.lrelu_slope", kv::format_double(arch_.lrelu_slope));
  } else {
    const GanArchitecture& a = disc_->arch();
    ckpt.set_meta("disc.latent_dim", std::to_string(a.latent_dim));
    ckpt.set_meta("disc.max_resolution", std::to_string(a.max_resolution));
    ckpt.set_meta("disc.fmap_base", std::to_string(a.fmap_base));
    ckpt.set_meta("disc.fmap_min", std::to_string(a.fmap_min));
    ckpt.set_meta("disc.seed", std::to_string(disc_->seed()));
    ckpt.set_meta("disc.levels", std::to_string(disc_->built_levels()));
  }
  save_parameters(parameters(), ckpt, "classifier/");
}

Classifier Classifier::load(const Checkpoint& ckpt) {
  if (!ckpt.has_meta("kind") || ckpt.meta("kind") != "classifier") {
    throw DataError("checkpoint does not hold a classifier");
  }
  const int k = static_cast<int>(meta_long(ckpt, "classifier.num_classes"));
  std::optional<Classifier> c;
  if (ckpt.meta("classifier.kind") == "cnn") {
    std::map<std::string, std::string> values{{"resolution", ckpt.meta("classifier.resolution")},
                                              {"widths", ckpt.meta("classifier.widths")},
                                              {"lrelu_slope", ckpt.meta("classifier.lrelu_slope")}};
    std::vector<std::string> errors;
    ClassifierArch arch;
    arch.num_classes = k;
    kv::get(values, "resolution", arch.resolution, errors);
    kv::get(values, "widths", arch.widths, errors);
    kv::get(values, "lrelu_slope", arch.lrelu_slope, errors);
    if (!errors.empty()) throw DataError("checkpoint classifier architecture: " + errors.front());
    try {
      c = cnn(arch, 0);
    } catch (const ConfigError& e) {
      throw DataError(std::string("checkpoint classifier architecture: ") + e.what());
    }
  } else if (ckpt.meta("classifier.kind") == "discriminator") {
    GanArchitecture a;
    a.latent_dim = static_cast<int>(meta_long(ckpt, "disc.latent_dim"));
    a.max_resolution = static_cast<int>(meta_long(ckpt, "disc.max_resolution"));
    a.fmap_base = static_cast<int>(meta_long(ckpt, "disc.fmap_base"));
    a.fmap_min = static_cast<int>(meta_long(ckpt, "disc.fmap_min"));
    const auto errors = a.validate();
    if (!errors.empty()) throw DataError("checkpoint discriminator architecture: " + errors.front());
    Discriminator disc(a, meta_u64(ckpt, "disc.seed"));
    const long levels = meta_long(ckpt, "disc.levels");
    if (levels < 1 || levels > a.max_level() + 1) throw DataError("checkpoint level count out of range");
    for (long l = 1; l < levels; ++l) disc.grow();
    c = from_discriminator(disc, k, 0);
  } else {
    throw DataError("unknown classifier kind '" + ckpt.meta("classifier.kind") + "'");
  }
  load_parameters(c->parameters(), ckpt, "classifier/");
  return std::move(*c);
}

// ----------------------------------------------------------- Training

LabeledSet LabeledSet::subset(const std::vector<std::size_t>& rows) const {
  LabeledSet out;
  Shape is = images.shape(), ts = targets.shape();
  is[0] = ts[0] = static_cast<int>(rows.size());
  out.images = Array(is);
  out.targets = Array(ts);
  const std::size_t ip = images.size() / static_cast<std::size_t>(images.dim(0));
  const std::size_t tp = targets.size() / static_cast<std::size_t>(targets.dim(0));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(images.raw() + rows[r] * ip, images.raw() + (rows[r] + 1) * ip, out.images.raw() + r * ip);
    std::copy(targets.raw() + rows[r] * tp, targets.raw() + (rows[r] + 1) * tp, out.targets.raw() + r * tp);
  }
  return out;
}

std::vector<std::string> ClassifierTrainConfig::validate() const {
  std::vector<std::string> e = arch.validate();
  const auto rest = validate_schedule();
  e.insert(e.end(), rest.begin(), rest.end());
  return e;
}

std::vector<std::string> ClassifierTrainConfig::validate_schedule() const {
  std::vector<std::string> e;
  if (max_epochs < 1) e.push_back("max_epochs must be >= 1");
  if (batch_size < 1) e.push_back("batch_size must be >= 1");
  if (!(adam.lr > 0.0)) e.push_back("lr must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) e.push_back("beta1 must be in [0,1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) e.push_back("beta2 must be in [0,1)");
  if (!(adam.eps >= 0.0)) e.push_back("adam_eps must be >= 0");
  if (patience < 1) e.push_back("patience must be >= 1");
  if (!(lr_divisor > 1.0)) e.push_back("lr_divisor must be > 1");
  if (!(min_lr > 0.0)) e.push_back("min_lr must be > 0");
  if (!(augmentation.max_rotation_deg >= 0.0)) e.push_back("max_rotation_deg must be >= 0");
  if (!(augmentation.flip_prob >= 0.0 && augmentation.flip_prob <= 1.0)) e.push_back("flip_prob must be in [0,1]");
  if (!(augmentation.brightness >= 0.0 && augmentation.brightness < 1.0)) e.push_back("brightness must be in [0,1)");
  if (!(augmentation.contrast >= 0.0 && augmentation.contrast < 1.0)) e.push_back("contrast must be in [0,1)");
  return e;
}

const std::vector<std::string>& ClassifierTrainConfig::keys() {
  static const std::vector<std::string> k = {
      "resolution", "widths",      "max_epochs", "batch_size", "lr",         "beta1",
      "beta2",      "adam_eps",    "patience",   "lr_divisor", "min_lr",     "augment",
      "max_rotation_deg", "flip_prob", "brightness", "contrast", "saturation", "hue",
      "seed"};
  return k;
}

std::map<std::string, std::string> ClassifierTrainConfig::to_map() const {
  using kv::format_double;
  return {
      {"resolution", std::to_string(arch.resolution)},
      {"widths", kv::join(arch.widths)},
      {"max_epochs", std::to_string(max_epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"lr", format_double(adam.lr)},
      {"beta1", format_double(adam.beta1)},
      {"beta2", format_double(adam.beta2)},
      {"adam_eps", format_double(adam.eps)},
      {"patience", std::to_string(patience)},
      {"lr_divisor", format_double(lr_divisor)},
      {"min_lr", format_double(min_lr)},
      {"augment", augment ? "true" : "false"},
      {"max_rotation_deg", format_double(augmentation.max_rotation_deg)},
      {"flip_prob", format_double(augmentation.flip_prob)},
      {"brightness", format_double(augmentation.brightness)},
      {"contrast", format_double(augmentation.contrast)},
      {"saturation", format_double(augmentation.saturation)},
      {"hue", format_double(augmentation.hue)},
      {"seed", std::to_string(seed)},
  };
}

ClassifierTrainConfig ClassifierTrainConfig::from_map(const std::map<std::string, std::string>& values,
                                                      std::vector<std::string>& errors,
                                                      const ClassifierTrainConfig& base) {
  ClassifierTrainConfig c = base;
  kv::get(values, "resolution", c.arch.resolution, errors);
  kv::get(values, "widths", c.arch.widths, errors);
  kv::get(values, "max_epochs", c.max_epochs, errors);
  kv::get(values, "batch_size", c.batch_size, errors);
  kv::get(values, "lr", c.adam.lr, errors);
  kv::get(values, "beta1", c.adam.beta1, errors);
  kv::get(values, "beta2", c.adam.beta2, errors);
  kv::get(values, "adam_eps", c.adam.eps, errors);
  kv::get(values, "patience", c.patience, errors);
  kv::get(values, "lr_divisor", c.lr_divisor, errors);
  kv::get(values, "min_lr", c.min_lr, errors);
  kv::get(values, "augment", c.augment, errors);
  kv::get(values, "max_rotation_deg", c.augmentation.max_rotation_deg, errors);
  kv::get(values, "flip_prob", c.augmentation.flip_prob, errors);
  kv::get(values, "brightness", c.augmentation.brightness, errors);
  kv::get(values, "contrast", c.augmentation.contrast, errors);
  kv::get(values, "saturation", c.augmentation.saturation, errors);
  kv::get(values, "hue", c.augmentation.hue, errors);
  kv::get(values, "seed", c.seed, errors);
  return c;
}

const char* const kEpochCsvHeader = "epoch,lr,train_loss,val_auc,improved";

std::string to_csv_row(const EpochRecord& r) {
  std::ostringstream os;
  os << r.epoch << ',' << kv::format_double(r.lr) << ',' << kv::format_double(r.train_loss) << ','
     << kv::format_double(r.val_auc) << ',' << (r.improved ? 1 : 0);
  return os.str();
}

namespace {

void check_set(const LabeledSet& set, const Classifier& net, const char* name) {
  if (set.size() == 0) throw DataError(std::string(name) + " split is empty");
  check_images(set.images, net.resolution(), name);
  if (set.targets.rank() != 2 || set.targets.dim(0) != set.size() || set.targets.dim(1) != net.num_classes()) {
    throw ShapeError(std::string(name) + " targets must be [" + std::to_string(set.size()) + "," +
                     std::to_string(net.num_classes()) + "], got " + to_string(set.targets.shape()));
  }
}

void copy_values(const ParameterList& to, const ParameterList& from) {
  for (std::size_t i = 0; i < to.size(); ++i) {
    Tensor t = to[i].tensor;
    t.mutable_value() = from[i].tensor.value();
  }
}

}  // namespace

ClassifierReport train_classifier(Classifier& net, const ClassifierTrainConfig& config, const LabeledSet& train,
                                  const LabeledSet& validation, const LabeledSet* test,
                                  const std::function<void(const EpochRecord&)>& on_epoch) {
  // The network is already built, so only the optimization settings matter.
  const auto errors = config.validate_schedule();
  if (!errors.empty()) throw ConfigError("classifier config: " + errors.front());
  check_set(train, net, "train");
  check_set(validation, net, "validation");
  if (test != nullptr) check_set(*test, net, "test");

  const ClassWeights weights = ClassWeights::from_targets(train.targets);
  const ParameterList params = net.parameters();
  Adam opt(config.adam);
  double lr = config.adam.lr;
  const Rng root(config.seed);
  const int res = net.resolution();
  const std::size_t plane = static_cast<std::size_t>(res) * res;

  ClassifierReport report;
  report.best_val_auc = -std::numeric_limits<double>::infinity();
  Classifier best = net.clone();
  int bad_epochs = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::vector<std::size_t> order(static_cast<std::size_t>(train.size()));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = root.split("epoch", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    const Rng aug_rng = root.split("augment", static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - b);
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(b),
                                          order.begin() + static_cast<std::ptrdiff_t>(b + count));
      LabeledSet batch = train.subset(rows);
      if (config.augment) {
        for (std::size_t r = 0; r < count; ++r) {
          augment_plane(std::span<double>(batch.images.raw() + r * plane, plane), res, -1.0, 1.0,
                        config.augmentation, aug_rng.split(b + r));
        }
      }
      zero_grads(params);
      const Tensor loss = weighted_bce(sigmoid(net.logits(Tensor(batch.images))), batch.targets, weights);
      if (!std::isfinite(loss.item())) {
        throw NumericalError("classifier loss became non-finite at epoch " + std::to_string(epoch) + ", lr " +
                             kv::format_double(lr));
      }
      backward(loss);
      opt.step(params);
      loss_sum += loss.item();
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / batches;
    rec.val_auc = micro_auc(net.classify(validation.images), validation.targets);
    rec.improved = rec.val_auc > report.best_val_auc;
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.improved) {
      report.best_val_auc = rec.val_auc;
      best = net.clone();
      bad_epochs = 0;
    } else if (++bad_epochs >= config.patience) {
      const double next = lr / config.lr_divisor;
      if (next < config.min_lr * (1.0 - 1e-9)) break;
      lr = next;
      opt.set_lr(lr);
      bad_epochs = 0;
    }
  }

  copy_values(params, best.parameters());
  if (test != nullptr) report.test_auc = micro_auc(net.classify(test->images), test->targets);
  return report;
}

std::string predictions_csv(const std::vector<std::string>& image_ids, const std::vector<std::string>& classes,
                            const Array& probs) {
  if (probs.rank() != 2 || probs.dim(0) != static_cast<int>(image_ids.size()) ||
      probs.dim(1) != static_cast<int>(classes.size())) {
    throw ShapeError("predictions_csv: probabilities must be [ids, classes]");
  }
  std::ostringstream os;
  os << "image_id";
  for (const auto& c : classes) os << ',' << c;
  os << '\n';
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    os << image_ids[i];
    for (std::size_t j = 0; j < classes.size(); ++j) os << ',' << kv::format_double(probs[i * classes.size() + j]);
    os << '\n';
  }
  return os.str();
}

}  // namespace cxrgan
