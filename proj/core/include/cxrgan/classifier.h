// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cxrgan/dataio.h"
#include "cxrgan/pggan.h"
#include "cxrgan/training.h"

namespace cxrgan {

// ------------------------------------------------------------ Loss

/// Non-negative fraction num / den kept in lowest terms.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t num, std::int64_t den);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  Rational operator*(std::int64_t k) const;
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Per-class weights of the balanced cross entropy:
/// w_P = (N_p + N_n) / N_p and w_N = (N_p + N_n) / N_n. A class with no
/// positives (or no negatives) gets weight 1 on the empty side.
struct ClassWeights {
  std::vector<std::int64_t> n_pos;
  std::vector<std::int64_t> n_neg;
  std::vector<Rational> w_pos;
  std::vector<Rational> w_neg;

  static ClassWeights from_counts(std::vector<std::int64_t> n_pos, std::vector<std::int64_t> n_neg);
  /// Counts entries >= 0.5 as positive in a [N, K] target matrix.
  static ClassWeights from_targets(const Array& targets);
  static ClassWeights unit(int classes);

  int num_classes() const { return static_cast<int>(w_pos.size()); }
};

/// Smallest distance predictions keep from 0 and 1.
inline constexpr double kProbabilityClamp = 1e-7;

/// mean over N and K of -[w_P y log p + w_N (1 - y) log(1 - p)], with p
/// clamped to [1e-7, 1 - 1e-7]. Targets may be fractional.
Tensor weighted_bce(const Tensor& pred, const Array& target, const ClassWeights& weights);

/// ROC AUC pooled over all (sample, class) pairs, ties by midrank. Targets
/// must be 0/1 with both values present.
double micro_auc(const Array& preds, const Array& targets);

// ------------------------------------------------------------ Network

struct ClassifierArch {
  int resolution = 32;
  int num_classes = 5;
  std::vector<int> widths{16, 32, 64, 64};  // one 3x3 conv + pool per entry
  double lrelu_slope = 0.2;

  std::vector<std::string> validate() const;
};

/// Multi-label image classifier: either a plain CNN (conv blocks, global
/// average pool, linear head) or a progressive discriminator whose scalar
/// head is replaced by a K-way head.
class Classifier {
 public:
  enum class Kind { kCnn, kDiscriminator };

  static Classifier cnn(const ClassifierArch& arch, std::uint64_t seed);
  /// Reuses every discriminator weight except the final scalar head.
  static Classifier from_discriminator(const Discriminator& disc, int num_classes, std::uint64_t seed);

  /// Pre-sigmoid scores [N, K].
  Tensor logits(const Tensor& images) const;
  /// Penultimate activations [N, E].
  Tensor embed(const Tensor& images) const;

  /// Probabilities [N, K] clamped to [1e-7, 1 - 1e-7], evaluated without
  /// gradient tracking in fixed chunks of kEvalBatch.
  Array classify(const Array& images) const;
  Array embed_all(const Array& images) const;
  static constexpr int kEvalBatch = 32;

  Kind kind() const { return kind_; }
  int resolution() const;
  int num_classes() const { return head_.weight.shape()[1]; }
  int embedding_dim() const { return head_.weight.shape()[0]; }
  const EqualizedLinear& head() const { return head_; }
  EqualizedLinear& head() { return head_; }

  ParameterList parameters() const;
  Classifier clone() const;

  void save(Checkpoint& ckpt) const;
  static Classifier load(const Checkpoint& ckpt);

 private:
  Classifier() = default;
  void check_input(const Tensor& images) const;

  Kind kind_ = Kind::kCnn;
  ClassifierArch arch_;
  std::vector<EqualizedConv2d> convs_;
  std::optional<Discriminator> disc_;
  BlendState disc_blend_;
  EqualizedLinear head_;
};

// ----------------------------------------------------------- Training

struct LabeledSet {
  Array images;   // [N, 1, R, R] in [-1, 1]
  Array targets;  // [N, K] in [0, 1]

  int size() const { return images.empty() ? 0 : images.dim(0); }
  LabeledSet subset(const std::vector<std::size_t>& rows) const;
};

struct ClassifierTrainConfig {
  ClassifierArch arch;  // num_classes is taken from the data
  int max_epochs = 30;
  int batch_size = 32;
  AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
  int patience = 3;            // epochs without validation improvement before a drop
  double lr_divisor = 10.0;
  double min_lr = 1e-6;
  bool augment = true;
  AugmentConfig augmentation;
  std::uint64_t seed = 0;

  std::vector<std::string> validate() const;
  /// Everything except the architecture.
  std::vector<std::string> validate_schedule() const;
  static const std::vector<std::string>& keys();
  std::map<std::string, std::string> to_map() const;
  static ClassifierTrainConfig from_map(const std::map<std::string, std::string>& values,
                                        std::vector<std::string>& errors, const ClassifierTrainConfig& base);
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_auc = 0.0;
  bool improved = false;
};

struct ClassifierReport {
  std::vector<EpochRecord> epochs;
  double best_val_auc = 0.0;
  std::optional<double> test_auc;
};

extern const char* const kEpochCsvHeader;
std::string to_csv_row(const EpochRecord& r);

/// Adam on weighted_bce with class weights from the training targets. The
/// learning rate is divided by lr_divisor whenever validation micro-AUC has
/// not improved for `patience` epochs; training stops when a further drop
/// would go below min_lr or after max_epochs. The weights of the best
/// validation epoch are restored, then the test split (if any) is scored
/// once.
ClassifierReport train_classifier(Classifier& net, const ClassifierTrainConfig& config, const LabeledSet& train,
                                  const LabeledSet& validation, const LabeledSet* test = nullptr,
                                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// image_id followed by one probability column per class.
std::string predictions_csv(const std::vector<std::string>& image_ids, const std::vector<std::string>& classes,
                            const Array& probs);

}  // namespace cxrgan
