// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cxrgan/array.h"
#include "cxrgan/dataio.h"

namespace cxrgan {

class Classifier;

// ------------------------------------------------------ Fréchet distance

/// Sample mean [E] and covariance [E, E] (denominator n - 1) of a set of
/// embeddings.
struct GaussianSummary {
  Array mean;
  Array cov;
  long n = 0;

  int dim() const { return mean.empty() ? 0 : mean.dim(0); }
};

GaussianSummary summarize(const Array& embeddings);

/// Principal square root of a symmetric PSD matrix via eigendecomposition;
/// negative eigenvalues are clamped to 0. Throws DataError if the input is
/// asymmetric beyond 1e-8 (relative to its largest entry).
Array sqrt_psd(const Array& m);

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 sqrt(sqrt(S_a) S_b sqrt(S_a))).
/// Round-off negatives are clamped to 0; values below -1e-6 also add a
/// message to `warnings` when given.
double frechet_distance(const GaussianSummary& a, const GaussianSummary& b,
                        std::vector<std::string>* warnings = nullptr);

/// Maps images [N, 1, R, R] to embeddings [N, E].
using Embedder = std::function<Array(const Array& images)>;

/// Fréchet distance between the embedded sets. Warns when either set has
/// fewer samples than embedding dimensions.
double fid(const Array& real_images, const Array& synth_images, const Embedder& embedder,
           std::vector<std::string>* warnings = nullptr);
double fid_from_embeddings(const Array& a, const Array& b, std::vector<std::string>* warnings = nullptr);

// ------------------------------------------------------ Split FID table

struct SplitFidRow {
  std::string name;
  std::optional<double> fid;  // empty when a subset is too small
  int n_a = 0;
  int n_b = 0;
};

/// FID of every class subset against the "No Finding" subset (which itself
/// reports 0), then "Sex" (M vs F images, when sex is recorded) and
/// "Stratified" (the two halves of a patient-level iterative stratification
/// with the given seed). `embeddings` is parallel to table.records. Rows
/// whose subsets hold fewer than `min_subset` images carry no value.
std::vector<SplitFidRow> split_fid_table(const Array& embeddings, const LabelTable& table, std::uint64_t seed,
                                         int min_subset = 2);
std::string split_fid_csv(const std::vector<SplitFidRow>& rows);
/// Two aligned columns, values with two decimals.
std::string split_fid_text(const std::vector<SplitFidRow>& rows);

// ------------------------------------------------------------ Prevalence

struct PrevalenceReport {
  std::vector<std::string> classes;
  std::vector<double> point;
  std::vector<double> lo;
  std::vector<double> hi;
  int n_images = 0;
  int n_bootstrap = 0;

  /// class,point,lo,hi,n
  std::string csv() const;
};

/// Per-class mean of `labels` [N, K] with percentile bootstrap intervals:
/// n_boot resamples of N rows with replacement; replicate r draws from
/// Rng(seed).split("replicate", r). Bounds are linear-interpolated
/// percentiles at (1 - level)/2 and (1 + level)/2.
PrevalenceReport prevalence_bootstrap(const Array& labels, const std::vector<std::string>& classes, int n_boot,
                                      std::uint64_t seed, double level = 0.95);

/// Linear-interpolated quantile of sorted data, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

/// 1 where prob >= threshold, else 0.
Array binarize(const Array& probs, double threshold);

struct LabelSets {
  Array real;
  Array synth;
};

/// Labels both sets with the same classifier and threshold. With
/// soft = true the probabilities are returned unthresholded.
LabelSets label_sets(const Classifier& classifier, const Array& real_images, const Array& synth_images,
                     double threshold = 0.5, bool soft = false);

/// Spearman rank correlation with average ranks for ties. Throws DataError
/// when either vector is constant or the lengths differ or are below 2.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace cxrgan
