// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/metrics.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "cxrgan/classifier.h"
#include "cxrgan/error.h"
#include "cxrgan/kv.h"
#include "cxrgan/rng.h"

namespace cxrgan {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

RowMatrix to_matrix(const Array& a) { return ConstMatrixMap(a.raw(), a.dim(0), a.dim(1)); }

Array to_array(const RowMatrix& m) {
  Array a({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  Eigen::Map<RowMatrix>(a.raw(), m.rows(), m.cols()) = m;
  return a;
}

void check_square(const Array& m, const char* what) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1)) throw ShapeError(std::string(what) + ": expected a square matrix");
}

Array gather_rows(const Array& a, const std::vector<std::size_t>& rows) {
  const std::size_t per = a.size() / static_cast<std::size_t>(a.dim(0));
  Shape s = a.shape();
  s[0] = static_cast<int>(rows.size());
  Array out(s);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(a.raw() + rows[r] * per, a.raw() + (rows[r] + 1) * per, out.raw() + r * per);
  }
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

// ------------------------------------------------------ Fréchet distance

GaussianSummary summarize(const Array& embeddings) {
  if (embeddings.rank() != 2) throw ShapeError("summarize: embeddings must be [N,E]");
  const int n = embeddings.dim(0);
  if (n < 2) throw DataError("summarize: need at least 2 samples, got " + std::to_string(n));
  if (!embeddings.all_finite()) throw NumericalError("summarize: non-finite embedding");
  const RowMatrix x = to_matrix(embeddings);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const RowMatrix centered = x.rowwise() - mu;
  RowMatrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose()).eval();

  GaussianSummary s;
  s.mean = Array({static_cast<int>(mu.size())});
  Eigen::Map<Eigen::RowVectorXd>(s.mean.raw(), mu.size()) = mu;
  s.cov = to_array(cov);
  s.n = n;
  return s;
}

Array sqrt_psd(const Array& m) {
  check_square(m, "sqrt_psd");
  const RowMatrix a = to_matrix(m);
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) throw DataError("sqrt_psd: matrix is not symmetric");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalError("sqrt_psd: eigendecomposition failed");
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd& v = eig.eigenvectors();
  RowMatrix r = v * roots.asDiagonal() * v.transpose();
  r = 0.5 * (r + r.transpose()).eval();
  return to_array(r);
}

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b, std::vector<std::string>* warnings) {
  if (a.dim() != b.dim()) {
    throw ShapeError("frechet_distance: dimensions differ (" + std::to_string(a.dim()) + " vs " +
                     std::to_string(b.dim()) + ")");
  }
  // Equal summaries are at distance zero; the eigen route would leave
  // rounding residue of order 1e-16.
  if (a.mean == b.mean && a.cov == b.cov) return 0.0;
  const int e = a.dim();
  const Eigen::Map<const Eigen::VectorXd> mu_a(a.mean.raw(), e), mu_b(b.mean.raw(), e);
  const RowMatrix cov_a = to_matrix(a.cov), cov_b = to_matrix(b.cov);
  const RowMatrix root_a = to_matrix(sqrt_psd(a.cov));
  RowMatrix inner = root_a * cov_b * root_a;
  inner = 0.5 * (inner + inner.transpose()).eval();
  const RowMatrix cross = to_matrix(sqrt_psd(to_array(inner)));
  const double d = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
  if (d < -1e-6 && warnings != nullptr) {
    warnings->push_back("frechet_distance: clamped negative value " + kv::format_double(d) + " to 0");
  }
  return std::max(0.0, d);
}

double fid_from_embeddings(const Array& a, const Array& b, std::vector<std::string>* warnings) {
  const GaussianSummary sa = summarize(a), sb = summarize(b);
  if (warnings != nullptr && (sa.n < sa.dim() || sb.n < sb.dim())) {
    warnings->push_back("fid: " + std::to_string(std::min(sa.n, sb.n)) + " samples for " +
                        std::to_string(sa.dim()) + " embedding dimensions; covariance is rank deficient");
  }
  return frechet_distance(sa, sb, warnings);
}

double fid(const Array& real_images, const Array& synth_images, const Embedder& embedder,
           std::vector<std::string>* warnings) {
  return fid_from_embeddings(embedder(real_images), embedder(synth_images), warnings);
}

// ------------------------------------------------------ Split FID table

std::vector<SplitFidRow> split_fid_table(const Array& embeddings, const LabelTable& table, std::uint64_t seed,
                                         int min_subset) {
  if (embeddings.rank() != 2 || embeddings.dim(0) != static_cast<int>(table.records.size())) {
    throw ShapeError("split_fid_table: embeddings must have one row per record");
  }
  min_subset = std::max(min_subset, 2);
  auto row = [&](const std::string& name, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    SplitFidRow r{name, std::nullopt, static_cast<int>(a.size()), static_cast<int>(b.size())};
    if (r.n_a >= min_subset && r.n_b >= min_subset) {
      r.fid = fid_from_embeddings(gather_rows(embeddings, a), gather_rows(embeddings, b));
    }
    return r;
  };

  std::vector<std::size_t> baseline;
  for (std::size_t i = 0; i < table.records.size(); ++i) {
    if (table.records[i].no_finding()) baseline.push_back(i);
  }
  std::vector<SplitFidRow> rows;
  SplitFidRow nf{kNoFinding, std::nullopt, static_cast<int>(baseline.size()), static_cast<int>(baseline.size())};
  if (nf.n_a >= min_subset) nf.fid = 0.0;
  rows.push_back(nf);
  for (int k = 0; k < table.num_classes(); ++k) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < table.records.size(); ++i) {
      if (table.records[i].labels[static_cast<std::size_t>(k)] != 0) members.push_back(i);
    }
    rows.push_back(row(table.classes[static_cast<std::size_t>(k)], members, baseline));
  }

  std::vector<std::size_t> male, female;
  for (std::size_t i = 0; i < table.records.size(); ++i) {
    if (table.records[i].sex == "M") male.push_back(i);
    if (table.records[i].sex == "F") female.push_back(i);
  }
  if (!male.empty() || !female.empty()) rows.push_back(row("Sex", male, female));

  const std::vector<PatientRecord> patients = group_patients(table);
  if (patients.size() >= 2) {
    const SplitAssignment halves = iterative_stratify(patients, SplitSpec{{"a", "b"}, {0.5, 0.5}}, seed);
    const auto by_image = table.index_by_image();
    std::vector<std::size_t> side[2];
    for (std::size_t p = 0; p < patients.size(); ++p) {
      for (const auto& id : patients[p].image_ids) {
        side[halves.split_of[p]].push_back(by_image.at(id));
      }
    }
    for (auto& s : side) std::sort(s.begin(), s.end());
    rows.push_back(row("Stratified", side[0], side[1]));
  }
  return rows;
}

std::string split_fid_csv(const std::vector<SplitFidRow>& rows) {
  std::ostringstream os;
  os << "split,fid,n_split,n_reference\n";
  for (const auto& r : rows) {
    os << r.name << ',' << (r.fid ? kv::format_double(*r.fid) : std::string("insufficient")) << ',' << r.n_a << ','
       << r.n_b << '\n';
  }
  return os.str();
}

std::string split_fid_text(const std::vector<SplitFidRow>& rows) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream os;
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  os << pad("Split") << "  FID\n";
  for (const auto& r : rows) {
    std::string value = "insufficient";
    if (r.fid) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.2f", *r.fid);
      value = buf;
    }
    os << pad(r.name) << "  " << value << '\n';
  }
  return os.str();
}

// ------------------------------------------------------------ Prevalence

std::string PrevalenceReport::csv() const {
  std::ostringstream os;
  os << "class,point,lo,hi,n\n";
  for (std::size_t k = 0; k < classes.size(); ++k) {
    os << classes[k] << ',' << kv::format_double(point[k]) << ',' << kv::format_double(lo[k]) << ','
       << kv::format_double(hi[k]) << ',' << n_images << '\n';
  }
  return os.str();
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return frac == 0.0 ? sorted[lo] : sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

PrevalenceReport prevalence_bootstrap(const Array& labels, const std::vector<std::string>& classes, int n_boot,
                                      std::uint64_t seed, double level) {
  if (labels.rank() != 2 || labels.dim(1) != static_cast<int>(classes.size())) {
    throw ShapeError("prevalence_bootstrap: labels must be [N, classes]");
  }
  if (labels.dim(0) < 1) throw DataError("prevalence_bootstrap: no labels");
  if (n_boot < 1) throw ConfigError("prevalence_bootstrap: n_boot must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("prevalence_bootstrap: level must be in (0,1)");
  const std::size_t n = static_cast<std::size_t>(labels.dim(0)), k = classes.size();

  PrevalenceReport r;
  r.classes = classes;
  r.n_images = static_cast<int>(n);
  r.n_bootstrap = n_boot;
  r.point.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) r.point[j] += labels[i * k + j];
  for (auto& p : r.point) p /= static_cast<double>(n);

  std::vector<std::vector<double>> means(k, std::vector<double>(static_cast<std::size_t>(n_boot)));
  const Rng root(seed);
  std::vector<double> acc(k);
  for (int b = 0; b < n_boot; ++b) {
    Rng rng = root.split("replicate", static_cast<std::uint64_t>(b));
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = labels.raw() + rng.below(n) * k;
      for (std::size_t j = 0; j < k; ++j) acc[j] += row[j];
    }
    for (std::size_t j = 0; j < k; ++j) means[j][static_cast<std::size_t>(b)] = acc[j] / static_cast<double>(n);
  }
  for (std::size_t j = 0; j < k; ++j) {
    std::sort(means[j].begin(), means[j].end());
    // Clamp so that lo <= point <= hi holds even when round-off nudges a bound.
    r.lo.push_back(std::min(quantile_sorted(means[j], 0.5 * (1.0 - level)), r.point[j]));
    r.hi.push_back(std::max(quantile_sorted(means[j], 0.5 * (1.0 + level)), r.point[j]));
  }
  return r;
}

Array binarize(const Array& probs, double threshold) {
  Array out(probs.shape());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= threshold ? 1.0 : 0.0;
  return out;
}

LabelSets label_sets(const Classifier& classifier, const Array& real_images, const Array& synth_images,
                     double threshold, bool soft) {
  LabelSets s{classifier.classify(real_images), classifier.classify(synth_images)};
  if (!soft) {
    s.real = binarize(s.real, threshold);
    s.synth = binarize(s.synth, threshold);
  }
  return s;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw DataError("spearman: need two vectors of equal length >= 2");
  const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) throw DataError("spearman: undefined for a constant vector");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace cxrgan
