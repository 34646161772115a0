// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cxrgan/dataio.h"
#include "cxrgan/rng.h"

namespace cxrgan::testing {

// Independent deviation oracle for the brute-force search.
inline double oracle_deviation(const std::vector<PatientRecord>& ps, const std::vector<int>& split, int splits) {
  const std::size_t k = ps[0].avg_labels.size();
  double worst = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double g = 0.0;
    for (const auto& p : ps) g += p.avg_labels[c];
    g /= static_cast<double>(ps.size());
    for (int j = 0; j < splits; ++j) {
      double s = 0.0;
      int n = 0;
      for (std::size_t i = 0; i < ps.size(); ++i) {
        if (split[i] == j) {
          s += ps[i].avg_labels[c];
          ++n;
        }
      }
      if (n > 0) worst = std::max(worst, std::abs(s / n - g));
    }
  }
  return worst;
}

// Fourteen classes with prevalences from 10% down to 0.5%, several images per patient.
inline std::vector<PatientRecord> nih_like_patients(int n, std::uint64_t seed) {
  std::vector<double> prev(14);
  for (int k = 0; k < 14; ++k) prev[static_cast<std::size_t>(k)] = 0.10 - (0.10 - 0.005) * k / 13.0;
  Rng rng(seed);
  LabelTable t;
  t.classes = nih_pathologies();
  for (int p = 0; p < n; ++p) {
    const int images = 1 + static_cast<int>(rng.below(3));
    for (int i = 0; i < images; ++i) {
      ImageRecord r;
      r.patient_id = "p" + std::to_string(p);
      r.image_id = r.patient_id + "_" + std::to_string(i);
      for (double q : prev) r.labels.push_back(rng.uniform() < q ? 1 : 0);
      t.records.push_back(r);
    }
  }
  return group_patients(t);
}

}  // namespace cxrgan::testing
