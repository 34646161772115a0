// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cxrgan/dataio.h"

namespace cxrgan {

/// Procedurally rendered chest-like images with exact labels: a thorax
/// ellipse, two lung fields with rib bands, mediastinum and heart shadows.
/// Each pathology class adds one visual primitive, so a label is set if and
/// only if its primitive was drawn.

/// Pathology names in the order phantom classes are taken (class k of a
/// K-class corpus is entry k).
const std::vector<std::string>& phantom_class_order();

/// Linearly decreasing prevalences from 0.35 to 0.10.
std::vector<double> default_phantom_prevalences(int classes);

struct PhantomConfig {
  int patients = 500;
  int classes = 5;
  std::vector<double> prevalences;  // empty: default_phantom_prevalences(classes)
  int resolution = 64;
  int max_images_per_patient = 2;
  /// Raises Effusion to at least 0.6 among Cardiomegaly-positive images.
  bool correlated = false;
  double noise = 0.02;
  std::uint64_t seed = 0;

  std::vector<std::string> validate() const;
};

/// Per-patient anatomy; shared by all of a patient's images.
struct PhantomAnatomy {
  double shift_x = 0.0, shift_y = 0.0;
  double width = 1.0;      // thorax width factor; narrower for "F"
  double heart = 1.0;      // heart size factor
  double contrast = 1.0;   // global intensity factor
  double rib_phase = 0.0;
  bool female = false;

  static PhantomAnatomy sample(Rng rng, bool female);
};

/// Renders one image. `labels` follows phantom_class_order() and may be
/// shorter than the full order. Lesion placement and noise come from rng.
GrayImage render_phantom(const PhantomAnatomy& anatomy, const std::vector<std::uint8_t>& labels, int resolution,
                         double noise, Rng rng);

struct Corpus {
  LabelTable table;
  std::vector<GrayImage> images;  // parallel to table.records
};

Corpus make_phantom(const PhantomConfig& config);

/// Writes DIR/images/<patient>/<image>, DIR/labels.csv (label CSV format) and
/// DIR/ground_truth.csv (one 0/1 column per class).
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
std::string ground_truth_csv(const Corpus& corpus);

/// Reads DIR/labels.csv and the images it names from DIR/images/<patient>/
/// or, failing that, DIR/images/. With no `classes` given, the class list
/// comes from DIR/ground_truth.csv when present and is otherwise the
/// fourteen NIH pathologies.
Corpus read_corpus(const std::filesystem::path& dir, const std::vector<std::string>& classes = {});

}  // namespace cxrgan
