// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cxrgan/array.h"
#include "cxrgan/rng.h"

namespace cxrgan {

// ------------------------------------------------------------ Labels

/// The fourteen ChestX-ray14 pathology names as spelled in the label CSV.
const std::vector<std::string>& nih_pathologies();
inline constexpr const char* kNoFinding = "No Finding";

struct ImageRecord {
  std::string image_id;
  std::string patient_id;
  std::string sex;                    // "M", "F" or empty when unknown
  std::vector<std::uint8_t> labels;   // one 0/1 entry per class of the table

  /// True when no pathology is present ("No Finding").
  bool no_finding() const;
};

/// Records over a fixed class vocabulary. "No Finding" is not a class; it is
/// the all-zero label vector.
struct LabelTable {
  std::vector<std::string> classes;
  std::vector<ImageRecord> records;

  int num_classes() const { return static_cast<int>(classes.size()); }
  /// [N, K] 0/1 matrix in record order.
  Array label_matrix() const;
  /// [N, K + 1] with a trailing "No Finding" column.
  Array label_matrix_with_no_finding() const;
  std::map<std::string, std::size_t> index_by_image() const;
};

/// Parses an NIH-format label CSV: a header row with "Image Index" and
/// "Finding Labels" (pipe-separated class names), optionally "Patient ID"
/// and "Patient Gender". Without a patient column every image is its own
/// patient. Unknown class names and "No Finding" combined with a pathology
/// are errors.
LabelTable parse_label_csv(const std::string& text, const std::vector<std::string>& classes,
                           const std::string& source = "<label csv>");
LabelTable read_label_csv(const std::filesystem::path& path, const std::vector<std::string>& classes);
std::string format_label_csv(const LabelTable& table);

/// Splits one CSV line into fields (RFC 4180 quoting).
std::vector<std::string> split_csv_line(const std::string& line);

// ---------------------------------------------------------- Patients

struct PatientRecord {
  std::string patient_id;
  std::string sex;
  std::vector<std::string> image_ids;
  std::vector<double> avg_labels;  // mean of the binary labels over the patient's images
};

/// One record per patient, in order of first appearance.
std::vector<PatientRecord> group_patients(const LabelTable& table);

// ------------------------------------------------------ Stratification

struct SplitSpec {
  std::vector<std::string> names{"train", "validation", "test"};
  std::vector<double> fractions{0.7, 0.1, 0.2};
};

struct SplitAssignment {
  std::vector<std::string> split_names;
  std::vector<int> split_of;  // parallel to the patient list

  std::vector<std::size_t> members(int split) const;
  std::string manifest_csv(const std::vector<PatientRecord>& patients) const;
};

/// Split sizes: largest-remainder rounding of fraction * n, each at least 1.
std::vector<int> split_sizes(int n, const std::vector<double>& fractions);

/// Greedy iterative stratification on average patient labels followed by a
/// pairwise-swap pass that lowers the worst per-class deviation. Split sizes
/// follow split_sizes(). The seed only orders patients that tie.
SplitAssignment iterative_stratify(const std::vector<PatientRecord>& patients, const SplitSpec& spec,
                                   std::uint64_t seed);

/// max over splits and classes of |split mean - global mean| of avg_labels.
double max_class_deviation(const std::vector<PatientRecord>& patients, const std::vector<int>& split_of,
                           int num_splits);

// ------------------------------------------------------------ Images

/// 8-bit grayscale image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

GrayImage read_png(const std::filesystem::path& path);
/// Atomic write; creates parent directories.
void write_png(const GrayImage& image, const std::filesystem::path& path);
std::vector<char> encode_png(const GrayImage& image);
GrayImage decode_png(const std::vector<char>& bytes, const std::string& source = "<png>");

/// Pixel p maps to p / 127.5 - 1 in [-1, 1].
double pixel_to_unit(std::uint8_t p);
/// Clamps to [-1, 1] and rounds to the nearest 8-bit level.
std::uint8_t unit_to_pixel(double v);

/// Stacks square images of equal size into [N, 1, R, R] in [-1, 1].
Array images_to_array(const std::vector<GrayImage>& images);
GrayImage array_to_image(const Array& batch, int index);
/// Tiles a batch [N, 1, R, R] into a grid with `cols` columns.
GrayImage image_grid(const Array& batch, int cols);

/// Mean-pools a square image down to `resolution` (a power-of-two divisor).
GrayImage resize_down(const GrayImage& image, int resolution);

// ------------------------------------------------------ Augmentation

struct AugmentConfig {
  double max_rotation_deg = 10.0;
  double flip_prob = 0.5;
  double brightness = 0.1;
  double contrast = 0.1;
  double saturation = 0.1;  // accepted for parity with RGB pipelines; no effect on grayscale
  double hue = 0.1;         // likewise

  static AugmentConfig none();
};

/// Rotation uniform in [-max, max] degrees about the centre (bilinear,
/// reflect padding), horizontal flip with flip_prob, then brightness and
/// contrast factors uniform in [1 - b, 1 + b]. Values are clamped to
/// [lo, hi]. Draw order is fixed, so a given rng always yields the same
/// transform.
void augment_plane(std::span<double> plane, int size, double lo, double hi, const AugmentConfig& config, Rng rng);
GrayImage augment(const GrayImage& image, const AugmentConfig& config, std::uint64_t seed);

}  // namespace cxrgan
