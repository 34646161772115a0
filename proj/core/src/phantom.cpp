// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/phantom.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cxrgan/checkpoint.h"
#include "cxrgan/error.h"

namespace cxrgan {
namespace {

enum Pathology {
  kCardiomegaly,
  kEffusion,
  kMass,
  kNodule,
  kPneumothorax,
  kAtelectasis,
  kConsolidation,
  kEdema,
  kEmphysema,
  kFibrosis,
  kHernia,
  kInfiltration,
  kPleuralThickening,
  kPneumonia,
  kPathologyCount
};

double smoothstep(double edge, double width, double x) {
  const double t = std::clamp((x - edge) / width + 0.5, 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

// Normalized ellipse radius: < 1 inside.
double ellipse(double u, double v, double cu, double cv, double ru, double rv) {
  const double a = (u - cu) / ru, b = (v - cv) / rv;
  return std::sqrt(a * a + b * b);
}

struct Lesion {
  double u = 0, v = 0, r = 0;
};

// Where lesions may sit: mid and upper lung fields of either side.
Lesion place_lesion(Rng& rng, double radius, double width) {
  const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
  return {side * width * rng.uniform(0.28, 0.46), rng.uniform(-0.45, 0.05), radius};
}

}  // namespace

const std::vector<std::string>& phantom_class_order() {
  static const std::vector<std::string> order = {
      "Cardiomegaly", "Effusion", "Mass",     "Nodule", "Pneumothorax",       "Atelectasis", "Consolidation",
      "Edema",        "Emphysema", "Fibrosis", "Hernia", "Infiltration", "Pleural_Thickening", "Pneumonia"};
  return order;
}

std::vector<double> default_phantom_prevalences(int classes) {
  std::vector<double> p(static_cast<std::size_t>(std::max(classes, 0)));
  for (int k = 0; k < classes; ++k) p[static_cast<std::size_t>(k)] = classes == 1 ? 0.35 : 0.35 - 0.25 * k / (classes - 1);
  return p;
}

std::vector<std::string> PhantomConfig::validate() const {
  std::vector<std::string> errors;
  if (patients < 1) errors.push_back("patients must be >= 1");
  if (classes < 1 || classes > kPathologyCount) {
    errors.push_back("classes must lie in [1," + std::to_string(kPathologyCount) + "]");
  }
  if (!prevalences.empty() && static_cast<int>(prevalences.size()) != classes) {
    errors.push_back("prevalences must list one value per class");
  }
  for (double p : prevalences) {
    if (!(p >= 0.0 && p < 1.0)) {
      errors.push_back("prevalences must lie in [0,1)");
      break;
    }
  }
  if (resolution < 4 || (resolution & (resolution - 1)) != 0) {
    errors.push_back("resolution must be 4 * 2^k, got " + std::to_string(resolution));
  }
  if (max_images_per_patient < 1) errors.push_back("max_images_per_patient must be >= 1");
  if (!(noise >= 0.0)) errors.push_back("noise must be >= 0");
  return errors;
}

PhantomAnatomy PhantomAnatomy::sample(Rng rng, bool female) {
  PhantomAnatomy a;
  a.female = female;
  a.shift_x = rng.uniform(-0.04, 0.04);
  a.shift_y = rng.uniform(-0.04, 0.04);
  a.width = (female ? 0.9 : 1.0) * rng.uniform(0.95, 1.05);
  a.heart = rng.uniform(0.9, 1.1);
  a.contrast = rng.uniform(0.92, 1.08);
  a.rib_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return a;
}

GrayImage render_phantom(const PhantomAnatomy& an, const std::vector<std::uint8_t>& labels, int resolution,
                         double noise, Rng rng) {
  auto has = [&](int k) { return static_cast<std::size_t>(k) < labels.size() && labels[static_cast<std::size_t>(k)] != 0; };
  const double w = an.width;

  // Per-image primitive parameters, drawn in a fixed order.
  Rng place = rng.split("lesions");
  const Lesion mass = place_lesion(place, 0.15, w);
  const Lesion nodule = place_lesion(place, 0.065, w);
  const Lesion consolidation = place_lesion(place, 0.24, w);
  const Lesion pneumonia = place_lesion(place, 0.26, w);
  std::vector<Lesion> infiltrates;
  for (int i = 0; i < 5; ++i) infiltrates.push_back(place_lesion(place, 0.055, w));
  const double pneumo_side = place.bernoulli(0.5) ? 1.0 : -1.0;
  const double effusion_level = place.uniform(0.15, 0.3);
  const double atelectasis_level = place.uniform(0.2, 0.35);

  const double lung_ru = 0.27 * w * (has(kEmphysema) ? 1.12 : 1.0);
  const double lung_rv = 0.62 * (has(kEmphysema) ? 1.08 : 1.0);
  const double lung_base = has(kEmphysema) ? 0.1 : 0.18;
  const double heart_scale = an.heart * (has(kCardiomegaly) ? 1.6 : 1.0);

  Rng pixel_noise = rng.split("noise");
  GrayImage img{resolution, resolution, std::vector<std::uint8_t>(static_cast<std::size_t>(resolution) * resolution)};
  for (int py = 0; py < resolution; ++py) {
    for (int px = 0; px < resolution; ++px) {
      const double u = (px + 0.5) / resolution * 2.0 - 1.0 - an.shift_x;
      const double v = (py + 0.5) / resolution * 2.0 - 1.0 - an.shift_y;

      double val = 0.08;
      const double thorax = ellipse(u, v, 0.0, 0.05, 0.86 * w, 0.92);
      val += 0.37 * (1.0 - smoothstep(1.0, 0.08, thorax));
      if (an.female) {
        for (double s : {-1.0, 1.0}) val += 0.07 * (1.0 - smoothstep(1.0, 0.2, ellipse(u, v, s * 0.42 * w, 0.55, 0.26, 0.18)));
      }

      // Lungs with rib bands.
      double lung_mask = 0.0;
      double side_of_lung = 0.0;
      for (double s : {-1.0, 1.0}) {
        const double e = ellipse(u, v, s * 0.38 * w, -0.05, lung_ru, lung_rv);
        const double m = 1.0 - smoothstep(1.0, 0.1, e);
        if (m > lung_mask) {
          lung_mask = m;
          side_of_lung = s;
        }
      }
      const double rib_freq = has(kEmphysema) ? 10.0 : 13.0;
      double lung_val = lung_base + 0.07 * std::max(0.0, std::sin(v * rib_freq * std::numbers::pi / 2 + an.rib_phase));
      if (has(kPneumothorax) && side_of_lung == pneumo_side) {
        const double lateral = std::abs(u - pneumo_side * 0.38 * w);
        if (u * pneumo_side > 0.38 * w - 0.05 || lateral < 0.02) lung_val = lateral < 0.02 ? 0.3 : 0.03;
      }
      if (has(kFibrosis) && v < 0.0) {
        if (std::sin(u * 45.0) * std::sin(v * 45.0) > 0.55) lung_val += 0.16;
      }
      if (has(kEdema)) {
        const double du = std::abs(u) - 0.18, dv = v - 0.0;
        lung_val += 0.24 * std::exp(-(du * du + dv * dv) / 0.07);
      }
      if (has(kPleuralThickening)) {
        const double e = ellipse(u, v, side_of_lung * 0.38 * w, -0.05, lung_ru, lung_rv);
        if (e > 0.82 && e < 1.0 && u * side_of_lung > 0.38 * w) lung_val += 0.24;
      }
      if (has(kEffusion) && v > effusion_level + 0.05 * std::abs(u)) lung_val = 0.55;
      if (has(kAtelectasis) && std::abs(v - atelectasis_level) < 0.04) lung_val += 0.26;
      auto blob = [&](const Lesion& l, double amp, double soft) {
        const double d = std::hypot(u - l.u, v - l.v) / l.r;
        return amp * (1.0 - smoothstep(1.0, soft, d));
      };
      if (has(kMass)) lung_val += blob(mass, 0.36, 0.15);
      if (has(kNodule)) lung_val += blob(nodule, 0.38, 0.2);
      if (has(kConsolidation)) lung_val += blob(consolidation, 0.28, 0.4);
      if (has(kPneumonia)) lung_val += blob(pneumonia, 0.26, 0.9);
      if (has(kInfiltration)) {
        for (const auto& l : infiltrates) lung_val += blob(l, 0.2, 0.5);
      }
      val = (1.0 - lung_mask) * val + lung_mask * lung_val;

      // Mediastinum, heart and diaphragm sit over the lungs.
      const double med = (1.0 - smoothstep(0.12, 0.04, std::abs(u))) * (1.0 - smoothstep(0.55, 0.08, v)) *
                         smoothstep(-0.85, 0.08, v);
      val = std::max(val, 0.55 * med);
      const double heart = ellipse(u, v, 0.08, 0.3, 0.22 * heart_scale, 0.19 * heart_scale);
      val = std::max(val, 0.63 * (1.0 - smoothstep(1.0, 0.08, heart)));
      const double dia = smoothstep(0.6, 0.06, v) * (1.0 - smoothstep(1.0, 0.08, thorax));
      val = std::max(val, 0.5 * dia);
      if (has(kHernia)) {
        const double d = ellipse(u, v, -0.05, 0.58, 0.13, 0.1);
        if (d < 1.0) val = d > 0.8 ? 0.75 : 0.15;
      }

      val = val * an.contrast + noise * pixel_noise.normal();
      img.pixels[static_cast<std::size_t>(py) * resolution + px] =
          static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(val, 0.0, 1.0)));
    }
  }
  return img;
}

Corpus make_phantom(const PhantomConfig& config) {
  if (auto errors = config.validate(); !errors.empty()) {
    std::string msg = "invalid phantom config:";
    for (const auto& e : errors) msg += " " + e + ";";
    throw ConfigError(msg);
  }
  const std::vector<double> prev =
      config.prevalences.empty() ? default_phantom_prevalences(config.classes) : config.prevalences;
  const auto& order = phantom_class_order();
  const int k = config.classes;
  const int effusion = 1, cardiomegaly = 0;

  Corpus out;
  out.table.classes.assign(order.begin(), order.begin() + k);
  const Rng root(config.seed);
  char buf[64];
  for (int p = 0; p < config.patients; ++p) {
    Rng prng = root.split("patient", static_cast<std::uint64_t>(p));
    const bool female = prng.bernoulli(0.5);
    const PhantomAnatomy anatomy = PhantomAnatomy::sample(prng.split("anatomy"), female);
    const int n_images = 1 + static_cast<int>(prng.below(static_cast<std::uint64_t>(config.max_images_per_patient)));
    std::snprintf(buf, sizeof buf, "%05d", p + 1);
    const std::string patient_id = buf;
    for (int i = 0; i < n_images; ++i) {
      Rng irng = prng.split("image", static_cast<std::uint64_t>(i));
      Rng lrng = irng.split("labels");
      ImageRecord r;
      std::snprintf(buf, sizeof buf, "%05d_%03d.png", p + 1, i);
      r.image_id = buf;
      r.patient_id = patient_id;
      r.sex = female ? "F" : "M";
      r.labels.assign(static_cast<std::size_t>(k), 0);
      for (int c = 0; c < k; ++c) {
        double pc = prev[static_cast<std::size_t>(c)];
        if (config.correlated && c == effusion && r.labels[cardiomegaly]) pc = std::max(pc, 0.6);
        r.labels[static_cast<std::size_t>(c)] = lrng.uniform() < pc ? 1 : 0;
      }
      out.images.push_back(render_phantom(anatomy, r.labels, config.resolution, config.noise, irng.split("render")));
      out.table.records.push_back(std::move(r));
    }
  }
  return out;
}

std::string ground_truth_csv(const Corpus& corpus) {
  std::string out = "image_id,patient_id,sex";
  for (const auto& c : corpus.table.classes) out += "," + c;
  out += "\n";
  for (const auto& r : corpus.table.records) {
    out += r.image_id + "," + r.patient_id + "," + r.sex;
    for (auto l : r.labels) out += l ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  for (std::size_t i = 0; i < corpus.images.size(); ++i) {
    const auto& r = corpus.table.records[i];
    write_png(corpus.images[i], dir / "images" / r.patient_id / r.image_id);
  }
  write_file_atomic(dir / "ground_truth.csv", ground_truth_csv(corpus));
  write_file_atomic(dir / "labels.csv", format_label_csv(corpus.table));
}

Corpus read_corpus(const std::filesystem::path& dir, const std::vector<std::string>& classes) {
  const std::filesystem::path labels = dir / "labels.csv";
  std::vector<std::string> vocab = classes;
  if (vocab.empty()) {
    const std::filesystem::path truth = dir / "ground_truth.csv";
    if (std::filesystem::exists(truth)) {
      const std::vector<char> bytes = read_file(truth);
      const std::string text(bytes.begin(), bytes.end());
      const auto header = split_csv_line(text.substr(0, text.find('\n')));
      if (header.size() < 4) throw DataError(truth.string() + ": header lists no classes");
      vocab.assign(header.begin() + 3, header.end());
    } else {
      vocab = nih_pathologies();
    }
  }
  Corpus out;
  out.table = read_label_csv(labels, vocab);
  out.images.reserve(out.table.records.size());
  for (const auto& r : out.table.records) {
    std::filesystem::path p = dir / "images" / r.patient_id / r.image_id;
    if (!std::filesystem::exists(p)) p = dir / "images" / r.image_id;
    if (!std::filesystem::exists(p)) throw DataError("image '" + r.image_id + "' listed in " + labels.string() + " not found");
    out.images.push_back(read_png(p));
  }
  return out;
}

}  // namespace cxrgan
