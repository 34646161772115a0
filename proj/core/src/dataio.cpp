// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/dataio.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cxrgan/checkpoint.h"
#include "cxrgan/error.h"

namespace cxrgan {
namespace {

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

const std::vector<std::string>& nih_pathologies() {
  static const std::vector<std::string> names = {
      "Atelectasis", "Cardiomegaly", "Consolidation", "Edema",  "Effusion",           "Emphysema", "Fibrosis",
      "Hernia",      "Infiltration", "Mass",          "Nodule", "Pleural_Thickening", "Pneumonia", "Pneumothorax"};
  return names;
}

bool ImageRecord::no_finding() const {
  return std::all_of(labels.begin(), labels.end(), [](std::uint8_t v) { return v == 0; });
}

Array LabelTable::label_matrix() const {
  const int n = static_cast<int>(records.size());
  const int k = num_classes();
  Array out({std::max(n, 1), std::max(k, 1)});
  if (n == 0 || k == 0) return Array();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(i * k + j)] = records[static_cast<std::size_t>(i)].labels[static_cast<std::size_t>(j)];
  }
  return out;
}

Array LabelTable::label_matrix_with_no_finding() const {
  const int n = static_cast<int>(records.size());
  const int k = num_classes() + 1;
  if (n == 0) return Array();
  Array out({n, k});
  for (int i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    for (int j = 0; j + 1 < k; ++j) out[static_cast<std::size_t>(i * k + j)] = r.labels[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(i * k + k - 1)] = r.no_finding() ? 1.0 : 0.0;
  }
  return out;
}

std::map<std::string, std::size_t> LabelTable::index_by_image() const {
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) out[records[i].image_id] = i;
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c != '"') {
        out.back() += c;
      } else if (i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else {
        quoted = false;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  if (quoted) throw DataError("malformed CSV quoting: unterminated quoted field");
  return out;
}

LabelTable parse_label_csv(const std::string& text, const std::vector<std::string>& classes,
                           const std::string& source) {
  std::unordered_map<std::string, int> class_index;
  for (std::size_t i = 0; i < classes.size(); ++i) class_index[classes[i]] = static_cast<int>(i);

  LabelTable table;
  table.classes = classes;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  int col_image = -1, col_labels = -1, col_patient = -1, col_sex = -1;
  std::size_t header_width = 0;
  std::set<std::string> seen_ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (strip(line).empty()) continue;
    const auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };
    std::vector<std::string> fields;
    try {
      fields = split_csv_line(line);
    } catch (const DataError& e) {
      throw DataError(where() + e.what());
    }
    if (col_image < 0) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const std::string h = strip(fields[i]);
        if (h == "Image Index") col_image = static_cast<int>(i);
        if (h == "Finding Labels") col_labels = static_cast<int>(i);
        if (h == "Patient ID") col_patient = static_cast<int>(i);
        if (h == "Patient Gender") col_sex = static_cast<int>(i);
      }
      if (col_image < 0 || col_labels < 0) {
        throw DataError(where() + "header must contain 'Image Index' and 'Finding Labels'");
      }
      header_width = fields.size();
      continue;
    }
    if (fields.size() < header_width) {
      throw DataError(where() + "expected " + std::to_string(header_width) + " fields, found " +
                      std::to_string(fields.size()));
    }
    ImageRecord r;
    r.image_id = strip(fields[static_cast<std::size_t>(col_image)]);
    if (r.image_id.empty()) throw DataError(where() + "empty image index");
    if (!seen_ids.insert(r.image_id).second) throw DataError(where() + "duplicate image index '" + r.image_id + "'");
    r.patient_id = col_patient >= 0 ? strip(fields[static_cast<std::size_t>(col_patient)]) : r.image_id;
    if (r.patient_id.empty()) throw DataError(where() + "empty patient id");
    if (col_sex >= 0) {
      r.sex = strip(fields[static_cast<std::size_t>(col_sex)]);
      if (!r.sex.empty() && r.sex != "M" && r.sex != "F") {
        throw DataError(where() + "patient gender must be M or F, got '" + r.sex + "'");
      }
    }
    r.labels.assign(classes.size(), 0);
    const std::string findings = strip(fields[static_cast<std::size_t>(col_labels)]);
    if (findings.empty()) throw DataError(where() + "empty finding labels");
    bool saw_no_finding = false;
    std::vector<std::string> unknown;
    std::stringstream fs(findings);
    std::string name;
    while (std::getline(fs, name, '|')) {
      name = strip(name);
      if (name == kNoFinding) {
        saw_no_finding = true;
        continue;
      }
      auto it = class_index.find(name);
      if (it == class_index.end()) {
        unknown.push_back(name);
        continue;
      }
      r.labels[static_cast<std::size_t>(it->second)] = 1;
    }
    if (!unknown.empty()) {
      std::string msg = where() + "unknown label(s):";
      for (const auto& u : unknown) msg += " '" + u + "'";
      throw DataError(msg);
    }
    if (saw_no_finding && !r.no_finding()) {
      throw DataError(where() + "'No Finding' combined with a pathology label");
    }
    table.records.push_back(std::move(r));
  }
  if (col_image < 0) throw DataError(source + ": missing header row");
  return table;
}

LabelTable read_label_csv(const std::filesystem::path& path, const std::vector<std::string>& classes) {
  const std::vector<char> bytes = read_file(path);
  return parse_label_csv(std::string(bytes.begin(), bytes.end()), classes, path.string());
}

std::string format_label_csv(const LabelTable& table) {
  std::string out = "Image Index,Finding Labels,Patient ID,Patient Gender\n";
  for (const auto& r : table.records) {
    std::string findings;
    for (std::size_t k = 0; k < r.labels.size(); ++k) {
      if (!r.labels[k]) continue;
      if (!findings.empty()) findings += "|";
      findings += table.classes[k];
    }
    if (findings.empty()) findings = kNoFinding;
    out += csv_field(r.image_id) + "," + csv_field(findings) + "," + csv_field(r.patient_id) + "," +
           csv_field(r.sex) + "\n";
  }
  return out;
}

// ---------------------------------------------------------- Patients

std::vector<PatientRecord> group_patients(const LabelTable& table) {
  std::vector<PatientRecord> out;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<double>> sums;
  for (const auto& r : table.records) {
    auto [it, inserted] = index.try_emplace(r.patient_id, out.size());
    if (inserted) {
      out.push_back({r.patient_id, r.sex, {}, {}});
      sums.emplace_back(table.classes.size(), 0.0);
    }
    PatientRecord& p = out[it->second];
    p.image_ids.push_back(r.image_id);
    if (p.sex.empty()) p.sex = r.sex;
    for (std::size_t k = 0; k < r.labels.size(); ++k) sums[it->second][k] += r.labels[k];
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double n = static_cast<double>(out[i].image_ids.size());
    out[i].avg_labels.resize(sums[i].size());
    for (std::size_t k = 0; k < sums[i].size(); ++k) out[i].avg_labels[k] = sums[i][k] / n;
  }
  return out;
}

// ------------------------------------------------------ Stratification

std::vector<std::size_t> SplitAssignment::members(int split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split_of.size(); ++i) {
    if (split_of[i] == split) out.push_back(i);
  }
  return out;
}

std::string SplitAssignment::manifest_csv(const std::vector<PatientRecord>& patients) const {
  std::string out = "patient_id,split\n";
  for (std::size_t i = 0; i < patients.size(); ++i) {
    out += csv_field(patients[i].patient_id) + "," + split_names[static_cast<std::size_t>(split_of[i])] + "\n";
  }
  return out;
}

std::vector<int> split_sizes(int n, const std::vector<double>& fractions) {
  const int s = static_cast<int>(fractions.size());
  if (s < 1) throw ConfigError("at least one split is required");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  if (n < s) {
    throw ConfigError("need at least one patient per split: " + std::to_string(n) + " patients for " +
                      std::to_string(s) + " splits");
  }
  std::vector<int> sizes(static_cast<std::size_t>(s));
  std::vector<std::pair<double, int>> rem;
  int used = 0;
  for (int j = 0; j < s; ++j) {
    const double exact = fractions[static_cast<std::size_t>(j)] * n;
    sizes[static_cast<std::size_t>(j)] = static_cast<int>(std::floor(exact));
    used += sizes[static_cast<std::size_t>(j)];
    rem.emplace_back(exact - std::floor(exact), j);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; used < n; ++i, ++used) ++sizes[static_cast<std::size_t>(rem[static_cast<std::size_t>(i % s)].second)];
  // Every split gets at least one patient, taken from the largest.
  for (int j = 0; j < s; ++j) {
    while (sizes[static_cast<std::size_t>(j)] < 1) {
      auto big = std::max_element(sizes.begin(), sizes.end());
      --*big;
      ++sizes[static_cast<std::size_t>(j)];
    }
  }
  return sizes;
}

namespace {

// Per-split label sums and member counts; evaluates the deviation objective.
struct SplitStats {
  int splits = 0, classes = 0;
  std::vector<double> sum;  // [split][class]
  std::vector<int> count;
  std::vector<double> global;

  SplitStats(const std::vector<PatientRecord>& patients, const std::vector<int>& split_of, int s)
      : splits(s), classes(patients.empty() ? 0 : static_cast<int>(patients[0].avg_labels.size())) {
    sum.assign(static_cast<std::size_t>(splits * classes), 0.0);
    count.assign(static_cast<std::size_t>(splits), 0);
    global.assign(static_cast<std::size_t>(classes), 0.0);
    for (std::size_t i = 0; i < patients.size(); ++i) {
      add(patients[i], split_of[i], 1.0);
      for (int k = 0; k < classes; ++k) global[static_cast<std::size_t>(k)] += patients[i].avg_labels[static_cast<std::size_t>(k)];
    }
    for (auto& g : global) g /= static_cast<double>(patients.size());
  }

  void add(const PatientRecord& p, int split, double sign) {
    for (int k = 0; k < classes; ++k) sum[static_cast<std::size_t>(split * classes + k)] += sign * p.avg_labels[static_cast<std::size_t>(k)];
    count[static_cast<std::size_t>(split)] += sign > 0 ? 1 : -1;
  }

  // (max deviation, sum of squared deviations) for lexicographic comparison.
  std::pair<double, double> objective() const {
    double worst = 0.0, sq = 0.0;
    for (int j = 0; j < splits; ++j) {
      const int c = count[static_cast<std::size_t>(j)];
      if (c == 0) continue;
      for (int k = 0; k < classes; ++k) {
        const double d = sum[static_cast<std::size_t>(j * classes + k)] / c - global[static_cast<std::size_t>(k)];
        worst = std::max(worst, std::abs(d));
        sq += d * d;
      }
    }
    return {worst, sq};
  }
};

bool better(const std::pair<double, double>& a, const std::pair<double, double>& b) {
  constexpr double kTol = 1e-15;
  if (a.first < b.first - kTol) return true;
  if (a.first > b.first + kTol) return false;
  return a.second < b.second - kTol;
}

}  // namespace

double max_class_deviation(const std::vector<PatientRecord>& patients, const std::vector<int>& split_of,
                           int num_splits) {
  if (patients.empty()) return 0.0;
  return SplitStats(patients, split_of, num_splits).objective().first;
}

SplitAssignment iterative_stratify(const std::vector<PatientRecord>& patients, const SplitSpec& spec,
                                   std::uint64_t seed) {
  if (spec.names.size() != spec.fractions.size()) throw ConfigError("split names and fractions differ in length");
  const int n = static_cast<int>(patients.size());
  const int s = static_cast<int>(spec.names.size());
  std::vector<int> capacity = split_sizes(n, spec.fractions);
  const int k = static_cast<int>(patients[0].avg_labels.size());
  for (const auto& p : patients) {
    if (static_cast<int>(p.avg_labels.size()) != k) throw DataError("patients disagree on the number of classes");
  }

  // Seeded order decides between patients that tie on a label value.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).split("stratify_order");
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[static_cast<std::size_t>(i)], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  }

  std::vector<double> remaining_mass(static_cast<std::size_t>(k), 0.0);
  for (const auto& p : patients) {
    for (int c = 0; c < k; ++c) remaining_mass[static_cast<std::size_t>(c)] += p.avg_labels[static_cast<std::size_t>(c)];
  }
  std::vector<double> desire(static_cast<std::size_t>(s * k));
  for (int j = 0; j < s; ++j) {
    for (int c = 0; c < k; ++c) {
      desire[static_cast<std::size_t>(j * k + c)] = spec.fractions[static_cast<std::size_t>(j)] * remaining_mass[static_cast<std::size_t>(c)];
    }
  }

  SplitAssignment out;
  out.split_names = spec.names;
  out.split_of.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> assigned(static_cast<std::size_t>(s), 0);

  auto pick_split = [&](int label) {
    int best = -1;
    for (int j = 0; j < s; ++j) {
      if (capacity[static_cast<std::size_t>(j)] == 0) continue;
      if (best < 0) {
        best = j;
        continue;
      }
      const double dj = label >= 0 ? desire[static_cast<std::size_t>(j * k + label)] : capacity[static_cast<std::size_t>(j)];
      const double db = label >= 0 ? desire[static_cast<std::size_t>(best * k + label)] : capacity[static_cast<std::size_t>(best)];
      if (dj > db) {
        best = j;
      } else if (dj == db) {
        if (assigned[static_cast<std::size_t>(j)] < assigned[static_cast<std::size_t>(best)] ||
            (assigned[static_cast<std::size_t>(j)] == assigned[static_cast<std::size_t>(best)] &&
             spec.names[static_cast<std::size_t>(j)] < spec.names[static_cast<std::size_t>(best)])) {
          best = j;
        }
      }
    }
    return best;
  };

  auto place = [&](int i, int j) {
    out.split_of[static_cast<std::size_t>(i)] = j;
    --capacity[static_cast<std::size_t>(j)];
    ++assigned[static_cast<std::size_t>(j)];
    for (int c = 0; c < k; ++c) {
      const double v = patients[static_cast<std::size_t>(i)].avg_labels[static_cast<std::size_t>(c)];
      desire[static_cast<std::size_t>(j * k + c)] -= v;
      remaining_mass[static_cast<std::size_t>(c)] -= v;
    }
  };

  for (int placed = 0; placed < n; ++placed) {
    // Rarest label among unassigned patients (smallest positive remaining mass).
    int label = -1;
    for (int c = 0; c < k; ++c) {
      const double m = remaining_mass[static_cast<std::size_t>(c)];
      if (m > 1e-12 && (label < 0 || m < remaining_mass[static_cast<std::size_t>(label)])) label = c;
    }
    int chosen = -1;
    for (int i : order) {
      if (out.split_of[static_cast<std::size_t>(i)] >= 0) continue;
      if (label < 0) {
        chosen = i;
        break;
      }
      const double v = patients[static_cast<std::size_t>(i)].avg_labels[static_cast<std::size_t>(label)];
      if (v > 0 && (chosen < 0 || v > patients[static_cast<std::size_t>(chosen)].avg_labels[static_cast<std::size_t>(label)])) {
        chosen = i;
      }
    }
    if (chosen < 0) {  // remaining mass was round-off only
      label = -1;
      for (int i : order) {
        if (out.split_of[static_cast<std::size_t>(i)] < 0) {
          chosen = i;
          break;
        }
      }
    }
    place(chosen, pick_split(label));
  }

  // Swap refinement: exchange patients between splits while the worst
  // deviation (then the squared total) improves. Sizes are preserved.
  SplitStats stats(patients, out.split_of, s);
  auto current = stats.objective();
  for (int pass = 0; pass < 50; ++pass) {
    bool improved = false;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        const int ja = out.split_of[static_cast<std::size_t>(a)];
        const int jb = out.split_of[static_cast<std::size_t>(b)];
        if (ja == jb) continue;
        const auto& pa = patients[static_cast<std::size_t>(a)];
        const auto& pb = patients[static_cast<std::size_t>(b)];
        stats.add(pa, ja, -1);
        stats.add(pb, jb, -1);
        stats.add(pa, jb, 1);
        stats.add(pb, ja, 1);
        const auto trial = stats.objective();
        if (better(trial, current)) {
          current = trial;
          out.split_of[static_cast<std::size_t>(a)] = jb;
          out.split_of[static_cast<std::size_t>(b)] = ja;
          improved = true;
        } else {
          stats.add(pa, jb, -1);
          stats.add(pb, ja, -1);
          stats.add(pa, ja, 1);
          stats.add(pb, jb, 1);
        }
      }
    }
    if (!improved) break;
  }
  return out;
}

}  // namespace cxrgan
