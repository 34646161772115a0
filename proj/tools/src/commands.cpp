// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "cxrgan/classifier.h"
#include "cxrgan/error.h"
#include "cxrgan/latentopt.h"
#include "cxrgan/metrics.h"
#include "cxrgan/phantom.h"
#include "cxrgan/training.h"

namespace fs = std::filesystem;

namespace cxrgan::cli {
namespace {

// ------------------------------------------------------------ Config

std::string join_errors(const std::vector<std::string>& errors) {
  std::string s;
  for (const auto& e : errors) s += (s.empty() ? "" : "; ") + e;
  return s;
}

/// Throws ConfigError listing every problem at once.
void check_config(const kv::Map& values, const std::vector<std::string>& known, std::vector<std::string> errors,
                  const std::vector<std::string>& invalid = {}) {
  kv::reject_unknown(values, known, errors);
  errors.insert(errors.end(), invalid.begin(), invalid.end());
  if (!errors.empty()) throw ConfigError(join_errors(errors));
}

std::vector<std::string> with(std::vector<std::string> keys, const std::vector<std::string>& more) {
  keys.insert(keys.end(), more.begin(), more.end());
  return keys;
}

void log_config(const Context& ctx, const std::string& command, const kv::Map& resolved) {
  ctx.err << "[" << command << "] resolved config:\n";
  for (const auto& [k, v] : resolved) ctx.err << "  " << k << " = " << v << '\n';
}

void write_config(const fs::path& out_dir, const kv::Map& resolved) {
  write_file_atomic(out_dir / "config.txt", kv::format(resolved));
}

/// Shortest round-trip text that always shows a decimal point or exponent.
std::string number(double v) {
  std::string s = kv::format_double(v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& x : out) {
    const auto b = x.find_first_not_of(" \t");
    const auto e = x.find_last_not_of(" \t");
    x = b == std::string::npos ? "" : x.substr(b, e - b + 1);
  }
  return out;
}

void require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

// ------------------------------------------------------------ Images

struct ImageSet {
  std::vector<std::string> ids;
  std::vector<GrayImage> images;
};

/// A corpus directory (labels.csv present), a directory of PNGs (searched
/// recursively, sorted by relative path) or a single PNG.
ImageSet read_image_set(const fs::path& path) {
  ImageSet set;
  if (!fs::exists(path)) throw DataError("'" + path.string() + "' does not exist");
  if (fs::is_directory(path) && fs::exists(path / "labels.csv")) {
    Corpus c = read_corpus(path);
    for (const auto& r : c.table.records) set.ids.push_back(r.image_id);
    set.images = std::move(c.images);
  } else if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
      return fs::relative(a, path).generic_string() < fs::relative(b, path).generic_string();
    });
    for (const auto& f : files) {
      set.ids.push_back(fs::relative(f, path).generic_string());
      set.images.push_back(read_png(f));
    }
  } else {
    set.ids.push_back(path.filename().string());
    set.images.push_back(read_png(path));
  }
  if (set.images.empty()) throw DataError("no PNG images found under '" + path.string() + "'");
  return set;
}

Array images_at(const std::vector<GrayImage>& images, int resolution) {
  std::vector<GrayImage> resized;
  resized.reserve(images.size());
  for (const auto& im : images) resized.push_back(resize_down(im, resolution));
  return images_to_array(resized);
}

void write_batch_pngs(const Array& batch, const fs::path& dir, const std::string& stem) {
  for (int i = 0; i < batch.dim(0); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%05d.png", stem.c_str(), i);
    write_png(array_to_image(batch, i), dir / name);
  }
}

// --------------------------------------------------------- Classifiers

const char* const kClassesMeta = "classifier.classes";

void save_classifier(const Classifier& net, const std::vector<std::string>& classes, const fs::path& path) {
  Checkpoint ckpt;
  net.save(ckpt);
  std::string joined;
  for (const auto& c : classes) joined += (joined.empty() ? "" : "|") + c;
  ckpt.set_meta(kClassesMeta, joined);
  ckpt.save(path);
}

struct LoadedClassifier {
  Classifier net;
  std::vector<std::string> classes;
};

LoadedClassifier load_classifier(const std::string& path) {
  if (!fs::exists(path)) throw DataError("classifier checkpoint '" + path + "' does not exist");
  const Checkpoint ckpt = Checkpoint::load(path);
  Classifier net = Classifier::load(ckpt);
  std::vector<std::string> classes;
  if (ckpt.has_meta(kClassesMeta)) classes = split_list(ckpt.meta(kClassesMeta), '|');
  if (static_cast<int>(classes.size()) != net.num_classes()) {
    classes.clear();
    for (int k = 0; k < net.num_classes(); ++k) classes.push_back("class" + std::to_string(k));
  }
  return {std::move(net), std::move(classes)};
}

LoadedGan load_gan_file(const std::string& path) {
  if (!fs::exists(path)) throw DataError("GAN checkpoint '" + path + "' does not exist");
  return load_gan(Checkpoint::load(path));
}

std::vector<std::string> corpus_classes(const fs::path& dir) {
  const fs::path truth = dir / "ground_truth.csv";
  if (!fs::exists(truth)) return nih_pathologies();
  const std::vector<char> bytes = read_file(truth);
  const std::string text(bytes.begin(), bytes.end());
  const auto header = split_csv_line(text.substr(0, text.find('\n')));
  if (header.size() < 4) throw DataError(truth.string() + ": header lists no classes");
  return {header.begin() + 3, header.end()};
}

std::vector<std::string> read_split_names(const kv::Map& config, std::vector<std::string>& errors) {
  std::string names = "train,validation,test";
  kv::get(config, "names", names, errors);
  return split_list(names, ',');
}

SplitAssignment read_manifest(const fs::path& path, const std::vector<PatientRecord>& patients,
                              const std::vector<std::string>& split_names) {
  const std::vector<char> bytes = read_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  std::getline(in, line);
  if (split_csv_line(line) != std::vector<std::string>{"patient_id", "split"}) {
    throw DataError(path.string() + ":1: expected header 'patient_id,split'");
  }
  std::map<std::string, int> split_of_patient;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const auto it = std::find(split_names.begin(), split_names.end(), f.size() == 2 ? f[1] : "");
    if (f.size() != 2 || it == split_names.end()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed manifest row");
    }
    split_of_patient[f[0]] = static_cast<int>(it - split_names.begin());
  }
  SplitAssignment a{split_names, {}};
  for (const auto& p : patients) {
    const auto it = split_of_patient.find(p.patient_id);
    if (it == split_of_patient.end()) throw DataError(path.string() + ": patient '" + p.patient_id + "' missing");
    a.split_of.push_back(it->second);
  }
  return a;
}

}  // namespace

kv::Map ConfigInput::resolve() const {
  kv::Map values;
  if (!file.empty()) values = kv::read_file(file);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    const kv::Map one = kv::parse(s);
    values.insert_or_assign(one.begin()->first, one.begin()->second);
  }
  for (const auto& [k, v] : flags) values.insert_or_assign(k, v);
  return values;
}

// ------------------------------------------------------------- phantom

void cmd_phantom(const Context& ctx, const std::string& out_dir, const kv::Map& config) {
  require_path(out_dir, "--out");
  PhantomConfig pc;
  std::vector<std::string> errors;
  kv::get(config, "patients", pc.patients, errors);
  kv::get(config, "classes", pc.classes, errors);
  kv::get(config, "prevalences", pc.prevalences, errors);
  kv::get(config, "resolution", pc.resolution, errors);
  kv::get(config, "images_per_patient", pc.max_images_per_patient, errors);
  kv::get(config, "correlated", pc.correlated, errors);
  kv::get(config, "noise", pc.noise, errors);
  kv::get(config, "seed", pc.seed, errors);
  check_config(config,
               {"patients", "classes", "prevalences", "resolution", "images_per_patient", "correlated", "noise",
                "seed"},
               errors, pc.validate());

  const kv::Map resolved{{"patients", std::to_string(pc.patients)},
                         {"classes", std::to_string(pc.classes)},
                         {"prevalences", kv::join(pc.prevalences.empty() ? default_phantom_prevalences(pc.classes)
                                                                         : pc.prevalences)},
                         {"resolution", std::to_string(pc.resolution)},
                         {"images_per_patient", std::to_string(pc.max_images_per_patient)},
                         {"correlated", pc.correlated ? "true" : "false"},
                         {"noise", kv::format_double(pc.noise)},
                         {"seed", std::to_string(pc.seed)}};
  log_config(ctx, "phantom", resolved);
  const Corpus corpus = make_phantom(pc);
  write_corpus(corpus, out_dir);
  write_config(out_dir, resolved);
  ctx.out << "wrote " << corpus.images.size() << " images of " << pc.patients << " patients to " << out_dir << '\n';
}

// ----------------------------------------------------------- train-gan

void cmd_train_gan(const Context& ctx, const std::string& data_dir, const std::string& out_dir,
                   const std::string& resume, const kv::Map& config) {
  require_path(data_dir, "--data");
  require_path(out_dir, "--out");
  const fs::path out(out_dir);
  if (!resume.empty() && !config.empty()) {
    throw ConfigError("--resume takes its configuration from the checkpoint; drop --config, --set and --seed");
  }
  std::optional<TrainConfig> fresh;
  if (resume.empty()) {
    std::vector<std::string> errors;
    TrainConfig tc = TrainConfig::from_map(config, errors);
    check_config(config, TrainConfig::keys(), errors, tc.validate());
    fresh = tc;
  } else if (!fs::exists(resume)) {
    throw DataError("checkpoint '" + resume + "' does not exist");
  }

  const Corpus corpus = read_corpus(data_dir);
  Array images = images_to_array(corpus.images);
  GanTrainer trainer = fresh ? GanTrainer(*fresh, std::move(images))
                             : GanTrainer::resume(Checkpoint::load(resume), std::move(images));
  const kv::Map resolved = trainer.config().to_map();
  log_config(ctx, "train-gan", resolved);
  write_config(out, resolved);

  std::vector<std::string> rows;
  if (!resume.empty() && fs::exists(out / "metrics.csv")) {
    // Keep the rows logged before the checkpoint so the log has no gap.
    const std::vector<char> bytes = read_file(out / "metrics.csv");
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (std::stol(line.substr(0, line.find(','))) < trainer.step_count()) rows.push_back(line);
    }
  }
  auto write_metrics = [&] {
    std::string text = std::string(kMetricsCsvHeader) + "\n";
    for (const auto& r : rows) text += r + "\n";
    write_file_atomic(out / "metrics.csv", text);
  };

  trainer.run([&](const StepRecord& r) { rows.push_back(to_csv_row(r)); },
              [&](const GanTrainer& t) {
                char name[64];
                std::snprintf(name, sizeof name, "step_%08ld.ckpt", t.step_count());
                t.checkpoint().save(out / "checkpoints" / name);
                write_metrics();
                ctx.err << "[train-gan] step " << t.step_count() << " images " << t.images_seen() << " level "
                        << t.blend().level << " alpha " << kv::format_double(t.blend().alpha) << '\n';
              });
  trainer.checkpoint().save(out / "final.ckpt");
  write_metrics();

  const Generator& ema = trainer.ema_generator();
  Rng rng = Rng(trainer.config().seed).split("sample_grid");
  Array z({16, ema.latent_dim()});
  for (auto& v : z.data()) v = rng.normal();
  Array samples;
  {
    NoGradGuard no_grad;
    samples = ema.generate(Tensor(z), trainer.blend()).value();
  }
  write_png(image_grid(samples, 4), out / "samples.png");
  ctx.out << "trained " << trainer.step_count() << " steps (" << trainer.images_seen() << " images); wrote "
          << (out / "final.ckpt").string() << '\n';
}

// -------------------------------------------------------------- sample

void cmd_sample(const Context& ctx, const std::string& checkpoint, const std::string& out_dir, const kv::Map& config) {
  require_path(checkpoint, "--checkpoint");
  require_path(out_dir, "--out");
  int n = 64, grid_cols = 8;
  bool ema = true;
  std::uint64_t seed = 0;
  std::vector<std::string> errors, invalid;
  kv::get(config, "n", n, errors);
  kv::get(config, "grid_cols", grid_cols, errors);
  kv::get(config, "ema", ema, errors);
  kv::get(config, "seed", seed, errors);
  if (n < 1) invalid.push_back("n must be >= 1");
  if (grid_cols < 1) invalid.push_back("grid_cols must be >= 1");
  check_config(config, {"n", "grid_cols", "ema", "seed"}, errors, invalid);
  const kv::Map resolved{{"n", std::to_string(n)},
                         {"grid_cols", std::to_string(grid_cols)},
                         {"ema", ema ? "true" : "false"},
                         {"seed", std::to_string(seed)}};
  log_config(ctx, "sample", resolved);

  const LoadedGan g = load_gan_file(checkpoint);
  const Generator& gen = ema ? g.ema : g.generator;
  const int res = g.blend.resolution();
  Array all({n, 1, res, res});
  const Rng root = Rng(seed).split("sample");
  NoGradGuard no_grad;
  for (int i = 0; i < n; ++i) {
    Rng rng = root.split(static_cast<std::uint64_t>(i));
    Array z({1, gen.latent_dim()});
    for (auto& v : z.data()) v = rng.normal();
    const Array x = gen.generate(Tensor(z), g.blend).value();
    std::copy(x.raw(), x.raw() + x.size(), all.raw() + static_cast<std::size_t>(i) * x.size());
  }
  const fs::path out(out_dir);
  write_batch_pngs(all, out / "images", "sample");
  write_png(image_grid(all, grid_cols), out / "grid.png");
  write_config(out, resolved);
  ctx.out << "wrote " << n << " samples at " << res << "x" << res << " to " << out_dir << '\n';
}

// ---------------------------------------------------- train-classifier

void cmd_train_classifier(const Context& ctx, const std::string& data_dir, const std::string& out_dir,
                          const std::string& manifest, const std::string& init_gan, const kv::Map& config) {
  require_path(data_dir, "--data");
  require_path(out_dir, "--out");
  std::vector<std::string> errors;
  ClassifierTrainConfig cfg = ClassifierTrainConfig::from_map(config, errors, ClassifierTrainConfig{});
  std::vector<double> fractions{0.7, 0.1, 0.2};
  kv::get(config, "fractions", fractions, errors);
  // num_classes comes from the data, and a repurposed discriminator brings
  // its own architecture.
  ClassifierTrainConfig probe = cfg;
  probe.arch.num_classes = 1;
  if (!init_gan.empty()) probe.arch = ClassifierArch{};
  std::vector<std::string> invalid = probe.validate();
  if (fractions.size() != 3) invalid.push_back("fractions must list train,validation,test");
  check_config(config, with(ClassifierTrainConfig::keys(), {"fractions"}), errors, invalid);

  const Corpus corpus = read_corpus(data_dir);
  const LabelTable& table = corpus.table;
  const int k = table.num_classes();
  cfg.arch.num_classes = k;

  std::optional<Classifier> net;
  if (!init_gan.empty()) {
    const LoadedGan g = load_gan_file(init_gan);
    net = Classifier::from_discriminator(g.discriminator, k, cfg.seed);
    cfg.arch.resolution = net->resolution();
  } else {
    net = Classifier::cnn(cfg.arch, cfg.seed);
  }
  kv::Map resolved = cfg.to_map();
  resolved["fractions"] = kv::join(fractions);
  resolved["init"] = init_gan.empty() ? "cnn" : "discriminator";
  log_config(ctx, "train-classifier", resolved);

  const std::vector<PatientRecord> patients = group_patients(table);
  const SplitSpec spec{{"train", "validation", "test"}, fractions};
  const SplitAssignment split = manifest.empty() ? iterative_stratify(patients, spec, cfg.seed)
                                                 : read_manifest(manifest, patients, spec.names);

  const Array images = images_at(corpus.images, cfg.arch.resolution);
  const Array labels = table.label_matrix();
  const auto by_image = table.index_by_image();
  std::vector<std::size_t> rows[3];
  std::vector<const PatientRecord*> patient_of(table.records.size());
  for (std::size_t p = 0; p < patients.size(); ++p) {
    for (const auto& id : patients[p].image_ids) {
      const std::size_t i = by_image.at(id);
      rows[split.split_of[p]].push_back(i);
      patient_of[i] = &patients[p];
    }
  }
  for (auto& r : rows) std::sort(r.begin(), r.end());

  LabeledSet sets[3];
  for (int s = 0; s < 3; ++s) {
    if (rows[s].empty()) throw DataError(spec.names[static_cast<std::size_t>(s)] + " split is empty");
    sets[s] = LabeledSet{images, labels}.subset(rows[s]);
  }
  // Training targets are averaged over each patient's images.
  for (std::size_t r = 0; r < rows[0].size(); ++r) {
    const auto& avg = patient_of[rows[0][r]]->avg_labels;
    std::copy(avg.begin(), avg.end(), sets[0].targets.raw() + r * static_cast<std::size_t>(k));
  }

  std::string epochs = std::string(kEpochCsvHeader) + "\n";
  const ClassifierReport report = train_classifier(*net, cfg, sets[0], sets[1], &sets[2], [&](const EpochRecord& e) {
    epochs += to_csv_row(e) + "\n";
    ctx.err << "[train-classifier] epoch " << e.epoch << " lr " << kv::format_double(e.lr) << " loss "
            << kv::format_double(e.train_loss) << " val_auc " << kv::format_double(e.val_auc) << '\n';
  });

  const fs::path out(out_dir);
  save_classifier(*net, table.classes, out / "classifier.ckpt");
  write_file_atomic(out / "epochs.csv", epochs);
  std::vector<std::string> test_ids;
  for (std::size_t i : rows[2]) test_ids.push_back(table.records[i].image_id);
  write_file_atomic(out / "predictions.csv", predictions_csv(test_ids, table.classes, net->classify(sets[2].images)));
  write_file_atomic(out / "splits.csv", split.manifest_csv(patients));
  write_file_atomic(out / "report.txt", "best_val_auc = " + number(report.best_val_auc) +
                                            "\ntest_auc = " + number(*report.test_auc) + "\n");
  write_config(out, resolved);
  ctx.out << "test_auc " << number(*report.test_auc) << '\n';
}

// ----------------------------------------------------------------- fid

void cmd_fid(const Context& ctx, const std::string& a, const std::string& b, const std::string& data_dir,
             const std::string& classifier, const std::string& out_dir, const kv::Map& config) {
  require_path(classifier, "--classifier");
  std::uint64_t seed = 0;
  int min_subset = 2;
  std::vector<std::string> errors;
  kv::get(config, "seed", seed, errors);
  kv::get(config, "min_subset", min_subset, errors);
  std::vector<std::string> invalid;
  if (data_dir.empty() && (a.empty() || b.empty())) invalid.push_back("give --a and --b, or --data for a split table");
  if (!data_dir.empty() && (!a.empty() || !b.empty())) invalid.push_back("--data cannot be combined with --a/--b");
  check_config(config, {"seed", "min_subset"}, errors, invalid);
  log_config(ctx, "fid", {{"seed", std::to_string(seed)}, {"min_subset", std::to_string(min_subset)}});

  const LoadedClassifier c = load_classifier(classifier);
  const int res = c.net.resolution();
  std::vector<std::string> warnings;
  if (!data_dir.empty()) {
    const Corpus corpus = read_corpus(data_dir);
    const Array emb = c.net.embed_all(images_at(corpus.images, res));
    const auto rows = split_fid_table(emb, corpus.table, seed, min_subset);
    if (!out_dir.empty()) {
      write_file_atomic(fs::path(out_dir) / "split_fid.csv", split_fid_csv(rows));
      write_file_atomic(fs::path(out_dir) / "split_fid.txt", split_fid_text(rows));
    }
    ctx.out << split_fid_text(rows);
  } else {
    const ImageSet sa = read_image_set(a), sb = read_image_set(b);
    const Embedder embed = [&](const Array& x) { return c.net.embed_all(x); };
    const double d = fid(images_at(sa.images, res), images_at(sb.images, res), embed, &warnings);
    if (!out_dir.empty()) write_file_atomic(fs::path(out_dir) / "fid.txt", "fid = " + number(d) + "\n");
    ctx.out << "fid " << number(d) << '\n';
  }
  for (const auto& w : warnings) ctx.err << "[fid] warning: " << w << '\n';
}

// ---------------------------------------------------------- prevalence

void cmd_prevalence(const Context& ctx, const std::string& real, const std::string& synth,
                    const std::string& classifier, const std::string& out_dir, const kv::Map& config) {
  require_path(real, "--real");
  require_path(synth, "--synth");
  require_path(classifier, "--classifier");
  require_path(out_dir, "--out");
  int n_boot = 10000;
  std::uint64_t seed = 0;
  double threshold = 0.5, level = 0.95;
  bool soft = false;
  std::vector<std::string> errors, invalid;
  kv::get(config, "n_boot", n_boot, errors);
  kv::get(config, "seed", seed, errors);
  kv::get(config, "threshold", threshold, errors);
  kv::get(config, "level", level, errors);
  kv::get(config, "soft", soft, errors);
  if (n_boot < 1) invalid.push_back("n_boot must be >= 1");
  if (!(level > 0.0 && level < 1.0)) invalid.push_back("level must be in (0,1)");
  check_config(config, {"n_boot", "seed", "threshold", "level", "soft"}, errors, invalid);
  const kv::Map resolved{{"n_boot", std::to_string(n_boot)},
                         {"seed", std::to_string(seed)},
                         {"threshold", kv::format_double(threshold)},
                         {"level", kv::format_double(level)},
                         {"soft", soft ? "true" : "false"}};
  log_config(ctx, "prevalence", resolved);

  const LoadedClassifier c = load_classifier(classifier);
  const int res = c.net.resolution();
  const ImageSet r = read_image_set(real), s = read_image_set(synth);
  const LabelSets labels = label_sets(c.net, images_at(r.images, res), images_at(s.images, res), threshold, soft);
  const Rng root(seed);
  const PrevalenceReport pr = prevalence_bootstrap(labels.real, c.classes, n_boot, root.split("real").next_u64(), level);
  const PrevalenceReport ps =
      prevalence_bootstrap(labels.synth, c.classes, n_boot, root.split("synth").next_u64(), level);

  std::ostringstream csv;
  csv << "set,class,point,lo,hi,n\n";
  for (const auto* rep : {&pr, &ps}) {
    const char* name = rep == &pr ? "real" : "synthetic";
    for (std::size_t k = 0; k < rep->classes.size(); ++k) {
      csv << name << ',' << rep->classes[k] << ',' << kv::format_double(rep->point[k]) << ','
          << kv::format_double(rep->lo[k]) << ',' << kv::format_double(rep->hi[k]) << ',' << rep->n_images << '\n';
    }
  }
  std::string rho;
  try {
    rho = number(spearman(pr.point, ps.point));
  } catch (const DataError&) {
    rho = "undefined";
  }
  const fs::path out(out_dir);
  write_file_atomic(out / "prevalence.csv", csv.str());
  write_file_atomic(out / "summary.txt", "spearman_rho = " + rho + "\n");
  write_config(out, resolved);
  ctx.out << "spearman_rho " << rho << '\n';
}

// ------------------------------------------------------------ optimize

void cmd_optimize(const Context& ctx, const std::string& generator, const std::string& classifier,
                  const std::string& disc_classifier, const std::string& out_dir, const kv::Map& config) {
  require_path(generator, "--generator");
  require_path(out_dir, "--out");
  kv::Map values = config;
  std::string path = "discriminator", target = "all";
  int grid_cols = 0;
  std::vector<std::string> errors, invalid;
  kv::get(values, "path", path, errors);
  kv::get(values, "target", target, errors);
  kv::get(values, "grid_cols", grid_cols, errors);
  values.erase("path");
  values.erase("target");
  values.erase("grid_cols");
  OptimSpec spec = OptimSpec::from_map(values, errors, OptimSpec{});
  invalid = spec.validate();
  if (path != "classifier" && path != "discriminator" && path != "both") {
    invalid.push_back("path must be classifier, discriminator or both");
  }
  const bool use_cls = path == "classifier" || path == "both";
  const bool use_disc = path == "discriminator" || path == "both";
  if (use_cls && classifier.empty()) invalid.push_back("--classifier is required for the classifier path");
  if (use_disc && disc_classifier.empty()) {
    invalid.push_back("--disc-classifier is required for the discriminator path");
  }
  check_config(values, OptimSpec::keys(), errors, invalid);
  kv::Map resolved = spec.to_map();
  resolved["path"] = path;
  resolved["target"] = target;
  resolved["grid_cols"] = std::to_string(grid_cols);
  log_config(ctx, "optimize", resolved);

  const LoadedGan g = load_gan_file(generator);
  const Generator& gen = g.ema;
  std::optional<LoadedClassifier> cls, disc;
  if (use_cls) cls = load_classifier(classifier);
  if (use_disc) disc = load_classifier(disc_classifier);
  const LoadedClassifier& ref = use_disc ? *disc : *cls;
  const int res = BlendState::stable(gen.built_levels() - 1).resolution();
  for (const auto* c : {cls ? &*cls : nullptr, disc ? &*disc : nullptr}) {
    if (c != nullptr && c->net.resolution() != res) {
      throw DataError("scorer expects " + std::to_string(c->net.resolution()) + "px images but the generator makes " +
                      std::to_string(res) + "px");
    }
  }
  if (cls && disc && cls->classes != disc->classes) throw DataError("the two scorers use different class lists");

  std::vector<int> targets;
  if (target == "all") {
    for (int k = 0; k < ref.net.num_classes(); ++k) targets.push_back(k);
  } else {
    const auto it = std::find(ref.classes.begin(), ref.classes.end(), target);
    if (it != ref.classes.end()) {
      targets.push_back(static_cast<int>(it - ref.classes.begin()));
    } else {
      std::vector<int> idx;
      std::vector<std::string> e;
      kv::get(kv::Map{{"t", target}}, "t", idx, e);
      if (!e.empty() || idx.size() != 1 || idx[0] < 0 || idx[0] >= ref.net.num_classes()) {
        throw ConfigError("target '" + target + "' is neither a class name, an index nor 'all'");
      }
      targets = idx;
    }
  }

  auto scorer_of = [](const LoadedClassifier& c) -> Scorer {
    return [&c](const Tensor& images) { return c.net.logits(images); };
  };
  const fs::path out(out_dir);
  std::vector<Array> best_images[2];  // [0] classifier row, [1] discriminator row
  std::ostringstream summary;
  summary << "class,path,best_logit,convergence_rate\n";
  bool any_success = false;
  for (int t : targets) {
    OptimSpec s = spec;
    s.target_class = t;
    const std::string& name = ref.classes[static_cast<std::size_t>(t)];
    const fs::path dir = out / name;
    std::vector<std::pair<ScorerPath, OptimResult>> results;
    if (path == "both") {
      PathComparison cmp = compare_paths(s, gen, scorer_of(*cls), scorer_of(*disc));
      write_file_atomic(dir / "compare.csv", cmp.csv());
      results.emplace_back(ScorerPath::kClassifier, std::move(cmp.classifier));
      results.emplace_back(ScorerPath::kRepurposedDiscriminator, std::move(cmp.discriminator));
    } else {
      s.path = use_disc ? ScorerPath::kRepurposedDiscriminator : ScorerPath::kClassifier;
      results.emplace_back(s.path, optimize_latent(s, gen, scorer_of(use_disc ? *disc : *cls)));
    }
    for (const auto& [p, r] : results) {
      const std::string suffix = path == "both" ? std::string("_") + path_name(p) : "";
      write_file_atomic(dir / ("trace" + suffix + ".csv"), r.trace_csv());
      int converged = 0;
      for (const auto& tr : r.restarts) converged += tr.converged ? 1 : 0;
      const double rate = static_cast<double>(converged) / static_cast<double>(r.restarts.size());
      const int row = p == ScorerPath::kClassifier ? 0 : 1;
      if (r.best >= 0) {
        any_success = true;
        const Array& img = r.best_trace().final_image;
        write_png(array_to_image(img, 0), dir / ("best" + suffix + ".png"));
        best_images[row].push_back(img);
        summary << name << ',' << path_name(p) << ',' << kv::format_double(r.best_trace().final_logit) << ','
                << kv::format_double(rate) << '\n';
      } else {
        best_images[row].push_back(Array({1, 1, res, res}, -1.0));
        summary << name << ',' << path_name(p) << ",failed," << kv::format_double(rate) << '\n';
      }
    }
  }
  std::vector<Array> tiles;
  for (const auto& row : best_images) tiles.insert(tiles.end(), row.begin(), row.end());
  Array grid({static_cast<int>(tiles.size()), 1, res, res});
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    std::copy(tiles[i].raw(), tiles[i].raw() + tiles[i].size(), grid.raw() + i * tiles[i].size());
  }
  write_png(image_grid(grid, grid_cols > 0 ? grid_cols : static_cast<int>(targets.size())), out / "grid.png");
  write_file_atomic(out / "summary.csv", summary.str());
  write_config(out, resolved);
  ctx.out << summary.str();
  if (!any_success) throw NumericalError("latent optimization failed in every restart");
}

// ------------------------------------------------------------ stratify

void cmd_stratify(const Context& ctx, const std::string& data_dir, const std::string& out_dir,
                  const kv::Map& config) {
  require_path(data_dir, "--data");
  require_path(out_dir, "--out");
  std::vector<std::string> errors, invalid;
  const std::vector<std::string> names = read_split_names(config, errors);
  std::vector<double> fractions{0.7, 0.1, 0.2};
  std::uint64_t seed = 0;
  kv::get(config, "fractions", fractions, errors);
  kv::get(config, "seed", seed, errors);
  if (names.size() != fractions.size()) invalid.push_back("names and fractions must have the same length");
  check_config(config, {"names", "fractions", "seed"}, errors, invalid);
  std::string joined;
  for (const auto& n : names) joined += (joined.empty() ? "" : ",") + n;
  const kv::Map resolved{{"names", joined}, {"fractions", kv::join(fractions)}, {"seed", std::to_string(seed)}};
  log_config(ctx, "stratify", resolved);

  const LabelTable table = read_label_csv(fs::path(data_dir) / "labels.csv", corpus_classes(data_dir));
  const std::vector<PatientRecord> patients = group_patients(table);
  const SplitAssignment a = iterative_stratify(patients, SplitSpec{names, fractions}, seed);

  std::ostringstream stats;
  stats << "split,patients,images";
  for (const auto& c : table.classes) stats << ',' << c;
  stats << '\n';
  for (int s = 0; s < static_cast<int>(names.size()); ++s) {
    const auto members = a.members(s);
    std::vector<double> mean(table.classes.size(), 0.0);
    std::size_t n_images = 0;
    for (std::size_t p : members) {
      n_images += patients[p].image_ids.size();
      for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += patients[p].avg_labels[k];
    }
    stats << names[static_cast<std::size_t>(s)] << ',' << members.size() << ',' << n_images;
    for (double m : mean) stats << ',' << kv::format_double(members.empty() ? 0.0 : m / members.size());
    stats << '\n';
  }
  const fs::path out(out_dir);
  write_file_atomic(out / "splits.csv", a.manifest_csv(patients));
  write_file_atomic(out / "split_stats.csv", stats.str());
  write_config(out, resolved);
  ctx.out << "max_class_deviation " << number(max_class_deviation(patients, a.split_of, static_cast<int>(names.size())))
          << '\n';
}

}  // namespace cxrgan::cli
