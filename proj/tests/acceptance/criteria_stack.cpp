// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

// Criteria on a trained phantom stack: corpus, CNN classifier, GAN and a
// classifier built from the GAN's discriminator. The stack is produced with
// the command-line tool and then evaluated through the library.

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <optional>

#include "acceptance.h"
#include "cxrgan/checkpoint.h"
#include "cxrgan/classifier.h"
#include "cxrgan/cli.h"
#include "cxrgan/error.h"
#include "cxrgan/kv.h"
#include "cxrgan/latentopt.h"
#include "cxrgan/metrics.h"
#include "cxrgan/phantom.h"

namespace fs = std::filesystem;

namespace cxrgan::acceptance {
namespace {

// Stack configuration. The GAN grows 4 -> 32 with 6400 images per fade and
// per stabilization phase (400 steps at batch 16). The EMA horizon is
// shortened to match: at 0.999 it would still average over earlier levels.
constexpr int kPatients = 1290;
constexpr int kResolution = 32;
const std::vector<std::string> kGanFlags{"--max-resolution", "32", "--fmap-base", "64", "--phase-images", "6400",
                                         "--extra-images", "6400", "--ema-decay", "0.99", "--checkpoint-every", "0",
                                         "--seed", "13"};
constexpr std::uint64_t kEvalSeed = 99;

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Runs one command line, appending its output to `log`.
void run_cli(const std::vector<std::string>& args, const fs::path& log) {
  std::ofstream out(log, std::ios::app);
  out << "$ cxrgan";
  for (const auto& a : args) out << ' ' << a;
  out << '\n';
  const int code = cli::run(args, out, out);
  if (code != 0) throw Error("cxrgan " + args[0] + " exited with " + std::to_string(code) + "; see " + log.string());
}

/// Clamps to [-1, 1] and quantizes to 8 bits, as PNG export would.
Array as_exported(const Array& batch) {
  std::vector<GrayImage> images;
  for (int i = 0; i < batch.dim(0); ++i) images.push_back(array_to_image(batch, i));
  return images_to_array(images);
}

Array sample_images(const Generator& gen, const BlendState& blend, int n, std::uint64_t seed) {
  const Rng root = Rng(seed).split("acceptance_samples");
  const int r = blend.resolution();
  Array out({n, 1, r, r});
  NoGradGuard no_grad;
  constexpr int kChunk = 32;
  for (int start = 0; start < n; start += kChunk) {
    const int m = std::min(kChunk, n - start);
    Array z({m, gen.latent_dim()});
    for (int i = 0; i < m; ++i) {
      Rng rng = root.split(static_cast<std::uint64_t>(start + i));
      for (int j = 0; j < gen.latent_dim(); ++j) z[static_cast<std::size_t>(i * gen.latent_dim() + j)] = rng.normal();
    }
    const Array x = gen.generate(Tensor(z), blend).value();
    std::copy(x.raw(), x.raw() + x.size(), out.raw() + static_cast<std::size_t>(start) * r * r);
  }
  return as_exported(out);
}

Array rows_of(const Array& images, const std::vector<std::size_t>& rows) {
  return LabeledSet{images, Array({images.dim(0), 1})}.subset(rows).images;
}

struct Stack {
  fs::path dir;
  Corpus corpus;
  Array real;
  std::vector<PatientRecord> patients;
  std::optional<Classifier> cnn;
  double cnn_test_auc = 0.0;
  std::optional<LoadedGan> gan;
  std::optional<Classifier> disc_classifier;
};

class StackCache {
 public:
  StackCache(fs::path dir, bool reuse) : dir_(std::move(dir)), reuse_(reuse) {}

  const Stack& get() {
    if (!stack_) build();
    return *stack_;
  }

 private:
  void step(const std::string& marker, const std::vector<std::string>& args) {
    if (reuse_ && fs::exists(dir_ / marker)) return;
    run_cli(args, dir_ / "stack.log");
  }

  void build() {
    if (!reuse_) fs::remove_all(dir_);
    fs::create_directories(dir_);
    const std::string d = dir_.string();
    step("corpus/labels.csv", {"phantom", "--out", d + "/corpus", "--patients", std::to_string(kPatients),
                               "--resolution", std::to_string(kResolution), "--seed", "11"});
    step("cnn/classifier.ckpt", {"train-classifier", "--data", d + "/corpus", "--out", d + "/cnn", "--seed", "12"});
    step("gan/final.ckpt", with({"train-gan", "--data", d + "/corpus", "--out", d + "/gan"}, kGanFlags));
    step("disc/classifier.ckpt", {"train-classifier", "--data", d + "/corpus", "--out", d + "/disc", "--init-gan",
                                  d + "/gan/final.ckpt", "--seed", "14"});

    auto s = std::make_unique<Stack>();
    s->dir = dir_;
    s->corpus = read_corpus(dir_ / "corpus");
    s->real = images_to_array(s->corpus.images);
    s->patients = group_patients(s->corpus.table);
    s->cnn = Classifier::load(Checkpoint::load(dir_ / "cnn/classifier.ckpt"));
    std::vector<std::string> errors;
    kv::get(kv::read_file(dir_ / "cnn/report.txt"), "test_auc", s->cnn_test_auc, errors);
    if (!errors.empty()) throw DataError(errors.front());
    s->gan = load_gan(Checkpoint::load(dir_ / "gan/final.ckpt"));
    s->disc_classifier = Classifier::load(Checkpoint::load(dir_ / "disc/classifier.ckpt"));
    stack_ = std::move(s);
  }

  fs::path dir_;
  bool reuse_;
  std::unique_ptr<Stack> stack_;
};

// --------------------------------------------------------- end-to-end GAN

Outcome end_to_end_gan(StackCache& cache) {
  const Stack& s = cache.get();
  const SplitAssignment halves = iterative_stratify(s.patients, SplitSpec{{"a", "b"}, {0.5, 0.5}}, kEvalSeed);
  const auto by_image = s.corpus.table.index_by_image();
  std::vector<std::size_t> rows[2];
  for (std::size_t p = 0; p < s.patients.size(); ++p)
    for (const auto& id : s.patients[p].image_ids) rows[halves.split_of[p]].push_back(by_image.at(id));
  for (auto& r : rows) std::sort(r.begin(), r.end());
  const Array a = rows_of(s.real, rows[0]), b = rows_of(s.real, rows[1]);
  const int n = a.dim(0);

  const LoadedGan& g = *s.gan;
  Generator untrained(g.config.arch, g.config.seed);
  while (untrained.built_levels() < g.ema.built_levels()) untrained.grow();
  const Array ema_samples = sample_images(g.ema, g.blend, n, kEvalSeed);
  const Array untrained_samples = sample_images(untrained, g.blend, n, kEvalSeed);

  const Classifier& net = *s.cnn;
  const Array emb_a = net.embed_all(a);
  const double fid_ab = fid_from_embeddings(emb_a, net.embed_all(b));
  const double fid_ema = fid_from_embeddings(emb_a, net.embed_all(ema_samples));
  const double fid_untrained = fid_from_embeddings(emb_a, net.embed_all(untrained_samples));

  std::ofstream(s.dir / "fid.txt") << "real_a_vs_real_b = " << fid_ab << "\nreal_a_vs_ema = " << fid_ema
                                   << "\nreal_a_vs_untrained = " << fid_untrained << "\n";
  const bool pass = fid_ema <= fid_untrained / 5.0 && fid_ab < fid_ema;
  return {pass, std::to_string(s.real.dim(0)) + " images at " + std::to_string(kResolution) + "px, " +
                    std::to_string(n) + " per set; FID(real A, EMA) " + num(fid_ema) + " <= FID(real A, untrained)/5 = " +
                    num(fid_untrained / 5.0) + "; FID(real A, real B) " + num(fid_ab) + " < " + num(fid_ema)};
}

// ------------------------------------------------------------- classifier

Outcome classifier_auc(StackCache& cache) {
  const Array preds({4}, {0.1, 0.4, 0.35, 0.8});
  const Array targets({4}, {0, 0, 1, 1});
  // Pair enumeration: fraction of (positive, negative) pairs ranked correctly.
  double correct = 0.0;
  int pairs = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (targets[static_cast<std::size_t>(i)] == 1 && targets[static_cast<std::size_t>(j)] == 0) {
        ++pairs;
        const double pi = preds[static_cast<std::size_t>(i)], pj = preds[static_cast<std::size_t>(j)];
        correct += pi > pj ? 1.0 : pi == pj ? 0.5 : 0.0;
      }
  const double enumerated = correct / pairs;
  const double example = micro_auc(preds, targets);
  const double test_auc = cache.get().cnn_test_auc;
  return {test_auc > 0.9 && example == 0.75 && enumerated == 0.75,
          "held-out phantom test micro-AUC " + num(test_auc) + " (> 0.9); worked example " + num(example) +
              " (pair enumeration " + num(enumerated) + ", expected 0.75 exactly)"};
}

// ------------------------------------------------------------- prevalence

Outcome prevalence_analogue(StackCache& cache) {
  const Stack& s = cache.get();
  const LoadedGan& g = *s.gan;
  const Array synth = sample_images(g.ema, g.blend, s.real.dim(0), kEvalSeed + 1);
  const LabelSets labels = label_sets(*s.cnn, s.real, synth);
  const auto& classes = s.corpus.table.classes;
  const PrevalenceReport real = prevalence_bootstrap(labels.real, classes, 10000, kEvalSeed);
  const PrevalenceReport gen = prevalence_bootstrap(labels.synth, classes, 10000, kEvalSeed + 1);
  const double rho = spearman(real.point, gen.point);

  bool intervals = true;
  std::string csv = "set,class,point,lo,hi,n\n";
  std::string pairs;
  for (const auto* r : {&real, &gen}) {
    for (std::size_t k = 0; k < classes.size(); ++k) {
      intervals = intervals && r->lo[k] <= r->point[k] && r->point[k] <= r->hi[k];
      csv += std::string(r == &real ? "real," : "synthetic,") + classes[k] + "," + num(r->point[k]) + "," +
             num(r->lo[k]) + "," + num(r->hi[k]) + "," + std::to_string(r->n_images) + "\n";
    }
  }
  for (std::size_t k = 0; k < classes.size(); ++k)
    pairs += (k ? ", " : "") + classes[k] + " " + num(real.point[k]) + "/" + num(gen.point[k]);
  std::ofstream(s.dir / "prevalence.csv") << csv;
  return {rho > 0.5 && intervals,
          "Spearman rho " + num(rho) + " (> 0.5); real/generated prevalence: " + pairs + "; 95% CIs from 10000 "
          "replicates written for both series"};
}

// ------------------------------------------------------ latent optimization

Outcome latent_optimization(StackCache& cache) {
  const Stack& s = cache.get();
  const Generator& gen = s.gan->ema;
  std::vector<Array> before;
  for (const auto& p : gen.parameters()) before.push_back(p.tensor.value());

  const Classifier& net = *s.disc_classifier;
  const Scorer scorer = [&](const Tensor& images) { return net.logits(images); };
  OptimSpec spec;
  spec.target_class = 0;
  spec.path = ScorerPath::kRepurposedDiscriminator;
  spec.seed = kEvalSeed;
  std::vector<double> baseline = random_latent_logits(gen, scorer, spec.target_class, 1000, kEvalSeed + 2);
  std::sort(baseline.begin(), baseline.end());
  const double p99 = quantile_sorted(baseline, 0.99);
  const OptimResult result = optimize_latent(spec, gen, scorer);

  int above = 0;
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& t : result.restarts) {
    above += !t.failed && t.final_logit > p99;
    lowest = std::min(lowest, t.final_logit);
  }
  bool unchanged = true;
  const auto after = gen.parameters();
  for (std::size_t i = 0; i < before.size(); ++i) unchanged = unchanged && after[i].tensor.value() == before[i];
  return {above >= 8 && unchanged,
          std::to_string(above) + "/10 restarts (class '" + s.corpus.table.classes[0] +
              "', repurposed discriminator) end above the random-z 99th percentile " + num(p99) +
              " (lowest final logit " + num(lowest) + "); generator bit-identical: " + (unchanged ? "yes" : "no")};
}

// --------------------------------------------------------- reproducibility

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_text(e.path());
  return files;
}

/// Every subcommand on a small corpus, run into `dir`.
void small_pipeline(const fs::path& dir) {
  const std::string d = dir.string();
  const fs::path log = dir / "pipeline.log";
  fs::create_directories(dir);
  run_cli({"phantom", "--out", d + "/corpus", "--patients", "40", "--resolution", "16", "--seed", "3"}, log);
  run_cli({"stratify", "--data", d + "/corpus", "--out", d + "/stratify", "--seed", "3"}, log);
  run_cli({"train-gan", "--data", d + "/corpus", "--out", d + "/gan", "--max-resolution", "16", "--fmap-base", "16",
           "--latent-dim", "8", "--phase-images", "64", "--extra-images", "32", "--checkpoint-every", "4", "--seed",
           "3"},
          log);
  run_cli({"sample", "--checkpoint", d + "/gan/final.ckpt", "--out", d + "/sample", "--n", "16", "--seed", "3"}, log);
  run_cli({"train-classifier", "--data", d + "/corpus", "--out", d + "/cnn", "--resolution", "16", "--widths", "4,8",
           "--max-epochs", "3", "--seed", "3"},
          log);
  run_cli({"train-classifier", "--data", d + "/corpus", "--out", d + "/disc", "--init-gan", d + "/gan/final.ckpt",
           "--max-epochs", "2", "--seed", "3"},
          log);
  run_cli({"fid", "--a", d + "/corpus", "--b", d + "/sample/images", "--classifier", d + "/cnn/classifier.ckpt",
           "--out", d + "/fid_pair", "--seed", "3"},
          log);
  run_cli({"fid", "--data", d + "/corpus", "--classifier", d + "/cnn/classifier.ckpt", "--out", d + "/fid_table",
           "--seed", "3"},
          log);
  run_cli({"prevalence", "--real", d + "/corpus", "--synth", d + "/sample/images", "--classifier",
           d + "/cnn/classifier.ckpt", "--out", d + "/prevalence", "--n-boot", "200", "--seed", "3"},
          log);
  run_cli({"optimize", "--generator", d + "/gan/final.ckpt", "--classifier", d + "/cnn/classifier.ckpt",
           "--disc-classifier", d + "/disc/classifier.ckpt", "--path", "both", "--steps", "5", "--n-restarts", "2",
           "--out", d + "/optimize", "--seed", "3"},
          log);
}

Outcome reproducibility(const fs::path& workdir) {
  const fs::path run = workdir / "repro" / "run", first = workdir / "repro" / "first";
  fs::remove_all(workdir / "repro");
  // Both runs use the same paths so that nothing path-dependent can differ.
  small_pipeline(run);
  fs::rename(run, first);
  small_pipeline(run);
  const auto a = tree(first), b = tree(run);
  int differing = 0;
  std::string names;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) {
      ++differing;
      if (differing <= 3) names += " " + name;
    }
  }
  differing += static_cast<int>(b.size() > a.size() ? b.size() - a.size() : 0);
  return {differing == 0 && !a.empty(),
          "all 8 subcommands run twice with the same seeds; " + std::to_string(a.size()) + " files, " +
              std::to_string(differing) + " differ" + (names.empty() ? "" : ":" + names)};
}

}  // namespace

std::vector<Criterion> stack_criteria(const fs::path& workdir, bool reuse) {
  auto cache = std::make_shared<StackCache>(workdir / "stack", reuse);
  return {
      {"end-to-end-gan", [cache] { return end_to_end_gan(*cache); }},
      {"classifier-auc", [cache] { return classifier_auc(*cache); }},
      {"prevalence-analogue", [cache] { return prevalence_analogue(*cache); }},
      {"latent-optimization", [cache] { return latent_optimization(*cache); }},
      {"reproducibility", [workdir] { return reproducibility(workdir); }},
  };
}

}  // namespace cxrgan::acceptance
