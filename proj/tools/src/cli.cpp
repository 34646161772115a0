// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/cli.h"

#include <deque>
#include <filesystem>
#include <functional>
#include <map>

#include "CLI11.hpp"
#include "commands.h"
#include "cxrgan/classifier.h"
#include "cxrgan/error.h"
#include "cxrgan/latentopt.h"
#include "cxrgan/phantom.h"
#include "cxrgan/training.h"

namespace cxrgan::cli {
namespace {

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d{
      // phantom
      {"patients", "number of synthetic patients"},
      {"classes", "number of pathology classes (at most 14)"},
      {"prevalences", "comma-separated per-class prevalences (empty: built-in table)"},
      {"images_per_patient", "maximum images per patient"},
      {"correlated", "couple Effusion to Cardiomegaly (true/false)"},
      {"noise", "pixel noise standard deviation"},
      // GAN
      {"latent_dim", "latent vector length"},
      {"max_resolution", "final image side, a power of two"},
      {"fmap_base", "feature-map budget; width at 4x4 is fmap_base/2"},
      {"fmap_min", "smallest feature-map width"},
      {"phase_images", "images shown per fade-in and per stabilization phase"},
      {"extra_images", "extra images at the final resolution"},
      {"batch_sizes", "comma-separated minibatch size per level"},
      {"lr", "Adam learning rate"},
      {"beta1", "Adam beta1"},
      {"beta2", "Adam beta2"},
      {"adam_eps", "Adam epsilon"},
      {"gp_weight", "gradient penalty weight"},
      {"drift_weight", "discriminator drift penalty weight"},
      {"ema_decay", "generator moving-average decay"},
      {"n_critic", "discriminator updates per generator update"},
      {"checkpoint_every", "steps between checkpoints (0: final only)"},
      {"seed", "root random seed"},
      // sample
      {"n", "number of images to draw"},
      {"grid_cols", "columns in the preview grid (0: square)"},
      {"ema", "draw from the moving-average generator (true/false)"},
      // classifier
      {"resolution", "image side used by the model"},
      {"widths", "comma-separated channel widths of the conv blocks"},
      {"max_epochs", "epoch cap"},
      {"batch_size", "minibatch size"},
      {"patience", "epochs without validation improvement before the rate drops"},
      {"lr_divisor", "learning-rate divisor on plateau"},
      {"min_lr", "stop once the rate would fall below this"},
      {"augment", "random training augmentation (true/false)"},
      {"max_rotation_deg", "augmentation rotation range in degrees"},
      {"flip_prob", "horizontal flip probability"},
      {"brightness", "brightness jitter"},
      {"contrast", "contrast jitter"},
      {"saturation", "saturation jitter (no effect on grayscale)"},
      {"hue", "hue jitter (no effect on grayscale)"},
      {"fractions", "comma-separated split fractions"},
      {"names", "comma-separated split names"},
      // metrics
      {"min_subset", "smallest subset size for which a distance is reported"},
      {"n_boot", "bootstrap replicates"},
      {"threshold", "probability threshold for a positive label"},
      {"level", "confidence level of the percentile interval"},
      {"soft", "use probabilities instead of thresholded labels (true/false)"},
      // optimize
      {"path", "scorer: discriminator, classifier or both"},
      {"target", "class name, class index or all"},
      {"steps", "gradient steps per restart"},
      {"step_size", "step size"},
      {"suppress_others", "penalize the other class logits (true/false)"},
      {"suppression_weight", "weight of the suppression term"},
      {"n_restarts", "independent random restarts"},
      {"use_adam", "Adam instead of plain gradient ascent (true/false)"},
      {"prior_weight", "weight of the Gaussian latent prior"},
      {"plateau_tol", "stop when the objective gains less than this over the window"},
      {"plateau_window", "steps in the plateau window (0: never stop early)"},
      {"success_logit", "final logit counted as converged"},
      {"max_attempts", "attempts per restart after non-finite values"},
  };
  return d;
}

std::string flag_name(const std::string& key) {
  std::string f = "--" + key;
  for (char& c : f)
    if (c == '_') c = '-';
  return f;
}

/// One subcommand's configuration flags and the values they captured.
class KeyedFlags {
 public:
  void add(CLI::App* app, const kv::Map& defaults, const std::vector<std::string>& keys,
           const kv::Map& overrides = {}) {
    for (const auto& key : keys) {
      const auto o = overrides.find(key);
      const auto d = descriptions().find(key);
      const std::string text = o != overrides.end() ? o->second : d != descriptions().end() ? d->second : key;
      const auto def = defaults.find(key);
      std::string& slot = storage_.emplace_back();
      CLI::Option* opt = app->add_option(flag_name(key), slot, text);
      if (def != defaults.end()) opt->default_str(def->second.empty() ? "\"\"" : def->second);
      opt->type_name("");
      bound_.push_back({opt, key, &slot});
    }
  }

  kv::Map given() const {
    kv::Map m;
    for (const auto& b : bound_)
      if (b.opt->count() > 0) m[b.key] = *b.value;
    return m;
  }

 private:
  struct Bound {
    CLI::Option* opt;
    std::string key;
    const std::string* value;
  };
  std::deque<std::string> storage_;
  std::vector<Bound> bound_;
};

struct Subcommand {
  CLI::App* app = nullptr;
  ConfigInput input;
  KeyedFlags flags;
  std::map<std::string, std::string> paths;
  std::function<void(const Context&, const Subcommand&, const kv::Map&)> action;

  const std::string& path(const std::string& name) const { return paths.at(name); }
};

Subcommand& add_subcommand(std::deque<Subcommand>& subs, CLI::App& app, const std::string& name,
                           const std::string& description) {
  Subcommand& s = subs.emplace_back();
  s.app = app.add_subcommand(name, description);
  s.app->add_option("--config", s.input.file, "key = value configuration file")->type_name("PATH");
  s.app->add_option("--set", s.input.sets, "override one key (repeatable), e.g. --set lr=0.002")->type_name("K=V");
  return s;
}

void add_path(Subcommand& s, const std::string& name, const std::string& description, bool required = false) {
  std::string& slot = s.paths[name];
  CLI::Option* opt = s.app->add_option("--" + name, slot, description)->type_name("PATH");
  if (required) opt->required();
}

kv::Map phantom_defaults() {
  const PhantomConfig pc;
  return {{"patients", std::to_string(pc.patients)},
          {"classes", std::to_string(pc.classes)},
          {"prevalences", ""},
          {"resolution", std::to_string(pc.resolution)},
          {"images_per_patient", std::to_string(pc.max_images_per_patient)},
          {"correlated", pc.correlated ? "true" : "false"},
          {"noise", kv::format_double(pc.noise)},
          {"seed", std::to_string(pc.seed)}};
}

void build(CLI::App& app, std::deque<Subcommand>& subs) {
  {
    Subcommand& s = add_subcommand(subs, app, "phantom", "write a synthetic labelled radiograph corpus");
    add_path(s, "out", "output corpus directory", true);
    s.flags.add(s.app, phantom_defaults(),
                {"patients", "classes", "prevalences", "resolution", "images_per_patient", "correlated", "noise",
                 "seed"},
                {{"resolution", "image side in pixels"}});
    s.action = [](const Context& c, const Subcommand& s, const kv::Map& m) { cmd_phantom(c, s.path("out"), m); };
  }
  {
    Subcommand& s = add_subcommand(subs, app, "train-gan", "train a progressively growing GAN on a corpus");
    add_path(s, "data", "corpus directory (labels.csv and images/)", true);
    add_path(s, "out", "run directory", true);
    add_path(s, "resume", "continue from this checkpoint; configuration is read from it");
    s.flags.add(s.app, TrainConfig{}.to_map(), TrainConfig::keys());
    s.action = [](const Context& c, const Subcommand& s, const kv::Map& m) {
      cmd_train_gan(c, s.path("data"), s.path("out"), s.path("resume"), m);
    };
  }
  {
    Subcommand& s = add_subcommand(subs, app, "sample", "draw images from a GAN checkpoint");
    add_path(s, "checkpoint", "GAN checkpoint", true);
    add_path(s, "out", "output directory", true);
    s.flags.add(s.app, {{"n", "64"}, {"grid_cols", "8"}, {"ema", "true"}, {"seed", "0"}},
                {"n", "grid_cols", "ema", "seed"});
    s.action = [](const Context& c, const Subcommand& s, const kv::Map& m) {
      cmd_sample(c, s.path("checkpoint"), s.path("out"), m);
    };
  }
  {
    Subcommand& s = add_subcommand(subs, app, "train-classifier", "train a multi-label classifier on a corpus");
    add_path(s, "data", "corpus directory", true);
    add_path(s, "out", "run directory", true);
    add_path(s, "manifest", "patient_id,split CSV; default is a stratified split");
    add_path(s, "init-gan", "start from this GAN checkpoint's discriminator");
    kv::Map defaults = ClassifierTrainConfig{}.to_map();
    defaults["fractions"] = "0.7,0.1,0.2";
    std::vector<std::string> keys = ClassifierTrainConfig::keys();
    keys.push_back("fractions");
    s.flags.add(s.app, defaults, keys);
    s.action = [](const Context& c, const Subcommand& s, const kv::Map& m) {
      cmd_train_classifier(c, s.path("data"), s.path("out"), s.path("manifest"), s.path("init-gan"), m);
    };
  }
  {
    Subcommand& s = add_subcommand(subs, app, "fid", "Frechet distance between image sets, or a split table");
    add_path(s, "a", "first image set (corpus, PNG directory or PNG file)");
    add_path(s, "b", "second image set");
    add_path(s, "data", "corpus for the split table");
    add_path(s, "classifier", "classifier checkpoint supplying embeddings", true);
    add_path(s, "out", "optional directory for the result files");
    s.flags.add(s.app, {{"seed", "0"}, {"min_subset", "2"}}, {"seed", "min_subset"});
    s.action = [](const Context& c, const Subcommand& s, const kv::Map& m) {
      cmd_fid(c, s.path("a"), s.path("b"), s.path("data"), s.path("classifier"), s.path("out"), m);
    };
  }
  {
    Subcommand& s = add_subcommand(subs, app, "prevalence", "bootstrap label prevalence for real and synthetic sets");
    add_path(s, "real", "real image set", true);
    add_path(s, "synth", "synthetic image set", true);
    add_path(s, "classifier", "classifier checkpoint used for labelling", true);
    add_path(s, "out", "output directory", true);
    s.flags.add(s.app, {{"n_boot", "10000"}, {"seed", "0"}, {"threshold", "0.5"}, {"level", "0.95"}, {"soft", "false"}},
                {"n_boot", "seed", "threshold", "level", "soft"});
    s.action = [](const Context& c, const Subcommand& s, const kv::Map& m) {
      cmd_prevalence(c, s.path("real"), s.path("synth"), s.path("classifier"), s.path("out"), m);
    };
  }
  {
    Subcommand& s = add_subcommand(subs, app, "optimize", "search the latent space for class-prototypical images");
    add_path(s, "generator", "GAN checkpoint", true);
    add_path(s, "classifier", "classifier checkpoint for the classifier path");
    add_path(s, "disc-classifier", "repurposed-discriminator checkpoint for the discriminator path");
    add_path(s, "out", "output directory", true);
    kv::Map defaults = OptimSpec{}.to_map();
    defaults["path"] = "discriminator";
    defaults["target"] = "all";
    defaults["grid_cols"] = "0";
    std::vector<std::string> keys{"path", "target", "grid_cols"};
    for (const auto& k : OptimSpec::keys())
      if (k != "path" && k != "target_class") keys.push_back(k);
    s.flags.add(s.app, defaults, keys);
    s.action = [](const Context& c, const Subcommand& s, const kv::Map& m) {
      cmd_optimize(c, s.path("generator"), s.path("classifier"), s.path("disc-classifier"), s.path("out"), m);
    };
  }
  {
    Subcommand& s = add_subcommand(subs, app, "stratify", "patient-level stratified split of a corpus");
    add_path(s, "data", "corpus directory", true);
    add_path(s, "out", "output directory", true);
    s.flags.add(s.app, {{"names", "train,validation,test"}, {"fractions", "0.7,0.1,0.2"}, {"seed", "0"}},
                {"names", "fractions", "seed"});
    s.action = [](const Context& c, const Subcommand& s, const kv::Map& m) {
      cmd_stratify(c, s.path("data"), s.path("out"), m);
    };
  }
}

int report(std::ostream& err, ExitCode code, const char* kind, const std::string& message) {
  err << "error: " << kind << ": " << message << '\n';
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Progressive GAN toolkit for chest radiograph synthesis and evaluation", "cxrgan");
  app.require_subcommand(1);
  app.set_version_flag("--version", "cxrgan 0.1.0");
  app.get_formatter()->column_width(34);
  std::deque<Subcommand> subs;
  build(app, subs);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const Context ctx{out, err};
  try {
    for (const Subcommand& s : subs) {
      if (!s.app->parsed()) continue;
      ConfigInput input = s.input;
      input.flags = s.flags.given();
      s.action(ctx, s, input.resolve());
    }
    return kOk;
  } catch (const ConfigError& e) {
    return report(err, kUsage, "config", e.what());
  } catch (const DataError& e) {
    return report(err, kData, "data", e.what());
  } catch (const ShapeError& e) {
    return report(err, kData, "shape", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report(err, kData, "io", e.what());
  } catch (const NumericalError& e) {
    return report(err, kNumerical, "numerical", e.what());
  } catch (const std::exception& e) {
    return report(err, kInternal, "internal", e.what());
  }
}

}  // namespace cxrgan::cli
