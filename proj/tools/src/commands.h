// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cxrgan/kv.h"

namespace cxrgan::cli {

struct Context {
  std::ostream& out;
  std::ostream& err;
};

/// Where configuration comes from, lowest precedence first: built-in
/// defaults, the --config file, --set pairs, then explicit flags.
struct ConfigInput {
  std::string file;
  std::vector<std::string> sets;
  kv::Map flags;

  kv::Map resolve() const;
};

void cmd_phantom(const Context& ctx, const std::string& out_dir, const kv::Map& config);
void cmd_train_gan(const Context& ctx, const std::string& data_dir, const std::string& out_dir,
                   const std::string& resume, const kv::Map& config);
void cmd_sample(const Context& ctx, const std::string& checkpoint, const std::string& out_dir, const kv::Map& config);
void cmd_train_classifier(const Context& ctx, const std::string& data_dir, const std::string& out_dir,
                          const std::string& manifest, const std::string& init_gan, const kv::Map& config);
void cmd_fid(const Context& ctx, const std::string& a, const std::string& b, const std::string& data_dir,
             const std::string& classifier, const std::string& out_dir, const kv::Map& config);
void cmd_prevalence(const Context& ctx, const std::string& real, const std::string& synth,
                    const std::string& classifier, const std::string& out_dir, const kv::Map& config);
void cmd_optimize(const Context& ctx, const std::string& generator, const std::string& classifier,
                  const std::string& disc_classifier, const std::string& out_dir, const kv::Map& config);
void cmd_stratify(const Context& ctx, const std::string& data_dir, const std::string& out_dir, const kv::Map& config);

}  // namespace cxrgan::cli
