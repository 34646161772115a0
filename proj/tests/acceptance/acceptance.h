// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace cxrgan::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

/// Closed-form, property and calibration checks; seconds to a few minutes.
std::vector<Criterion> math_criteria();

/// Checks on a phantom corpus, classifier and GAN trained inside `workdir`.
/// With `reuse`, stack artifacts already present there are not retrained.
std::vector<Criterion> stack_criteria(const std::filesystem::path& workdir, bool reuse);

/// Shortest round-trip decimal text.
std::string num(double v);

}  // namespace cxrgan::acceptance
