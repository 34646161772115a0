// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "cxrgan/cli.h"

int main(int argc, char** argv) {
  return cxrgan::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
