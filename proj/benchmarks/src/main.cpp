// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

// The packaged benchmark_main archive is LTO bytecode from another compiler
// release, so the entry point is defined here.
#include <benchmark/benchmark.h>

BENCHMARK_MAIN();
