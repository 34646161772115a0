// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "cxrgan/ops.h"
#include "cxrgan/rng.h"

namespace {

cxrgan::Array random(const cxrgan::Shape& shape, std::uint64_t seed) {
  cxrgan::Rng rng(seed);
  cxrgan::Array a(shape);
  for (auto& v : a.data()) v = rng.normal();
  return a;
}

// Args: spatial size, channels (in = out), batch 16, 3x3 kernel.
void BM_Conv2dForward(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0)), c = static_cast<int>(state.range(1));
  const cxrgan::Tensor x(random({16, c, s, s}, 1));
  const cxrgan::Tensor k(random({c, c, 3, 3}, 2));
  for (auto _ : state) benchmark::DoNotOptimize(cxrgan::conv2d(x, k, 1, 1).value().raw());
  state.SetItemsProcessed(state.iterations() * 16LL * c * c * 9 * s * s);
}
BENCHMARK(BM_Conv2dForward)->Args({8, 32})->Args({16, 32})->Args({32, 16})->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0)), c = static_cast<int>(state.range(1));
  const cxrgan::Tensor x(random({16, c, s, s}, 1), true);
  const cxrgan::Tensor k(random({c, c, 3, 3}, 2), true);
  for (auto _ : state) {
    const auto g = cxrgan::grad(cxrgan::sum(cxrgan::conv2d(x, k, 1, 1)), {x, k});
    benchmark::DoNotOptimize(g[1].value().raw());
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({8, 32})->Args({16, 32})->Unit(benchmark::kMillisecond);

}  // namespace
