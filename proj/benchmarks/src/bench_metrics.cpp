// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "cxrgan/metrics.h"
#include "cxrgan/rng.h"

namespace {

cxrgan::Array embeddings(int n, int e, std::uint64_t seed) {
  cxrgan::Rng rng(seed);
  cxrgan::Array a({n, e});
  for (auto& v : a.data()) v = rng.normal();
  return a;
}

void BM_SqrtPsd(benchmark::State& state) {
  const int e = static_cast<int>(state.range(0));
  const cxrgan::Array m = cxrgan::summarize(embeddings(2 * e, e, 3)).cov;
  for (auto _ : state) benchmark::DoNotOptimize(cxrgan::sqrt_psd(m).raw());
}
BENCHMARK(BM_SqrtPsd)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_FidFromEmbeddings(benchmark::State& state) {
  const int e = static_cast<int>(state.range(0));
  const cxrgan::Array a = embeddings(2000, e, 4), b = embeddings(2000, e, 5);
  for (auto _ : state) benchmark::DoNotOptimize(cxrgan::fid_from_embeddings(a, b));
}
BENCHMARK(BM_FidFromEmbeddings)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
