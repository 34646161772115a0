// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "cxrgan/phantom.h"
#include "cxrgan/training.h"

namespace {

// One generator + discriminator update at the final level; arg is the
// resolution. Earlier phases are given no budget so training starts there.
void BM_GanStep(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  cxrgan::PhantomConfig pc;
  pc.patients = 64;
  pc.resolution = res;
  const cxrgan::Corpus corpus = cxrgan::make_phantom(pc);
  cxrgan::TrainConfig cfg;
  cfg.arch.max_resolution = res;
  cfg.arch.fmap_base = 64;
  cfg.phase_images = 0;
  cfg.extra_images = 1L << 40;
  cfg.checkpoint_every = 0;
  cxrgan::GanTrainer trainer(cfg, cxrgan::images_to_array(corpus.images));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step().d_loss);
  state.SetItemsProcessed(state.iterations() * cfg.batch_size(trainer.blend().level));
}
BENCHMARK(BM_GanStep)->Arg(4)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
