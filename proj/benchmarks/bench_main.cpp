// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Throughput of the hot paths: convolutions, the recurrent step, a full
// training window (forward + backward) and the MS-SSIM loss.

#include <benchmark/benchmark.h>

#include <random>

#include "cvrnn/config.hpp"
#include "cvrnn/conv_vrnn.hpp"
#include "cvrnn/objectives.hpp"
#include "cvrnn/ops.hpp"
#include "cvrnn/trainer.hpp"

namespace {

using namespace cvrnn;

Tensor noise(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

ModelConfig model_at(int image_size) {
  TrainConfig cfg = desk_scale_config();
  cfg.model.image_size = image_size;
  cfg.model.feat_hw = image_size / 8;
  return cfg.model;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const int ch = static_cast<int>(state.range(0));
  const Tensor x = noise({1, ch, 32, 32}, 1), w = noise({ch, ch, 3, 3}, 2), b = noise({ch}, 3);
  for (auto _ : state) {
    Tape tape;
    const Var y = ops::conv2d(tape.leaf(x), tape.leaf(w), tape.leaf(b), 1, 1);
    tape.backward(ops::sum(y));
    benchmark::DoNotOptimize(tape.size());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(16)->Arg(32)->Arg(64);

void BM_ConvTranspose2dForward(benchmark::State& state) {
  const int ch = static_cast<int>(state.range(0));
  const Tensor x = noise({1, ch, 16, 16}, 1), w = noise({ch, ch, 4, 4}, 2), b = noise({ch}, 3);
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(ops::conv_transpose2d(tape.constant(x), tape.constant(w), tape.constant(b), 2, 1).value().data());
  }
}
BENCHMARK(BM_ConvTranspose2dForward)->Arg(16)->Arg(32)->Arg(64);

void BM_VrnnStepEval(benchmark::State& state) {
  const ConvVrnn model(model_at(static_cast<int>(state.range(0))));
  const int s = model.config().image_size;
  const Tensor x = noise({1, 1, s, s}, 4);
  const RecurrentState h = model.init_state(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.step(x, h, LatentMode::kEvalMean, nullptr).prediction.data());
  }
}
BENCHMARK(BM_VrnnStepEval)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_TrainingWindow(benchmark::State& state) {
  TrainConfig cfg = desk_scale_config();
  cfg.model_kind = static_cast<ModelKind>(state.range(0));
  const auto model = make_model(cfg.model_kind, cfg.model);
  std::vector<Tensor> frames;
  for (int t = 0; t < 4; ++t) frames.push_back(noise({1, 64, 64}, 10 + static_cast<std::uint64_t>(t)));
  const Tensor target = noise({1, 64, 64}, 20);
  Rng rng(0);
  for (auto _ : state) {
    Tape tape;
    const WindowObjective obj = window_objective(tape, *model, frames, target, cfg, LatentMode::kTrainSample, &rng);
    tape.backward(obj.total);
    benchmark::DoNotOptimize(tape.size());
  }
  state.SetLabel(to_string(cfg.model_kind));
}
BENCHMARK(BM_TrainingWindow)
    ->Arg(static_cast<int>(ModelKind::kConvVrnn))
    ->Arg(static_cast<int>(ModelKind::kConvVae4))
    ->Unit(benchmark::kMillisecond);

void BM_MsssimLoss(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0));
  const Tensor a = noise({1, 1, s, s}, 1), b = noise({1, 1, s, s}, 2);
  const LossConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(msssim_loss(a, b, cfg));
}
BENCHMARK(BM_MsssimLoss)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
