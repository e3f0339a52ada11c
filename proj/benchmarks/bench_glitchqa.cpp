// Copyright 2026 The GlitchQA Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "glitchqa/net.hpp"
#include "glitchqa/synthkit.hpp"
#include "glitchqa/trainer.hpp"

namespace {

using namespace glitchqa;

Tensor<float> random_input(int n, int side) {
  Tensor<float> x({n, 3, side, side});
  SeededRng rng(1);
  for (float& v : x.data) v = static_cast<float>(rng.uniform());
  return x;
}

void BM_ForwardShuffle(benchmark::State& state) {
  ClassifierConfig c;
  c.width_multiplier = static_cast<double>(state.range(0)) / 10.0;
  const auto params = init_model(c, 1);
  const auto x = random_input(static_cast<int>(state.range(1)), 96);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, c, x));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_ForwardShuffle)->Args({5, 1})->Args({5, 32})->Args({10, 1})->Unit(benchmark::kMillisecond);

void BM_ForwardResidual(benchmark::State& state) {
  ClassifierConfig c;
  c.family = Family::kResidual;
  c.depth = static_cast<int>(state.range(0));
  const auto params = init_model(c, 1);
  const auto x = random_input(1, 96);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, c, x));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ForwardResidual)->Arg(18)->Arg(34)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  ClassifierConfig c;
  Parameters<float> params = init_model(c, 1);
  const auto x = random_input(32, 96);
  std::vector<int> labels(32);
  for (int i = 0; i < 32; ++i) labels[i] = i % kNumClasses;
  AdamState<float> adam;
  long t = 0;
  for (auto _ : state) {
    Tape<float> tape(true);
    const int in = tape.input(x);
    const GraphNodes nodes = build_graph(tape, params, c, in, Mode::kTrain);
    const auto lg = cross_entropy_with_grad(tape.value(nodes.logits), labels);
    tape.backward(nodes.logits, lg.grad);
    adam_step(params, collect_gradients(tape, nodes, params), adam, ++t, {});
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_Conv3x3(benchmark::State& state) {
  const int ch = static_cast<int>(state.range(0));
  Tensor<float> w({ch, ch, 3, 3});
  SeededRng rng(2);
  for (float& v : w.data) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  Tensor<float> x({8, ch, 24, 24});
  for (float& v : x.data) v = static_cast<float>(rng.uniform());
  for (auto _ : state) {
    Tape<float> tape(false);
    const int id = tape.conv2d(tape.input(x), tape.parameter(w), 1, 1, 1);
    benchmark::DoNotOptimize(tape.value(id).data.data());
  }
  state.counters["MACs"] = benchmark::Counter(8.0 * ch * ch * 9 * 24 * 24, benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv3x3)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SynthSample(benchmark::State& state) {
  SynthConfig c;
  c.bank = std::make_shared<const TextureBank>(TextureBank::builtin());
  const auto cls = kAllClasses[static_cast<std::size_t>(state.range(0))];
  std::uint64_t view = 0;
  for (auto _ : state) benchmark::DoNotOptimize(synth_sample(cls, 3, view++, 1, c));
}
BENCHMARK(BM_SynthSample)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
