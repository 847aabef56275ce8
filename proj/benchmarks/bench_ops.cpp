// Copyright 2026 The akd Authors
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

#include <vector>

#include "akd/ops.hpp"
#include "akd/params.hpp"
#include "akd/rng.hpp"
#include "akd/tensor.hpp"
#include "benchmark/benchmark.h"

using namespace akd;

namespace {

std::vector<float> random_values(Rng& rng, int n) {
  std::vector<float> v(static_cast<std::size_t>(n));
  for (float& x : v) x = static_cast<float>(normal_sample(rng));
  return v;
}

Tensor random_tensor(Rng& rng, int rows, int cols) {
  return Tensor(Shape{rows, cols}, random_values(rng, rows * cols));
}

}  // namespace

static void BM_MatmulForward(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  const int h = static_cast<int>(state.range(1));
  Rng rng(1);
  const Tensor a = random_tensor(rng, t, h);
  const Tensor b = random_tensor(rng, h, h);
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c.values().data());
  }
}
BENCHMARK(BM_MatmulForward)->Args({40, 32})->Args({40, 48})->Args({60, 112});

static void BM_MatmulTrainStep(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  const int h = static_cast<int>(state.range(1));
  Rng rng(1);
  ParamStore store;
  Variable& w = store.create("w", Shape{h, h}, random_values(rng, h * h));
  const Tensor x = random_tensor(rng, t, h);
  for (auto _ : state) {
    Tape<float> tape;
    Tensor loss = mean_square(matmul(x, w.use(tape)));
    tape.backward(loss);
    benchmark::DoNotOptimize(w.grad().data());
    w.zero_grad();
  }
}
BENCHMARK(BM_MatmulTrainStep)->Args({40, 32})->Args({60, 112});

static void BM_MaskedSoftmax(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  Rng rng(2);
  const Tensor scores(Shape{t}, random_values(rng, t));
  Mask mask(static_cast<std::size_t>(t), 1);
  for (int i = t / 2; i < t; ++i) mask[static_cast<std::size_t>(i)] = 0;
  for (auto _ : state) {
    Tensor p = masked_softmax(scores, mask);
    benchmark::DoNotOptimize(p.values().data());
  }
}
BENCHMARK(BM_MaskedSoftmax)->Arg(24)->Arg(60)->Arg(256);

static void BM_LayerNorm(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  const int h = static_cast<int>(state.range(1));
  Rng rng(3);
  const Tensor x = random_tensor(rng, t, h);
  const Tensor gamma(Shape{h}, std::vector<float>(static_cast<std::size_t>(h), 1.0f));
  const Tensor beta(Shape{h}, std::vector<float>(static_cast<std::size_t>(h), 0.0f));
  for (auto _ : state) {
    Tensor y = layer_norm(x, gamma, beta);
    benchmark::DoNotOptimize(y.values().data());
  }
}
BENCHMARK(BM_LayerNorm)->Args({40, 32})->Args({60, 48});

BENCHMARK_MAIN();
