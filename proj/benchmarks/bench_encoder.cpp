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

#include <string>
#include <vector>

#include "akd/distill.hpp"
#include "akd/encoder.hpp"
#include "akd/heads.hpp"
#include "akd/optim.hpp"
#include "akd/params.hpp"
#include "akd/rng.hpp"
#include "akd/tensor.hpp"
#include "benchmark/benchmark.h"

using namespace akd;

namespace {

Tensor random_frames(Rng& rng, int t, int d) {
  std::vector<float> v(static_cast<std::size_t>(t) * static_cast<std::size_t>(d));
  for (float& x : v) x = static_cast<float>(normal_sample(rng));
  return Tensor(Shape{t, d}, std::move(v));
}

}  // namespace

static void BM_EncoderForward(benchmark::State& state, const std::string& preset) {
  const int t = static_cast<int>(state.range(0));
  EncoderConfig config = encoder_preset(preset);
  Rng rng(11);
  ParamStore store;
  const Encoder encoder(config, "enc", store, &rng);
  const Tensor x = random_frames(rng, t, config.input_dim);
  const Mask mask;
  for (auto _ : state) {
    Tensor e = encoder.forward(nullptr, x, mask);
    benchmark::DoNotOptimize(e.values().data());
  }
}
BENCHMARK_CAPTURE(BM_EncoderForward, desk_student, "desk-student")->Arg(40)->Arg(60);
BENCHMARK_CAPTURE(BM_EncoderForward, desk_teacher, "desk-teacher")->Arg(40);

static void BM_StudentTrainStep(benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  const int batch = 8;
  EncoderConfig config = encoder_preset("desk-student");
  Rng rng(12);
  ParamStore store;
  const Encoder encoder(config, "student.enc", store, &rng);
  const AdapterBank bank(config.hidden, 1, "student.heads", store, &rng);
  Adam opt(store.all(), AdamConfig{1e-4f, 0.9f, 0.98f, 1e-9f});
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  for (int i = 0; i < batch; ++i) {
    inputs.push_back(random_frames(rng, t, config.input_dim));
    labels.push_back(i % 2);
  }
  const Mask mask;
  for (auto _ : state) {
    Tape<float> tape;
    std::vector<Tensor> probs;
    for (int i = 0; i < batch; ++i) {
      Tensor e = encoder.forward(&tape, inputs[static_cast<std::size_t>(i)], mask);
      HeadOutput head =
          bank.forward(&tape, e, mask, static_cast<InvocationType>(i % kInvocationCount));
      probs.push_back(head.probs);
    }
    Tensor loss = loss_ddsd(probs, labels);
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
    benchmark::DoNotOptimize(loss.value());
  }
}
BENCHMARK(BM_StudentTrainStep)->Arg(40)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
