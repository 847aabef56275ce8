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

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "akd/ops.hpp"
#include "akd/rng.hpp"
#include "akd/tensor.hpp"

namespace akd {

enum class InvocationType { HAG = 0, AG = 1, FCO = 2 };

inline constexpr int kInvocationCount = 3;

const char* invocation_name(InvocationType t);
InvocationType invocation_from_name(const std::string& name);

/// One utterance: T raw feature frames of dimension D plus label metadata.
struct FeatureSequence {
  std::string id;
  InvocationType invocation = InvocationType::HAG;
  int label = 0;  // 1 = device-directed
  int t = 0;
  int d = 0;
  std::vector<float> frames;  // row-major t*d
};

struct Dataset {
  int dim = 0;  // raw feature dimension D shared by all sequences
  std::vector<FeatureSequence> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
};

/// FeatureSequence plus per-frame segment tags, used only for teacher
/// encoder pretraining. Tag values: 0 background, 1 HAG keyword, 2 AG
/// keyword, 3 distractor, 4 FCO shift.
struct AuxSequence {
  FeatureSequence seq;
  std::vector<int> tags;  // length t
};

inline constexpr int kAuxTagCount = 5;

/// Class-conditional recipe for one invocation type. Directions carry
/// their magnitude; the generator adds them onto the noise background.
struct ClassProfile {
  std::vector<float> base_mean;       // always-on invocation background mean
  std::vector<float> keyword_shift;   // added on keyword-segment frames of positives
  std::vector<float> distractor_shift;// added on distractor-segment frames of negatives
  std::vector<float> global_shift;    // added on every frame of FCO positives
  int seg_min = 5;
  int seg_max = 15;
};

struct GeneratorConfig {
  int dim = 16;
  int t_min = 20;
  int t_max = 60;
  float class_balance = 0.5f;   // fraction of device-directed examples
  float noise_scale = 1.0f;     // per-element normal noise sigma
  float distractor_prob = 0.9f; // chance a keyword-type negative carries a distractor
  std::uint64_t seed = 7;
  std::array<ClassProfile, 3> profiles;  // indexed by InvocationType

  void validate() const;
};

/// Default class profiles: orthogonal keyword/distractor directions per
/// invocation so that direction-selective attention (not energy) separates
/// the classes. `profile_seed` fixes the directions independently of the
/// sampling seed, so train/val/test datasets share one class structure.
GeneratorConfig default_generator_config(int dim = 16, std::uint64_t profile_seed = 7,
                                         float shift_scale = 1.0f, float noise_scale = 1.0f);

Dataset generate(const GeneratorConfig& config, int n);
std::vector<AuxSequence> generate_aux(const GeneratorConfig& config, int n);

/// Frame splicing: output frame t is the concatenation of frames
/// t-context .. t+context with edge frames replicated, so D' = D*(2c+1).
std::vector<float> splice(const FeatureSequence& seq, int context);
int spliced_dim(int d, int context);

/// A padded mini-batch of spliced sequences.
struct Batch {
  int size = 0;   // B
  int t_max = 0;
  int dim = 0;    // spliced dimension D'
  std::vector<float> frames;  // B * t_max * dim, padded positions zero
  std::vector<Mask> masks;    // per example, length t_max, 1 = real frame
  std::vector<int> labels;
  std::vector<InvocationType> invocations;
  std::vector<int> lengths;
  std::vector<std::string> ids;

  /// The padded [t_max x dim] frame matrix of one example.
  Tensor example(int i) const;
};

/// Shuffled batching: order drawn from `rng` (one Fisher-Yates pass), then
/// consecutive chunks of `batch_size`, each padded to its longest member.
std::vector<Batch> make_batches(const Dataset& dataset, int batch_size, int context, Rng& rng);

/// Dataset order preserved; used for evaluation.
std::vector<Batch> make_batches_sequential(const Dataset& dataset, int batch_size, int context);

/// Line-delimited text format, header `akd-dataset v1 D=<D>`.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace akd
