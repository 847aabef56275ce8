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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "akd/optim.hpp"
#include "akd/params.hpp"
#include "akd/tensor.hpp"

namespace akd {

inline constexpr int kCheckpointVersion = 1;

/// Serializable training snapshot. Parameter values survive a save/load
/// round trip bitwise: floats are rendered with shortest round-trip
/// formatting and parsed back exactly.
struct Checkpoint {
  struct Param {
    std::string name;
    Shape shape;
    bool frozen = false;
    std::vector<float> values;
  };

  struct OptimizerState {
    std::int64_t step = 0;
    float lr = 0.0f;
    // Slot order matches param_names; both align with the optimizer's
    // parameter list at capture time.
    std::vector<std::string> param_names;
    std::vector<Adam::Slot> slots;
  };

  struct SchedulerState {
    bool has_best = false;
    float best = 0.0f;
    int epochs_since_improve = 0;
  };

  int version = kCheckpointVersion;
  int epoch = 0;
  bool has_best_val = false;
  float best_val = 0.0f;
  std::map<std::string, std::string> info;
  std::vector<Param> params;
  std::map<std::string, OptimizerState> optimizers;
  std::map<std::string, SchedulerState> schedulers;
  std::map<std::string, std::string> rng_states;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);

/// Parses checkpoint JSON. `context` (usually the file path) prefixes every
/// error message. A version other than kCheckpointVersion raises ParseError
/// naming both versions; a value array whose length disagrees with its shape
/// raises ParseError naming the parameter.
Checkpoint checkpoint_from_json(const std::string& text, const std::string& context);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Appends every parameter of `store` (creation order) to `ckpt.params`.
void capture_params(const ParamStore& store, Checkpoint& ckpt);

/// Captures an optimizer's step count, learning rate, and moment slots.
Checkpoint::OptimizerState capture_optimizer(const Adam& opt);

/// Captures scheduler best/stale state (the lr lives with the optimizer).
Checkpoint::SchedulerState capture_scheduler(const PlateauScheduler& sched);

/// Materializes checkpointed parameters with `prefix` into `store`.
/// Existing parameters are overwritten in place (shape-checked); missing
/// ones are created. Frozen flags are restored either way.
void restore_params(const Checkpoint& ckpt, const std::string& prefix, ParamStore& store);

/// Restores step count, lr, and slots into an optimizer whose parameter
/// list must match the captured one name-for-name.
void restore_optimizer(const Checkpoint::OptimizerState& state, const std::string& name,
                       Adam& opt);

void restore_scheduler(const Checkpoint::SchedulerState& state, PlateauScheduler& sched);

/// FNV-1a over names and raw value bytes of checkpointed params under
/// `prefix` (empty prefix covers everything). Matches the fold used by
/// ParamStore::values_hash_prefix.
std::uint64_t checkpoint_params_hash(const Checkpoint& ckpt, const std::string& prefix);

}  // namespace akd
