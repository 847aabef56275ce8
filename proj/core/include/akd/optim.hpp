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
#include <vector>

#include "akd/tensor.hpp"

namespace akd {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

/// Bias-corrected Adam over a fixed set of parameters. Frozen parameters
/// are skipped entirely; every live parameter must carry a gradient
/// (zero_grad + backward) before step() or the step refuses to run.
class Adam {
 public:
  struct Slot {
    std::vector<float> m;
    std::vector<float> v;
  };

  Adam(std::vector<Variable*> params, AdamConfig config);

  void zero_grad();
  void step();

  float lr() const { return config_.lr; }
  void set_lr(float lr) { config_.lr = lr; }
  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_; }
  const std::vector<Variable*>& params() const { return params_; }

  // Checkpoint plumbing: slots are index-aligned with params().
  const std::vector<Slot>& slots() const { return slots_; }
  void restore(std::vector<Slot> slots, std::int64_t step);

 private:
  std::vector<Variable*> params_;
  AdamConfig config_;
  std::vector<Slot> slots_;
  std::int64_t step_ = 0;
};

struct PlateauConfig {
  float factor = 0.5f;
  int patience = 3;
  float min_lr = 1e-8f;
};

/// Reduce-on-plateau for a lower-is-better validation metric. The first
/// observation seeds the best value; afterwards only strict improvement
/// resets the counter, and `patience` stale epochs halve the rate (by
/// `factor`) down to `min_lr`.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(PlateauConfig config) : config_(config) {}

  /// Feeds one epoch's metric; returns the learning rate to use next.
  float update(float metric, float current_lr);

  const PlateauConfig& config() const { return config_; }
  bool has_best() const { return has_best_; }
  float best_metric() const { return best_; }
  int epochs_since_improve() const { return stale_; }
  void restore(bool has_best, float best, int stale);

 private:
  PlateauConfig config_;
  bool has_best_ = false;
  float best_ = 0.0f;
  int stale_ = 0;
};

}  // namespace akd
