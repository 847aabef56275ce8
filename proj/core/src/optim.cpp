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

#include "akd/optim.hpp"

#include <cmath>

#include "akd/error.hpp"

namespace akd {

Adam::Adam(std::vector<Variable*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  slots_.reserve(params_.size());
  for (const Variable* p : params_) {
    if (p == nullptr) throw ContractError("adam: null parameter");
    slots_.push_back(Slot{std::vector<float>(p->numel(), 0.0f),
                          std::vector<float>(p->numel(), 0.0f)});
  }
}

void Adam::zero_grad() {
  for (Variable* p : params_) {
    if (!p->frozen()) p->zero_grad();
  }
}

void Adam::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(config_.beta1), step_);
  const double bc2 = 1.0 - std::pow(static_cast<double>(config_.beta2), step_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Variable* p = params_[i];
    if (p->frozen()) continue;
    if (!p->grad_ready()) {
      throw ContractError("adam: parameter " + p->name() + " has no gradient for this step");
    }
    const std::vector<float>& g = p->grad();
    Slot& slot = slots_[i];
    std::vector<float>& w = p->values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      slot.m[j] = config_.beta1 * slot.m[j] + (1.0f - config_.beta1) * g[j];
      slot.v[j] = config_.beta2 * slot.v[j] + (1.0f - config_.beta2) * g[j] * g[j];
      const double mhat = slot.m[j] / bc1;
      const double vhat = slot.v[j] / bc2;
      w[j] -= static_cast<float>(config_.lr * mhat / (std::sqrt(vhat) + config_.epsilon));
      if (!std::isfinite(w[j])) {
        throw NumericError("adam: parameter " + p->name() + " became non-finite at step " +
                           std::to_string(step_));
      }
    }
  }
}

void Adam::restore(std::vector<Slot> slots, std::int64_t step) {
  if (slots.size() != params_.size()) {
    throw ContractError("adam: restoring " + std::to_string(slots.size()) + " slots for " +
                        std::to_string(params_.size()) + " parameters");
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].m.size() != params_[i]->numel() || slots[i].v.size() != params_[i]->numel()) {
      throw ContractError("adam: slot size mismatch for parameter " + params_[i]->name());
    }
  }
  slots_ = std::move(slots);
  step_ = step;
}

float PlateauScheduler::update(float metric, float current_lr) {
  if (!std::isfinite(metric)) {
    throw NumericError("scheduler: non-finite validation metric");
  }
  if (!has_best_ || metric < best_) {
    has_best_ = true;
    best_ = metric;
    stale_ = 0;
    return current_lr;
  }
  ++stale_;
  if (stale_ >= config_.patience) {
    stale_ = 0;
    return std::max(current_lr * config_.factor, config_.min_lr);
  }
  return current_lr;
}

void PlateauScheduler::restore(bool has_best, float best, int stale) {
  has_best_ = has_best;
  best_ = best;
  stale_ = stale;
}

}  // namespace akd
