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

#include <string>
#include <utility>
#include <vector>

#include "akd/data.hpp"
#include "akd/ops.hpp"
#include "akd/params.hpp"
#include "akd/rng.hpp"
#include "akd/tensor.hpp"

namespace akd {

/// Global-attention pooling: s_t = e_t . theta, alpha = masked softmax of s,
/// Z = sum_t alpha_t e_t. e is [T x H], theta [H x 1]; returns (alpha [T],
/// Z [1 x H]).
template <typename S>
std::pair<TensorT<S>, TensorT<S>> summarize(const TensorT<S>& e, const Mask& mask,
                                            const TensorT<S>& theta);

/// p = softmax(z . w + b) over the two classes; z [1 x H], w [H x 2], b [2].
/// p[1] is the device-directed probability used as the detection score.
template <typename S>
TensorT<S> classify(const TensorT<S>& z, const TensorT<S>& w, const TensorT<S>& b);

/// Per-example head result.
template <typename S>
struct HeadOutputT {
  TensorT<S> alpha;    // [T], zero at masked frames
  TensorT<S> summary;  // [1 x H]
  TensorT<S> probs;    // [1 x 2]
};

using HeadOutput = HeadOutputT<float>;

/// One classification adapter per invocation type: a global-attention
/// projection theta plus a small classifier. `depth` counts classifier
/// layers: depth 1 is a single hidden->2 linear layer, deeper adapters
/// insert ReLU hidden->hidden layers before it.
template <typename S>
class AdapterBankT {
 public:
  AdapterBankT(int hidden, int depth, std::string prefix, ParamStoreT<S>& store, Rng* rng,
               std::vector<InvocationType> invocations = {InvocationType::HAG, InvocationType::AG,
                                                          InvocationType::FCO});

  /// Runs the adapter matching `inv` on embeddings e [T x H].
  HeadOutputT<S> forward(Tape<S>* tape, const TensorT<S>& e, const Mask& mask,
                         InvocationType inv) const;

  bool has(InvocationType inv) const;
  int hidden() const { return hidden_; }
  int depth() const { return depth_; }
  const std::string& prefix() const { return prefix_; }

 private:
  int hidden_;
  int depth_;
  std::string prefix_;
  ParamStoreT<S>* store_;
  bool present_[kInvocationCount] = {false, false, false};
};

using AdapterBank = AdapterBankT<float>;

/// Routes each example to the adapter of its invocation type. Inputs are
/// per-example encoder outputs (shared encoder upstream); heads are
/// disjoint per type, so a type absent from the batch receives no gradient.
template <typename S>
std::vector<HeadOutputT<S>> route(Tape<S>* tape, const AdapterBankT<S>& bank,
                                  const std::vector<TensorT<S>>& embeddings,
                                  const std::vector<Mask>& masks,
                                  const std::vector<InvocationType>& invocations);

}  // namespace akd
