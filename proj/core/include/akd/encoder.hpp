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

#include "akd/ops.hpp"
#include "akd/params.hpp"
#include "akd/rng.hpp"
#include "akd/tensor.hpp"

namespace akd {

enum class EncoderKind { Transformer, Conformer };

const char* encoder_kind_name(EncoderKind k);
EncoderKind encoder_kind_from_name(const std::string& name);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::Conformer;
  int input_dim = 112;  // spliced feature dimension D'
  int hidden = 32;      // model width H
  int layers = 2;
  int heads = 2;
  int ff_dim = 64;
  int conv_kernel = 7;  // conformer depthwise kernel, odd
  int max_t = 256;      // positional-table rows (transformer only)

  void validate() const;
};

/// Named configurations: "paper-transformer", "paper-conformer",
/// "paper-teacher", "desk-student", "desk-teacher".
EncoderConfig encoder_preset(const std::string& name);
bool is_known_preset(const std::string& name);

/// Sequence encoder mapping [T x input_dim] frames to [T x hidden]
/// embeddings. Parameters live in a ParamStore under `prefix`; existing
/// entries (e.g. loaded from a checkpoint) are reused after shape checks,
/// missing ones are created and initialized from `rng` (required then).
///
/// Transformer blocks: pre-norm self-attention and ReLU feed-forward
/// residuals, learned absolute positional embeddings, final layer norm.
/// Conformer blocks: half-step feed-forward sandwich around parallel
/// self-attention and convolution branches whose concatenation is merged
/// by a linear bottleneck, with a per-block final layer norm.
///
/// Masking: padded key positions are excluded from every attention row,
/// padded rows are zeroed before the depthwise convolution, and no other
/// op mixes rows, so unmasked output rows are bitwise independent of how
/// much padding follows them.
template <typename S>
class EncoderT {
 public:
  EncoderT(const EncoderConfig& config, std::string prefix, ParamStoreT<S>& store, Rng* rng);

  /// x is [T x input_dim]; mask length T (empty = all real). Returns
  /// [T x hidden]. Pass tape = nullptr for a constant (no-grad) pass.
  TensorT<S> forward(Tape<S>* tape, const TensorT<S>& x, const Mask& mask) const;

  const EncoderConfig& config() const { return config_; }
  const std::string& prefix() const { return prefix_; }

 private:
  TensorT<S> attention(Tape<S>* tape, const TensorT<S>& u, const Mask& mask,
                       const std::string& base) const;
  TensorT<S> feed_forward(Tape<S>* tape, const TensorT<S>& u, const std::string& base,
                          bool use_swish) const;
  TensorT<S> norm(Tape<S>* tape, const TensorT<S>& u, const std::string& base) const;
  TensorT<S> use(Tape<S>* tape, const std::string& name) const;

  EncoderConfig config_;
  std::string prefix_;
  ParamStoreT<S>* store_;
};

using Encoder = EncoderT<float>;

}  // namespace akd
