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

// Differentiable kernels. Every op validates shapes, computes the forward
// result, rejects non-finite outputs, and registers a tape node when any
// input lives on a tape. Reductions and softmax normalizers accumulate in
// double regardless of the storage scalar.
//
// Masks are plain byte vectors (1 = real position), never tensors: they are
// data, not something to differentiate through.

namespace akd {

using Mask = std::vector<std::uint8_t>;

// -- linear algebra ---------------------------------------------------------

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b);

template <typename S>
TensorT<S> transpose(const TensorT<S>& x);

// -- elementwise ------------------------------------------------------------

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b);

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b);

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b);

template <typename S>
TensorT<S> scale(const TensorT<S>& x, S c);

template <typename S>
TensorT<S> relu(const TensorT<S>& x);

template <typename S>
TensorT<S> swish(const TensorT<S>& x);

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& x);

template <typename S>
TensorT<S> log_elem(const TensorT<S>& x);

template <typename S>
TensorT<S> clamp_min(const TensorT<S>& x, S floor);

// -- shape manipulation ------------------------------------------------------

template <typename S>
TensorT<S> reshape(const TensorT<S>& x, Shape shape);

template <typename S>
TensorT<S> slice_rows(const TensorT<S>& x, int r0, int r1);

template <typename S>
TensorT<S> slice_cols(const TensorT<S>& x, int c0, int c1);

/// Concatenation along the feature (column) axis.
template <typename S>
TensorT<S> concat_cols(const TensorT<S>& a, const TensorT<S>& b);

/// Stacks 1xC (or length-C) tensors into a BxC matrix.
template <typename S>
TensorT<S> stack_rows(const std::vector<TensorT<S>>& rows);

// -- broadcasting helpers ----------------------------------------------------

/// x[R x C] + b[C] broadcast over rows (bias add).
template <typename S>
TensorT<S> add_rowwise(const TensorT<S>& x, const TensorT<S>& b);

/// Zeroes the rows where mask is 0; other rows pass through.
template <typename S>
TensorT<S> zero_masked_rows(const TensorT<S>& x, const Mask& row_mask);

// -- normalization and attention ----------------------------------------------

/// Row-wise layer normalization with learned gain/shift, eps = 1e-5.
template <typename S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta);

/// Softmax over a length-T score vector restricted to unmasked positions.
/// Masked outputs are exact zeros; unmasked outputs sum to one. Stabilized
/// by subtracting the unmasked maximum. Empty mask means all positions real.
template <typename S>
TensorT<S> masked_softmax(const TensorT<S>& scores, const Mask& mask);

/// Row-wise masked softmax on [R x C]; one key mask shared by all rows.
template <typename S>
TensorT<S> softmax_rows(const TensorT<S>& x, const Mask& col_mask);

// -- convolutions -------------------------------------------------------------

/// Per-channel 1-D convolution along rows (time) with symmetric zero
/// padding; w is [K x D], K odd.
template <typename S>
TensorT<S> depthwise_conv1d(const TensorT<S>& x, const TensorT<S>& w);

/// 1x1 convolution across channels: x[T x D] * w[D x E].
template <typename S>
TensorT<S> pointwise_conv1d(const TensorT<S>& x, const TensorT<S>& w);

/// Gated linear unit: splits columns in half, first ⊙ sigmoid(second).
template <typename S>
TensorT<S> glu(const TensorT<S>& x);

// -- reductions ---------------------------------------------------------------

template <typename S>
TensorT<S> sum(const TensorT<S>& x);

template <typename S>
TensorT<S> mean(const TensorT<S>& x);

/// Mean of squared entries.
template <typename S>
TensorT<S> mean_square(const TensorT<S>& x);

/// Sum of squared entries over unmasked rows only.
template <typename S>
TensorT<S> masked_sum_square(const TensorT<S>& x, const Mask& row_mask);

/// Mean over unmasked rows of -log(max(p[r, label_r], 1e-12)). The clamp
/// keeps an exact-zero probability at the true class from poisoning the
/// loss; gradient is zero in the clamped region.
template <typename S>
TensorT<S> masked_nll_rows(const TensorT<S>& probs, const std::vector<int>& labels,
                           const Mask& row_mask);

}  // namespace akd
