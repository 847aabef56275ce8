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
#include <vector>

#include "akd/ops.hpp"
#include "akd/params.hpp"
#include "akd/rng.hpp"
#include "akd/tensor.hpp"

namespace akd {

/// Loss-term selection. A term enters the objective iff:
///   ddsd: use_ddsd;  ed: lambda_ed > 0;  pl: use_pl and lambda_pl > 0;
///   ar: lambda_ar > 0.
/// Disabled terms are skipped entirely (no graph nodes), so a run with all
/// knowledge-distillation terms off is bitwise identical to a plain run.
struct DistillWeights {
  float lambda_ed = 0.0f;
  float lambda_pl = 0.0f;
  float lambda_ar = 0.0f;
  bool use_ddsd = true;
  bool use_pl = false;

  void validate() const;
  bool ed_enabled() const { return lambda_ed > 0.0f; }
  bool pl_enabled() const { return use_pl && lambda_pl > 0.0f; }
  bool ar_enabled() const { return lambda_ar > 0.0f; }
  bool any_enabled() const { return use_ddsd || ed_enabled() || pl_enabled() || ar_enabled(); }
};

/// Student-to-teacher width alignment for the embedding-distance loss.
/// Identity (parameter-free) when the widths already match; otherwise a
/// trainable bias-free linear map owned by the student.
template <typename S>
class AlignProjectionT {
 public:
  AlignProjectionT(int student_hidden, int teacher_hidden, std::string prefix,
                   ParamStoreT<S>& store, Rng* rng);

  TensorT<S> apply(Tape<S>* tape, const TensorT<S>& e_student) const;

  bool is_identity() const { return identity_; }
  int student_hidden() const { return student_hidden_; }
  int teacher_hidden() const { return teacher_hidden_; }

 private:
  int student_hidden_;
  int teacher_hidden_;
  bool identity_;
  std::string name_;
  ParamStoreT<S>* store_ = nullptr;
};

using AlignProjection = AlignProjectionT<float>;

/// Mean over the batch of -log p[label]; probabilities are clamped at 1e-12
/// before the log. probs are per-example [1 x 2] rows.
template <typename S>
TensorT<S> loss_ddsd(const std::vector<TensorT<S>>& probs, const std::vector<int>& labels);

/// Mean squared embedding distance over unmasked frames and teacher feature
/// dims. e_teacher entries must be detached; e_student entries are already
/// width-aligned. Frame counts must agree per example.
template <typename S>
TensorT<S> loss_ed(const std::vector<TensorT<S>>& e_teacher,
                   const std::vector<TensorT<S>>& e_student_aligned,
                   const std::vector<Mask>& masks);

/// Cross-entropy of the student against hard teacher pseudo-labels
/// (argmax of detached teacher probabilities; ties resolve to class 0).
template <typename S>
TensorT<S> loss_pl(const std::vector<TensorT<S>>& p_student,
                   const std::vector<TensorT<S>>& p_teacher);

/// Per-example sum over unmasked frames of squared attention-weight
/// differences, averaged over the batch. alpha_teacher must be detached.
template <typename S>
TensorT<S> loss_ar(const std::vector<TensorT<S>>& alpha_teacher,
                   const std::vector<TensorT<S>>& alpha_student,
                   const std::vector<Mask>& masks);

/// The combined objective and its pieces. Disabled terms hold undefined
/// tensors; `total` is always defined.
template <typename S>
struct LossBreakdownT {
  TensorT<S> ddsd;
  TensorT<S> ed;
  TensorT<S> pl;
  TensorT<S> ar;
  TensorT<S> total;
};

using LossBreakdown = LossBreakdownT<float>;

/// Weighted sum of the enabled terms:
///   total = ddsd + lambda_ed * ed + lambda_pl * pl + lambda_ar * ar.
/// Each argument may be undefined iff its term is disabled; a defined-but-
/// disabled argument is ignored, an undefined-but-enabled one is a contract
/// error. All terms disabled is a config error (degenerate objective). When
/// only one term survives unweighted it is passed through untouched.
template <typename S>
LossBreakdownT<S> combine(const TensorT<S>& ddsd, const TensorT<S>& ed, const TensorT<S>& pl,
                          const TensorT<S>& ar, const DistillWeights& w);

}  // namespace akd
