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

#include "akd/distill.hpp"

#include <cmath>
#include <cstddef>
#include <string>

#include "akd/error.hpp"

namespace akd {

void DistillWeights::validate() const {
  if (lambda_ed < 0.0f || lambda_pl < 0.0f || lambda_ar < 0.0f) {
    throw ConfigError("distill weights must be nonnegative");
  }
  if (!any_enabled()) {
    throw ConfigError("degenerate objective: every loss term is disabled");
  }
}

namespace {

template <typename S>
void require_detached(const TensorT<S>& t, const char* what) {
  if (t.requires_grad()) {
    throw ContractError(std::string(what) + " must be gradient-detached from the teacher");
  }
}

template <typename S>
void require_batch(std::size_t a, std::size_t b, const char* op) {
  if (a != b || a == 0) {
    throw ContractError(std::string(op) + ": batch sides must be equal and nonempty");
  }
}

}  // namespace

template <typename S>
AlignProjectionT<S>::AlignProjectionT(int student_hidden, int teacher_hidden, std::string prefix,
                                      ParamStoreT<S>& store, Rng* rng)
    : student_hidden_(student_hidden),
      teacher_hidden_(teacher_hidden),
      identity_(student_hidden == teacher_hidden),
      name_(prefix + ".w"),
      store_(&store) {
  if (student_hidden < 1 || teacher_hidden < 1) {
    throw ConfigError("alignment: hidden sizes must be >= 1");
  }
  if (identity_) return;
  if (VariableT<S>* existing = store.find(name_)) {
    if (existing->shape() != Shape{student_hidden, teacher_hidden}) {
      throw ContractError("parameter " + name_ + " has unexpected shape");
    }
    return;
  }
  if (!rng) throw ContractError("parameter " + name_ + " missing and no initializer provided");
  const double bound = 1.0 / std::sqrt(static_cast<double>(student_hidden));
  std::vector<S> v(static_cast<std::size_t>(student_hidden) * teacher_hidden);
  for (S& x : v) x = static_cast<S>(uniform_range(*rng, -bound, bound));
  store.create(name_, {student_hidden, teacher_hidden}, std::move(v));
}

template <typename S>
TensorT<S> AlignProjectionT<S>::apply(Tape<S>* tape, const TensorT<S>& e_student) const {
  if (e_student.rank() != 2 || e_student.dim(1) != student_hidden_) {
    throw DimensionError("alignment: embeddings must be [T x " +
                         std::to_string(student_hidden_) + "], got " +
                         shape_str(e_student.shape()));
  }
  if (identity_) return e_student;
  VariableT<S>& w = store_->at(name_);
  return matmul(e_student, tape ? w.use(*tape) : w.constant());
}

template <typename S>
TensorT<S> loss_ddsd(const std::vector<TensorT<S>>& probs, const std::vector<int>& labels) {
  require_batch<S>(probs.size(), labels.size(), "loss_ddsd");
  return masked_nll_rows(stack_rows(probs), labels, Mask{});
}

template <typename S>
TensorT<S> loss_ed(const std::vector<TensorT<S>>& e_teacher,
                   const std::vector<TensorT<S>>& e_student_aligned,
                   const std::vector<Mask>& masks) {
  require_batch<S>(e_teacher.size(), e_student_aligned.size(), "loss_ed");
  if (masks.size() != e_teacher.size()) {
    throw ContractError("loss_ed: one mask per example required");
  }

  long total_frames = 0;
  TensorT<S> total;
  for (std::size_t i = 0; i < e_teacher.size(); ++i) {
    const TensorT<S>& et = e_teacher[i];
    const TensorT<S>& es = e_student_aligned[i];
    require_detached(et, "teacher embeddings");
    if (et.rank() != 2 || es.rank() != 2 || et.dim(0) != es.dim(0)) {
      throw AlignmentError("loss_ed: teacher frames " + shape_str(et.shape()) +
                           " vs student frames " + shape_str(es.shape()));
    }
    if (et.dim(1) != es.dim(1)) {
      throw AlignmentError("loss_ed: teacher width " + std::to_string(et.dim(1)) +
                           " vs aligned student width " + std::to_string(es.dim(1)));
    }
    const Mask& m = masks[i];
    if (!m.empty() && static_cast<int>(m.size()) != et.dim(0)) {
      throw DimensionError("loss_ed: mask length does not match frames");
    }
    if (m.empty()) {
      total_frames += et.dim(0);
    } else {
      for (std::uint8_t bit : m) total_frames += bit ? 1 : 0;
    }
    TensorT<S> ssq = masked_sum_square(sub(et, es), m);
    total = total.defined() ? add(total, ssq) : ssq;
  }
  if (total_frames == 0) throw ContractError("loss_ed: no unmasked frames in batch");
  const S denom = static_cast<S>(1.0 / (static_cast<double>(total_frames) *
                                        static_cast<double>(e_teacher[0].dim(1))));
  return scale(total, denom);
}

template <typename S>
TensorT<S> loss_pl(const std::vector<TensorT<S>>& p_student,
                   const std::vector<TensorT<S>>& p_teacher) {
  require_batch<S>(p_student.size(), p_teacher.size(), "loss_pl");
  std::vector<int> pseudo(p_teacher.size());
  for (std::size_t i = 0; i < p_teacher.size(); ++i) {
    const TensorT<S>& pt = p_teacher[i];
    require_detached(pt, "teacher probabilities");
    if (pt.numel() != 2) {
      throw DimensionError("loss_pl: teacher probabilities must have two classes");
    }
    // Hard pseudo-label; ties resolve to class 0.
    pseudo[i] = pt.values()[1] > pt.values()[0] ? 1 : 0;
  }
  return masked_nll_rows(stack_rows(p_student), pseudo, Mask{});
}

template <typename S>
TensorT<S> loss_ar(const std::vector<TensorT<S>>& alpha_teacher,
                   const std::vector<TensorT<S>>& alpha_student,
                   const std::vector<Mask>& masks) {
  require_batch<S>(alpha_teacher.size(), alpha_student.size(), "loss_ar");
  if (masks.size() != alpha_teacher.size()) {
    throw ContractError("loss_ar: one mask per example required");
  }
  TensorT<S> total;
  for (std::size_t i = 0; i < alpha_teacher.size(); ++i) {
    const TensorT<S>& at = alpha_teacher[i];
    const TensorT<S>& as = alpha_student[i];
    require_detached(at, "teacher attention weights");
    if (at.rank() != 1 || as.rank() != 1 || at.dim(0) != as.dim(0)) {
      throw AlignmentError("loss_ar: attention lengths differ, " + shape_str(at.shape()) +
                           " vs " + shape_str(as.shape()));
    }
    if (!masks[i].empty() && static_cast<int>(masks[i].size()) != at.dim(0)) {
      throw DimensionError("loss_ar: mask length does not match frames");
    }
    const int t = at.dim(0);
    TensorT<S> d = reshape(sub(at, as), {t, 1});
    TensorT<S> ssq = masked_sum_square(d, masks[i]);
    total = total.defined() ? add(total, ssq) : ssq;
  }
  return scale(total, static_cast<S>(1.0 / static_cast<double>(alpha_teacher.size())));
}

template <typename S>
LossBreakdownT<S> combine(const TensorT<S>& ddsd, const TensorT<S>& ed, const TensorT<S>& pl,
                          const TensorT<S>& ar, const DistillWeights& w) {
  w.validate();
  LossBreakdownT<S> out;

  auto take = [](const TensorT<S>& t, const char* name) {
    if (!t.defined()) {
      throw ContractError(std::string("combine: enabled term '") + name + "' was not computed");
    }
    if (t.numel() != 1) {
      throw ContractError(std::string("combine: term '") + name + "' is not a scalar");
    }
    return t;
  };

  TensorT<S> total;
  auto accumulate = [&total](TensorT<S> term) {
    total = total.defined() ? add(total, term) : term;
  };

  if (w.use_ddsd) {
    out.ddsd = take(ddsd, "ddsd");
    accumulate(out.ddsd);
  }
  if (w.ed_enabled()) {
    out.ed = take(ed, "ed");
    accumulate(scale(out.ed, static_cast<S>(w.lambda_ed)));
  }
  if (w.pl_enabled()) {
    out.pl = take(pl, "pl");
    accumulate(scale(out.pl, static_cast<S>(w.lambda_pl)));
  }
  if (w.ar_enabled()) {
    out.ar = take(ar, "ar");
    accumulate(scale(out.ar, static_cast<S>(w.lambda_ar)));
  }
  out.total = total;
  return out;
}

#define AKD_INSTANTIATE_DISTILL(S)                                                         \
  template class AlignProjectionT<S>;                                                      \
  template TensorT<S> loss_ddsd(const std::vector<TensorT<S>>&, const std::vector<int>&); \
  template TensorT<S> loss_ed(const std::vector<TensorT<S>>&, const std::vector<TensorT<S>>&, \
                              const std::vector<Mask>&);                                   \
  template TensorT<S> loss_pl(const std::vector<TensorT<S>>&, const std::vector<TensorT<S>>&); \
  template TensorT<S> loss_ar(const std::vector<TensorT<S>>&, const std::vector<TensorT<S>>&, \
                              const std::vector<Mask>&);                                   \
  template LossBreakdownT<S> combine(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&, \
                                     const TensorT<S>&, const DistillWeights&);

AKD_INSTANTIATE_DISTILL(float)
AKD_INSTANTIATE_DISTILL(double)

#undef AKD_INSTANTIATE_DISTILL

}  // namespace akd
