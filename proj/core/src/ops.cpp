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

#include "akd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace akd {
namespace {

template <typename S>
Tape<S>* common_tape(std::initializer_list<const TensorT<S>*> ts, const char* op) {
  Tape<S>* tape = nullptr;
  for (const TensorT<S>* t : ts) {
    if (!t->defined()) throw ContractError(std::string(op) + ": undefined tensor operand");
    if (t->tape() == nullptr) continue;
    if (tape != nullptr && tape != t->tape()) {
      throw ContractError(std::string(op) + ": operands belong to different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

template <typename S>
void require_finite(const std::vector<S>& v, const char* op) {
  if (!all_finite(v.data(), v.size())) {
    throw NumericError(std::string(op) + ": non-finite value in forward result");
  }
}

template <typename S>
TensorT<S> finish(const char* op, Shape shape, std::vector<S> vals, Tape<S>* tape,
                  typename Tape<S>::BackwardFn fn) {
  require_finite(vals, op);
  auto data = std::make_shared<TensorDataT<S>>(TensorDataT<S>{std::move(shape), std::move(vals)});
  if (tape == nullptr) return TensorT<S>::attach(std::move(data), nullptr, -1);
  const int node = tape->add_node(op, data->v.size(), std::move(fn));
  return TensorT<S>::attach(std::move(data), tape, node);
}

template <typename S>
void require_rank2(const TensorT<S>& x, const char* op) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(x.shape()));
  }
}

void require_row_mask(std::size_t rows, const Mask& mask, const char* op) {
  if (!mask.empty() && mask.size() != rows) {
    throw DimensionError(std::string(op) + ": mask length " + std::to_string(mask.size()) +
                         " does not match " + std::to_string(rows) + " rows");
  }
}

template <typename S>
S sigmoid_scalar(S x) {
  if (x >= S(0)) {
    const S e = std::exp(-x);
    return S(1) / (S(1) + e);
  }
  const S e = std::exp(x);
  return e / (S(1) + e);
}

// Per-thread scratch for backward kernels, so gradient staging buffers are
// not allocated and zero-filled on every node visit. Buffers only grow.
// Callers must overwrite the first n elements before reading them, and must
// finish with a slot before requesting it again.
template <typename S>
S* scratch(int slot, std::size_t n) {
  static thread_local std::vector<S> bufs[3];
  std::vector<S>& b = bufs[slot];
  if (b.size() < n) b.resize(n);
  return b.data();
}

}  // namespace

// ---------------------------------------------------------------------------
// linear algebra

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  Tape<S>* tape = common_tape<S>({&a, &b}, "matmul");
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const S* av = a.values().data();
  const S* bv = b.values().data();
  std::vector<S> out(static_cast<std::size_t>(m) * n, S(0));
  // SAXPY form, four output rows per pass to amortize the B-row loads. The
  // k-summation order of every output element stays strictly sequential, so
  // results do not depend on how many rows follow (masked padding rows
  // contribute exact zeros in the same positions either way).
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    const S* a0 = av + static_cast<std::size_t>(i) * k;
    const S* a1 = a0 + k;
    const S* a2 = a1 + k;
    const S* a3 = a2 + k;
    S* o0 = out.data() + static_cast<std::size_t>(i) * n;
    S* o1 = o0 + n;
    S* o2 = o1 + n;
    S* o3 = o2 + n;
    for (int kk = 0; kk < k; ++kk) {
      const S w0 = a0[kk], w1 = a1[kk], w2 = a2[kk], w3 = a3[kk];
      const S* brow = bv + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) {
        o0[j] += w0 * brow[j];
        o1[j] += w1 * brow[j];
        o2[j] += w2 * brow[j];
        o3[j] += w3 * brow[j];
      }
    }
  }
  for (; i < m; ++i) {
    S* orow = out.data() + static_cast<std::size_t>(i) * n;
    const S* arow = av + static_cast<std::size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const S aik = arow[kk];
      const S* brow = bv + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  if (tape == nullptr) return finish<S>("matmul", {m, n}, std::move(out), nullptr, {});
  const int na = a.node(), nb = b.node();
  auto ad = a.data();
  auto bd = b.data();
  return finish<S>("matmul", {m, n}, std::move(out), tape,
                   [na, nb, ad, bd, m, k, n](Tape<S>& t, const std::vector<S>& go) {
                     if (na >= 0) {
                       // dA = dOut * B^T. B is transposed once so the inner
                       // update runs along contiguous rows; the first column
                       // group assigns, so the staging buffer needs no
                       // zero-fill.
                       S* bt = scratch<S>(2, static_cast<std::size_t>(n) * k);
                       for (int kk = 0; kk < k; ++kk) {
                         const S* brow = bd->v.data() + static_cast<std::size_t>(kk) * n;
                         for (int j = 0; j < n; ++j) {
                           bt[static_cast<std::size_t>(j) * k + kk] = brow[j];
                         }
                       }
                       S* ga = scratch<S>(0, static_cast<std::size_t>(m) * k);
                       for (int i = 0; i < m; ++i) {
                         const S* grow = go.data() + static_cast<std::size_t>(i) * n;
                         S* garow = ga + static_cast<std::size_t>(i) * k;
                         int j = 0;
                         if (n >= 4) {
                           const S g0 = grow[0], g1 = grow[1], g2 = grow[2], g3 = grow[3];
                           const S* t0 = bt;
                           const S* t1 = t0 + k;
                           const S* t2 = t1 + k;
                           const S* t3 = t2 + k;
                           for (int kk = 0; kk < k; ++kk) {
                             garow[kk] = g0 * t0[kk] + g1 * t1[kk] + g2 * t2[kk] + g3 * t3[kk];
                           }
                           j = 4;
                         } else {
                           const S g0 = grow[0];
                           for (int kk = 0; kk < k; ++kk) garow[kk] = g0 * bt[kk];
                           j = 1;
                         }
                         for (; j + 4 <= n; j += 4) {
                           const S g0 = grow[j], g1 = grow[j + 1], g2 = grow[j + 2],
                                   g3 = grow[j + 3];
                           const S* t0 = bt + static_cast<std::size_t>(j) * k;
                           const S* t1 = t0 + k;
                           const S* t2 = t1 + k;
                           const S* t3 = t2 + k;
                           for (int kk = 0; kk < k; ++kk) {
                             garow[kk] += g0 * t0[kk] + g1 * t1[kk] + g2 * t2[kk] + g3 * t3[kk];
                           }
                         }
                         for (; j < n; ++j) {
                           const S gij = grow[j];
                           const S* btrow = bt + static_cast<std::size_t>(j) * k;
                           for (int kk = 0; kk < k; ++kk) garow[kk] += gij * btrow[kk];
                         }
                       }
                       t.accumulate(na, ga, static_cast<std::size_t>(m) * k);
                     }
                     if (nb >= 0) {
                       // dB = A^T * dOut, rows of A consumed four at a time;
                       // the first row group assigns.
                       S* gb = scratch<S>(1, static_cast<std::size_t>(k) * n);
                       int i = 0;
                       if (m >= 4) {
                         const S* a0 = ad->v.data();
                         const S* a1 = a0 + k;
                         const S* a2 = a1 + k;
                         const S* a3 = a2 + k;
                         const S* g0 = go.data();
                         const S* g1 = g0 + n;
                         const S* g2 = g1 + n;
                         const S* g3 = g2 + n;
                         for (int kk = 0; kk < k; ++kk) {
                           const S w0 = a0[kk], w1 = a1[kk], w2 = a2[kk], w3 = a3[kk];
                           S* gbrow = gb + static_cast<std::size_t>(kk) * n;
                           for (int j = 0; j < n; ++j) {
                             gbrow[j] = w0 * g0[j] + w1 * g1[j] + w2 * g2[j] + w3 * g3[j];
                           }
                         }
                         i = 4;
                       } else {
                         const S* arow = ad->v.data();
                         const S* grow = go.data();
                         for (int kk = 0; kk < k; ++kk) {
                           const S aik = arow[kk];
                           S* gbrow = gb + static_cast<std::size_t>(kk) * n;
                           for (int j = 0; j < n; ++j) gbrow[j] = aik * grow[j];
                         }
                         i = 1;
                       }
                       for (; i + 4 <= m; i += 4) {
                         const S* a0 = ad->v.data() + static_cast<std::size_t>(i) * k;
                         const S* a1 = a0 + k;
                         const S* a2 = a1 + k;
                         const S* a3 = a2 + k;
                         const S* g0 = go.data() + static_cast<std::size_t>(i) * n;
                         const S* g1 = g0 + n;
                         const S* g2 = g1 + n;
                         const S* g3 = g2 + n;
                         for (int kk = 0; kk < k; ++kk) {
                           const S w0 = a0[kk], w1 = a1[kk], w2 = a2[kk], w3 = a3[kk];
                           S* gbrow = gb + static_cast<std::size_t>(kk) * n;
                           for (int j = 0; j < n; ++j) {
                             gbrow[j] += w0 * g0[j] + w1 * g1[j] + w2 * g2[j] + w3 * g3[j];
                           }
                         }
                       }
                       for (; i < m; ++i) {
                         const S* arow = ad->v.data() + static_cast<std::size_t>(i) * k;
                         const S* grow = go.data() + static_cast<std::size_t>(i) * n;
                         for (int kk = 0; kk < k; ++kk) {
                           const S aik = arow[kk];
                           S* gbrow = gb + static_cast<std::size_t>(kk) * n;
                           for (int j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
                         }
                       }
                       t.accumulate(nb, gb, static_cast<std::size_t>(k) * n);
                     }
                   });
}

template <typename S>
TensorT<S> transpose(const TensorT<S>& x) {
  Tape<S>* tape = common_tape<S>({&x}, "transpose");
  require_rank2(x, "transpose");
  const int r = x.dim(0), c = x.dim(1);
  std::vector<S> out(x.numel());
  const S* xv = x.values().data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(j) * r + i] = xv[static_cast<std::size_t>(i) * c + j];
  if (tape == nullptr) return finish<S>("transpose", {c, r}, std::move(out), nullptr, {});
  const int nx = x.node();
  return finish<S>("transpose", {c, r}, std::move(out), tape,
                   [nx, r, c](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, static_cast<std::size_t>(r) * c);
                     for (int j = 0; j < c; ++j)
                       for (int i = 0; i < r; ++i)
                         gx[static_cast<std::size_t>(i) * c + j] =
                             go[static_cast<std::size_t>(j) * r + i];
                     t.accumulate(nx, gx, static_cast<std::size_t>(r) * c);
                   });
}

// ---------------------------------------------------------------------------
// elementwise

namespace {

template <typename S>
void require_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  Tape<S>* tape = common_tape<S>({&a, &b}, "add");
  require_same_shape(a, b, "add");
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  if (tape == nullptr) return finish<S>("add", a.shape(), std::move(out), nullptr, {});
  const int na = a.node(), nb = b.node();
  return finish<S>("add", a.shape(), std::move(out), tape,
                   [na, nb](Tape<S>& t, const std::vector<S>& go) {
                     if (na >= 0) t.accumulate(na, go.data(), go.size());
                     if (nb >= 0) t.accumulate(nb, go.data(), go.size());
                   });
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  Tape<S>* tape = common_tape<S>({&a, &b}, "sub");
  require_same_shape(a, b, "sub");
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  if (tape == nullptr) return finish<S>("sub", a.shape(), std::move(out), nullptr, {});
  const int na = a.node(), nb = b.node();
  return finish<S>("sub", a.shape(), std::move(out), tape,
                   [na, nb](Tape<S>& t, const std::vector<S>& go) {
                     if (na >= 0) t.accumulate(na, go.data(), go.size());
                     if (nb >= 0) {
                       S* gb = scratch<S>(0, go.size());
                       for (std::size_t i = 0; i < go.size(); ++i) gb[i] = -go[i];
                       t.accumulate(nb, gb, go.size());
                     }
                   });
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  Tape<S>* tape = common_tape<S>({&a, &b}, "mul");
  require_same_shape(a, b, "mul");
  std::vector<S> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  if (tape == nullptr) return finish<S>("mul", a.shape(), std::move(out), nullptr, {});
  const int na = a.node(), nb = b.node();
  auto ad = a.data();
  auto bd = b.data();
  return finish<S>("mul", a.shape(), std::move(out), tape,
                   [na, nb, ad, bd](Tape<S>& t, const std::vector<S>& go) {
                     if (na >= 0) {
                       S* ga = scratch<S>(0, go.size());
                       for (std::size_t i = 0; i < go.size(); ++i) ga[i] = go[i] * bd->v[i];
                       t.accumulate(na, ga, go.size());
                     }
                     if (nb >= 0) {
                       S* gb = scratch<S>(0, go.size());
                       for (std::size_t i = 0; i < go.size(); ++i) gb[i] = go[i] * ad->v[i];
                       t.accumulate(nb, gb, go.size());
                     }
                   });
}

template <typename S>
TensorT<S> scale(const TensorT<S>& x, S c) {
  Tape<S>* tape = common_tape<S>({&x}, "scale");
  std::vector<S> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * c;
  if (tape == nullptr) return finish<S>("scale", x.shape(), std::move(out), nullptr, {});
  const int nx = x.node();
  return finish<S>("scale", x.shape(), std::move(out), tape,
                   [nx, c](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, go.size());
                     for (std::size_t i = 0; i < go.size(); ++i) gx[i] = go[i] * c;
                     t.accumulate(nx, gx, go.size());
                   });
}

template <typename S>
TensorT<S> relu(const TensorT<S>& x) {
  Tape<S>* tape = common_tape<S>({&x}, "relu");
  std::vector<S> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] > S(0) ? x.values()[i] : S(0);
  if (tape == nullptr) return finish<S>("relu", x.shape(), std::move(out), nullptr, {});
  const int nx = x.node();
  auto xd = x.data();
  return finish<S>("relu", x.shape(), std::move(out), tape,
                   [nx, xd](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, go.size());
                     for (std::size_t i = 0; i < go.size(); ++i)
                       gx[i] = xd->v[i] > S(0) ? go[i] : S(0);
                     t.accumulate(nx, gx, go.size());
                   });
}

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& x) {
  Tape<S>* tape = common_tape<S>({&x}, "sigmoid");
  std::vector<S> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(x.values()[i]);
  if (tape == nullptr) return finish<S>("sigmoid", x.shape(), std::move(out), nullptr, {});
  const int nx = x.node();
  auto od = std::make_shared<std::vector<S>>(out);
  return finish<S>("sigmoid", x.shape(), std::move(out), tape,
                   [nx, od](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, go.size());
                     for (std::size_t i = 0; i < go.size(); ++i) {
                       const S s = (*od)[i];
                       gx[i] = go[i] * s * (S(1) - s);
                     }
                     t.accumulate(nx, gx, go.size());
                   });
}

template <typename S>
TensorT<S> swish(const TensorT<S>& x) {
  Tape<S>* tape = common_tape<S>({&x}, "swish");
  std::vector<S> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const S v = x.values()[i];
    out[i] = v * sigmoid_scalar(v);
  }
  if (tape == nullptr) return finish<S>("swish", x.shape(), std::move(out), nullptr, {});
  const int nx = x.node();
  auto xd = x.data();
  return finish<S>("swish", x.shape(), std::move(out), tape,
                   [nx, xd](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, go.size());
                     for (std::size_t i = 0; i < go.size(); ++i) {
                       const S v = xd->v[i];
                       const S s = sigmoid_scalar(v);
                       gx[i] = go[i] * (s + v * s * (S(1) - s));
                     }
                     t.accumulate(nx, gx, go.size());
                   });
}

template <typename S>
TensorT<S> log_elem(const TensorT<S>& x) {
  Tape<S>* tape = common_tape<S>({&x}, "log");
  std::vector<S> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(x.values()[i]);
  if (tape == nullptr) return finish<S>("log", x.shape(), std::move(out), nullptr, {});
  const int nx = x.node();
  auto xd = x.data();
  return finish<S>("log", x.shape(), std::move(out), tape,
                   [nx, xd](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, go.size());
                     for (std::size_t i = 0; i < go.size(); ++i) gx[i] = go[i] / xd->v[i];
                     t.accumulate(nx, gx, go.size());
                   });
}

template <typename S>
TensorT<S> clamp_min(const TensorT<S>& x, S floor) {
  Tape<S>* tape = common_tape<S>({&x}, "clamp_min");
  std::vector<S> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(x.values()[i], floor);
  if (tape == nullptr) return finish<S>("clamp_min", x.shape(), std::move(out), nullptr, {});
  const int nx = x.node();
  auto xd = x.data();
  return finish<S>("clamp_min", x.shape(), std::move(out), tape,
                   [nx, xd, floor](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, go.size());
                     for (std::size_t i = 0; i < go.size(); ++i)
                       gx[i] = xd->v[i] > floor ? go[i] : S(0);
                     t.accumulate(nx, gx, go.size());
                   });
}

// ---------------------------------------------------------------------------
// shape manipulation

template <typename S>
TensorT<S> reshape(const TensorT<S>& x, Shape shape) {
  Tape<S>* tape = common_tape<S>({&x}, "reshape");
  check_shape_valid(shape);
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  std::vector<S> out = x.values();
  if (tape == nullptr) return finish<S>("reshape", std::move(shape), std::move(out), nullptr, {});
  const int nx = x.node();
  return finish<S>("reshape", std::move(shape), std::move(out), tape,
                   [nx](Tape<S>& t, const std::vector<S>& go) {
                     if (nx >= 0) t.accumulate(nx, go.data(), go.size());
                   });
}

template <typename S>
TensorT<S> slice_rows(const TensorT<S>& x, int r0, int r1) {
  Tape<S>* tape = common_tape<S>({&x}, "slice_rows");
  require_rank2(x, "slice_rows");
  const int r = x.dim(0), c = x.dim(1);
  if (r0 < 0 || r1 > r || r0 >= r1) {
    throw DimensionError("slice_rows: range [" + std::to_string(r0) + ", " + std::to_string(r1) +
                         ") invalid for " + shape_str(x.shape()));
  }
  std::vector<S> out(x.values().begin() + static_cast<std::ptrdiff_t>(r0) * c,
                     x.values().begin() + static_cast<std::ptrdiff_t>(r1) * c);
  if (tape == nullptr) return finish<S>("slice_rows", {r1 - r0, c}, std::move(out), nullptr, {});
  const int nx = x.node();
  return finish<S>("slice_rows", {r1 - r0, c}, std::move(out), tape,
                   [nx, r0, r, c](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, static_cast<std::size_t>(r) * c);
                     std::fill_n(gx, static_cast<std::size_t>(r0) * c, S(0));
                     std::copy(go.begin(), go.end(), gx + static_cast<std::size_t>(r0) * c);
                     std::fill(gx + static_cast<std::size_t>(r0) * c + go.size(),
                               gx + static_cast<std::size_t>(r) * c, S(0));
                     t.accumulate(nx, gx, static_cast<std::size_t>(r) * c);
                   });
}

template <typename S>
TensorT<S> slice_cols(const TensorT<S>& x, int c0, int c1) {
  Tape<S>* tape = common_tape<S>({&x}, "slice_cols");
  require_rank2(x, "slice_cols");
  const int r = x.dim(0), c = x.dim(1);
  if (c0 < 0 || c1 > c || c0 >= c1) {
    throw DimensionError("slice_cols: range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                         ") invalid for " + shape_str(x.shape()));
  }
  const int w = c1 - c0;
  std::vector<S> out(static_cast<std::size_t>(r) * w);
  for (int i = 0; i < r; ++i)
    std::copy_n(x.values().data() + static_cast<std::size_t>(i) * c + c0, w,
                out.data() + static_cast<std::size_t>(i) * w);
  if (tape == nullptr) return finish<S>("slice_cols", {r, w}, std::move(out), nullptr, {});
  const int nx = x.node();
  return finish<S>("slice_cols", {r, w}, std::move(out), tape,
                   [nx, c0, r, c, w](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, static_cast<std::size_t>(r) * c);
                     for (int i = 0; i < r; ++i) {
                       S* grow = gx + static_cast<std::size_t>(i) * c;
                       std::fill_n(grow, c0, S(0));
                       std::copy_n(go.data() + static_cast<std::size_t>(i) * w, w, grow + c0);
                       std::fill(grow + c0 + w, grow + c, S(0));
                     }
                     t.accumulate(nx, gx, static_cast<std::size_t>(r) * c);
                   });
}

template <typename S>
TensorT<S> concat_cols(const TensorT<S>& a, const TensorT<S>& b) {
  Tape<S>* tape = common_tape<S>({&a, &b}, "concat_cols");
  require_rank2(a, "concat_cols");
  require_rank2(b, "concat_cols");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("concat_cols: row counts disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  const int r = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  std::vector<S> out(static_cast<std::size_t>(r) * (ca + cb));
  for (int i = 0; i < r; ++i) {
    std::copy_n(a.values().data() + static_cast<std::size_t>(i) * ca, ca,
                out.data() + static_cast<std::size_t>(i) * (ca + cb));
    std::copy_n(b.values().data() + static_cast<std::size_t>(i) * cb, cb,
                out.data() + static_cast<std::size_t>(i) * (ca + cb) + ca);
  }
  if (tape == nullptr) return finish<S>("concat_cols", {r, ca + cb}, std::move(out), nullptr, {});
  const int na = a.node(), nb = b.node();
  return finish<S>("concat_cols", {r, ca + cb}, std::move(out), tape,
                   [na, nb, r, ca, cb](Tape<S>& t, const std::vector<S>& go) {
                     if (na >= 0) {
                       S* ga = scratch<S>(0, static_cast<std::size_t>(r) * ca);
                       for (int i = 0; i < r; ++i)
                         std::copy_n(go.data() + static_cast<std::size_t>(i) * (ca + cb), ca,
                                     ga + static_cast<std::size_t>(i) * ca);
                       t.accumulate(na, ga, static_cast<std::size_t>(r) * ca);
                     }
                     if (nb >= 0) {
                       S* gb = scratch<S>(0, static_cast<std::size_t>(r) * cb);
                       for (int i = 0; i < r; ++i)
                         std::copy_n(go.data() + static_cast<std::size_t>(i) * (ca + cb) + ca, cb,
                                     gb + static_cast<std::size_t>(i) * cb);
                       t.accumulate(nb, gb, static_cast<std::size_t>(r) * cb);
                     }
                   });
}

template <typename S>
TensorT<S> stack_rows(const std::vector<TensorT<S>>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  Tape<S>* tape = nullptr;
  for (const auto& rt : rows) {
    Tape<S>* t = common_tape<S>({&rt}, "stack_rows");
    if (t != nullptr) {
      if (tape != nullptr && tape != t)
        throw ContractError("stack_rows: rows belong to different tapes");
      tape = t;
    }
  }
  const int c = rows[0].rank() == 2 ? rows[0].dim(1) : rows[0].dim(0);
  std::vector<int> nodes(rows.size());
  std::vector<S> out;
  out.reserve(rows.size() * static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& rt = rows[i];
    const bool ok = (rt.rank() == 1 && rt.dim(0) == c) ||
                    (rt.rank() == 2 && rt.dim(0) == 1 && rt.dim(1) == c);
    if (!ok) {
      throw DimensionError("stack_rows: row " + std::to_string(i) + " has shape " +
                           shape_str(rt.shape()) + ", want length " + std::to_string(c));
    }
    out.insert(out.end(), rt.values().begin(), rt.values().end());
    nodes[i] = rt.node();
  }
  const int b = static_cast<int>(rows.size());
  if (tape == nullptr) return finish<S>("stack_rows", {b, c}, std::move(out), nullptr, {});
  return finish<S>("stack_rows", {b, c}, std::move(out), tape,
                   [nodes, c](Tape<S>& t, const std::vector<S>& go) {
                     for (std::size_t i = 0; i < nodes.size(); ++i) {
                       if (nodes[i] < 0) continue;
                       t.accumulate(nodes[i], go.data() + i * static_cast<std::size_t>(c),
                                    static_cast<std::size_t>(c));
                     }
                   });
}

// ---------------------------------------------------------------------------
// broadcasting helpers

template <typename S>
TensorT<S> add_rowwise(const TensorT<S>& x, const TensorT<S>& b) {
  Tape<S>* tape = common_tape<S>({&x, &b}, "add_rowwise");
  require_rank2(x, "add_rowwise");
  const int r = x.dim(0), c = x.dim(1);
  const bool ok = (b.rank() == 1 && b.dim(0) == c) ||
                  (b.rank() == 2 && b.dim(0) == 1 && b.dim(1) == c);
  if (!ok) {
    throw DimensionError("add_rowwise: bias " + shape_str(b.shape()) + " does not broadcast over " +
                         shape_str(x.shape()));
  }
  std::vector<S> out(x.numel());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i) * c + j] =
          x.values()[static_cast<std::size_t>(i) * c + j] + b.values()[static_cast<std::size_t>(j)];
  if (tape == nullptr) return finish<S>("add_rowwise", x.shape(), std::move(out), nullptr, {});
  const int nx = x.node(), nb = b.node();
  const std::size_t bn = b.numel();
  return finish<S>("add_rowwise", x.shape(), std::move(out), tape,
                   [nx, nb, r, c, bn](Tape<S>& t, const std::vector<S>& go) {
                     if (nx >= 0) t.accumulate(nx, go.data(), go.size());
                     if (nb >= 0) {
                       S* gb = scratch<S>(0, bn);
                       for (int j = 0; j < c; ++j) gb[static_cast<std::size_t>(j)] = go[static_cast<std::size_t>(j)];
                       for (int i = 1; i < r; ++i)
                         for (int j = 0; j < c; ++j)
                           gb[static_cast<std::size_t>(j)] += go[static_cast<std::size_t>(i) * c + j];
                       t.accumulate(nb, gb, bn);
                     }
                   });
}

template <typename S>
TensorT<S> zero_masked_rows(const TensorT<S>& x, const Mask& row_mask) {
  Tape<S>* tape = common_tape<S>({&x}, "zero_masked_rows");
  require_rank2(x, "zero_masked_rows");
  const int r = x.dim(0), c = x.dim(1);
  require_row_mask(static_cast<std::size_t>(r), row_mask, "zero_masked_rows");
  std::vector<S> out(x.numel(), S(0));
  for (int i = 0; i < r; ++i) {
    if (!row_mask.empty() && !row_mask[static_cast<std::size_t>(i)]) continue;
    std::copy_n(x.values().data() + static_cast<std::size_t>(i) * c, c,
                out.data() + static_cast<std::size_t>(i) * c);
  }
  if (tape == nullptr) return finish<S>("zero_masked_rows", x.shape(), std::move(out), nullptr, {});
  const int nx = x.node();
  return finish<S>("zero_masked_rows", x.shape(), std::move(out), tape,
                   [nx, row_mask, r, c](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, go.size());
                     for (int i = 0; i < r; ++i) {
                       if (!row_mask.empty() && !row_mask[static_cast<std::size_t>(i)]) {
                         std::fill_n(gx + static_cast<std::size_t>(i) * c, c, S(0));
                         continue;
                       }
                       std::copy_n(go.data() + static_cast<std::size_t>(i) * c, c,
                                   gx + static_cast<std::size_t>(i) * c);
                     }
                     t.accumulate(nx, gx, go.size());
                   });
}

// ---------------------------------------------------------------------------
// normalization and attention

template <typename S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta) {
  Tape<S>* tape = common_tape<S>({&x, &gamma, &beta}, "layer_norm");
  require_rank2(x, "layer_norm");
  const int r = x.dim(0), c = x.dim(1);
  if (static_cast<int>(gamma.numel()) != c || static_cast<int>(beta.numel()) != c) {
    throw DimensionError("layer_norm: gain/shift length must equal feature dim " +
                         std::to_string(c));
  }
  const double eps = 1e-5;
  std::vector<S> out(x.numel());
  auto xhat = std::make_shared<std::vector<S>>(x.numel());
  auto inv_std = std::make_shared<std::vector<S>>(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const S* row = x.values().data() + static_cast<std::size_t>(i) * c;
    double m = 0.0;
    for (int j = 0; j < c; ++j) m += static_cast<double>(row[j]);
    m /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      const double d = static_cast<double>(row[j]) - m;
      var += d * d;
    }
    var /= c;
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(i)] = static_cast<S>(istd);
    for (int j = 0; j < c; ++j) {
      const S xh = static_cast<S>((static_cast<double>(row[j]) - m) * istd);
      (*xhat)[static_cast<std::size_t>(i) * c + j] = xh;
      out[static_cast<std::size_t>(i) * c + j] =
          gamma.values()[static_cast<std::size_t>(j)] * xh + beta.values()[static_cast<std::size_t>(j)];
    }
  }
  if (tape == nullptr) return finish<S>("layer_norm", x.shape(), std::move(out), nullptr, {});
  const int nx = x.node(), ng = gamma.node(), nb = beta.node();
  auto gd = gamma.data();
  return finish<S>(
      "layer_norm", x.shape(), std::move(out), tape,
      [nx, ng, nb, gd, xhat, inv_std, r, c](Tape<S>& t, const std::vector<S>& go) {
        if (ng >= 0) {
          std::vector<S> gg(static_cast<std::size_t>(c), S(0));
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
              gg[static_cast<std::size_t>(j)] += go[static_cast<std::size_t>(i) * c + j] *
                                                 (*xhat)[static_cast<std::size_t>(i) * c + j];
          t.accumulate(ng, gg.data(), gg.size());
        }
        if (nb >= 0) {
          std::vector<S> gb(static_cast<std::size_t>(c), S(0));
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
              gb[static_cast<std::size_t>(j)] += go[static_cast<std::size_t>(i) * c + j];
          t.accumulate(nb, gb.data(), gb.size());
        }
        if (nx >= 0) {
          S* gx = scratch<S>(0, static_cast<std::size_t>(r) * c);
          for (int i = 0; i < r; ++i) {
            double mean_g = 0.0, mean_gx = 0.0;
            for (int j = 0; j < c; ++j) {
              const double g1 = static_cast<double>(go[static_cast<std::size_t>(i) * c + j]) *
                                static_cast<double>(gd->v[static_cast<std::size_t>(j)]);
              mean_g += g1;
              mean_gx += g1 * static_cast<double>((*xhat)[static_cast<std::size_t>(i) * c + j]);
            }
            mean_g /= c;
            mean_gx /= c;
            const double istd = static_cast<double>((*inv_std)[static_cast<std::size_t>(i)]);
            for (int j = 0; j < c; ++j) {
              const double g1 = static_cast<double>(go[static_cast<std::size_t>(i) * c + j]) *
                                static_cast<double>(gd->v[static_cast<std::size_t>(j)]);
              const double xh = static_cast<double>((*xhat)[static_cast<std::size_t>(i) * c + j]);
              gx[static_cast<std::size_t>(i) * c + j] =
                  static_cast<S>(istd * (g1 - mean_g - xh * mean_gx));
            }
          }
          t.accumulate(nx, gx, static_cast<std::size_t>(r) * c);
        }
      });
}

namespace {

// Shared masked-softmax forward/backward over one row of length c.
// Returns via out; masked entries are exact zeros.
template <typename S>
void softmax_row_forward(const S* row, const Mask& mask, int c, S* out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < c; ++j) {
    if (!mask.empty() && !mask[static_cast<std::size_t>(j)]) continue;
    mx = std::max(mx, static_cast<double>(row[j]));
  }
  double denom = 0.0;
  for (int j = 0; j < c; ++j) {
    if (!mask.empty() && !mask[static_cast<std::size_t>(j)]) {
      out[j] = S(0);
      continue;
    }
    // exp at working precision; only the normalizer accumulates in double.
    const S e = std::exp(static_cast<S>(static_cast<double>(row[j]) - mx));
    out[j] = e;
    denom += static_cast<double>(e);
  }
  for (int j = 0; j < c; ++j) {
    if (!mask.empty() && !mask[static_cast<std::size_t>(j)]) continue;
    out[j] = static_cast<S>(static_cast<double>(out[j]) / denom);
  }
}

template <typename S>
void softmax_row_backward(const S* alpha, const S* go, const Mask& mask, int c, S* gx) {
  double dot = 0.0;
  for (int j = 0; j < c; ++j) {
    if (!mask.empty() && !mask[static_cast<std::size_t>(j)]) continue;
    dot += static_cast<double>(go[j]) * static_cast<double>(alpha[j]);
  }
  for (int j = 0; j < c; ++j) {
    if (!mask.empty() && !mask[static_cast<std::size_t>(j)]) {
      gx[j] = S(0);
      continue;
    }
    gx[j] = static_cast<S>(static_cast<double>(alpha[j]) *
                           (static_cast<double>(go[j]) - dot));
  }
}

int count_unmasked(const Mask& mask, int n) {
  if (mask.empty()) return n;
  int k = 0;
  for (std::uint8_t m : mask)
    if (m) ++k;
  return k;
}

}  // namespace

template <typename S>
TensorT<S> masked_softmax(const TensorT<S>& scores, const Mask& mask) {
  Tape<S>* tape = common_tape<S>({&scores}, "masked_softmax");
  if (scores.rank() != 1) {
    throw DimensionError("masked_softmax: expected rank-1 scores, got " +
                         shape_str(scores.shape()));
  }
  const int n = scores.dim(0);
  require_row_mask(static_cast<std::size_t>(n), mask, "masked_softmax");
  if (count_unmasked(mask, n) == 0) {
    throw EmptyAttentionError("masked_softmax: all positions masked");
  }
  std::vector<S> out(static_cast<std::size_t>(n));
  softmax_row_forward(scores.values().data(), mask, n, out.data());
  if (tape == nullptr) return finish<S>("masked_softmax", {n}, std::move(out), nullptr, {});
  const int nx = scores.node();
  auto alpha = std::make_shared<std::vector<S>>(out);
  return finish<S>("masked_softmax", {n}, std::move(out), tape,
                   [nx, alpha, mask, n](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, static_cast<std::size_t>(n));
                     softmax_row_backward(alpha->data(), go.data(), mask, n, gx);
                     t.accumulate(nx, gx, static_cast<std::size_t>(n));
                   });
}

template <typename S>
TensorT<S> softmax_rows(const TensorT<S>& x, const Mask& col_mask) {
  Tape<S>* tape = common_tape<S>({&x}, "softmax_rows");
  require_rank2(x, "softmax_rows");
  const int r = x.dim(0), c = x.dim(1);
  require_row_mask(static_cast<std::size_t>(c), col_mask, "softmax_rows");
  if (count_unmasked(col_mask, c) == 0) {
    throw EmptyAttentionError("softmax_rows: all key positions masked");
  }
  std::vector<S> out(x.numel());
  for (int i = 0; i < r; ++i)
    softmax_row_forward(x.values().data() + static_cast<std::size_t>(i) * c, col_mask, c,
                        out.data() + static_cast<std::size_t>(i) * c);
  if (tape == nullptr) return finish<S>("softmax_rows", x.shape(), std::move(out), nullptr, {});
  const int nx = x.node();
  auto alpha = std::make_shared<std::vector<S>>(out);
  return finish<S>("softmax_rows", x.shape(), std::move(out), tape,
                   [nx, alpha, col_mask, r, c](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, static_cast<std::size_t>(r) * c);
                     for (int i = 0; i < r; ++i)
                       softmax_row_backward(alpha->data() + static_cast<std::size_t>(i) * c,
                                            go.data() + static_cast<std::size_t>(i) * c, col_mask,
                                            c, gx + static_cast<std::size_t>(i) * c);
                     t.accumulate(nx, gx, static_cast<std::size_t>(r) * c);
                   });
}

// ---------------------------------------------------------------------------
// convolutions

template <typename S>
TensorT<S> depthwise_conv1d(const TensorT<S>& x, const TensorT<S>& w) {
  Tape<S>* tape = common_tape<S>({&x, &w}, "depthwise_conv1d");
  require_rank2(x, "depthwise_conv1d");
  require_rank2(w, "depthwise_conv1d");
  const int tlen = x.dim(0), d = x.dim(1), k = w.dim(0);
  if (w.dim(1) != d) {
    throw DimensionError("depthwise_conv1d: kernel channels " + std::to_string(w.dim(1)) +
                         " != input channels " + std::to_string(d));
  }
  if (k % 2 == 0) throw DimensionError("depthwise_conv1d: kernel size must be odd");
  const int pad = (k - 1) / 2;
  std::vector<S> out(x.numel(), S(0));
  const S* xv = x.values().data();
  const S* wv = w.values().data();
  for (int t = 0; t < tlen; ++t) {
    S* orow = out.data() + static_cast<std::size_t>(t) * d;
    for (int kk = 0; kk < k; ++kk) {
      const int src = t + kk - pad;
      if (src < 0 || src >= tlen) continue;  // symmetric zero padding
      const S* xrow = xv + static_cast<std::size_t>(src) * d;
      const S* wrow = wv + static_cast<std::size_t>(kk) * d;
      for (int j = 0; j < d; ++j) orow[j] += wrow[j] * xrow[j];
    }
  }
  if (tape == nullptr) return finish<S>("depthwise_conv1d", x.shape(), std::move(out), nullptr, {});
  const int nx = x.node(), nw = w.node();
  auto xd = x.data();
  auto wd = w.data();
  return finish<S>("depthwise_conv1d", x.shape(), std::move(out), tape,
                   [nx, nw, xd, wd, tlen, d, k, pad](Tape<S>& t, const std::vector<S>& go) {
                     if (nx >= 0) {
                       std::vector<S> gx(static_cast<std::size_t>(tlen) * d, S(0));
                       for (int tt = 0; tt < tlen; ++tt) {
                         const S* grow = go.data() + static_cast<std::size_t>(tt) * d;
                         for (int kk = 0; kk < k; ++kk) {
                           const int src = tt + kk - pad;
                           if (src < 0 || src >= tlen) continue;
                           const S* wrow = wd->v.data() + static_cast<std::size_t>(kk) * d;
                           S* gxrow = gx.data() + static_cast<std::size_t>(src) * d;
                           for (int j = 0; j < d; ++j) gxrow[j] += wrow[j] * grow[j];
                         }
                       }
                       t.accumulate(nx, gx.data(), gx.size());
                     }
                     if (nw >= 0) {
                       std::vector<S> gw(static_cast<std::size_t>(k) * d, S(0));
                       for (int tt = 0; tt < tlen; ++tt) {
                         const S* grow = go.data() + static_cast<std::size_t>(tt) * d;
                         for (int kk = 0; kk < k; ++kk) {
                           const int src = tt + kk - pad;
                           if (src < 0 || src >= tlen) continue;
                           const S* xrow = xd->v.data() + static_cast<std::size_t>(src) * d;
                           S* gwrow = gw.data() + static_cast<std::size_t>(kk) * d;
                           for (int j = 0; j < d; ++j) gwrow[j] += xrow[j] * grow[j];
                         }
                       }
                       t.accumulate(nw, gw.data(), gw.size());
                     }
                   });
}

template <typename S>
TensorT<S> pointwise_conv1d(const TensorT<S>& x, const TensorT<S>& w) {
  // A 1x1 convolution across channels is exactly a matmul over the feature axis.
  return matmul(x, w);
}

template <typename S>
TensorT<S> glu(const TensorT<S>& x) {
  Tape<S>* tape = common_tape<S>({&x}, "glu");
  require_rank2(x, "glu");
  const int r = x.dim(0), c2 = x.dim(1);
  if (c2 % 2 != 0) throw DimensionError("glu: feature dim must be even, got " + std::to_string(c2));
  const int c = c2 / 2;
  std::vector<S> out(static_cast<std::size_t>(r) * c);
  auto gate = std::make_shared<std::vector<S>>(static_cast<std::size_t>(r) * c);
  const S* xv = x.values().data();
  for (int i = 0; i < r; ++i) {
    const S* arow = xv + static_cast<std::size_t>(i) * c2;
    const S* brow = arow + c;
    for (int j = 0; j < c; ++j) {
      const S s = sigmoid_scalar(brow[j]);
      (*gate)[static_cast<std::size_t>(i) * c + j] = s;
      out[static_cast<std::size_t>(i) * c + j] = arow[j] * s;
    }
  }
  if (tape == nullptr) return finish<S>("glu", {r, c}, std::move(out), nullptr, {});
  const int nx = x.node();
  auto xd = x.data();
  return finish<S>("glu", {r, c}, std::move(out), tape,
                   [nx, xd, gate, r, c](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, static_cast<std::size_t>(r) * 2 * c);
                     for (int i = 0; i < r; ++i) {
                       const S* arow = xd->v.data() + static_cast<std::size_t>(i) * 2 * c;
                       for (int j = 0; j < c; ++j) {
                         const S g = go[static_cast<std::size_t>(i) * c + j];
                         const S s = (*gate)[static_cast<std::size_t>(i) * c + j];
                         gx[static_cast<std::size_t>(i) * 2 * c + j] = g * s;
                         gx[static_cast<std::size_t>(i) * 2 * c + c + j] =
                             g * arow[j] * s * (S(1) - s);
                       }
                     }
                     t.accumulate(nx, gx, static_cast<std::size_t>(r) * 2 * c);
                   });
}

// ---------------------------------------------------------------------------
// reductions

template <typename S>
TensorT<S> sum(const TensorT<S>& x) {
  Tape<S>* tape = common_tape<S>({&x}, "sum");
  double acc = 0.0;
  for (const S& v : x.values()) acc += static_cast<double>(v);
  std::vector<S> out{static_cast<S>(acc)};
  if (tape == nullptr) return finish<S>("sum", {1}, std::move(out), nullptr, {});
  const int nx = x.node();
  const std::size_t n = x.numel();
  return finish<S>("sum", {1}, std::move(out), tape,
                   [nx, n](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     std::vector<S> gx(n, go[0]);
                     t.accumulate(nx, gx.data(), gx.size());
                   });
}

template <typename S>
TensorT<S> mean(const TensorT<S>& x) {
  Tape<S>* tape = common_tape<S>({&x}, "mean");
  double acc = 0.0;
  for (const S& v : x.values()) acc += static_cast<double>(v);
  const std::size_t n = x.numel();
  std::vector<S> out{static_cast<S>(acc / static_cast<double>(n))};
  if (tape == nullptr) return finish<S>("mean", {1}, std::move(out), nullptr, {});
  const int nx = x.node();
  return finish<S>("mean", {1}, std::move(out), tape,
                   [nx, n](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     std::vector<S> gx(n, static_cast<S>(static_cast<double>(go[0]) /
                                                          static_cast<double>(n)));
                     t.accumulate(nx, gx.data(), gx.size());
                   });
}

template <typename S>
TensorT<S> mean_square(const TensorT<S>& x) {
  Tape<S>* tape = common_tape<S>({&x}, "mean_square");
  double acc = 0.0;
  for (const S& v : x.values()) acc += static_cast<double>(v) * static_cast<double>(v);
  const std::size_t n = x.numel();
  std::vector<S> out{static_cast<S>(acc / static_cast<double>(n))};
  if (tape == nullptr) return finish<S>("mean_square", {1}, std::move(out), nullptr, {});
  const int nx = x.node();
  auto xd = x.data();
  return finish<S>("mean_square", {1}, std::move(out), tape,
                   [nx, xd, n](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     S* gx = scratch<S>(0, n);
                     for (std::size_t i = 0; i < n; ++i)
                       gx[i] = static_cast<S>(2.0 * static_cast<double>(xd->v[i]) *
                                              static_cast<double>(go[0]) / static_cast<double>(n));
                     t.accumulate(nx, gx, n);
                   });
}

template <typename S>
TensorT<S> masked_sum_square(const TensorT<S>& x, const Mask& row_mask) {
  Tape<S>* tape = common_tape<S>({&x}, "masked_sum_square");
  require_rank2(x, "masked_sum_square");
  const int r = x.dim(0), c = x.dim(1);
  require_row_mask(static_cast<std::size_t>(r), row_mask, "masked_sum_square");
  double acc = 0.0;
  for (int i = 0; i < r; ++i) {
    if (!row_mask.empty() && !row_mask[static_cast<std::size_t>(i)]) continue;
    const S* row = x.values().data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) acc += static_cast<double>(row[j]) * static_cast<double>(row[j]);
  }
  std::vector<S> out{static_cast<S>(acc)};
  if (tape == nullptr) return finish<S>("masked_sum_square", {1}, std::move(out), nullptr, {});
  const int nx = x.node();
  auto xd = x.data();
  return finish<S>("masked_sum_square", {1}, std::move(out), tape,
                   [nx, xd, row_mask, r, c](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     std::vector<S> gx(static_cast<std::size_t>(r) * c, S(0));
                     for (int i = 0; i < r; ++i) {
                       if (!row_mask.empty() && !row_mask[static_cast<std::size_t>(i)]) continue;
                       for (int j = 0; j < c; ++j)
                         gx[static_cast<std::size_t>(i) * c + j] =
                             S(2) * xd->v[static_cast<std::size_t>(i) * c + j] * go[0];
                     }
                     t.accumulate(nx, gx.data(), gx.size());
                   });
}

template <typename S>
TensorT<S> masked_nll_rows(const TensorT<S>& probs, const std::vector<int>& labels,
                           const Mask& row_mask) {
  Tape<S>* tape = common_tape<S>({&probs}, "masked_nll_rows");
  require_rank2(probs, "masked_nll_rows");
  const int r = probs.dim(0), c = probs.dim(1);
  if (static_cast<int>(labels.size()) != r) {
    throw DimensionError("masked_nll_rows: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(r) + " rows");
  }
  require_row_mask(static_cast<std::size_t>(r), row_mask, "masked_nll_rows");
  const double floor = 1e-12;
  double acc = 0.0;
  int count = 0;
  for (int i = 0; i < r; ++i) {
    if (!row_mask.empty() && !row_mask[static_cast<std::size_t>(i)]) continue;
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) {
      throw ContractError("masked_nll_rows: label " + std::to_string(y) + " out of range at row " +
                          std::to_string(i));
    }
    const double p = static_cast<double>(probs.values()[static_cast<std::size_t>(i) * c + y]);
    acc -= std::log(std::max(p, floor));
    ++count;
  }
  if (count == 0) throw ContractError("masked_nll_rows: all rows masked");
  std::vector<S> out{static_cast<S>(acc / count)};
  if (tape == nullptr) return finish<S>("masked_nll_rows", {1}, std::move(out), nullptr, {});
  const int nx = probs.node();
  auto pd = probs.data();
  return finish<S>("masked_nll_rows", {1}, std::move(out), tape,
                   [nx, pd, labels, row_mask, r, c, count](Tape<S>& t, const std::vector<S>& go) {
                     if (nx < 0) return;
                     const double floor2 = 1e-12;
                     std::vector<S> gx(static_cast<std::size_t>(r) * c, S(0));
                     for (int i = 0; i < r; ++i) {
                       if (!row_mask.empty() && !row_mask[static_cast<std::size_t>(i)]) continue;
                       const int y = labels[static_cast<std::size_t>(i)];
                       const double p =
                           static_cast<double>(pd->v[static_cast<std::size_t>(i) * c + y]);
                       if (p <= floor2) continue;  // clamped region is flat
                       gx[static_cast<std::size_t>(i) * c + y] =
                           static_cast<S>(-static_cast<double>(go[0]) / (p * count));
                     }
                     t.accumulate(nx, gx.data(), gx.size());
                   });
}

// ---------------------------------------------------------------------------
// explicit instantiations: float is the product path, double backs the
// finite-difference oracles.

#define AKD_INSTANTIATE_OPS(S)                                                              \
  template TensorT<S> matmul(const TensorT<S>&, const TensorT<S>&);                        \
  template TensorT<S> transpose(const TensorT<S>&);                                         \
  template TensorT<S> add(const TensorT<S>&, const TensorT<S>&);                            \
  template TensorT<S> sub(const TensorT<S>&, const TensorT<S>&);                            \
  template TensorT<S> mul(const TensorT<S>&, const TensorT<S>&);                            \
  template TensorT<S> scale(const TensorT<S>&, S);                                          \
  template TensorT<S> relu(const TensorT<S>&);                                              \
  template TensorT<S> swish(const TensorT<S>&);                                             \
  template TensorT<S> sigmoid(const TensorT<S>&);                                           \
  template TensorT<S> log_elem(const TensorT<S>&);                                          \
  template TensorT<S> clamp_min(const TensorT<S>&, S);                                      \
  template TensorT<S> reshape(const TensorT<S>&, Shape);                                    \
  template TensorT<S> slice_rows(const TensorT<S>&, int, int);                              \
  template TensorT<S> slice_cols(const TensorT<S>&, int, int);                              \
  template TensorT<S> concat_cols(const TensorT<S>&, const TensorT<S>&);                    \
  template TensorT<S> stack_rows(const std::vector<TensorT<S>>&);                           \
  template TensorT<S> add_rowwise(const TensorT<S>&, const TensorT<S>&);                    \
  template TensorT<S> zero_masked_rows(const TensorT<S>&, const Mask&);                     \
  template TensorT<S> layer_norm(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&); \
  template TensorT<S> masked_softmax(const TensorT<S>&, const Mask&);                       \
  template TensorT<S> softmax_rows(const TensorT<S>&, const Mask&);                         \
  template TensorT<S> depthwise_conv1d(const TensorT<S>&, const TensorT<S>&);               \
  template TensorT<S> pointwise_conv1d(const TensorT<S>&, const TensorT<S>&);               \
  template TensorT<S> glu(const TensorT<S>&);                                               \
  template TensorT<S> sum(const TensorT<S>&);                                               \
  template TensorT<S> mean(const TensorT<S>&);                                              \
  template TensorT<S> mean_square(const TensorT<S>&);                                       \
  template TensorT<S> masked_sum_square(const TensorT<S>&, const Mask&);                    \
  template TensorT<S> masked_nll_rows(const TensorT<S>&, const std::vector<int>&, const Mask&);

AKD_INSTANTIATE_OPS(float)
AKD_INSTANTIATE_OPS(double)

#undef AKD_INSTANTIATE_OPS

}  // namespace akd
