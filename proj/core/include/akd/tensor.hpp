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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "akd/error.hpp"

namespace akd {

using Shape = std::vector<int>;

namespace detail {
template <typename S>
struct FloatBits;
template <>
struct FloatBits<float> {
  using U = std::uint32_t;
  static constexpr U kExponent = 0x7f800000u;
};
template <>
struct FloatBits<double> {
  using U = std::uint64_t;
  static constexpr U kExponent = 0x7ff0000000000000ull;
};
}  // namespace detail

/// Branch-free scan: a value is non-finite iff its exponent bits are all set.
template <typename S>
inline bool all_finite(const S* p, std::size_t n) {
  using U = typename detail::FloatBits<S>::U;
  constexpr U kExp = detail::FloatBits<S>::kExponent;
  U bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    U bits;
    std::memcpy(&bits, p + i, sizeof(U));
    bad |= static_cast<U>((bits & kExp) == kExp);
  }
  return bad == 0;
}

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

inline void check_shape_valid(const Shape& shape) {
  for (int d : shape) {
    if (d <= 0) throw DimensionError("dimension must be positive, got " + shape_str(shape));
  }
}

template <typename S>
struct TensorDataT {
  Shape shape;
  std::vector<S> v;
};

template <typename S>
class Tape;

/// Dense row-major tensor. Value-like: the payload is immutable and shared,
/// copies are cheap. A tensor produced on a tape remembers its graph node so
/// that backward() can reach it.
template <typename S>
class TensorT {
 public:
  TensorT() = default;

  TensorT(Shape shape, std::vector<S> values) {
    check_shape_valid(shape);
    if (shape_numel(shape) != values.size()) {
      throw DimensionError("tensor: " + std::to_string(values.size()) +
                           " values do not fill shape " + shape_str(shape));
    }
    if (!all_finite(values.data(), values.size())) {
      throw NumericError("tensor: non-finite value in constructor");
    }
    data_ = std::make_shared<TensorDataT<S>>(TensorDataT<S>{std::move(shape), std::move(values)});
  }

  static TensorT scalar(S v) { return TensorT(Shape{1}, std::vector<S>{v}); }

  static TensorT zeros(Shape shape) {
    const std::size_t n = shape_numel(shape);
    return TensorT(std::move(shape), std::vector<S>(n, S(0)));
  }

  static TensorT full(Shape shape, S v) {
    const std::size_t n = shape_numel(shape);
    return TensorT(std::move(shape), std::vector<S>(n, v));
  }

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const { return data_->shape; }
  int rank() const { return static_cast<int>(data_->shape.size()); }
  int dim(int i) const { return data_->shape[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return data_->v.size(); }
  const std::vector<S>& values() const { return data_->v; }

  /// The single element of a scalar tensor.
  S value() const {
    if (numel() != 1) {
      throw ContractError("value(): tensor has " + std::to_string(numel()) + " elements");
    }
    return data_->v[0];
  }

  bool requires_grad() const { return node_ >= 0; }
  int node() const { return node_; }
  Tape<S>* tape() const { return tape_; }
  std::shared_ptr<const TensorDataT<S>> data() const { return data_; }

  /// Same values, no graph attachment. Gradients stop here.
  TensorT detached() const {
    TensorT t;
    t.data_ = data_;
    return t;
  }

  static TensorT attach(std::shared_ptr<const TensorDataT<S>> data, Tape<S>* tape, int node) {
    TensorT t;
    t.data_ = std::move(data);
    t.tape_ = tape;
    t.node_ = node;
    return t;
  }

 private:
  std::shared_ptr<const TensorDataT<S>> data_;
  Tape<S>* tape_ = nullptr;
  int node_ = -1;
};

/// Append-only record of one forward pass. Insertion order is topological
/// order; backward() walks it once in strict reverse. Single-use and
/// confined to the thread that builds it.
template <typename S>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const std::vector<S>&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int add_node(const char* op, std::size_t numel, BackwardFn fn) {
    nodes_.push_back(Node{op, numel, std::move(fn)});
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  void backward(const TensorT<S>& loss) {
    if (!loss.defined() || loss.tape() != this || loss.node() < 0) {
      throw ContractError("backward: loss is not a live node of this tape");
    }
    if (loss.numel() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    if (consumed_) {
      throw LifecycleError("backward: tape already consumed by a previous backward pass");
    }
    consumed_ = true;
    grads_.assign(nodes_.size(), std::vector<S>());
    grads_[static_cast<std::size_t>(loss.node())] = {S(1)};
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      auto& g = grads_[static_cast<std::size_t>(i)];
      if (g.empty()) continue;  // no gradient reached this node
      nodes_[static_cast<std::size_t>(i)].fn(*this, g);
    }
  }

  /// Adds g into the gradient buffer of `node`. Used by op backward closures.
  void accumulate(int node, const S* g, std::size_t n) {
    auto& buf = grads_[static_cast<std::size_t>(node)];
    if (buf.empty()) {
      buf.assign(g, g + n);
      buf.resize(nodes_[static_cast<std::size_t>(node)].numel, S(0));
      return;
    }
    for (std::size_t i = 0; i < n; ++i) buf[i] += g[i];
  }

  /// Gradient that reached a tensor's node, or nullptr. Valid after backward.
  const std::vector<S>* grad(const TensorT<S>& t) const {
    if (!consumed_ || t.tape() != this || t.node() < 0) return nullptr;
    const auto& g = grads_[static_cast<std::size_t>(t.node())];
    return g.empty() ? nullptr : &g;
  }

  /// Leaf memo so repeated Variable::use on one tape shares a single node
  /// (and a single value snapshot) instead of one per call site.
  const TensorT<S>* find_leaf(const void* key) const {
    auto it = leaves_.find(key);
    return it == leaves_.end() ? nullptr : &it->second;
  }

  void store_leaf(const void* key, TensorT<S> leaf) { leaves_.emplace(key, std::move(leaf)); }

 private:
  struct Node {
    const char* op;
    std::size_t numel;
    BackwardFn fn;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<S>> grads_;
  std::unordered_map<const void*, TensorT<S>> leaves_;
  bool consumed_ = false;
};

/// A named trainable parameter: mutable values plus an owned gradient
/// buffer. Variables outlive the tapes that use them.
template <typename S>
class VariableT {
 public:
  VariableT(std::string name, Shape shape, std::vector<S> init)
      : name_(std::move(name)), shape_(std::move(shape)), value_(std::move(init)) {
    check_shape_valid(shape_);
    if (shape_numel(shape_) != value_.size()) {
      throw DimensionError("variable " + name_ + ": init size does not match shape");
    }
  }

  const std::string& name() const { return name_; }
  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return value_.size(); }
  std::vector<S>& values() { return value_; }
  const std::vector<S>& values() const { return value_; }

  const std::vector<S>& grad() const { return grad_; }
  bool grad_ready() const { return grad_ready_; }

  void zero_grad() {
    grad_.assign(value_.size(), S(0));
    grad_ready_ = true;
  }

  void accumulate_grad(const S* g, std::size_t n) {
    if (frozen_) {
      throw FreezeViolation("gradient write to frozen parameter " + name_);
    }
    if (guard_) {
      throw StopGradientViolation("gradient reached guarded parameter " + name_);
    }
    if (grad_.empty()) grad_.assign(value_.size(), S(0));
    for (std::size_t i = 0; i < n; ++i) grad_[i] += g[i];
    grad_ready_ = true;
  }

  void freeze() { frozen_ = true; }
  void set_frozen(bool f) { frozen_ = f; }
  bool frozen() const { return frozen_; }
  void set_guard(bool g) { guard_ = g; }
  bool guarded() const { return guard_; }

  /// Enters the variable on a tape as a differentiable leaf. Values are
  /// copied so later optimizer updates cannot alias saved activations; the
  /// copy and node are shared by every use() on the same tape.
  TensorT<S> use(Tape<S>& tape) {
    if (const TensorT<S>* hit = tape.find_leaf(this)) return *hit;
    auto data = std::make_shared<TensorDataT<S>>(TensorDataT<S>{shape_, value_});
    VariableT* self = this;
    const int node = tape.add_node("leaf", value_.size(),
                                   [self](Tape<S>&, const std::vector<S>& gout) {
                                     self->accumulate_grad(gout.data(), gout.size());
                                   });
    TensorT<S> leaf = TensorT<S>::attach(std::move(data), &tape, node);
    tape.store_leaf(this, leaf);
    return leaf;
  }

  /// Snapshot of the current values with no graph attachment.
  TensorT<S> constant() const { return TensorT<S>(shape_, value_); }

 private:
  std::string name_;
  Shape shape_;
  std::vector<S> value_;
  std::vector<S> grad_;
  bool grad_ready_ = false;
  bool frozen_ = false;
  bool guard_ = false;
};

using Tensor = TensorT<float>;
using Variable = VariableT<float>;
using FloatTape = Tape<float>;

}  // namespace akd
