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
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "akd/error.hpp"
#include "akd/rng.hpp"
#include "akd/tensor.hpp"

namespace akd {

/// Registry of named trainable parameters with stable creation order.
/// Names are dotted paths ("student.block0.attn.wq"); prefix operations
/// act on whole sub-modules.
template <typename S>
class ParamStoreT {
 public:
  VariableT<S>& create(const std::string& name, Shape shape, std::vector<S> values) {
    if (index_.count(name)) throw ContractError("parameter already exists: " + name);
    params_.push_back(std::make_unique<VariableT<S>>(name, std::move(shape), std::move(values)));
    index_[name] = params_.size() - 1;
    return *params_.back();
  }

  VariableT<S>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  const VariableT<S>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  VariableT<S>& at(const std::string& name) {
    VariableT<S>* p = find(name);
    if (!p) throw ContractError("unknown parameter: " + name);
    return *p;
  }

  const VariableT<S>& at(const std::string& name) const {
    const VariableT<S>* p = find(name);
    if (!p) throw ContractError("unknown parameter: " + name);
    return *p;
  }

  std::size_t size() const { return params_.size(); }

  /// All parameters in creation order.
  std::vector<VariableT<S>*> all() {
    std::vector<VariableT<S>*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  std::vector<const VariableT<S>*> all() const {
    std::vector<const VariableT<S>*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  std::vector<VariableT<S>*> with_prefix(const std::string& prefix) {
    std::vector<VariableT<S>*> out;
    for (auto& p : params_) {
      if (p->name().rfind(prefix, 0) == 0) out.push_back(p.get());
    }
    return out;
  }

  void freeze_prefix(const std::string& prefix, bool frozen = true) {
    apply_prefix(prefix, [frozen](VariableT<S>& v) { v.set_frozen(frozen); });
  }

  void set_guard_prefix(const std::string& prefix, bool guarded) {
    apply_prefix(prefix, [guarded](VariableT<S>& v) { v.set_guard(guarded); });
  }

  std::int64_t total_params() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += static_cast<std::int64_t>(p->numel());
    return n;
  }

  std::int64_t total_params_prefix(const std::string& prefix) const {
    std::int64_t n = 0;
    for (const auto& p : params_) {
      if (p->name().rfind(prefix, 0) == 0) n += static_cast<std::int64_t>(p->numel());
    }
    return n;
  }

  /// FNV-1a over names and values in creation order; changes iff a
  /// covered parameter (or its name) changes.
  std::uint64_t values_hash_prefix(const std::string& prefix) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : params_) {
      if (p->name().rfind(prefix, 0) != 0) continue;
      h = fnv1a64(p->name().data(), p->name().size(), h);
      h = fnv1a64(reinterpret_cast<const char*>(p->values().data()),
                  p->values().size() * sizeof(S), h);
    }
    return h;
  }

  std::uint64_t values_hash() const { return values_hash_prefix(""); }

 private:
  template <typename Fn>
  void apply_prefix(const std::string& prefix, Fn fn) {
    bool any = false;
    for (auto& p : params_) {
      if (p->name().rfind(prefix, 0) == 0) {
        fn(*p);
        any = true;
      }
    }
    if (!any) throw ContractError("no parameters under prefix: " + prefix);
  }

  std::vector<std::unique_ptr<VariableT<S>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

using ParamStore = ParamStoreT<float>;

}  // namespace akd
