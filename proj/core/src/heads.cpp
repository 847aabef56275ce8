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

#include "akd/heads.hpp"

#include <cmath>

#include "akd/error.hpp"

namespace akd {

template <typename S>
std::pair<TensorT<S>, TensorT<S>> summarize(const TensorT<S>& e, const Mask& mask,
                                            const TensorT<S>& theta) {
  if (e.rank() != 2) throw DimensionError("summarize: embeddings must be rank 2");
  if (theta.rank() != 2 || theta.dim(0) != e.dim(1) || theta.dim(1) != 1) {
    throw DimensionError("summarize: theta must be [" + std::to_string(e.dim(1)) + " x 1], got " +
                         shape_str(theta.shape()));
  }
  const int t = e.dim(0);
  TensorT<S> scores = reshape(matmul(e, theta), {t});
  TensorT<S> alpha = masked_softmax(scores, mask);
  TensorT<S> z = matmul(reshape(alpha, {1, t}), e);
  return {alpha, z};
}

template <typename S>
TensorT<S> classify(const TensorT<S>& z, const TensorT<S>& w, const TensorT<S>& b) {
  if (z.rank() != 2 || z.dim(0) != 1) {
    throw DimensionError("classify: summary must be [1 x H], got " + shape_str(z.shape()));
  }
  return softmax_rows(add_rowwise(matmul(z, w), b), Mask{});
}

namespace {

template <typename S>
std::string adapter_base(const std::string& prefix, InvocationType inv) {
  return prefix + "." + invocation_name(inv);
}

}  // namespace

template <typename S>
AdapterBankT<S>::AdapterBankT(int hidden, int depth, std::string prefix, ParamStoreT<S>& store,
                              Rng* rng, std::vector<InvocationType> invocations)
    : hidden_(hidden), depth_(depth), prefix_(std::move(prefix)), store_(&store) {
  if (hidden < 1) throw ConfigError("adapter: hidden must be >= 1");
  if (depth < 1) throw ConfigError("adapter: depth must be >= 1");
  if (invocations.empty()) throw ConfigError("adapter: no invocation types requested");

  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto weight = [&](const std::string& name, Shape shape) -> void {
    if (VariableT<S>* existing = store.find(name)) {
      if (existing->shape() != shape) {
        throw ContractError("parameter " + name + " exists with shape " +
                            shape_str(existing->shape()) + ", expected " + shape_str(shape));
      }
      return;
    }
    if (!rng) throw ContractError("parameter " + name + " missing and no initializer provided");
    std::vector<S> v(shape_numel(shape));
    for (S& x : v) x = static_cast<S>(uniform_range(*rng, -bound, bound));
    store.create(name, std::move(shape), std::move(v));
  };
  auto bias = [&](const std::string& name, int n) -> void {
    if (VariableT<S>* existing = store.find(name)) {
      if (existing->shape() != Shape{n}) {
        throw ContractError("parameter " + name + " has unexpected shape");
      }
      return;
    }
    store.create(name, {n}, std::vector<S>(static_cast<std::size_t>(n), S(0)));
  };

  for (InvocationType inv : invocations) {
    const std::string base = adapter_base<S>(prefix_, inv);
    weight(base + ".theta", {hidden, 1});
    for (int l = 0; l < depth; ++l) {
      const std::string layer = base + ".cls" + std::to_string(l);
      const int out = l + 1 == depth ? 2 : hidden;
      weight(layer + ".w", {hidden, out});
      bias(layer + ".b", out);
    }
    present_[static_cast<int>(inv)] = true;
  }
}

template <typename S>
bool AdapterBankT<S>::has(InvocationType inv) const {
  return present_[static_cast<int>(inv)];
}

template <typename S>
HeadOutputT<S> AdapterBankT<S>::forward(Tape<S>* tape, const TensorT<S>& e, const Mask& mask,
                                        InvocationType inv) const {
  if (!has(inv)) {
    throw ConfigError(std::string("no adapter for invocation type ") + invocation_name(inv));
  }
  const std::string base = adapter_base<S>(prefix_, inv);
  auto use = [&](const std::string& name) {
    VariableT<S>& v = store_->at(name);
    return tape ? v.use(*tape) : v.constant();
  };

  auto [alpha, z] = summarize(e, mask, use(base + ".theta"));
  TensorT<S> h = z;
  for (int l = 0; l + 1 < depth_; ++l) {
    const std::string layer = base + ".cls" + std::to_string(l);
    h = relu(add_rowwise(matmul(h, use(layer + ".w")), use(layer + ".b")));
  }
  const std::string last = base + ".cls" + std::to_string(depth_ - 1);
  TensorT<S> p = classify(h, use(last + ".w"), use(last + ".b"));
  return HeadOutputT<S>{alpha, z, p};
}

template <typename S>
std::vector<HeadOutputT<S>> route(Tape<S>* tape, const AdapterBankT<S>& bank,
                                  const std::vector<TensorT<S>>& embeddings,
                                  const std::vector<Mask>& masks,
                                  const std::vector<InvocationType>& invocations) {
  if (embeddings.size() != masks.size() || embeddings.size() != invocations.size()) {
    throw DimensionError("route: embeddings, masks, and invocations must align");
  }
  std::vector<HeadOutputT<S>> out;
  out.reserve(embeddings.size());
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    out.push_back(bank.forward(tape, embeddings[i], masks[i], invocations[i]));
  }
  return out;
}

#define AKD_INSTANTIATE_HEADS(S)                                                              \
  template std::pair<TensorT<S>, TensorT<S>> summarize(const TensorT<S>&, const Mask&,        \
                                                       const TensorT<S>&);                    \
  template TensorT<S> classify(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&);      \
  template class AdapterBankT<S>;                                                             \
  template std::vector<HeadOutputT<S>> route(Tape<S>*, const AdapterBankT<S>&,                \
                                             const std::vector<TensorT<S>>&,                  \
                                             const std::vector<Mask>&,                        \
                                             const std::vector<InvocationType>&);

AKD_INSTANTIATE_HEADS(float)
AKD_INSTANTIATE_HEADS(double)

#undef AKD_INSTANTIATE_HEADS

}  // namespace akd
