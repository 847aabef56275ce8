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

#include "akd/encoder.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "akd/error.hpp"

namespace akd {

const char* encoder_kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::Transformer: return "transformer";
    case EncoderKind::Conformer: return "conformer";
  }
  throw ContractError("encoder_kind_name: invalid kind");
}

EncoderKind encoder_kind_from_name(const std::string& name) {
  if (name == "transformer") return EncoderKind::Transformer;
  if (name == "conformer") return EncoderKind::Conformer;
  throw ConfigError("unknown encoder kind: '" + name + "'");
}

void EncoderConfig::validate() const {
  if (input_dim < 1) throw ConfigError("encoder: input_dim must be >= 1");
  if (hidden < 1) throw ConfigError("encoder: hidden must be >= 1");
  if (layers < 1) throw ConfigError("encoder: layers must be >= 1");
  if (heads < 1) throw ConfigError("encoder: heads must be >= 1");
  if (hidden % heads != 0) throw ConfigError("encoder: hidden must be divisible by heads");
  if (ff_dim < 1) throw ConfigError("encoder: ff_dim must be >= 1");
  if (kind == EncoderKind::Conformer) {
    if (conv_kernel < 1 || conv_kernel % 2 == 0) {
      throw ConfigError("encoder: conv_kernel must be odd and >= 1");
    }
  }
  if (kind == EncoderKind::Transformer && max_t < 1) {
    throw ConfigError("encoder: max_t must be >= 1");
  }
}

EncoderConfig encoder_preset(const std::string& name) {
  EncoderConfig c;
  if (name == "paper-transformer") {
    c.kind = EncoderKind::Transformer;
    c.input_dim = 280;
    c.hidden = 256;
    c.layers = 8;
    c.heads = 4;
    c.ff_dim = 1024;
    c.max_t = 256;
  } else if (name == "paper-conformer") {
    c.kind = EncoderKind::Conformer;
    c.input_dim = 280;
    c.hidden = 168;
    c.layers = 8;
    c.heads = 4;
    c.ff_dim = 672;
    c.conv_kernel = 31;
  } else if (name == "paper-teacher") {
    c.kind = EncoderKind::Conformer;
    c.input_dim = 280;
    c.hidden = 512;
    c.layers = 12;
    c.heads = 8;
    c.ff_dim = 2048;
    c.conv_kernel = 31;
  } else if (name == "desk-student") {
    c.kind = EncoderKind::Conformer;
    c.input_dim = 112;
    c.hidden = 32;
    c.layers = 2;
    c.heads = 2;
    c.ff_dim = 64;
    c.conv_kernel = 7;
  } else if (name == "desk-teacher") {
    c.kind = EncoderKind::Conformer;
    c.input_dim = 112;
    c.hidden = 48;
    c.layers = 3;
    c.heads = 2;
    c.ff_dim = 96;
    c.conv_kernel = 7;
  } else {
    throw ConfigError("unknown encoder preset: '" + name + "'");
  }
  c.validate();
  return c;
}

bool is_known_preset(const std::string& name) {
  return name == "paper-transformer" || name == "paper-conformer" || name == "paper-teacher" ||
         name == "desk-student" || name == "desk-teacher";
}

namespace {

template <typename S>
VariableT<S>& find_or_create(ParamStoreT<S>& store, const std::string& name, const Shape& shape,
                             Rng* rng, double bound) {
  if (VariableT<S>* existing = store.find(name)) {
    if (existing->shape() != shape) {
      throw ContractError("parameter " + name + " exists with shape " +
                          shape_str(existing->shape()) + ", expected " + shape_str(shape));
    }
    return *existing;
  }
  if (!rng) throw ContractError("parameter " + name + " missing and no initializer provided");
  std::vector<S> v(shape_numel(shape));
  for (S& x : v) x = static_cast<S>(uniform_range(*rng, -bound, bound));
  return store.create(name, shape, std::move(v));
}

template <typename S>
VariableT<S>& find_or_create_const(ParamStoreT<S>& store, const std::string& name,
                                   const Shape& shape, S value) {
  if (VariableT<S>* existing = store.find(name)) {
    if (existing->shape() != shape) {
      throw ContractError("parameter " + name + " exists with shape " +
                          shape_str(existing->shape()) + ", expected " + shape_str(shape));
    }
    return *existing;
  }
  return store.create(name, shape, std::vector<S>(shape_numel(shape), value));
}

// Registers one linear layer: weight [in x out] with fan-in scaled uniform
// init, zero bias.
template <typename S>
void make_linear(ParamStoreT<S>& store, const std::string& base, int in, int out, Rng* rng) {
  find_or_create(store, base + ".w", {in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)));
  find_or_create_const(store, base + ".b", {out}, S(0));
}

template <typename S>
void make_norm(ParamStoreT<S>& store, const std::string& base, int dim) {
  find_or_create_const(store, base + ".gamma", {dim}, S(1));
  find_or_create_const(store, base + ".beta", {dim}, S(0));
}

template <typename S>
void make_attention(ParamStoreT<S>& store, const std::string& base, int hidden, Rng* rng) {
  make_linear(store, base + ".q", hidden, hidden, rng);
  make_linear(store, base + ".k", hidden, hidden, rng);
  make_linear(store, base + ".v", hidden, hidden, rng);
  make_linear(store, base + ".o", hidden, hidden, rng);
}

template <typename S>
void make_feed_forward(ParamStoreT<S>& store, const std::string& base, int hidden, int ff,
                       Rng* rng) {
  make_linear(store, base + ".in", hidden, ff, rng);
  make_linear(store, base + ".out", ff, hidden, rng);
}

}  // namespace

template <typename S>
EncoderT<S>::EncoderT(const EncoderConfig& config, std::string prefix, ParamStoreT<S>& store,
                      Rng* rng)
    : config_(config), prefix_(std::move(prefix)), store_(&store) {
  config_.validate();
  const int h = config_.hidden;

  make_linear(store, prefix_ + ".input", config_.input_dim, h, rng);
  if (config_.kind == EncoderKind::Transformer) {
    find_or_create(store, prefix_ + ".pos", {config_.max_t, h}, rng, 0.02);
  }

  for (int i = 0; i < config_.layers; ++i) {
    const std::string b = prefix_ + ".block" + std::to_string(i);
    if (config_.kind == EncoderKind::Transformer) {
      make_norm(store, b + ".ln1", h);
      make_attention(store, b + ".attn", h, rng);
      make_norm(store, b + ".ln2", h);
      make_feed_forward(store, b + ".ff", h, config_.ff_dim, rng);
    } else {
      make_norm(store, b + ".ff1.ln", h);
      make_feed_forward(store, b + ".ff1", h, config_.ff_dim, rng);
      make_norm(store, b + ".attn.ln", h);
      make_attention(store, b + ".attn", h, rng);
      make_norm(store, b + ".conv.ln", h);
      make_linear(store, b + ".conv.pw1", h, 2 * h, rng);
      find_or_create(store, b + ".conv.dw", {config_.conv_kernel, h}, rng,
                     1.0 / std::sqrt(static_cast<double>(config_.conv_kernel)));
      find_or_create_const(store, b + ".conv.dw_b", {h}, S(0));
      make_linear(store, b + ".conv.pw2", h, h, rng);
      make_linear(store, b + ".merge", 2 * h, h, rng);
      make_norm(store, b + ".ff2.ln", h);
      make_feed_forward(store, b + ".ff2", h, config_.ff_dim, rng);
      make_norm(store, b + ".final_ln", h);
    }
  }
  if (config_.kind == EncoderKind::Transformer) {
    make_norm(store, prefix_ + ".final_ln", h);
  }
}

template <typename S>
TensorT<S> EncoderT<S>::use(Tape<S>* tape, const std::string& name) const {
  VariableT<S>& v = store_->at(name);
  return tape ? v.use(*tape) : v.constant();
}

template <typename S>
TensorT<S> EncoderT<S>::norm(Tape<S>* tape, const TensorT<S>& u, const std::string& base) const {
  return layer_norm(u, use(tape, base + ".gamma"), use(tape, base + ".beta"));
}

template <typename S>
TensorT<S> EncoderT<S>::feed_forward(Tape<S>* tape, const TensorT<S>& u, const std::string& base,
                                     bool use_swish) const {
  TensorT<S> a = add_rowwise(matmul(u, use(tape, base + ".in.w")), use(tape, base + ".in.b"));
  a = use_swish ? swish(a) : relu(a);
  return add_rowwise(matmul(a, use(tape, base + ".out.w")), use(tape, base + ".out.b"));
}

template <typename S>
TensorT<S> EncoderT<S>::attention(Tape<S>* tape, const TensorT<S>& u, const Mask& mask,
                                  const std::string& base) const {
  const int h = config_.hidden;
  const int dh = h / config_.heads;
  const S inv_sqrt_dh = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

  TensorT<S> q = add_rowwise(matmul(u, use(tape, base + ".q.w")), use(tape, base + ".q.b"));
  TensorT<S> k = add_rowwise(matmul(u, use(tape, base + ".k.w")), use(tape, base + ".k.b"));
  TensorT<S> v = add_rowwise(matmul(u, use(tape, base + ".v.w")), use(tape, base + ".v.b"));

  TensorT<S> ctx;
  for (int i = 0; i < config_.heads; ++i) {
    TensorT<S> qh = slice_cols(q, i * dh, (i + 1) * dh);
    TensorT<S> kh = slice_cols(k, i * dh, (i + 1) * dh);
    TensorT<S> vh = slice_cols(v, i * dh, (i + 1) * dh);
    TensorT<S> scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
    TensorT<S> attn = softmax_rows(scores, mask);  // padded keys carry zero weight
    TensorT<S> head = matmul(attn, vh);
    ctx = i == 0 ? head : concat_cols(ctx, head);
  }
  return add_rowwise(matmul(ctx, use(tape, base + ".o.w")), use(tape, base + ".o.b"));
}

template <typename S>
TensorT<S> EncoderT<S>::forward(Tape<S>* tape, const TensorT<S>& x, const Mask& mask) const {
  if (x.rank() != 2 || x.dim(1) != config_.input_dim) {
    throw DimensionError("encoder " + prefix_ + ": input must be [T x " +
                         std::to_string(config_.input_dim) + "], got " + shape_str(x.shape()));
  }
  const int t = x.dim(0);
  if (!mask.empty() && static_cast<int>(mask.size()) != t) {
    throw DimensionError("encoder " + prefix_ + ": mask length does not match T");
  }

  TensorT<S> h =
      add_rowwise(matmul(x, use(tape, prefix_ + ".input.w")), use(tape, prefix_ + ".input.b"));

  if (config_.kind == EncoderKind::Transformer) {
    if (t > config_.max_t) {
      throw ConfigError("encoder " + prefix_ + ": sequence length " + std::to_string(t) +
                        " exceeds positional table size " + std::to_string(config_.max_t));
    }
    h = add(h, slice_rows(use(tape, prefix_ + ".pos"), 0, t));
    for (int i = 0; i < config_.layers; ++i) {
      const std::string b = prefix_ + ".block" + std::to_string(i);
      h = add(h, attention(tape, norm(tape, h, b + ".ln1"), mask, b + ".attn"));
      h = add(h, feed_forward(tape, norm(tape, h, b + ".ln2"), b + ".ff", /*use_swish=*/false));
    }
    return norm(tape, h, prefix_ + ".final_ln");
  }

  for (int i = 0; i < config_.layers; ++i) {
    const std::string b = prefix_ + ".block" + std::to_string(i);
    h = add(h, scale(feed_forward(tape, norm(tape, h, b + ".ff1.ln"), b + ".ff1",
                                  /*use_swish=*/true),
                     S(0.5)));

    TensorT<S> sa = attention(tape, norm(tape, h, b + ".attn.ln"), mask, b + ".attn");

    TensorT<S> c = norm(tape, h, b + ".conv.ln");
    c = add_rowwise(matmul(c, use(tape, b + ".conv.pw1.w")), use(tape, b + ".conv.pw1.b"));
    c = glu(c);
    // Padded rows must not leak into real frames through the kernel window.
    c = zero_masked_rows(c, mask);
    c = add_rowwise(depthwise_conv1d(c, use(tape, b + ".conv.dw")), use(tape, b + ".conv.dw_b"));
    c = swish(c);
    c = add_rowwise(matmul(c, use(tape, b + ".conv.pw2.w")), use(tape, b + ".conv.pw2.b"));

    TensorT<S> merged = add_rowwise(matmul(concat_cols(sa, c), use(tape, b + ".merge.w")),
                                    use(tape, b + ".merge.b"));
    h = add(h, merged);
    h = add(h, scale(feed_forward(tape, norm(tape, h, b + ".ff2.ln"), b + ".ff2",
                                  /*use_swish=*/true),
                     S(0.5)));
    h = norm(tape, h, b + ".final_ln");
  }
  return h;
}

template class EncoderT<float>;
template class EncoderT<double>;

}  // namespace akd
