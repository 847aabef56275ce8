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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "akd/encoder.hpp"
#include "akd/error.hpp"
#include "akd/ops.hpp"
#include "akd/params.hpp"
#include "akd/rng.hpp"
#include "akd/tensor.hpp"
#include "doctest.h"

using namespace akd;

namespace {

// Independent closed-form parameter counts, reimplemented from the layer
// structure rather than read back from the store.
std::int64_t linear_params(int in, int out) { return static_cast<std::int64_t>(in) * out + out; }

std::int64_t expected_params(const EncoderConfig& c) {
  const std::int64_t h = c.hidden;
  std::int64_t total = linear_params(c.input_dim, c.hidden);
  if (c.kind == EncoderKind::Transformer) {
    total += static_cast<std::int64_t>(c.max_t) * h;  // positional table
    const std::int64_t block = 2 * h                  // ln1
                               + 4 * linear_params(c.hidden, c.hidden)  // q,k,v,o
                               + 2 * h                                  // ln2
                               + linear_params(c.hidden, c.ff_dim) +
                               linear_params(c.ff_dim, c.hidden);
    total += c.layers * block + 2 * h;  // blocks + final norm
  } else {
    const std::int64_t ff = 2 * h + linear_params(c.hidden, c.ff_dim) +
                            linear_params(c.ff_dim, c.hidden);
    const std::int64_t attn = 2 * h + 4 * linear_params(c.hidden, c.hidden);
    const std::int64_t conv = 2 * h + linear_params(c.hidden, 2 * c.hidden) +
                              static_cast<std::int64_t>(c.conv_kernel) * h + h +
                              linear_params(c.hidden, c.hidden);
    const std::int64_t merge = linear_params(2 * c.hidden, c.hidden);
    total += c.layers * (ff + attn + conv + merge + ff + 2 * h);
  }
  return total;
}

Tensor random_input(int t, int d, Rng& rng) {
  std::vector<float> v(static_cast<std::size_t>(t) * d);
  for (float& x : v) x = static_cast<float>(uniform_range(rng, -1.0, 1.0));
  return Tensor({t, d}, std::move(v));
}

TensorT<double> random_input_d(int t, int d, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(t) * d);
  for (double& x : v) x = uniform_range(rng, -1.0, 1.0);
  return TensorT<double>({t, d}, std::move(v));
}

void zero_param(ParamStore& store, const std::string& name) {
  auto& v = store.at(name).values();
  std::fill(v.begin(), v.end(), 0.0f);
}

// Row-wise layer norm recomputed with plain loops (eps matches the kernel).
std::vector<double> ln_row(const std::vector<double>& x, const std::vector<double>& g,
                           const std::vector<double>& b) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double istd = 1.0 / std::sqrt(var + 1e-5);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - mean) * istd * g[i] + b[i];
  return out;
}

}  // namespace

TEST_CASE("presets match their published dimensions and parameter formulas") {
  struct Row {
    const char* name;
    EncoderKind kind;
    int layers, hidden, heads, ff, input;
  };
  const Row rows[] = {
      {"paper-transformer", EncoderKind::Transformer, 8, 256, 4, 1024, 280},
      {"paper-conformer", EncoderKind::Conformer, 8, 168, 4, 672, 280},
      {"paper-teacher", EncoderKind::Conformer, 12, 512, 8, 2048, 280},
      {"desk-student", EncoderKind::Conformer, 2, 32, 2, 64, 112},
      {"desk-teacher", EncoderKind::Conformer, 3, 48, 2, 96, 112},
  };
  for (const Row& r : rows) {
    CAPTURE(r.name);
    const EncoderConfig c = encoder_preset(r.name);
    CHECK(c.kind == r.kind);
    CHECK(c.layers == r.layers);
    CHECK(c.hidden == r.hidden);
    CHECK(c.heads == r.heads);
    CHECK(c.ff_dim == r.ff);
    CHECK(c.input_dim == r.input);
    CHECK(is_known_preset(r.name));

    ParamStore store;
    Rng rng(1);
    Encoder enc(c, "m", store, &rng);
    CHECK(store.total_params() == expected_params(c));
  }
  CHECK_THROWS_AS(encoder_preset("paper-student"), ConfigError);
  CHECK(!is_known_preset("paper-student"));

  SUBCASE("student-scale presets sit in the published size band") {
    for (const char* name : {"paper-transformer", "paper-conformer"}) {
      ParamStore store;
      Rng rng(1);
      Encoder enc(encoder_preset(name), "m", store, &rng);
      CHECK(store.total_params() >= 3'500'000);
      CHECK(store.total_params() <= 6'500'000);
    }
  }
}

TEST_CASE("encoder forward produces [T x hidden] for both kinds") {
  for (EncoderKind kind : {EncoderKind::Transformer, EncoderKind::Conformer}) {
    CAPTURE(encoder_kind_name(kind));
    EncoderConfig c;
    c.kind = kind;
    c.input_dim = 6;
    c.hidden = 8;
    c.layers = 2;
    c.heads = 2;
    c.ff_dim = 12;
    c.conv_kernel = 3;
    c.max_t = 32;
    ParamStore store;
    Rng rng(7);
    Encoder enc(c, "m", store, &rng);

    Rng drng(11);
    const Tensor x = random_input(5, 6, drng);
    const Tensor out = enc.forward(nullptr, x, {});
    REQUIRE(out.shape() == Shape{5, 8});
    CHECK(!out.requires_grad());

    FloatTape tape;
    const Tensor out2 = enc.forward(&tape, x, Mask{1, 1, 1, 1, 1});
    REQUIRE(out2.shape() == Shape{5, 8});
    CHECK(out2.requires_grad());
    CHECK(out2.values() == out.values());
  }
}

TEST_CASE("transformer with zeroed residual projections is a pure norm pipeline") {
  EncoderConfig c;
  c.kind = EncoderKind::Transformer;
  c.input_dim = 3;
  c.hidden = 4;
  c.layers = 3;
  c.heads = 2;
  c.ff_dim = 6;
  c.max_t = 16;
  ParamStore store;
  Rng rng(5);
  Encoder enc(c, "m", store, &rng);

  zero_param(store, "m.pos");
  for (int i = 0; i < c.layers; ++i) {
    const std::string b = "m.block" + std::to_string(i);
    zero_param(store, b + ".attn.o.w");
    zero_param(store, b + ".attn.o.b");
    zero_param(store, b + ".ff.out.w");
    zero_param(store, b + ".ff.out.b");
  }

  Rng drng(3);
  const Tensor x = random_input(4, 3, drng);
  const Tensor out = enc.forward(nullptr, x, {});

  // Every block contributes zero, so the result is exactly the layer-normed
  // input projection.
  const auto& wi = store.at("m.input.w").values();
  const auto& bi = store.at("m.input.b").values();
  const auto& g = store.at("m.final_ln.gamma").values();
  const auto& be = store.at("m.final_ln.beta").values();
  for (int t = 0; t < 4; ++t) {
    std::vector<double> row(4, 0.0);
    for (int j = 0; j < 4; ++j) {
      double s = bi[static_cast<std::size_t>(j)];
      for (int i = 0; i < 3; ++i) {
        s += static_cast<double>(x.values()[static_cast<std::size_t>(t) * 3 + i]) *
             wi[static_cast<std::size_t>(i) * 4 + j];
      }
      row[static_cast<std::size_t>(j)] = s;
    }
    const std::vector<double> want =
        ln_row(row, {g.begin(), g.end()}, {be.begin(), be.end()});
    for (int j = 0; j < 4; ++j) {
      CHECK(out.values()[static_cast<std::size_t>(t) * 4 + j] ==
            doctest::Approx(want[static_cast<std::size_t>(j)]).epsilon(1e-5));
    }
  }
}

TEST_CASE("conformer with zeroed branch outputs reduces to the block norm") {
  EncoderConfig c;
  c.kind = EncoderKind::Conformer;
  c.input_dim = 3;
  c.hidden = 4;
  c.layers = 1;
  c.heads = 2;
  c.ff_dim = 6;
  c.conv_kernel = 3;
  ParamStore store;
  Rng rng(9);
  Encoder enc(c, "m", store, &rng);

  zero_param(store, "m.block0.ff1.out.w");
  zero_param(store, "m.block0.ff1.out.b");
  zero_param(store, "m.block0.ff2.out.w");
  zero_param(store, "m.block0.ff2.out.b");
  zero_param(store, "m.block0.merge.w");
  zero_param(store, "m.block0.merge.b");

  Rng drng(4);
  const Tensor x = random_input(3, 3, drng);
  const Tensor out = enc.forward(nullptr, x, {});

  const auto& wi = store.at("m.input.w").values();
  const auto& bi = store.at("m.input.b").values();
  const auto& g = store.at("m.block0.final_ln.gamma").values();
  const auto& be = store.at("m.block0.final_ln.beta").values();
  for (int t = 0; t < 3; ++t) {
    std::vector<double> row(4, 0.0);
    for (int j = 0; j < 4; ++j) {
      double s = bi[static_cast<std::size_t>(j)];
      for (int i = 0; i < 3; ++i) {
        s += static_cast<double>(x.values()[static_cast<std::size_t>(t) * 3 + i]) *
             wi[static_cast<std::size_t>(i) * 4 + j];
      }
      row[static_cast<std::size_t>(j)] = s;
    }
    const std::vector<double> want =
        ln_row(row, {g.begin(), g.end()}, {be.begin(), be.end()});
    for (int j = 0; j < 4; ++j) {
      CHECK(out.values()[static_cast<std::size_t>(t) * 4 + j] ==
            doctest::Approx(want[static_cast<std::size_t>(j)]).epsilon(1e-5));
    }
  }
}

TEST_CASE("one transformer block agrees with a scalar recomputation") {
  EncoderConfig c;
  c.kind = EncoderKind::Transformer;
  c.input_dim = 2;
  c.hidden = 2;
  c.layers = 1;
  c.heads = 1;
  c.ff_dim = 4;
  c.max_t = 8;
  ParamStoreT<double> store;
  Rng rng(17);
  EncoderT<double> enc(c, "m", store, &rng);

  Rng drng(23);
  const TensorT<double> x = random_input_d(2, 2, drng);
  const TensorT<double> out = enc.forward(nullptr, x, {});

  auto mat = [&](const std::string& name) { return store.at(name).values(); };
  auto matvec2 = [](const std::vector<double>& w, const std::vector<double>& b,
                    const std::vector<double>& v, int in, int out_dim) {
    std::vector<double> r(static_cast<std::size_t>(out_dim));
    for (int j = 0; j < out_dim; ++j) {
      double s = b.empty() ? 0.0 : b[static_cast<std::size_t>(j)];
      for (int i = 0; i < in; ++i) s += v[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i) * out_dim + j];
      r[static_cast<std::size_t>(j)] = s;
    }
    return r;
  };

  // Input projection plus positional rows.
  std::vector<std::vector<double>> h(2);
  for (int t = 0; t < 2; ++t) {
    std::vector<double> xr = {x.values()[static_cast<std::size_t>(t) * 2],
                              x.values()[static_cast<std::size_t>(t) * 2 + 1]};
    h[static_cast<std::size_t>(t)] = matvec2(mat("m.input.w"), mat("m.input.b"), xr, 2, 2);
    for (int j = 0; j < 2; ++j) {
      h[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] +=
          mat("m.pos")[static_cast<std::size_t>(t) * 2 + j];
    }
  }

  // Self-attention residual.
  std::vector<std::vector<double>> u(2), q(2), k(2), v(2);
  for (int t = 0; t < 2; ++t) {
    u[static_cast<std::size_t>(t)] =
        ln_row(h[static_cast<std::size_t>(t)], mat("m.block0.ln1.gamma"), mat("m.block0.ln1.beta"));
    q[static_cast<std::size_t>(t)] = matvec2(mat("m.block0.attn.q.w"), mat("m.block0.attn.q.b"),
                                             u[static_cast<std::size_t>(t)], 2, 2);
    k[static_cast<std::size_t>(t)] = matvec2(mat("m.block0.attn.k.w"), mat("m.block0.attn.k.b"),
                                             u[static_cast<std::size_t>(t)], 2, 2);
    v[static_cast<std::size_t>(t)] = matvec2(mat("m.block0.attn.v.w"), mat("m.block0.attn.v.b"),
                                             u[static_cast<std::size_t>(t)], 2, 2);
  }
  const double inv = 1.0 / std::sqrt(2.0);
  for (int t = 0; t < 2; ++t) {
    double s0 = (q[static_cast<std::size_t>(t)][0] * k[0][0] + q[static_cast<std::size_t>(t)][1] * k[0][1]) * inv;
    double s1 = (q[static_cast<std::size_t>(t)][0] * k[1][0] + q[static_cast<std::size_t>(t)][1] * k[1][1]) * inv;
    const double m = std::max(s0, s1);
    const double e0 = std::exp(s0 - m), e1 = std::exp(s1 - m);
    const double a0 = e0 / (e0 + e1), a1 = e1 / (e0 + e1);
    std::vector<double> ctx = {a0 * v[0][0] + a1 * v[1][0], a0 * v[0][1] + a1 * v[1][1]};
    const std::vector<double> o =
        matvec2(mat("m.block0.attn.o.w"), mat("m.block0.attn.o.b"), ctx, 2, 2);
    for (int j = 0; j < 2; ++j) {
      h[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] += o[static_cast<std::size_t>(j)];
    }
  }

  // Feed-forward residual and final norm.
  for (int t = 0; t < 2; ++t) {
    const std::vector<double> w2 =
        ln_row(h[static_cast<std::size_t>(t)], mat("m.block0.ln2.gamma"), mat("m.block0.ln2.beta"));
    std::vector<double> a = matvec2(mat("m.block0.ff.in.w"), mat("m.block0.ff.in.b"), w2, 2, 4);
    for (double& z : a) z = std::max(z, 0.0);
    const std::vector<double> f = matvec2(mat("m.block0.ff.out.w"), mat("m.block0.ff.out.b"), a, 4, 2);
    for (int j = 0; j < 2; ++j) {
      h[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] += f[static_cast<std::size_t>(j)];
    }
    const std::vector<double> fin =
        ln_row(h[static_cast<std::size_t>(t)], mat("m.final_ln.gamma"), mat("m.final_ln.beta"));
    for (int j = 0; j < 2; ++j) {
      CHECK(out.values()[static_cast<std::size_t>(t) * 2 + j] ==
            doctest::Approx(fin[static_cast<std::size_t>(j)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("unmasked rows are bitwise independent of trailing padding") {
  for (EncoderKind kind : {EncoderKind::Transformer, EncoderKind::Conformer}) {
    CAPTURE(encoder_kind_name(kind));
    EncoderConfig c;
    c.kind = kind;
    c.input_dim = 5;
    c.hidden = 8;
    c.layers = 2;
    c.heads = 2;
    c.ff_dim = 12;
    c.conv_kernel = 3;
    c.max_t = 32;
    ParamStore store;
    Rng rng(13);
    Encoder enc(c, "m", store, &rng);

    Rng drng(29);
    const int t_real = 6;
    const int t_pad = 11;
    const Tensor x = random_input(t_real, 5, drng);

    std::vector<float> padded(static_cast<std::size_t>(t_pad) * 5, 0.0f);
    std::copy(x.values().begin(), x.values().end(), padded.begin());
    Mask mask(static_cast<std::size_t>(t_pad), 0);
    std::fill(mask.begin(), mask.begin() + t_real, 1);

    const Tensor out_true = enc.forward(nullptr, x, {});
    const Tensor out_pad = enc.forward(nullptr, Tensor({t_pad, 5}, padded), mask);

    REQUIRE(out_pad.shape() == Shape{t_pad, 8});
    for (int t = 0; t < t_real; ++t) {
      for (int j = 0; j < 8; ++j) {
        // Bitwise, not approximate: padding must be invisible.
        CHECK(out_pad.values()[static_cast<std::size_t>(t) * 8 + j] ==
              out_true.values()[static_cast<std::size_t>(t) * 8 + j]);
      }
    }
  }
}

TEST_CASE("encoder gradients match finite differences") {
  auto check_encoder = [](const EncoderConfig& c, int t, std::uint64_t seed) {
    ParamStoreT<double> store;
    Rng rng(seed);
    EncoderT<double> enc(c, "m", store, &rng);

    Rng drng(seed + 1);
    const TensorT<double> x = random_input_d(t, c.input_dim, drng);
    Mask mask(static_cast<std::size_t>(t), 1);
    if (t > 2) mask[static_cast<std::size_t>(t) - 1] = 0;  // one padded row

    // Fixed random contraction so the scalar loss sees every output.
    std::vector<double> wv(static_cast<std::size_t>(t) * c.hidden);
    for (double& z : wv) z = uniform_range(drng, -1.0, 1.0);
    const TensorT<double> w({t, c.hidden}, wv);

    auto loss_value = [&]() {
      const TensorT<double> out = enc.forward(nullptr, x, mask);
      double s = 0.0;
      for (std::size_t i = 0; i < out.values().size(); ++i) s += out.values()[i] * wv[i];
      return s;
    };

    // Analytic gradients.
    Tape<double> tape;
    const TensorT<double> out = enc.forward(&tape, x, mask);
    const TensorT<double> loss = sum(mul(out, w));
    for (auto* p : store.all()) p->zero_grad();
    tape.backward(loss);

    const double h = 1e-4;
    double worst = 0.0;
    for (auto* p : store.all()) {
      double max_fd = 0.0, max_an = 0.0, max_diff = 0.0;
      for (std::size_t j = 0; j < p->numel(); ++j) {
        const double keep = p->values()[j];
        p->values()[j] = keep + h;
        const double up = loss_value();
        p->values()[j] = keep - h;
        const double down = loss_value();
        p->values()[j] = keep;
        const double fd = (up - down) / (2.0 * h);
        const double an = p->grad()[j];
        max_fd = std::max(max_fd, std::abs(fd));
        max_an = std::max(max_an, std::abs(an));
        max_diff = std::max(max_diff, std::abs(fd - an));
      }
      const double rel = max_diff / std::max({max_fd, max_an, 1e-8});
      CAPTURE(p->name());
      CHECK(rel < 1e-3);
      worst = std::max(worst, rel);
    }
    return worst;
  };

  SUBCASE("conformer") {
    EncoderConfig c;
    c.kind = EncoderKind::Conformer;
    c.input_dim = 4;
    c.hidden = 6;
    c.layers = 2;
    c.heads = 2;
    c.ff_dim = 8;
    c.conv_kernel = 3;
    check_encoder(c, 5, 101);
  }

  SUBCASE("transformer") {
    EncoderConfig c;
    c.kind = EncoderKind::Transformer;
    c.input_dim = 4;
    c.hidden = 6;
    c.layers = 1;
    c.heads = 3;
    c.ff_dim = 8;
    c.max_t = 8;
    check_encoder(c, 4, 202);
  }
}

TEST_CASE("encoder validation and parameter reuse") {
  EncoderConfig c;
  c.input_dim = 4;
  c.hidden = 6;
  c.layers = 1;
  c.heads = 2;
  c.ff_dim = 8;
  c.conv_kernel = 3;

  SUBCASE("config rejects bad fields") {
    EncoderConfig bad = c;
    bad.heads = 4;  // 6 % 4 != 0
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.conv_kernel = 4;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.layers = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.kind = EncoderKind::Transformer;
    bad.max_t = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  SUBCASE("transformer rejects sequences beyond the positional table") {
    EncoderConfig tc = c;
    tc.kind = EncoderKind::Transformer;
    tc.max_t = 4;
    ParamStore store;
    Rng rng(3);
    Encoder enc(tc, "m", store, &rng);
    Rng drng(5);
    CHECK_NOTHROW(enc.forward(nullptr, random_input(4, 4, drng), {}));
    CHECK_THROWS_AS(enc.forward(nullptr, random_input(5, 4, drng), {}), ConfigError);
  }

  SUBCASE("second construction reuses parameters bit for bit") {
    ParamStore store;
    Rng rng(3);
    Encoder a(c, "m", store, &rng);
    const std::size_t count = store.size();
    const std::uint64_t h = store.values_hash();
    Encoder b(c, "m", store, nullptr);  // no initializer needed: all present
    CHECK(store.size() == count);
    CHECK(store.values_hash() == h);

    Rng drng(8);
    const Tensor x = random_input(3, 4, drng);
    CHECK(a.forward(nullptr, x, {}).values() == b.forward(nullptr, x, {}).values());
  }

  SUBCASE("missing parameters without an initializer throw") {
    ParamStore store;
    CHECK_THROWS_AS(Encoder(c, "m", store, nullptr), ContractError);
  }

  SUBCASE("shape conflicts with existing parameters throw") {
    ParamStore store;
    store.create("m.input.w", {2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
    Rng rng(3);
    CHECK_THROWS_AS(Encoder(c, "m", store, &rng), ContractError);
  }

  SUBCASE("same seed gives identical initialization") {
    ParamStore s1, s2;
    Rng r1(42), r2(42);
    Encoder a(c, "m", s1, &r1);
    Encoder b(c, "m", s2, &r2);
    CHECK(s1.values_hash() == s2.values_hash());
    Rng r3(43);
    ParamStore s3;
    Encoder d(c, "m", s3, &r3);
    CHECK(s1.values_hash() != s3.values_hash());
  }

  SUBCASE("wrong input width or mask length throws") {
    ParamStore store;
    Rng rng(3);
    Encoder enc(c, "m", store, &rng);
    Rng drng(5);
    CHECK_THROWS_AS(enc.forward(nullptr, random_input(3, 5, drng), {}), DimensionError);
    CHECK_THROWS_AS(enc.forward(nullptr, random_input(3, 4, drng), Mask{1, 1}), DimensionError);
  }

  SUBCASE("fully masked sequence cannot attend anywhere") {
    ParamStore store;
    Rng rng(3);
    Encoder enc(c, "m", store, &rng);
    Rng drng(5);
    CHECK_THROWS_AS(enc.forward(nullptr, random_input(3, 4, drng), Mask{0, 0, 0}),
                    EmptyAttentionError);
  }
}

TEST_CASE("parameter store prefix operations") {
  ParamStore store;
  store.create("a.x", {2}, {1.0f, 2.0f});
  store.create("a.y", {1}, {3.0f});
  store.create("b.x", {1}, {4.0f});

  CHECK(store.total_params() == 4);
  CHECK(store.total_params_prefix("a.") == 3);
  CHECK(store.with_prefix("a.").size() == 2);
  CHECK(store.with_prefix("b.").size() == 1);

  store.freeze_prefix("a.");
  CHECK(store.at("a.x").frozen());
  CHECK(store.at("a.y").frozen());
  CHECK(!store.at("b.x").frozen());
  store.freeze_prefix("a.", false);
  CHECK(!store.at("a.x").frozen());

  store.set_guard_prefix("b.", true);
  CHECK(store.at("b.x").guarded());
  store.set_guard_prefix("b.", false);

  CHECK_THROWS_AS(store.freeze_prefix("zzz."), ContractError);
  CHECK_THROWS_AS(store.create("a.x", {1}, {0.0f}), ContractError);
  CHECK_THROWS_AS(store.at("nope"), ContractError);
  CHECK(store.find("nope") == nullptr);

  const std::uint64_t h1 = store.values_hash();
  store.at("a.x").values()[0] = 9.0f;
  CHECK(store.values_hash() != h1);
}
