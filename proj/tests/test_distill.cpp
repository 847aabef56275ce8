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
#include <vector>

#include "akd/distill.hpp"
#include "akd/error.hpp"
#include "akd/ops.hpp"
#include "akd/params.hpp"
#include "akd/rng.hpp"
#include "akd/tensor.hpp"
#include "doctest.h"

using namespace akd;

namespace {

Tensor prob_row(float p0) { return Tensor({1, 2}, {p0, 1.0f - p0}); }

std::vector<float> random_floats(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(uniform_range(rng, lo, hi));
  return v;
}

}  // namespace

TEST_CASE("loss_ddsd matches scalar cross-entropy") {
  SUBCASE("uniform prediction costs ln 2") {
    const Tensor l = loss_ddsd<float>({prob_row(0.5f)}, {0});
    CHECK(l.value() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    const Tensor l1 = loss_ddsd<float>({prob_row(0.5f)}, {1});
    CHECK(l1.value() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  }

  SUBCASE("p=[0.2,0.8] with label 1") {
    const Tensor l = loss_ddsd<float>({prob_row(0.2f)}, {1});
    CHECK(l.value() == doctest::Approx(-std::log(0.8)).epsilon(1e-6));
  }

  SUBCASE("perfect prediction costs zero") {
    const Tensor l = loss_ddsd<float>({prob_row(0.0f)}, {1});
    CHECK(l.value() == 0.0f);
  }

  SUBCASE("zero probability at the true class is clamped, not infinite") {
    const Tensor l = loss_ddsd<float>({prob_row(1.0f)}, {1});
    CHECK(std::isfinite(l.value()));
    CHECK(l.value() == doctest::Approx(-std::log(1e-12)).epsilon(1e-4));
  }

  SUBCASE("batch mean") {
    const Tensor l = loss_ddsd<float>({prob_row(0.2f), prob_row(0.6f)}, {1, 0});
    const double want = 0.5 * (-std::log(0.8) - std::log(0.6));
    CHECK(l.value() == doctest::Approx(want).epsilon(1e-6));
  }

  SUBCASE("mismatched batch throws") {
    CHECK_THROWS_AS(loss_ddsd<float>({prob_row(0.5f)}, {0, 1}), ContractError);
    CHECK_THROWS_AS(loss_ddsd<float>({}, {}), ContractError);
  }
}

TEST_CASE("loss_ed matches an independent scalar loop") {
  SUBCASE("identical embeddings cost zero") {
    Rng rng(3);
    const Tensor e({3, 2}, random_floats(6, rng));
    const Tensor l = loss_ed<float>({e}, {e}, {Mask{}});
    CHECK(l.value() == 0.0f);
  }

  SUBCASE("unit offset costs one") {
    const Tensor ones = Tensor::full({4, 3}, 1.0f);
    const Tensor zeros = Tensor::zeros({4, 3});
    const Tensor l = loss_ed<float>({ones}, {zeros}, {Mask{}});
    CHECK(l.value() == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("random batch with masks matches the loop") {
    Rng rng(7);
    const Tensor t1({3, 2}, random_floats(6, rng));
    const Tensor s1({3, 2}, random_floats(6, rng));
    const Tensor t2({5, 2}, random_floats(10, rng));
    const Tensor s2({5, 2}, random_floats(10, rng));
    const Mask m1{1, 1, 0};
    const Mask m2{1, 1, 1, 1, 0};

    double ssq = 0.0;
    long frames = 0;
    auto accum = [&](const Tensor& a, const Tensor& b, const Mask& m) {
      for (int t = 0; t < a.dim(0); ++t) {
        if (!m[static_cast<std::size_t>(t)]) continue;
        ++frames;
        for (int j = 0; j < 2; ++j) {
          const double d = static_cast<double>(a.values()[static_cast<std::size_t>(t) * 2 + j]) -
                           b.values()[static_cast<std::size_t>(t) * 2 + j];
          ssq += d * d;
        }
      }
    };
    accum(t1, s1, m1);
    accum(t2, s2, m2);

    const Tensor l = loss_ed<float>({t1, t2}, {s1, s2}, {m1, m2});
    CHECK(l.value() == doctest::Approx(ssq / (static_cast<double>(frames) * 2.0)).epsilon(1e-5));
  }

  SUBCASE("frame or width mismatch raises an alignment error") {
    const Tensor a = Tensor::zeros({3, 2});
    const Tensor b = Tensor::zeros({4, 2});
    const Tensor c = Tensor::zeros({3, 5});
    CHECK_THROWS_AS(loss_ed<float>({a}, {b}, {Mask{}}), AlignmentError);
    CHECK_THROWS_AS(loss_ed<float>({a}, {c}, {Mask{}}), AlignmentError);
  }

  SUBCASE("teacher embeddings on a tape are rejected") {
    FloatTape tape;
    Variable v("t", {2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    const Tensor live = v.use(tape);
    const Tensor detached = Tensor::zeros({2, 2});
    CHECK_THROWS_AS(loss_ed<float>({live}, {detached}, {Mask{}}), ContractError);
    // The student side may be live, of course.
    CHECK_NOTHROW(loss_ed<float>({detached}, {live}, {Mask{}}));
  }
}

TEST_CASE("loss_pl uses hard argmax pseudo-labels with tie toward class 0") {
  SUBCASE("teacher [0.9,0.1], student [0.8,0.2]") {
    const Tensor l = loss_pl<float>({prob_row(0.8f)}, {prob_row(0.9f)});
    CHECK(l.value() == doctest::Approx(-std::log(0.8)).epsilon(1e-6));
  }

  SUBCASE("student matching the pseudo-label costs zero") {
    const Tensor l = loss_pl<float>({prob_row(1.0f)}, {prob_row(0.7f)});
    CHECK(l.value() == 0.0f);
  }

  SUBCASE("tie resolves to class 0") {
    const Tensor l = loss_pl<float>({prob_row(0.6f)}, {prob_row(0.5f)});
    CHECK(l.value() == doctest::Approx(-std::log(0.6)).epsilon(1e-6));
  }

  SUBCASE("teacher probabilities on a tape are rejected") {
    FloatTape tape;
    Variable v("t", {1, 2}, {0.9f, 0.1f});
    CHECK_THROWS_AS(loss_pl<float>({prob_row(0.8f)}, {v.use(tape)}), ContractError);
  }

  SUBCASE("batch mean over pseudo-labels") {
    const Tensor l = loss_pl<float>({prob_row(0.8f), prob_row(0.3f)},
                                    {prob_row(0.9f), prob_row(0.2f)});
    const double want = 0.5 * (-std::log(0.8) - std::log(0.7));
    CHECK(l.value() == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("loss_ar matches the summed squared attention gap") {
  SUBCASE("identical attention costs zero") {
    const Tensor a({3}, {0.2f, 0.5f, 0.3f});
    const Tensor l = loss_ar<float>({a}, {a}, {Mask{}});
    CHECK(l.value() == 0.0f);
  }

  SUBCASE("[1,0] vs [0.5,0.5] costs 0.5") {
    const Tensor at({2}, {1.0f, 0.0f});
    const Tensor as({2}, {0.5f, 0.5f});
    const Tensor l = loss_ar<float>({at}, {as}, {Mask{}});
    CHECK(l.value() == doctest::Approx(0.5).epsilon(1e-6));
  }

  SUBCASE("uniform vs uniform costs zero") {
    const Tensor u({4}, {0.25f, 0.25f, 0.25f, 0.25f});
    const Tensor l = loss_ar<float>({u}, {u}, {Mask{}});
    CHECK(l.value() == 0.0f);
  }

  SUBCASE("mean over the batch, masked frames excluded") {
    const Tensor at1({2}, {1.0f, 0.0f});
    const Tensor as1({2}, {0.5f, 0.5f});
    const Tensor at2({3}, {0.6f, 0.4f, 9.0f});  // masked tail should not count
    const Tensor as2({3}, {0.4f, 0.6f, -9.0f});
    const Tensor l = loss_ar<float>({at1, at2}, {as1, as2}, {Mask{}, Mask{1, 1, 0}});
    const double want = 0.5 * (0.5 + (0.04 + 0.04));
    CHECK(l.value() == doctest::Approx(want).epsilon(1e-5));
  }

  SUBCASE("length mismatch raises an alignment error") {
    const Tensor a({2}, {0.5f, 0.5f});
    const Tensor b({3}, {0.3f, 0.3f, 0.4f});
    CHECK_THROWS_AS(loss_ar<float>({a}, {b}, {Mask{}}), AlignmentError);
  }

  SUBCASE("teacher attention on a tape is rejected") {
    FloatTape tape;
    Variable v("t", {2}, {0.5f, 0.5f});
    const Tensor s({2}, {0.5f, 0.5f});
    CHECK_THROWS_AS(loss_ar<float>({v.use(tape)}, {s}, {Mask{}}), ContractError);
  }
}

TEST_CASE("all losses are nonnegative on random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int t = uniform_int(rng, 1, 6);
    const int h = uniform_int(rng, 1, 4);

    const Tensor et({t, h}, random_floats(static_cast<std::size_t>(t) * h, rng));
    const Tensor es({t, h}, random_floats(static_cast<std::size_t>(t) * h, rng));
    CHECK(loss_ed<float>({et}, {es}, {Mask{}}).value() >= 0.0f);

    const Tensor at({t}, random_floats(static_cast<std::size_t>(t), rng, 0.0, 1.0));
    const Tensor as({t}, random_floats(static_cast<std::size_t>(t), rng, 0.0, 1.0));
    CHECK(loss_ar<float>({at}, {as}, {Mask{}}).value() >= 0.0f);

    const float q = static_cast<float>(uniform_range(rng, 0.0, 1.0));
    const float r = static_cast<float>(uniform_range(rng, 0.0, 1.0));
    CHECK(loss_ddsd<float>({prob_row(q)}, {uniform_int(rng, 0, 1)}).value() >= 0.0f);
    CHECK(loss_pl<float>({prob_row(q)}, {prob_row(r)}).value() >= 0.0f);
  }
}

TEST_CASE("alignment projection") {
  SUBCASE("identity when widths match") {
    ParamStore store;
    AlignProjection align(4, 4, "align", store, nullptr);
    CHECK(align.is_identity());
    CHECK(store.size() == 0);
    Rng rng(5);
    const Tensor e({3, 4}, random_floats(12, rng));
    const Tensor out = align.apply(nullptr, e);
    CHECK(out.values() == e.values());
  }

  SUBCASE("trainable projection when widths differ") {
    ParamStore store;
    Rng rng(7);
    AlignProjection align(3, 5, "align", store, &rng);
    CHECK(!align.is_identity());
    REQUIRE(store.find("align.w") != nullptr);
    CHECK(store.at("align.w").shape() == Shape{3, 5});

    Rng drng(9);
    const Tensor e({2, 3}, random_floats(6, drng));
    const Tensor out = align.apply(nullptr, e);
    REQUIRE(out.shape() == Shape{2, 5});

    // Matches a scalar matmul against the stored weights.
    const auto& w = store.at("align.w").values();
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 5; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) {
          s += static_cast<double>(e.values()[static_cast<std::size_t>(i) * 3 + k]) *
               w[static_cast<std::size_t>(k) * 5 + j];
        }
        CHECK(out.values()[static_cast<std::size_t>(i) * 5 + j] ==
              doctest::Approx(s).epsilon(1e-5));
      }
    }

    CHECK_THROWS_AS(align.apply(nullptr, Tensor::zeros({2, 4})), DimensionError);
  }

  SUBCASE("gradients reach the projection through loss_ed") {
    ParamStoreT<double> store;
    Rng rng(13);
    AlignProjectionT<double> align(2, 3, "align", store, &rng);
    Tape<double> tape;
    const TensorT<double> es({2, 2}, {0.5, -0.25, 1.0, 0.75});
    const TensorT<double> et = TensorT<double>::zeros({2, 3});
    const TensorT<double> l = loss_ed<double>({et}, {align.apply(&tape, es)}, {Mask{}});
    store.at("align.w").zero_grad();
    tape.backward(l);
    double g = 0.0;
    for (double x : store.at("align.w").grad()) g += std::abs(x);
    CHECK(g > 0.0);
  }
}

TEST_CASE("combine honors the selector table") {
  FloatTape tape;
  Variable vd("d", {1}, {0.7f});
  Variable ve("e", {1}, {0.3f});
  Variable vp("p", {1}, {0.2f});
  Variable va("a", {1}, {0.1f});

  SUBCASE("paper default weights") {
    DistillWeights w;
    w.use_ddsd = true;
    w.lambda_ed = 100.0f;
    w.use_pl = true;
    w.lambda_pl = 1.0f;
    w.lambda_ar = 1.0f;
    const auto b =
        combine<float>(vd.use(tape), ve.use(tape), vp.use(tape), va.use(tape), w);
    CHECK(b.total.value() == doctest::Approx(0.7 + 100.0 * 0.3 + 0.2 + 0.1).epsilon(1e-5));
    CHECK(b.ddsd.defined());
    CHECK(b.ed.defined());
    CHECK(b.pl.defined());
    CHECK(b.ar.defined());
  }

  SUBCASE("baseline reduction passes the ddsd tensor through untouched") {
    DistillWeights w;  // all lambdas zero, use_pl false, use_ddsd true
    const Tensor d = vd.use(tape);
    const std::size_t nodes_before = tape.size();
    const auto b = combine<float>(d, Tensor(), Tensor(), Tensor(), w);
    CHECK(tape.size() == nodes_before);  // no new graph nodes at all
    CHECK(b.total.node() == d.node());
    CHECK(b.total.value() == 0.7f);
    CHECK(!b.ed.defined());
    CHECK(!b.pl.defined());
    CHECK(!b.ar.defined());
  }

  SUBCASE("pseudo-label row excludes the ground-truth term") {
    DistillWeights w;
    w.use_ddsd = false;
    w.use_pl = true;
    w.lambda_pl = 1.0f;
    w.lambda_ed = 100.0f;
    w.lambda_ar = 1.0f;
    const auto b = combine<float>(Tensor(), ve.use(tape), vp.use(tape), va.use(tape), w);
    CHECK(b.total.value() == doctest::Approx(100.0 * 0.3 + 0.2 + 0.1).epsilon(1e-5));
    CHECK(!b.ddsd.defined());
  }

  SUBCASE("degenerate objective is rejected") {
    DistillWeights w;
    w.use_ddsd = false;
    CHECK_THROWS_AS(combine<float>(Tensor(), Tensor(), Tensor(), Tensor(), w), ConfigError);
    // use_pl alone does not enable the term when its weight is zero.
    w.use_pl = true;
    w.lambda_pl = 0.0f;
    CHECK_THROWS_AS(combine<float>(Tensor(), Tensor(), vp.use(tape), Tensor(), w), ConfigError);
  }

  SUBCASE("negative weights are rejected") {
    DistillWeights w;
    w.lambda_ed = -1.0f;
    CHECK_THROWS_AS(combine<float>(vd.use(tape), ve.use(tape), Tensor(), Tensor(), w),
                    ConfigError);
  }

  SUBCASE("enabled term without a computed tensor is a contract error") {
    DistillWeights w;
    w.lambda_ed = 1.0f;
    CHECK_THROWS_AS(combine<float>(vd.use(tape), Tensor(), Tensor(), Tensor(), w),
                    ContractError);
  }

  SUBCASE("disabled-but-computed terms are ignored") {
    DistillWeights w;  // baseline: only ddsd
    const auto b = combine<float>(vd.use(tape), ve.use(tape), vp.use(tape), va.use(tape), w);
    CHECK(b.total.value() == 0.7f);
    CHECK(!b.ed.defined());
  }
}

TEST_CASE("stop-gradient: teacher parameters receive exactly zero gradient") {
  // Teacher-side values enter every loss as detached constants; after the
  // student backward pass the teacher variables' grads remain untouched.
  ParamStoreT<double> store;
  Rng rng(17);

  Variable teacher_like("teacher.e", {3, 2}, {0.1f, 0.2f, 0.3f, 0.4f, 0.5f, 0.6f});

  Tape<double> tape;
  VariableT<double> se("student.e", {3, 2}, std::vector<double>{0.5, -0.5, 0.25, 0.1, 0.0, 0.9});
  VariableT<double> slog("student.logits", {1, 2}, std::vector<double>{0.3, -0.2});
  VariableT<double> sa("student.scores", {3}, std::vector<double>{0.1, 0.4, -0.3});

  const TensorT<double> et({3, 2}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});  // detached by construction
  const TensorT<double> pt({1, 2}, {0.8, 0.2});
  const TensorT<double> at({3}, {0.6, 0.3, 0.1});

  const TensorT<double> ps = softmax_rows(slog.use(tape), Mask{});
  const TensorT<double> as = masked_softmax(sa.use(tape), Mask{});

  const TensorT<double> ed = loss_ed<double>({et}, {se.use(tape)}, {Mask{}});
  const TensorT<double> pl = loss_pl<double>({ps}, {pt});
  const TensorT<double> ar = loss_ar<double>({at}, {as}, {Mask{}});
  const TensorT<double> dd = loss_ddsd<double>({ps}, {1});

  DistillWeights w;
  w.use_ddsd = true;
  w.lambda_ed = 100.0f;
  w.use_pl = true;
  w.lambda_pl = 1.0f;
  w.lambda_ar = 1.0f;
  const auto b = combine<double>(dd, ed, pl, ar, w);

  se.zero_grad();
  slog.zero_grad();
  sa.zero_grad();
  tape.backward(b.total);

  double gs = 0.0;
  for (double g : se.grad()) gs += std::abs(g);
  for (double g : slog.grad()) gs += std::abs(g);
  for (double g : sa.grad()) gs += std::abs(g);
  CHECK(gs > 0.0);  // student side received gradient
  CHECK(!teacher_like.grad_ready());  // teacher side never touched
}

TEST_CASE("distillation losses pass finite-difference checks") {
  Rng rng(23);
  const int t = 4, hs = 3, ht = 5;

  ParamStoreT<double> store;
  AlignProjectionT<double> align(hs, ht, "align", store, &rng);

  std::vector<double> sev(static_cast<std::size_t>(t) * hs);
  for (double& x : sev) x = uniform_range(rng, -1.0, 1.0);
  VariableT<double> se("se", {t, hs}, sev);
  VariableT<double> slog("slog", {1, 2}, std::vector<double>{0.4, -0.3});
  VariableT<double> sa("sa", {t}, std::vector<double>{0.2, -0.1, 0.5, 0.3});

  std::vector<double> etv(static_cast<std::size_t>(t) * ht);
  for (double& x : etv) x = uniform_range(rng, -1.0, 1.0);
  const TensorT<double> et({t, ht}, etv);
  const TensorT<double> pt({1, 2}, {0.3, 0.7});
  const TensorT<double> at({t}, {0.4, 0.3, 0.2, 0.1});
  const Mask mask{1, 1, 1, 0};

  DistillWeights w;
  w.use_ddsd = true;
  w.lambda_ed = 10.0f;
  w.use_pl = true;
  w.lambda_pl = 2.0f;
  w.lambda_ar = 3.0f;

  auto loss_value = [&](Tape<double>* tape) {
    TensorT<double> se_t = tape ? se.use(*tape) : se.constant();
    TensorT<double> slog_t = tape ? slog.use(*tape) : slog.constant();
    TensorT<double> sa_t = tape ? sa.use(*tape) : sa.constant();
    const TensorT<double> ps = softmax_rows(slog_t, Mask{});
    const TensorT<double> as = masked_softmax(sa_t, mask);
    const TensorT<double> ed = loss_ed<double>({et}, {align.apply(tape, se_t)}, {mask});
    const TensorT<double> pl = loss_pl<double>({ps}, {pt});
    const TensorT<double> ar = loss_ar<double>({at}, {as}, {mask});
    const TensorT<double> dd = loss_ddsd<double>({ps}, {1});
    return combine<double>(dd, ed, pl, ar, w).total;
  };

  Tape<double> tape;
  const TensorT<double> loss = loss_value(&tape);
  std::vector<VariableT<double>*> vars = {&se, &slog, &sa, &store.at("align.w")};
  for (auto* v : vars) v->zero_grad();
  tape.backward(loss);

  const double h = 1e-5;
  for (auto* v : vars) {
    double max_fd = 0.0, max_an = 0.0, max_diff = 0.0;
    for (std::size_t j = 0; j < v->numel(); ++j) {
      const double keep = v->values()[j];
      v->values()[j] = keep + h;
      const double up = loss_value(nullptr).value();
      v->values()[j] = keep - h;
      const double down = loss_value(nullptr).value();
      v->values()[j] = keep;
      const double fd = (up - down) / (2.0 * h);
      max_fd = std::max(max_fd, std::abs(fd));
      max_an = std::max(max_an, std::abs(v->grad()[j]));
      max_diff = std::max(max_diff, std::abs(fd - v->grad()[j]));
    }
    CAPTURE(v->name());
    CHECK(max_diff / std::max({max_fd, max_an, 1e-8}) < 1e-3);
  }
}
