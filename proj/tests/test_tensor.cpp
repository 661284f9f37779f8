// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sgad/errors.hpp"
#include "sgad/optim.hpp"
#include "sgad/tensor.hpp"
#include "testutil.hpp"

using namespace sgad;
using sgad::testutil::check_gradients;

TEST_CASE("matmul: identity and hand arithmetic") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor x = Tensor::from_data({2, 2}, {3, -1, 2, 5});
  Tensor y = matmul(eye, x);
  CHECK(std::vector<double>(y.data().begin(), y.data().end()) ==
        std::vector<double>{3, -1, 2, 5});

  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({2, 1}, {0, 1});
  Tensor c = matmul(a, b);
  CHECK(c.at({0, 0}) == 2);
  CHECK(c.at({1, 0}) == 4);
}

TEST_CASE("matmul: shape mismatch") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("matmul: gradient matches finite differences") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
    Tensor b = Tensor::randn({4, 2}, rng, 1.0, true);
    auto res = check_gradients([&] { return sum(matmul(a, b)); },
                               {{"a", a}, {"b", b}});
    REQUIRE(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("masked_softmax: uniform logits give uniform weights") {
  Tensor logits = Tensor::constant({1, 4}, 0.7);
  Tensor probs = masked_softmax(logits, nullptr);
  for (int j = 0; j < 4; ++j) CHECK(probs.at({0, 1}) == doctest::Approx(0.25));
}

TEST_CASE("masked_softmax: single allowed key takes all weight") {
  AttentionMask mask = all_zero_mask(1, 3, MaskKind::SgCross);
  mask.entries = {0.0, kNegInf, kNegInf};
  Tensor logits = Tensor::from_data({1, 3}, {0.3, 5.0, -2.0});
  Tensor probs = masked_softmax(logits, mask);
  CHECK(probs.at({0, 0}) == 1.0);
  CHECK(probs.at({0, 1}) == 0.0);
  CHECK(probs.at({0, 2}) == 0.0);
}

TEST_CASE("masked_softmax: rows sum to one") {
  Rng rng(3);
  Tensor logits = Tensor::randn({5, 7}, rng, 2.0);
  Tensor probs = masked_softmax(logits, nullptr);
  for (int i = 0; i < 5; ++i) {
    double s = 0.0;
    for (int j = 0; j < 7; ++j) s += probs.at({i, j});
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("masked_softmax: fully masked row is rejected") {
  AttentionMask mask = all_zero_mask(2, 2, MaskKind::SgCross);
  mask.entries = {0.0, 0.0, kNegInf, kNegInf};
  Tensor logits = Tensor::zeros({2, 2});
  try {
    masked_softmax(logits, mask);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FullyMaskedRow);
  }
}

TEST_CASE("masked_softmax: gradient matches finite differences") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor logits = Tensor::randn({3, 5}, rng, 1.5, true);
    Tensor weights = Tensor::randn({3, 5}, rng, 1.0);
    AttentionMask mask = all_zero_mask(3, 5, MaskKind::Causal);
    // random mask with at least one allowed entry per row
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 5; ++j)
        if (rng.uniform() < 0.4) mask.entries[i * 5 + j] = kNegInf;
      mask.entries[i * 5 + rng.uniform_int(0, 4)] = 0.0;
    }
    auto res = check_gradients(
        [&] { return sum(mul(masked_softmax(logits, mask), weights)); },
        {{"logits", logits}});
    REQUIRE(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("attention: single key returns the value row regardless of query") {
  Rng rng(7);
  Tensor q = Tensor::randn({4, 3}, rng);
  Tensor k = Tensor::randn({1, 3}, rng);
  Tensor v = Tensor::randn({1, 3}, rng);
  Tensor out = attention(q, k, v, nullptr);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(out.at({i, j}) == v.at({0, j}));
}

TEST_CASE("attention: saturates to value rows for large matched q=k") {
  // Orthogonal rows scaled hard: softmax picks the matching key.
  double s = 60.0;
  Tensor q = Tensor::from_data({2, 2}, {s, 0, 0, s});
  Tensor k = Tensor::from_data({2, 2}, {s, 0, 0, s});
  Tensor v = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor out = attention(q, k, v, nullptr);
  CHECK(out.at({0, 0}) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(out.at({0, 1}) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(out.at({1, 0}) == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(out.at({1, 1}) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("attention: masked key column has zero influence") {
  Rng rng(9);
  Tensor q = Tensor::randn({3, 4}, rng);
  Tensor k = Tensor::randn({5, 4}, rng);
  std::vector<double> vdata(5 * 4);
  for (auto& x : vdata) x = rng.normal();
  AttentionMask mask = all_zero_mask(3, 5, MaskKind::SgCross);
  for (int i = 0; i < 3; ++i) mask.entries[i * 5 + 2] = kNegInf;  // column 2 masked

  Tensor v1 = Tensor::from_data({5, 4}, vdata);
  Tensor out1 = attention(q, k, v1, mask);
  for (int j = 0; j < 4; ++j) vdata[2 * 4 + j] += 1000.0;  // perturb masked row
  Tensor v2 = Tensor::from_data({5, 4}, vdata);
  Tensor out2 = attention(q, k, v2, mask);
  CHECK(std::equal(out1.data().begin(), out1.data().end(), out2.data().begin()));
}

TEST_CASE("attention: all-zero mask is bitwise identical to no mask") {
  Rng rng(13);
  Tensor q = Tensor::randn({4, 6}, rng);
  Tensor k = Tensor::randn({5, 6}, rng);
  Tensor v = Tensor::randn({5, 6}, rng);
  AttentionMask zero = all_zero_mask(4, 5, MaskKind::Causal);
  Tensor a = attention(q, k, v, &zero);
  Tensor b = attention(q, k, v, nullptr);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST_CASE("attention: gradient matches finite differences") {
  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor q = Tensor::randn({3, 4}, rng, 1.0, true);
    Tensor k = Tensor::randn({4, 4}, rng, 1.0, true);
    Tensor v = Tensor::randn({4, 4}, rng, 1.0, true);
    AttentionMask mask = build_causal_mask(3);
    AttentionMask wide = all_zero_mask(3, 4, MaskKind::Causal);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) wide.entries[i * 4 + j] = (j <= i) ? 0.0 : kNegInf;
    auto res = check_gradients([&] { return sum(attention(q, k, v, &wide)); },
                               {{"q", q}, {"k", k}, {"v", v}});
    REQUIRE(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("layer_norm: per-row mean 0 and variance 1 under unit gain") {
  Rng rng(17);
  Tensor x = Tensor::randn({6, 16}, rng, 3.0);
  Tensor gain = Tensor::constant({16}, 1.0);
  Tensor bias = Tensor::zeros({16});
  Tensor y = layer_norm(x, gain, bias);
  for (int i = 0; i < 6; ++i) {
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < 16; ++j) mean += y.at({i, j});
    mean /= 16;
    for (int j = 0; j < 16; ++j) var += (y.at({i, j}) - mean) * (y.at({i, j}) - mean);
    var /= 16;
    CHECK(std::fabs(mean) < 1e-9);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("layer_norm: gradient matches finite differences") {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = Tensor::randn({3, 6}, rng, 2.0, true);
    Tensor gain = Tensor::randn({6}, rng, 1.0, true);
    Tensor bias = Tensor::randn({6}, rng, 1.0, true);
    Tensor probe = Tensor::randn({3, 6}, rng);
    auto res = check_gradients(
        [&] { return sum(mul(layer_norm(x, gain, bias), probe)); },
        {{"x", x}, {"gain", gain}, {"bias", bias}});
    REQUIRE(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("gelu/linear/elementwise gradients") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = Tensor::randn({4, 3}, rng, 1.0, true);
    Tensor w = Tensor::randn({3, 5}, rng, 1.0, true);
    Tensor b = Tensor::randn({5}, rng, 1.0, true);
    auto res = check_gradients([&] { return sum(gelu(linear(x, w, b))); },
                               {{"x", x}, {"w", w}, {"b", b}});
    REQUIRE(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("mse: zero at equality with zero gradient") {
  Rng rng(23);
  Tensor x = Tensor::randn({3, 3}, rng, 1.0, true);
  Tensor y = Tensor::from_data({3, 3},
                               std::vector<double>(x.data().begin(), x.data().end()));
  Tensor loss = mse(x, y);
  CHECK(loss.item() == 0.0);
  loss.backward();
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("mse and sum_sq_diff gradients") {
  Rng rng(25);
  Tensor a = Tensor::randn({2, 4}, rng, 1.0, true);
  Tensor b = Tensor::randn({2, 4}, rng, 1.0, true);
  auto res = check_gradients([&] { return mse(a, b); }, {{"a", a}, {"b", b}});
  REQUIRE(res.max_rel_err < 1e-4);
  auto res2 = check_gradients([&] { return sum_sq_diff(a, b); }, {{"a", a}, {"b", b}});
  REQUIRE(res2.max_rel_err < 1e-4);
}

TEST_CASE("slice/concat/gather/scatter gradients") {
  Rng rng(27);
  Tensor x = Tensor::randn({4, 6}, rng, 1.0, true);
  Tensor y = Tensor::randn({4, 2}, rng, 1.0, true);
  Tensor rows = Tensor::randn({2, 6}, rng, 1.0, true);
  Tensor probe = Tensor::randn({4, 8}, rng);
  auto res = check_gradients(
      [&] {
        Tensor c = concat_cols({slice_cols(x, 1, 4), slice_cols(x, 0, 2), y});
        return sum(mul(c, probe));
      },
      {{"x", x}, {"y", y}});
  REQUIRE(res.max_rel_err < 1e-4);

  Tensor probe2 = Tensor::randn({4, 6}, rng);
  auto res2 = check_gradients(
      [&] {
        Tensor s = scatter_rows(x, rows, {1, 3});
        Tensor g = gather_rows(s, {0, 1, 2, 3});
        return sum(mul(g, probe2));
      },
      {{"x", x}, {"rows", rows}});
  REQUIRE(res2.max_rel_err < 1e-4);

  // scatter semantics
  Tensor s = scatter_rows(x, rows, {1, 3});
  for (int j = 0; j < 6; ++j) {
    CHECK(s.at({0, j}) == x.at({0, j}));
    CHECK(s.at({1, j}) == rows.at({0, j}));
    CHECK(s.at({2, j}) == x.at({2, j}));
    CHECK(s.at({3, j}) == rows.at({1, j}));
  }
}

TEST_CASE("conv2d: known 1x1 kernel behaves as channel mix") {
  Tensor x = Tensor::from_data({2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
  Tensor w = Tensor::from_data({1, 2, 1, 1}, {2.0, 0.5});
  Tensor out = conv2d(x, w, {}, 1, 0);
  CHECK(out.at({0, 0, 0}) == 2 * 1 + 0.5 * 10);
  CHECK(out.at({0, 1, 1}) == 2 * 4 + 0.5 * 40);
}

TEST_CASE("conv2d: stride-2 output size and gradient") {
  Rng rng(29);
  Tensor x = Tensor::randn({2, 6, 6}, rng, 1.0, true);
  Tensor w = Tensor::randn({3, 2, 3, 3}, rng, 0.5, true);
  Tensor b = Tensor::randn({3}, rng, 0.5, true);
  Tensor out = conv2d(x, w, b, 2, 1);
  CHECK(out.shape() == std::vector<int>{3, 3, 3});
  auto res = check_gradients([&] { return sum(conv2d(x, w, b, 2, 1)); },
                             {{"x", x}, {"w", w}, {"b", b}});
  REQUIRE(res.max_rel_err < 1e-4);
}

TEST_CASE("upsample_nearest2x and add_channel_bias gradients") {
  Rng rng(31);
  Tensor x = Tensor::randn({2, 3, 3}, rng, 1.0, true);
  Tensor t = Tensor::randn({2}, rng, 1.0, true);
  Tensor probe = Tensor::randn({2, 6, 6}, rng);
  auto res = check_gradients(
      [&] {
        Tensor u = upsample_nearest2x(add_channel_bias(x, t));
        return sum(mul(reshape(u, {2, 36}),
                       reshape(probe, {2, 36})));
      },
      {{"x", x}, {"t", t}});
  REQUIRE(res.max_rel_err < 1e-4);
  Tensor u = upsample_nearest2x(x);
  CHECK(u.at({1, 4, 5}) == x.at({1, 2, 2}));
}

TEST_CASE("full 2-layer toy network: every parameter passes the fd oracle") {
  Rng rng(33);
  Tensor x = Tensor::randn({5, 4}, rng);
  Tensor target = Tensor::randn({5, 2}, rng);
  Tensor w1 = Tensor::randn({4, 8}, rng, 0.5, true);
  Tensor b1 = Tensor::randn({8}, rng, 0.1, true);
  Tensor g1 = Tensor::constant({8}, 1.0);
  g1.set_requires_grad(true);
  Tensor n1 = Tensor::zeros({8}, true);
  Tensor w2 = Tensor::randn({8, 2}, rng, 0.5, true);
  Tensor b2 = Tensor::randn({2}, rng, 0.1, true);
  auto res = check_gradients(
      [&] {
        Tensor h = gelu(layer_norm(linear(x, w1, b1), g1, n1));
        return mse(linear(h, w2, b2), target);
      },
      {{"w1", w1}, {"b1", b1}, {"g1", g1}, {"n1", n1}, {"w2", w2}, {"b2", b2}});
  REQUIRE(res.max_rel_err < 1e-4);
}

TEST_CASE("backward on non-scalar throws") {
  Tensor x = Tensor::zeros({2, 2}, true);
  try {
    add(x, x).backward();
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BackwardOnNonScalar);
  }
}

TEST_CASE("determinism: same seed gives bit-identical forward and backward") {
  auto run = [] {
    Rng rng(99);
    Tensor x = Tensor::randn({6, 6}, rng, 1.0, true);
    Tensor w = Tensor::randn({6, 6}, rng, 1.0, true);
    Tensor loss = sum(gelu(matmul(x, w)));
    loss.backward();
    std::vector<double> out(x.grad().begin(), x.grad().end());
    out.push_back(loss.item());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("no-grad mode skips graph construction") {
  Rng rng(41);
  Tensor x = Tensor::randn({2, 2}, rng, 1.0, true);
  NoGradGuard guard;
  Tensor y = matmul(x, x);
  CHECK(!y.requires_grad());
}

TEST_CASE("adamw: converges on a quadratic and honors trainable flags") {
  Tensor p = Tensor::from_data({2}, {5.0, -3.0}, true);
  Tensor frozen = Tensor::from_data({2}, {1.0, 1.0});
  ParamSet params;
  params.add("p", p);
  params.add("frozen", frozen);
  AdamW opt({.lr = 0.2, .weight_decay = 0.0});
  for (int step = 0; step < 400; ++step) {
    params.zero_grad();
    Tensor loss = sum_sq_diff(p, Tensor::zeros({2}));
    loss.backward();
    opt.step(params);
  }
  CHECK(std::fabs(p.data()[0]) < 1e-2);
  CHECK(std::fabs(p.data()[1]) < 1e-2);
  CHECK(frozen.data()[0] == 1.0);
  CHECK(opt.step_count() == 400);
}

TEST_CASE("paramset: duplicate names rejected") {
  ParamSet params;
  params.add("a", Tensor::zeros({1}));
  CHECK_THROWS_AS(params.add("a", Tensor::zeros({1})), Error);
}
