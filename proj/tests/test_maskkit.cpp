// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "sgad/errors.hpp"
#include "sgad/maskkit.hpp"
#include "sgad/rng.hpp"
#include "sgad/sgtext.hpp"
#include "sgad/tensor.hpp"

using namespace sgad;

namespace {

TokenTripletMap boy_girl_map() {
  Caption c = tokenize(
      "a boy holding a bottle shakes hands with a girl sitting on a bench");
  auto [sg, map] = parse_caption(c, RelationLexicon::defaults());
  return map;
}

// All membership assignments for n tokens over k triplets (each token gets an
// arbitrary subset).
void for_each_map(int n, int k, const std::function<void(const TokenTripletMap&)>& fn) {
  const int subsets = 1 << k;
  std::vector<int> choice(n, 0);
  while (true) {
    TokenTripletMap map;
    map.membership.resize(n);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < k; ++t)
        if (choice[i] & (1 << t)) map.membership[i].push_back(t);
    fn(map);
    int pos = 0;
    while (pos < n && ++choice[pos] == subsets) choice[pos++] = 0;
    if (pos == n) break;
  }
}

}  // namespace

TEST_CASE("causal mask: n=3 matches the definition") {
  AttentionMask m = build_causal_mask(3);
  const double I = kNegInf;
  std::vector<double> want = {0, I, I, 0, 0, I, 0, 0, 0};
  CHECK(m.entries == want);
}

TEST_CASE("causal mask: n=1") {
  AttentionMask m = build_causal_mask(1);
  CHECK(m.entries == std::vector<double>{0.0});
}

TEST_CASE("causal mask: n=14 allows n(n+1)/2 entries") {
  AttentionMask m = build_causal_mask(14);
  int zeros = 0;
  for (double v : m.entries)
    if (v == 0.0) ++zeros;
  CHECK(zeros == 105);
}

TEST_CASE("causal mask: n=0 is invalid") {
  try {
    build_causal_mask(0);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSize);
  }
}

TEST_CASE("triplet-aligned mask: two disjoint triplets are block diagonal") {
  TokenTripletMap map;
  map.membership.resize(11);
  for (int i = 0; i <= 4; ++i) map.membership[i] = {0};
  for (int i = 6; i <= 10; ++i) map.membership[i] = {1};
  AttentionMask m = build_triplet_aligned_mask(map);
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      bool same_block = (i <= 4 && j <= 4) || (i >= 6 && j >= 6);
      bool want = (i == 5 || j == 5) ? (i == j) : same_block;
      CHECK(m.allowed(i, j) == want);
    }
  }
  // row 5 has exactly one allowed entry, (5,5)
  int allowed5 = 0;
  for (int j = 0; j < 11; ++j)
    if (m.allowed(5, j)) ++allowed5;
  CHECK(allowed5 == 1);
  CHECK(m.allowed(5, 5));
}

TEST_CASE("triplet-aligned mask: one triplet covering all tokens is all zero") {
  TokenTripletMap map;
  map.membership.assign(5, {0});
  AttentionMask m = build_triplet_aligned_mask(map);
  for (double v : m.entries) CHECK(v == 0.0);
}

TEST_CASE("triplet-aligned mask: boy/girl example pairs") {
  AttentionMask m = build_triplet_aligned_mask(boy_girl_map());
  CHECK(m.allowed(1, 9));    // boy and girl share triplet 1
  CHECK(!m.allowed(4, 13));  // bottle and bench share nothing
}

TEST_CASE("sg cross mask: annotation example rows") {
  AttentionMask m = build_sg_cross_mask(boy_girl_map(), 3);
  REQUIRE(m.rows == 14);
  REQUIRE(m.cols == 3);
  CHECK(m.allowed(1, 0));
  CHECK(m.allowed(1, 1));
  CHECK(!m.allowed(1, 2));
  CHECK(!m.allowed(13, 0));
  CHECK(!m.allowed(13, 1));
  CHECK(m.allowed(13, 2));
  CHECK(m.empty_rows.empty());
}

TEST_CASE("sg cross mask: single triplet covering all tokens") {
  TokenTripletMap map;
  map.membership.assign(7, {0});
  AttentionMask m = build_sg_cross_mask(map, 1);
  for (double v : m.entries) CHECK(v == 0.0);
  CHECK(m.empty_rows.empty());
}

TEST_CASE("sg cross mask: and-token row is fully masked and reported") {
  Caption c = tokenize("a man holding a cake and a woman holding an apple");
  auto [sg, map] = parse_caption(c, RelationLexicon::defaults());
  AttentionMask m = build_sg_cross_mask(map, sg.size());
  REQUIRE(m.empty_rows == std::vector<int>{5});
  for (int j = 0; j < m.cols; ++j) CHECK(!m.allowed(5, j));
}

TEST_CASE("sg cross mask: triplet index out of range") {
  TokenTripletMap map;
  map.membership = {{0}, {2}};
  try {
    build_sg_cross_mask(map, 2);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TripletIndexOutOfRange);
  }
}

TEST_CASE("masks are deterministic") {
  TokenTripletMap map = boy_girl_map();
  AttentionMask a = build_sg_cross_mask(map, 3);
  AttentionMask b = build_sg_cross_mask(map, 3);
  CHECK(a.entries == b.entries);
  CHECK(a.empty_rows == b.empty_rows);
  AttentionMask c1 = build_triplet_aligned_mask(map);
  AttentionMask c2 = build_triplet_aligned_mask(map);
  CHECK(c1.entries == c2.entries);
}

TEST_CASE("exhaustive fidelity for n<=4, k<=3") {
  // The acceptance suite extends this to n <= 6; here a smaller bound keeps
  // the unit run fast.
  for (int n = 1; n <= 4; ++n) {
    for (int k = 1; k <= 3; ++k) {
      for_each_map(n, k, [&](const TokenTripletMap& map) {
        AttentionMask sg = build_sg_cross_mask(map, k);
        for (int i = 0; i < n; ++i)
          for (int t = 0; t < k; ++t)
            REQUIRE(sg.allowed(i, t) == map.contains(i, t));
        AttentionMask ta = build_triplet_aligned_mask(map);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            REQUIRE(ta.allowed(i, j) == (i == j || map.intersects(i, j)));
      });
    }
  }
}

TEST_CASE("permutation equivariance of the sg cross mask") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(2, 10);
    const int k = rng.uniform_int(1, 4);
    TokenTripletMap map;
    map.membership.resize(n);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < k; ++t)
        if (rng.uniform() < 0.4) map.membership[i].push_back(t);
    std::vector<int> perm(k);
    for (int t = 0; t < k; ++t) perm[t] = t;
    for (int t = k - 1; t > 0; --t)
      std::swap(perm[t], perm[rng.uniform_int(0, t)]);

    TokenTripletMap permuted;
    permuted.membership.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int t : map.membership[i]) permuted.membership[i].push_back(perm[t]);
      std::sort(permuted.membership[i].begin(), permuted.membership[i].end());
    }
    AttentionMask base = build_sg_cross_mask(map, k);
    AttentionMask moved = build_sg_cross_mask(permuted, k);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < k; ++t)
        REQUIRE(base.allowed(i, t) == moved.allowed(i, perm[t]));
  }
}

TEST_CASE("causal mask under softmax: rows sum to 1, masked weight < 1e-12") {
  Rng rng(11);
  const int n = 9;
  AttentionMask mask = build_causal_mask(n);
  Tensor logits = Tensor::randn({n, n}, rng, 3.0);
  Tensor probs = masked_softmax(logits, mask);
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      double w = probs.at({i, j});
      row += w;
      if (!mask.allowed(i, j)) CHECK(w < 1e-12);
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("mask rendering: grid and json") {
  AttentionMask m = build_causal_mask(2);
  CHECK(mask_to_grid(m) == ".#\n..\n");
  std::string j = mask_to_json(m);
  CHECK(j.find("\"rows\":2") != std::string::npos);
  CHECK(j.find("[1,1]") != std::string::npos);
}
