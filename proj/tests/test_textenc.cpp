// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <memory>

#include "sgad/errors.hpp"
#include "sgad/textenc.hpp"

using namespace sgad;

namespace {

struct Fixture {
  RelationLexicon lexicon = RelationLexicon::defaults();
  Vocabulary vocab = Vocabulary::build_default(lexicon);
  ParamSet params;
  EncoderConfig cfg;
  TextEncoder* enc = nullptr;

  explicit Fixture(int embed_dim = 32, int layers = 2, int heads = 4) {
    cfg.vocab_size = vocab.size();
    cfg.embed_dim = embed_dim;
    cfg.layers = layers;
    cfg.heads = heads;
    static Rng rng(12345);
    enc_storage = std::make_unique<TextEncoder>(cfg, params, rng);
    enc = enc_storage.get();
  }

  std::unique_ptr<TextEncoder> enc_storage;
};

std::vector<double> to_vec(const Tensor& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

}  // namespace

TEST_CASE("vocabulary: dense ids, unk at zero, file round-trip") {
  RelationLexicon lex = RelationLexicon::defaults();
  Vocabulary v = Vocabulary::build_default(lex);
  CHECK(v.tokens()[0] == "<unk>");
  CHECK(v.id("circle") > 0);
  CHECK(v.id("zzz-not-a-word") == 0);
  CHECK(v.id("left") > 0);
  v.save("vocab_test.txt");
  Vocabulary v2 = Vocabulary::load("vocab_test.txt");
  CHECK(v2.size() == v.size());
  CHECK(v2.id("circle") == v.id("circle"));
  std::remove("vocab_test.txt");
}

TEST_CASE("encode: output shape is N x D") {
  Fixture f;
  Caption c = tokenize("a red circle above a blue square");
  Tensor w = f.enc->encode(c, f.vocab, EncodeMaskKind::Causal);
  CHECK(w.shape() == std::vector<int>{7, 32});
}

TEST_CASE("encode: causality - truncation leaves earlier rows bitwise unchanged") {
  Fixture f;
  Caption full = tokenize("a man holding a cake and a woman holding an apple");
  Tensor wf = f.enc->encode(full, f.vocab, EncodeMaskKind::Causal);
  for (int cut = 1; cut < full.size(); ++cut) {
    Caption trunc;
    trunc.text = full.text;
    trunc.tokens.assign(full.tokens.begin(), full.tokens.begin() + cut);
    Tensor wt = f.enc->encode(trunc, f.vocab, EncodeMaskKind::Causal);
    for (int i = 0; i < cut; ++i)
      for (int j = 0; j < 32; ++j)
        REQUIRE(wt.at({i, j}) == wf.at({i, j}));
  }
}

TEST_CASE("encode: exhaustive causality for N <= 8") {
  // Changing token j must not affect rows i < j.
  Fixture f(16, 1, 2);
  Rng rng(7);
  for (int n = 2; n <= 8; ++n) {
    std::vector<int> ids(n);
    for (auto& id : ids) id = rng.uniform_int(1, f.vocab.size() - 1);
    Tensor base = f.enc->encode_ids(ids, build_causal_mask(n));
    for (int j = 1; j < n; ++j) {
      auto changed = ids;
      changed[j] = (changed[j] + 1) % f.vocab.size();
      Tensor out = f.enc->encode_ids(changed, build_causal_mask(n));
      for (int i = 0; i < j; ++i)
        for (int d = 0; d < 16; ++d)
          REQUIRE(out.at({i, d}) == base.at({i, d}));
    }
  }
}

TEST_CASE("encode: N=1 caption works") {
  Fixture f;
  Caption c = tokenize("a");
  Tensor w = f.enc->encode(c, f.vocab, EncodeMaskKind::Causal);
  CHECK(w.shape() == std::vector<int>{1, 32});
}

TEST_CASE("encode: triplet-aligned mask changes multi-triplet outputs") {
  Fixture f;
  Caption c = tokenize(
      "a boy holding a bottle shakes hands with a girl sitting on a bench");
  auto [sg, map] = parse_caption(c, f.lexicon);
  Tensor causal = f.enc->encode(c, f.vocab, EncodeMaskKind::Causal);
  Tensor aligned = f.enc->encode(c, f.vocab, EncodeMaskKind::TripletAligned, &map);
  CHECK(to_vec(causal) != to_vec(aligned));
}

TEST_CASE("encode: triplet-aligned rows ignore tokens of disjoint triplets") {
  Fixture f(16, 2, 2);
  Caption c = tokenize("a man holding a cake and a woman holding an apple");
  auto [sg, map] = parse_caption(c, f.lexicon);
  std::vector<int> ids(c.size());
  for (int i = 0; i < c.size(); ++i) ids[i] = f.vocab.id(c.tokens[i].text);
  AttentionMask mask = build_triplet_aligned_mask(map);
  Tensor base = f.enc->encode_ids(ids, mask);
  // Change a token of triplet 1 ("apple", index 10); rows of triplet 0 and
  // the "and" row must not move.
  auto changed = ids;
  changed[10] = f.vocab.id("cake");
  Tensor out = f.enc->encode_ids(changed, mask);
  for (int i = 0; i < c.size(); ++i) {
    if (map.intersects(i, 10) || i == 10) continue;
    for (int d = 0; d < 16; ++d) REQUIRE(out.at({i, d}) == base.at({i, d}));
  }
}

TEST_CASE("encode: missing map for triplet-aligned kind") {
  Fixture f;
  Caption c = tokenize("a red circle above a blue square");
  try {
    f.enc->encode(c, f.vocab, EncodeMaskKind::TripletAligned);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingMap);
  }
}

TEST_CASE("encode: too many tokens") {
  Fixture f;
  std::vector<int> ids(78, 1);
  try {
    f.enc->encode_ids(ids, build_causal_mask(78));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooLong);
  }
}

TEST_CASE("encode_phrase: pooled output has shape D and distinct phrases differ") {
  Fixture f;
  Tensor boy = f.enc->encode_phrase({"a", "boy"}, f.vocab);
  CHECK(boy.shape() == std::vector<int>{32});
  Tensor girl = f.enc->encode_phrase({"a", "girl"}, f.vocab);
  CHECK(to_vec(boy) != to_vec(girl));
  // single-token phrase: pooled row equals the only encoded row
  Tensor one = f.enc->encode_phrase({"circle"}, f.vocab);
  Tensor full = f.enc->encode_ids({f.vocab.id("circle")}, build_causal_mask(1));
  for (int d = 0; d < 32; ++d) CHECK(one.at({d}) == full.at({0, d}));
}

TEST_CASE("encode_phrase: errors") {
  Fixture f;
  CHECK_THROWS_AS(f.enc->encode_phrase({}, f.vocab), Error);
  try {
    f.enc->encode_phrase({"a", "a", "a", "a", "a", "a", "a"}, f.vocab);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooLong);
  }
}

TEST_CASE("encoder: freezing stops gradient accumulation") {
  Fixture f(16, 1, 2);
  Caption c = tokenize("a red circle above a blue square");
  f.enc->set_trainable(false);
  Tensor w = f.enc->encode(c, f.vocab, EncodeMaskKind::Causal);
  CHECK(!w.requires_grad());
  f.enc->set_trainable(true);
  Tensor w2 = f.enc->encode(c, f.vocab, EncodeMaskKind::Causal);
  CHECK(w2.requires_grad());
}

TEST_CASE("encoder config validation") {
  EncoderConfig bad;
  bad.vocab_size = 10;
  bad.embed_dim = 30;
  bad.heads = 4;  // not divisible
  CHECK_THROWS_AS(bad.validate(), Error);
}
