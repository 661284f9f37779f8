// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "sgad/errors.hpp"
#include "sgad/rng.hpp"
#include "sgad/sgtext.hpp"

using namespace sgad;

namespace {

const char* kBoyCaption =
    "a boy holding a bottle shakes hands with a girl sitting on a bench";

std::vector<std::string> token_texts(const Caption& c) {
  std::vector<std::string> out;
  for (const auto& t : c.tokens) out.push_back(t.text);
  return out;
}

std::string triplet_string(const Caption& c, const Triplet& t) {
  return phrase_text(c, t.subject) + " | " + phrase_text(c, t.relation) +
         " | " + phrase_text(c, t.object);
}

// Grammar caption generator used by the fuzz round-trip. Kept independent of
// the parser: it only emits strings.
struct CaptionGen {
  Rng rng;
  std::vector<std::string> nouns = {"man",  "woman", "boy",   "girl", "chair",
                                    "floor", "bottle", "apple", "cake", "water",
                                    "milk",  "bench", "circle", "square",
                                    "triangle", "cup", "table", "juice"};
  std::vector<std::string> colors = {"red", "green", "blue", "yellow"};
  std::vector<std::string> relations = {
      "above", "below", "left of", "right of", "holding", "drinking",
      "shakes hands with", "sitting on", "sits on", "stands on", "is above",
      "is under"};

  explicit CaptionGen(uint64_t seed) : rng(seed) {}

  std::string np() {
    std::string out;
    const std::string& noun = nouns[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(nouns.size()) - 1))];
    bool bare = rng.uniform() < 0.2;
    if (!bare) {
      out += (noun[0] == 'a' || noun[0] == 'e' || noun[0] == 'i' ||
              noun[0] == 'o' || noun[0] == 'u')
                 ? "an "
                 : "a ";
      if (rng.uniform() < 0.4)
        out += colors[static_cast<size_t>(rng.uniform_int(0, 3))] + " ";
    }
    out += noun;
    return out;
  }

  std::string clause() {
    int rels = rng.uniform_int(1, 3);
    std::string out = np();
    for (int i = 0; i < rels; ++i) {
      out += " " + relations[static_cast<size_t>(rng.uniform_int(
                       0, static_cast<int>(relations.size()) - 1))];
      out += " " + np();
    }
    return out;
  }

  std::string caption() {
    std::string out = clause();
    if (rng.uniform() < 0.4) out += " and " + clause();
    if (rng.uniform() < 0.2) out += " .";
    return out;
  }
};

}  // namespace

TEST_CASE("tokenize: annotation example caption") {
  Caption c = tokenize(kBoyCaption);
  CHECK(c.size() == 14);
  CHECK(c.tokens[13].text == "bench");
  CHECK(c.tokens[0].text == "a");
  CHECK(c.tokens[5].text == "shakes");
  // spans reconstruct the text
  for (const auto& t : c.tokens)
    CHECK(c.text.substr(t.begin, t.end - t.begin) == t.text);
}

TEST_CASE("tokenize: single token") {
  Caption c = tokenize("a");
  CHECK(c.size() == 1);
  CHECK(c.tokens[0].text == "a");
}

TEST_CASE("tokenize: punctuation becomes its own token") {
  Caption c = tokenize("a man, a woman");
  CHECK(token_texts(c) == std::vector<std::string>{"a", "man", ",", "a", "woman"});
  CHECK(c.tokens[2].text == ",");
}

TEST_CASE("tokenize: lowercases input") {
  Caption c = tokenize("A Red Circle ABOVE a blue square");
  CHECK(c.tokens[1].text == "red");
  CHECK(c.tokens[3].text == "above");
}

TEST_CASE("tokenize: errors") {
  CHECK_THROWS_AS(tokenize(""), Error);
  CHECK_THROWS_AS(tokenize("   "), Error);
  try {
    tokenize("   ");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyCaption);
  }
  std::string longcap;
  for (int i = 0; i < 78; ++i) longcap += "a ";
  try {
    tokenize(longcap);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooLong);
  }
}

TEST_CASE("parse: annotation example scene graph") {
  Caption c = tokenize(kBoyCaption);
  auto [sg, map] = parse_caption(c, RelationLexicon::defaults());
  REQUIRE(sg.size() == 3);
  CHECK(triplet_string(c, sg.triplets[0]) == "a boy | holding | a bottle");
  CHECK(triplet_string(c, sg.triplets[1]) == "a boy | shakes hands with | a girl");
  CHECK(triplet_string(c, sg.triplets[2]) == "a girl | sitting on | a bench");
  // word-index mapping from the annotation contract
  CHECK(sg.triplets[0].subject == std::vector<int>{0, 1});
  CHECK(sg.triplets[0].relation == std::vector<int>{2});
  CHECK(sg.triplets[0].object == std::vector<int>{3, 4});
  CHECK(sg.triplets[1].relation == std::vector<int>{5, 6, 7});
  CHECK(sg.triplets[2].subject == std::vector<int>{8, 9});
  CHECK(sg.triplets[2].object == std::vector<int>{12, 13});
  // "boy" belongs to triplets 0 and 1; "girl" to 1 and 2
  CHECK(map.membership[1] == std::vector<int>{0, 1});
  CHECK(map.membership[9] == std::vector<int>{1, 2});
}

TEST_CASE("parse: two clauses, and-token has empty membership") {
  Caption c = tokenize("a man holding a cake and a woman holding an apple");
  auto [sg, map] = parse_caption(c, RelationLexicon::defaults());
  REQUIRE(sg.size() == 2);
  CHECK(triplet_string(c, sg.triplets[0]) == "a man | holding | a cake");
  CHECK(triplet_string(c, sg.triplets[1]) == "a woman | holding | an apple");
  // "and" is token 5
  CHECK(c.tokens[5].text == "and");
  CHECK(map.membership[5].empty());
}

TEST_CASE("parse: single spatial triplet covers every token") {
  Caption c = tokenize("a red circle above a blue square");
  auto [sg, map] = parse_caption(c, RelationLexicon::defaults());
  REQUIRE(sg.size() == 1);
  CHECK(triplet_string(c, sg.triplets[0]) == "a red circle | above | a blue square");
  for (int i = 0; i < c.size(); ++i)
    CHECK(map.membership[i] == std::vector<int>{0});
}

TEST_CASE("parse: shared-subject pattern shares the subject token set") {
  Caption c = tokenize("a woman holding a cup stands on floor");
  auto [sg, map] = parse_caption(c, RelationLexicon::defaults());
  REQUIRE(sg.size() == 2);
  CHECK(sg.triplets[0].subject == sg.triplets[1].subject);
  CHECK(triplet_string(c, sg.triplets[0]) == "a woman | holding | a cup");
  CHECK(triplet_string(c, sg.triplets[1]) == "a woman | stands on | floor");
}

TEST_CASE("parse: grammar errors carry the offending token") {
  RelationLexicon lex = RelationLexicon::defaults();
  {
    Caption c = tokenize("a man, a woman");
    try {
      parse_caption(c, lex);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::GrammarError);
      CHECK(std::string(e.what()).find("token 2") != std::string::npos);
    }
  }
  {
    Caption c = tokenize("a man a woman");
    try {
      parse_caption(c, lex);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::GrammarError);
    }
  }
  {
    Caption c = tokenize("a man flying a kite");
    try {
      parse_caption(c, lex);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownRelation);
    }
  }
  {
    // a caption with no relation at all
    Caption c = tokenize("a man");
    CHECK_THROWS_AS(parse_caption(c, lex), Error);
  }
}

TEST_CASE("parse: deterministic") {
  Caption c1 = tokenize(kBoyCaption);
  Caption c2 = tokenize(kBoyCaption);
  auto [sg1, m1] = parse_caption(c1, RelationLexicon::defaults());
  auto [sg2, m2] = parse_caption(c2, RelationLexicon::defaults());
  REQUIRE(sg1.size() == sg2.size());
  for (int k = 0; k < sg1.size(); ++k) {
    CHECK(sg1.triplets[k].subject == sg2.triplets[k].subject);
    CHECK(sg1.triplets[k].relation == sg2.triplets[k].relation);
    CHECK(sg1.triplets[k].object == sg2.triplets[k].object);
  }
  CHECK(m1.membership == m2.membership);
}

TEST_CASE("membership matches triplet spans exactly") {
  Caption c = tokenize(kBoyCaption);
  auto [sg, map] = parse_caption(c, RelationLexicon::defaults());
  for (int i = 0; i < c.size(); ++i) {
    for (int k = 0; k < sg.size(); ++k) {
      const Triplet& t = sg.triplets[k];
      bool in_triplet = false;
      for (const auto* part : {&t.subject, &t.relation, &t.object})
        for (int idx : *part)
          if (idx == i) in_triplet = true;
      CHECK(map.contains(i, k) == in_triplet);
    }
  }
}

TEST_CASE("ingest: round-trips parse output") {
  Caption c = tokenize(kBoyCaption);
  auto [sg, map] = parse_caption(c, RelationLexicon::defaults());
  AnnotationRecord rec = export_annotation(c, sg, map);
  auto [c2, sg2, map2] = ingest_annotation(rec);
  CHECK(c2.text == c.text);
  REQUIRE(sg2.size() == sg.size());
  for (int k = 0; k < sg.size(); ++k) {
    CHECK(sg2.triplets[k].subject == sg.triplets[k].subject);
    CHECK(sg2.triplets[k].relation == sg.triplets[k].relation);
    CHECK(sg2.triplets[k].object == sg.triplets[k].object);
  }
  CHECK(map2.membership == map.membership);

  // JSON line round-trip
  AnnotationRecord rec2 = annotation_from_json_line(annotation_to_json_line(rec));
  auto [c3, sg3, map3] = ingest_annotation(rec2);
  CHECK(map3.membership == map.membership);
}

TEST_CASE("ingest: the annotation example record matches parse_caption") {
  // Record assembled by hand from the annotation contract: scene graph,
  // all-words indexes, and per-triplet mappings (subject then relation then
  // object words).
  AnnotationRecord rec;
  rec.caption = kBoyCaption;
  rec.scene_graph = {{"a boy", "holding", "a bottle"},
                     {"a boy", "shakes hands with", "a girl"},
                     {"a girl", "sitting on", "a bench"}};
  rec.all_words_indexes = {{"a", 0},     {"boy", 1},    {"holding", 2},
                           {"a", 3},     {"bottle", 4}, {"shakes", 5},
                           {"hands", 6}, {"with", 7},   {"a", 8},
                           {"girl", 9},  {"sitting", 10}, {"on", 11},
                           {"a", 12},    {"bench", 13}};
  rec.mapping = {
      {{"a", 0}, {"boy", 1}, {"holding", 2}, {"a", 3}, {"bottle", 4}},
      {{"a", 0}, {"boy", 1}, {"shakes", 5}, {"hands", 6}, {"with", 7}, {"a", 8}, {"girl", 9}},
      {{"a", 8}, {"girl", 9}, {"sitting", 10}, {"on", 11}, {"a", 12}, {"bench", 13}}};

  auto [ci, sgi, mapi] = ingest_annotation(rec);
  Caption c = tokenize(kBoyCaption);
  auto [sgp, mapp] = parse_caption(c, RelationLexicon::defaults());
  REQUIRE(sgi.size() == sgp.size());
  for (int k = 0; k < sgi.size(); ++k) {
    CHECK(sgi.triplets[k].subject == sgp.triplets[k].subject);
    CHECK(sgi.triplets[k].relation == sgp.triplets[k].relation);
    CHECK(sgi.triplets[k].object == sgp.triplets[k].object);
  }
  CHECK(mapi.membership == mapp.membership);
}

TEST_CASE("ingest: mapping index that names the wrong word") {
  Caption c = tokenize(kBoyCaption);
  auto [sg, map] = parse_caption(c, RelationLexicon::defaults());
  AnnotationRecord rec = export_annotation(c, sg, map);
  rec.mapping[0][1] = {"boy", 5};  // token 5 is "shakes"
  try {
    ingest_annotation(rec);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IndexMismatch);
  }
}

TEST_CASE("ingest: missing fields") {
  CHECK_THROWS_AS(annotation_from_json_line("{\"caption\": \"a man\"}"), Error);
  CHECK_THROWS_AS(annotation_from_json_line("not json"), Error);
  try {
    annotation_from_json_line("{}");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingField);
  }
}

TEST_CASE("fuzz: 10000 grammar captions parse and round-trip") {
  RelationLexicon lex = RelationLexicon::defaults();
  CaptionGen gen(20260811);
  int shared_subject_checks = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::string text = gen.caption();
    CAPTURE(text);
    Caption c = tokenize(text);
    auto [sg, map] = parse_caption(c, lex);
    REQUIRE(sg.size() >= 1);

    // membership consistency
    for (int i = 0; i < c.size(); ++i) {
      for (int k = 0; k < sg.size(); ++k) {
        const Triplet& t = sg.triplets[k];
        bool in_triplet = false;
        for (const auto* part : {&t.subject, &t.relation, &t.object})
          for (int idx : *part)
            if (idx == i) in_triplet = true;
        REQUIRE(map.contains(i, k) == in_triplet);
      }
    }

    // shared-subject clauses share the subject token list
    for (int k = 0; k + 1 < sg.size(); ++k) {
      if (sg.triplets[k].subject == sg.triplets[k + 1].subject)
        ++shared_subject_checks;
    }

    // export -> ingest round-trip is exact
    AnnotationRecord rec = export_annotation(c, sg, map);
    auto [c2, sg2, map2] =
        ingest_annotation(annotation_from_json_line(annotation_to_json_line(rec)));
    REQUIRE(c2.text == c.text);
    REQUIRE(sg2.size() == sg.size());
    for (int k = 0; k < sg.size(); ++k) {
      REQUIRE(sg2.triplets[k].subject == sg.triplets[k].subject);
      REQUIRE(sg2.triplets[k].relation == sg.triplets[k].relation);
      REQUIRE(sg2.triplets[k].object == sg.triplets[k].object);
    }
    REQUIRE(map2.membership == map.membership);
  }
  CHECK(shared_subject_checks > 100);
}

TEST_CASE("lexicon: file round-trip and longest match") {
  RelationLexicon lex = RelationLexicon::defaults();
  CHECK(lex.contains("shakes hands with"));
  CHECK(lex.contains("left of"));
  std::string path = "lexicon_test.txt";
  lex.save(path);
  RelationLexicon lex2 = RelationLexicon::load(path);
  CHECK(lex2.contains("shakes hands with"));
  // "sits on" vs "sits back to back with": longest match wins
  Caption c = tokenize("a man sits back to back with a woman");
  auto [sg, map] = parse_caption(c, lex2);
  REQUIRE(sg.size() == 1);
  CHECK(phrase_text(c, sg.triplets[0].relation) == "sits back to back with");
  std::remove(path.c_str());
}
