// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace sgad {

struct Token {
  std::string text;
  size_t begin = 0;  // half-open character span into Caption::text
  size_t end = 0;
};

struct Caption {
  std::string text;  // lowercased source text
  std::vector<Token> tokens;

  int size() const { return static_cast<int>(tokens.size()); }
};

// One subject-relation-object binding, stored as token-index lists into the
// source caption.
struct Triplet {
  std::vector<int> subject;
  std::vector<int> relation;
  std::vector<int> object;
};

struct SceneGraph {
  std::vector<Triplet> triplets;
  std::string caption_ref;

  int size() const { return static_cast<int>(triplets.size()); }
};

// Set-valued token-to-triplet membership: membership[i] lists (sorted) the
// triplet indices token i belongs to; empty means the token is outside every
// triplet ("and", punctuation).
struct TokenTripletMap {
  std::vector<std::vector<int>> membership;

  int token_count() const { return static_cast<int>(membership.size()); }
  bool contains(int token, int triplet) const;
  bool intersects(int token_a, int token_b) const;
};

class RelationLexicon {
 public:
  static RelationLexicon defaults();
  static RelationLexicon load(const std::string& path);
  void save(const std::string& path) const;

  void add(const std::string& phrase);
  bool contains(const std::string& phrase) const;
  const std::vector<std::vector<std::string>>& phrases() const { return phrases_; }

  // Longest lexicon phrase starting at tokens[pos]; returns its token length,
  // 0 if none matches.
  int match(const std::vector<Token>& tokens, size_t pos) const;

 private:
  std::vector<std::vector<std::string>> phrases_;  // tokenized, lowercase
};

struct ParserLimits {
  int max_tokens = 77;
  int max_triplets = 8;
};

// Lowercases, splits on whitespace, and emits every punctuation character as
// its own token (the word-index convention used by the annotation records).
Caption tokenize(const std::string& text, int max_tokens = 77);

// Deterministic grammar parser. Clauses are joined by "and"; each clause is
// NP (RELP NP)* with NP = ("a"|"an")? color? noun. The first two relations of
// a clause share the clause subject; from the third relation on, the subject
// is the object of the previous relation ("a boy holding a bottle shakes
// hands with a girl sitting on a bench" yields boy/boy/girl subjects).
std::pair<SceneGraph, TokenTripletMap> parse_caption(
    const Caption& caption, const RelationLexicon& lexicon,
    const ParserLimits& limits = {});

// Wire form of one dataset annotation (JSON Lines). The word->index multimaps
// are stored as ordered [word, index] pair lists.
struct AnnotationRecord {
  std::string caption;
  std::vector<std::array<std::string, 3>> scene_graph;
  std::vector<std::pair<std::string, int>> all_words_indexes;
  std::vector<std::vector<std::pair<std::string, int>>> mapping;
};

AnnotationRecord export_annotation(const Caption& caption, const SceneGraph& sg,
                                   const TokenTripletMap& map);
std::tuple<Caption, SceneGraph, TokenTripletMap> ingest_annotation(
    const AnnotationRecord& record, const ParserLimits& limits = {});

std::string annotation_to_json_line(const AnnotationRecord& record);
AnnotationRecord annotation_from_json_line(const std::string& line);

// Joins the given tokens with single spaces ("a red circle").
std::string phrase_text(const Caption& caption, const std::vector<int>& token_indices);

// Derives the membership map from triplet spans; exposed for ingestion and
// dataset loading.
TokenTripletMap map_from_triplets(int token_count, const SceneGraph& sg);

// Closed word classes of the controlled grammar.
const std::set<std::string>& grammar_nouns();
const std::set<std::string>& grammar_colors();

}  // namespace sgad
