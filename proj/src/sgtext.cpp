// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/sgtext.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sgad/errors.hpp"

namespace sgad {

namespace {

using json = nlohmann::json;

const std::set<std::string>& noun_set() { return grammar_nouns(); }
const std::set<std::string>& color_set() { return grammar_colors(); }

bool is_article(const std::string& t) { return t == "a" || t == "an"; }

bool is_punct_token(const std::string& t) {
  return t.size() == 1 && !std::isalnum(static_cast<unsigned char>(t[0]));
}

struct ClauseParse {
  std::vector<std::vector<int>> nps;        // token-index lists
  std::vector<std::vector<int>> relations;  // token-index lists, in order
};

class Parser {
 public:
  Parser(const Caption& caption, const RelationLexicon& lexicon,
         const ParserLimits& limits)
      : caption_(caption), lexicon_(lexicon), limits_(limits) {}

  std::pair<SceneGraph, TokenTripletMap> run() {
    SceneGraph sg;
    sg.caption_ref = caption_.text;
    const int n = caption_.size();
    while (pos_ < n) {
      ClauseParse clause = parse_clause();
      append_triplets(clause, sg);
      if (pos_ >= n) break;
      const std::string& tok = caption_.tokens[pos_].text;
      if (tok == "and") {
        ++pos_;
        require(pos_ < n, ErrorCode::GrammarError,
                "caption ends after \"and\" (token " + std::to_string(pos_ - 1) + ")");
        continue;
      }
      if (is_punct_token(tok)) {
        // Sentence-final punctuation belongs to no triplet.
        size_t rest = pos_;
        while (rest < static_cast<size_t>(n) &&
               is_punct_token(caption_.tokens[rest].text))
          ++rest;
        require(rest == static_cast<size_t>(n), ErrorCode::GrammarError,
                "unexpected punctuation at token " + std::to_string(pos_));
        break;
      }
      fail(ErrorCode::GrammarError,
           "expected \"and\" or end of caption at token " + std::to_string(pos_) +
               " (\"" + tok + "\")");
    }
    require(!sg.triplets.empty(), ErrorCode::GrammarError,
            "caption contains no relation");
    return {sg, map_from_triplets(n, sg)};
  }

 private:
  ClauseParse parse_clause() {
    ClauseParse clause;
    clause.nps.push_back(parse_np());
    const int n = caption_.size();
    while (pos_ < n) {
      const std::string& tok = caption_.tokens[pos_].text;
      if (tok == "and" || is_punct_token(tok)) break;
      int len = lexicon_.match(caption_.tokens, pos_);
      if (len == 0) {
        if (noun_set().count(tok) || color_set().count(tok) || is_article(tok)) {
          fail(ErrorCode::GrammarError,
               "expected a relation phrase at token " + std::to_string(pos_) +
                   " (\"" + tok + "\")");
        }
        fail(ErrorCode::UnknownRelation,
             "\"" + tok + "\" at token " + std::to_string(pos_) +
                 " is not in the relation lexicon");
      }
      std::vector<int> rel(len);
      for (int i = 0; i < len; ++i) rel[i] = pos_ + i;
      pos_ += len;
      clause.relations.push_back(std::move(rel));
      clause.nps.push_back(parse_np());
    }
    return clause;
  }

  std::vector<int> parse_np() {
    const int n = caption_.size();
    require(pos_ < n, ErrorCode::GrammarError,
            "expected a noun phrase at token " + std::to_string(pos_));
    int start = pos_;
    if (is_article(caption_.tokens[pos_].text)) ++pos_;
    if (pos_ < n && color_set().count(caption_.tokens[pos_].text) &&
        pos_ + 1 < n && noun_set().count(caption_.tokens[pos_ + 1].text)) {
      ++pos_;
    }
    require(pos_ < n && noun_set().count(caption_.tokens[pos_].text),
            ErrorCode::GrammarError,
            "expected a noun at token " + std::to_string(pos_));
    ++pos_;
    std::vector<int> np;
    for (int i = start; i < pos_; ++i) np.push_back(i);
    return np;
  }

  void append_triplets(const ClauseParse& clause, SceneGraph& sg) {
    for (size_t r = 0; r < clause.relations.size(); ++r) {
      // The first two relations of a clause share the clause subject; later
      // ones attach to the object of the preceding relation.
      size_t subject_np = (r <= 1) ? 0 : r;
      Triplet t;
      t.subject = clause.nps[subject_np];
      t.relation = clause.relations[r];
      t.object = clause.nps[r + 1];
      sg.triplets.push_back(std::move(t));
      require(sg.size() <= limits_.max_triplets, ErrorCode::GrammarError,
              "caption exceeds max_triplets = " + std::to_string(limits_.max_triplets));
    }
  }

  const Caption& caption_;
  const RelationLexicon& lexicon_;
  ParserLimits limits_;
  int pos_ = 0;
};

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

// Closed noun vocabulary: the annotation object list plus the shapes and
// drinks used by the synthetic scenes.
const std::set<std::string>& grammar_nouns() {
  static const std::set<std::string> kNouns = {
      "astronaut", "ball",      "cake",   "box",    "television", "table",
      "horse",     "pitaya",    "woman",  "book",   "laptop",     "bottle",
      "banana",    "sofa",      "floor",  "water",  "apple",      "chair",
      "pineapple", "umbrella",  "boy",    "paper",  "bear",       "girl",
      "panda",     "cup",       "man",    "bike",   "carrot",     "phone",
      "bench",     "circle",    "square", "triangle", "milk",     "cola",
      "juice",     "guitar",    "tree",   "ground"};
  return kNouns;
}

const std::set<std::string>& grammar_colors() {
  static const std::set<std::string> kColors = {"red", "green", "blue", "yellow"};
  return kColors;
}

bool TokenTripletMap::contains(int token, int triplet) const {
  const auto& m = membership[token];
  return std::binary_search(m.begin(), m.end(), triplet);
}

bool TokenTripletMap::intersects(int token_a, int token_b) const {
  const auto& a = membership[token_a];
  const auto& b = membership[token_b];
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j]) ++i; else ++j;
  }
  return false;
}

RelationLexicon RelationLexicon::defaults() {
  RelationLexicon lex;
  for (const char* p :
       {"above", "below", "left of", "right of", "holding", "drinking",
        "shakes hands with", "sitting on", "sits on", "stands on", "is above",
        "is under", "sits back to back with", "ride on", "is painted on",
        "playing"}) {
    lex.add(p);
  }
  return lex;
}

RelationLexicon RelationLexicon::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open lexicon file " + path);
  RelationLexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lex.add(line);
  }
  return lex;
}

void RelationLexicon::save(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write lexicon file " + path);
  for (const auto& phrase : phrases_) {
    for (size_t i = 0; i < phrase.size(); ++i) {
      if (i) out << ' ';
      out << phrase[i];
    }
    out << '\n';
  }
}

void RelationLexicon::add(const std::string& phrase) {
  std::string lower;
  lower.reserve(phrase.size());
  for (char c : phrase) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  auto words = split_words(lower);
  require(!words.empty(), ErrorCode::InvalidConfig, "empty relation phrase");
  require(words.size() <= 5, ErrorCode::InvalidConfig,
          "relation phrase too long: " + phrase);
  for (const auto& w : words)
    require(w != "and", ErrorCode::InvalidConfig,
            "relation phrases may not contain \"and\"");
  if (!contains(lower)) phrases_.push_back(std::move(words));
}

bool RelationLexicon::contains(const std::string& phrase) const {
  auto words = split_words(phrase);
  return std::find(phrases_.begin(), phrases_.end(), words) != phrases_.end();
}

int RelationLexicon::match(const std::vector<Token>& tokens, size_t pos) const {
  int best = 0;
  for (const auto& phrase : phrases_) {
    if (phrase.size() <= static_cast<size_t>(best)) continue;
    if (pos + phrase.size() > tokens.size()) continue;
    bool ok = true;
    for (size_t i = 0; i < phrase.size(); ++i) {
      if (tokens[pos + i].text != phrase[i]) { ok = false; break; }
    }
    if (ok) best = static_cast<int>(phrase.size());
  }
  return best;
}

Caption tokenize(const std::string& text, int max_tokens) {
  Caption caption;
  caption.text.reserve(text.size());
  for (char c : text)
    caption.text.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

  const std::string& s = caption.text;
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) { ++i; continue; }
    if (std::isalnum(c)) {
      size_t j = i;
      while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
      caption.tokens.push_back({s.substr(i, j - i), i, j});
      i = j;
    } else {
      // Punctuation is its own token.
      caption.tokens.push_back({s.substr(i, 1), i, i + 1});
      ++i;
    }
  }
  require(!caption.tokens.empty(), ErrorCode::EmptyCaption,
          "no tokens in caption");
  require(caption.size() <= max_tokens, ErrorCode::TooLong,
          "caption has " + std::to_string(caption.size()) + " tokens, max is " +
              std::to_string(max_tokens));
  return caption;
}

std::pair<SceneGraph, TokenTripletMap> parse_caption(
    const Caption& caption, const RelationLexicon& lexicon,
    const ParserLimits& limits) {
  require(caption.size() <= limits.max_tokens, ErrorCode::TooLong,
          "caption exceeds max_tokens");
  return Parser(caption, lexicon, limits).run();
}

TokenTripletMap map_from_triplets(int token_count, const SceneGraph& sg) {
  TokenTripletMap map;
  map.membership.assign(token_count, {});
  for (int k = 0; k < sg.size(); ++k) {
    const Triplet& t = sg.triplets[k];
    for (const auto* part : {&t.subject, &t.relation, &t.object}) {
      for (int idx : *part) {
        require(idx >= 0 && idx < token_count, ErrorCode::IndexMismatch,
                "triplet token index out of range");
        auto& m = map.membership[idx];
        if (m.empty() || m.back() != k) m.push_back(k);
      }
    }
  }
  return map;
}

std::string phrase_text(const Caption& caption, const std::vector<int>& token_indices) {
  std::string out;
  for (size_t i = 0; i < token_indices.size(); ++i) {
    if (i) out.push_back(' ');
    out += caption.tokens[token_indices[i]].text;
  }
  return out;
}

AnnotationRecord export_annotation(const Caption& caption, const SceneGraph& sg,
                                   const TokenTripletMap& map) {
  require(map.token_count() == caption.size(), ErrorCode::IndexMismatch,
          "map and caption disagree on token count");
  AnnotationRecord rec;
  rec.caption = caption.text;
  for (int i = 0; i < caption.size(); ++i)
    rec.all_words_indexes.emplace_back(caption.tokens[i].text, i);
  for (const Triplet& t : sg.triplets) {
    rec.scene_graph.push_back({phrase_text(caption, t.subject),
                               phrase_text(caption, t.relation),
                               phrase_text(caption, t.object)});
    std::vector<std::pair<std::string, int>> m;
    for (const auto* part : {&t.subject, &t.relation, &t.object})
      for (int idx : *part) m.emplace_back(caption.tokens[idx].text, idx);
    rec.mapping.push_back(std::move(m));
  }
  return rec;
}

std::tuple<Caption, SceneGraph, TokenTripletMap> ingest_annotation(
    const AnnotationRecord& record, const ParserLimits& limits) {
  Caption caption = tokenize(record.caption, limits.max_tokens);
  const int n = caption.size();

  require(static_cast<int>(record.all_words_indexes.size()) == n,
          ErrorCode::IndexMismatch,
          "all_words_indexes covers " + std::to_string(record.all_words_indexes.size()) +
              " words, caption has " + std::to_string(n) + " tokens");
  for (int i = 0; i < n; ++i) {
    const auto& [word, idx] = record.all_words_indexes[i];
    require(idx == i, ErrorCode::IndexMismatch,
            "all_words_indexes entry " + std::to_string(i) + " has index " +
                std::to_string(idx));
    require(word == caption.tokens[i].text, ErrorCode::IndexMismatch,
            "all_words_indexes names \"" + word + "\" at index " +
                std::to_string(i) + " but the caption token is \"" +
                caption.tokens[i].text + "\"");
  }

  require(record.scene_graph.size() == record.mapping.size(),
          ErrorCode::MissingField, "scene_graph and mapping lengths differ");
  require(!record.scene_graph.empty(), ErrorCode::MissingField,
          "record has no triplets");
  require(static_cast<int>(record.scene_graph.size()) <= limits.max_triplets,
          ErrorCode::IndexMismatch, "record exceeds max_triplets");

  SceneGraph sg;
  sg.caption_ref = caption.text;
  for (size_t k = 0; k < record.scene_graph.size(); ++k) {
    const std::string& s = record.scene_graph[k][0];
    const std::string& r = record.scene_graph[k][1];
    const std::string& o = record.scene_graph[k][2];
    const auto& m = record.mapping[k];
    std::vector<std::string> sw = split_words(s), rw = split_words(r), ow = split_words(o);
    require(!sw.empty() && !rw.empty() && !ow.empty(), ErrorCode::MissingField,
            "triplet component is empty");
    require(m.size() == sw.size() + rw.size() + ow.size(), ErrorCode::IndexMismatch,
            "mapping for triplet " + std::to_string(k) +
                " does not cover the triplet words");
    Triplet t;
    size_t p = 0;
    auto take = [&](const std::vector<std::string>& words, std::vector<int>& out_part) {
      for (const auto& w : words) {
        const auto& [word, idx] = m[p++];
        require(word == w, ErrorCode::IndexMismatch,
                "mapping word \"" + word + "\" does not match triplet word \"" + w + "\"");
        require(idx >= 0 && idx < n, ErrorCode::IndexMismatch,
                "mapping index " + std::to_string(idx) + " out of range");
        require(caption.tokens[idx].text == w, ErrorCode::IndexMismatch,
                "mapping points \"" + w + "\" at index " + std::to_string(idx) +
                    " but the caption token there is \"" + caption.tokens[idx].text + "\"");
        out_part.push_back(idx);
      }
    };
    take(sw, t.subject);
    take(rw, t.relation);
    take(ow, t.object);
    std::set<int> seen;
    for (const auto* part : {&t.subject, &t.relation, &t.object})
      for (int idx : *part)
        require(seen.insert(idx).second, ErrorCode::IndexMismatch,
                "triplet " + std::to_string(k) + " reuses token index " +
                    std::to_string(idx));
    sg.triplets.push_back(std::move(t));
  }
  TokenTripletMap map = map_from_triplets(n, sg);
  return {std::move(caption), std::move(sg), std::move(map)};
}

std::string annotation_to_json_line(const AnnotationRecord& record) {
  json j;
  j["caption"] = record.caption;
  j["scene_graph"] = json::array();
  for (const auto& t : record.scene_graph)
    j["scene_graph"].push_back({t[0], t[1], t[2]});
  j["all_words_indexes"] = json::array();
  for (const auto& [w, i] : record.all_words_indexes)
    j["all_words_indexes"].push_back({w, i});
  j["mapping"] = json::array();
  for (const auto& m : record.mapping) {
    json jm = json::array();
    for (const auto& [w, i] : m) jm.push_back({w, i});
    j["mapping"].push_back(std::move(jm));
  }
  return j.dump();
}

AnnotationRecord annotation_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    fail(ErrorCode::MissingField, std::string("malformed record: ") + e.what());
  }
  AnnotationRecord rec;
  try {
    for (const char* key : {"caption", "scene_graph", "all_words_indexes", "mapping"})
      require(j.contains(key), ErrorCode::MissingField,
              std::string("record is missing \"") + key + "\"");
    rec.caption = j.at("caption").get<std::string>();
    for (const auto& t : j.at("scene_graph")) {
      require(t.is_array() && t.size() == 3, ErrorCode::MissingField,
              "scene_graph entries must be [subject, relation, object]");
      rec.scene_graph.push_back({t[0].get<std::string>(), t[1].get<std::string>(),
                                 t[2].get<std::string>()});
    }
    for (const auto& p : j.at("all_words_indexes"))
      rec.all_words_indexes.emplace_back(p.at(0).get<std::string>(), p.at(1).get<int>());
    for (const auto& m : j.at("mapping")) {
      std::vector<std::pair<std::string, int>> entry;
      for (const auto& p : m)
        entry.emplace_back(p.at(0).get<std::string>(), p.at(1).get<int>());
      rec.mapping.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::MissingField, std::string("malformed record: ") + e.what());
  }
  return rec;
}

}  // namespace sgad
