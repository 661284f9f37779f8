// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <cstdio>
#include <queue>

#include <json.hpp>

#include "sgad/errors.hpp"
#include "sgad/png_io.hpp"

namespace sgad {

namespace {

using json = nlohmann::json;

struct Bounds {
  int min_x, max_x, min_y, max_y;
};

Bounds entity_bounds(const EntitySpec& e) {
  return {e.cx - e.size, e.cx + e.size, e.cy - e.size, e.cy + e.size};
}

bool inside_canvas(const EntitySpec& e, int canvas) {
  Bounds b = entity_bounds(e);
  return b.min_x >= 1 && b.min_y >= 1 && b.max_x <= canvas - 2 && b.max_y <= canvas - 2;
}

// Pixel sets of the two entities must not touch, even diagonally.
bool well_separated(const EntitySpec& a, const EntitySpec& b) {
  const int dx = std::abs(a.cx - b.cx);
  const int dy = std::abs(a.cy - b.cy);
  const int reach = a.size + b.size + 2;
  return dx >= reach || dy >= reach;
}

bool pixel_in_shape(const EntitySpec& e, int x, int y) {
  const int dx = x - e.cx, dy = y - e.cy;
  const int s = e.size;
  switch (e.shape) {
    case EntityShape::Circle:
      return dx * dx + dy * dy <= s * s + 2;
    case EntityShape::Square:
      return std::abs(dx) <= s && std::abs(dy) <= s;
    case EntityShape::Triangle: {
      if (dy < -s || dy > s) return false;
      const long hw = std::lround((dy + s) / 2.0);
      return std::abs(dx) <= hw;
    }
  }
  return false;
}

// Salience rule shared by the generator and the extractor: one axis must
// dominate by the margin and the dominance factor.
enum class PairAxis { None, Vertical, Horizontal };

PairAxis salient_axis(double dx, double dy, const WorldConfig& cfg) {
  const double ax = std::fabs(dx), ay = std::fabs(dy);
  if (ay >= cfg.margin_px && ay >= cfg.dominance * ax) return PairAxis::Vertical;
  if (ax >= cfg.margin_px && ax >= cfg.dominance * ay) return PairAxis::Horizontal;
  return PairAxis::None;
}

bool relation_holds(const EntitySpec& s, const EntitySpec& o, Predicate p,
                    const WorldConfig& cfg) {
  const double dx = o.cx - s.cx, dy = o.cy - s.cy;
  switch (p) {
    case Predicate::Above:
      return salient_axis(dx, dy, cfg) == PairAxis::Vertical && dy > 0;
    case Predicate::Below:
      return salient_axis(dx, dy, cfg) == PairAxis::Vertical && dy < 0;
    case Predicate::LeftOf:
      return salient_axis(dx, dy, cfg) == PairAxis::Horizontal && dx > 0;
    case Predicate::RightOf:
      return salient_axis(dx, dy, cfg) == PairAxis::Horizontal && dx < 0;
  }
  return false;
}

std::pair<int, int> ordered_pair(int a, int b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

// Scene layout patterns expressible in the caption grammar.
enum class Pattern { Single, SharedSubject, Chain, SharedObject, ThreeRel };

std::vector<SceneRelation> pattern_relations(Pattern pat, Rng& rng) {
  auto pred = [&rng]() { return static_cast<Predicate>(rng.uniform_int(0, 3)); };
  switch (pat) {
    case Pattern::Single:
      return {{0, 1, pred()}};
    case Pattern::SharedSubject:
      return {{0, 1, pred()}, {0, 2, pred()}};
    case Pattern::Chain:
      return {{0, 1, pred()}, {1, 2, pred()}};
    case Pattern::SharedObject:
      return {{0, 2, pred()}, {1, 2, pred()}};
    case Pattern::ThreeRel: {
      // Random predicate triangles are mostly unplaceable on a 32px canvas,
      // so bias toward the broadly satisfiable family: both E1 and E2 on the
      // same side of E0, split along the orthogonal axis.
      if (rng.uniform() < 0.8) {
        const bool vertical = rng.uniform() < 0.5;
        const Predicate side =
            vertical ? (rng.uniform() < 0.5 ? Predicate::Above : Predicate::Below)
                     : (rng.uniform() < 0.5 ? Predicate::LeftOf : Predicate::RightOf);
        const Predicate split =
            vertical ? (rng.uniform() < 0.5 ? Predicate::LeftOf : Predicate::RightOf)
                     : (rng.uniform() < 0.5 ? Predicate::Above : Predicate::Below);
        return {{0, 1, side}, {0, 2, side}, {1, 2, split}};
      }
      return {{0, 1, pred()}, {0, 2, pred()}, {1, 2, pred()}};
    }
  }
  return {};
}

// Caption text for a relation list. single_clause applies to the
// shared-subject prefix (relations 0 and 1 sharing subject 0).
std::string caption_text(const std::vector<EntitySpec>& entities,
                         const std::vector<SceneRelation>& rels,
                         bool single_clause) {
  auto np = [&](int i) { return entities[static_cast<size_t>(i)].phrase(); };
  std::string out;
  if (rels.size() == 1) {
    out = np(rels[0].subject) + " " + predicate_text(rels[0].pred) + " " +
          np(rels[0].object);
  } else if (rels.size() == 2 && single_clause && rels[0].subject == rels[1].subject) {
    out = np(rels[0].subject) + " " + predicate_text(rels[0].pred) + " " +
          np(rels[0].object) + " " + predicate_text(rels[1].pred) + " " +
          np(rels[1].object);
  } else if (rels.size() == 3 && rels[0].subject == rels[1].subject) {
    // shared-subject clause + closing clause
    out = np(rels[0].subject) + " " + predicate_text(rels[0].pred) + " " +
          np(rels[0].object) + " " + predicate_text(rels[1].pred) + " " +
          np(rels[1].object) + " and " + np(rels[2].subject) + " " +
          predicate_text(rels[2].pred) + " " + np(rels[2].object);
  } else {
    for (size_t i = 0; i < rels.size(); ++i) {
      if (i) out += " and ";
      out += np(rels[i].subject) + " " + predicate_text(rels[i].pred) + " " +
             np(rels[i].object);
    }
  }
  return out;
}

// True if three same-axis predicates over entities {0,1,2} form a directed
// cycle (vertical stacks cannot close back on themselves).
bool cyclic_triangle(const std::vector<SceneRelation>& rels) {
  if (rels.size() != 3) return false;
  auto vertical = [](Predicate p) {
    return p == Predicate::Above || p == Predicate::Below;
  };
  const bool all_v = vertical(rels[0].pred) && vertical(rels[1].pred) &&
                     vertical(rels[2].pred);
  const bool all_h = !vertical(rels[0].pred) && !vertical(rels[1].pred) &&
                     !vertical(rels[2].pred);
  if (!all_v && !all_h) return false;
  // orientation of each triangle edge: +1 if the lower-numbered entity comes
  // first along the axis
  int dir[3] = {0, 0, 0};  // edges (0,1), (0,2), (1,2)
  for (const auto& r : rels) {
    const bool forward = r.pred == Predicate::Above || r.pred == Predicate::LeftOf;
    const int lo = std::min(r.subject, r.object);
    const int hi = std::max(r.subject, r.object);
    const int edge = (lo == 0) ? (hi == 1 ? 0 : 1) : 2;
    const bool subject_first = forward;
    dir[edge] = (r.subject == lo) == subject_first ? +1 : -1;
  }
  return dir[0] == dir[2] && dir[1] != dir[0];
}

// Places entities so every listed relation holds with margin and no unlisted
// pair is salient. Entities are placed along the relation graph: the first
// uniformly, each next one by sampling displacements that satisfy one
// relation to an already-placed entity, with local retries against the
// remaining pair constraints. Returns false when the budget is used up.
bool try_place(Rng& rng, std::vector<EntitySpec>& entities,
               const std::vector<SceneRelation>& rels, const WorldConfig& cfg,
               int attempts_budget, int* attempts_used) {
  const int n = static_cast<int>(entities.size());
  std::vector<std::pair<int, int>> listed;
  for (const auto& r : rels) listed.push_back(ordered_pair(r.subject, r.object));
  if (cfg.margin_px > cfg.canvas - 4) {
    *attempts_used = attempts_budget > 0 ? *attempts_used + attempts_budget : *attempts_used;
    return false;
  }

  // All constraints over a pair of placed entities.
  auto pair_ok = [&](int i, int j) {
    if (!well_separated(entities[i], entities[j])) return false;
    bool is_listed = false;
    for (size_t ri = 0; ri < rels.size(); ++ri) {
      const auto& r = rels[ri];
      if (ordered_pair(r.subject, r.object) == ordered_pair(i, j)) {
        is_listed = true;
        if (!relation_holds(entities[r.subject], entities[r.object], r.pred, cfg))
          return false;
      }
    }
    if (!is_listed) {
      const double dx = entities[j].cx - entities[i].cx;
      const double dy = entities[j].cy - entities[i].cy;
      if (salient_axis(dx, dy, cfg) != PairAxis::None) return false;
    }
    return true;
  };

  for (int attempt = 0; attempt < attempts_budget; ++attempt) {
    ++*attempts_used;
    bool ok = true;
    std::vector<int> placed;
    {
      auto& e0 = entities[0];
      const int lo = e0.size + 1, hi = cfg.canvas - 2 - e0.size;
      if (lo > hi) return false;
      e0.cx = rng.uniform_int(lo, hi);
      e0.cy = rng.uniform_int(lo, hi);
      placed.push_back(0);
    }
    while (static_cast<int>(placed.size()) < n && ok) {
      // find a relation joining a placed and an unplaced entity
      auto is_placed = [&](int e) {
        return std::find(placed.begin(), placed.end(), e) != placed.end();
      };
      int rel_idx = -1;
      bool subject_placed = false;
      for (size_t ri = 0; ri < rels.size(); ++ri) {
        const auto& r = rels[ri];
        if (is_placed(r.subject) && !is_placed(r.object)) {
          rel_idx = static_cast<int>(ri);
          subject_placed = true;
          break;
        }
        if (is_placed(r.object) && !is_placed(r.subject)) {
          rel_idx = static_cast<int>(ri);
          subject_placed = false;
          break;
        }
      }
      if (rel_idx < 0) { ok = false; break; }  // disconnected layout
      const auto& r = rels[static_cast<size_t>(rel_idx)];
      const int target_id = subject_placed ? r.object : r.subject;
      const EntitySpec& anchor = entities[subject_placed ? r.subject : r.object];
      EntitySpec& target = entities[target_id];

      bool target_ok = false;
      for (int local = 0; local < 40 && !target_ok; ++local) {
        // Displacement from subject to object in the predicate's direction.
        const int dominant = rng.uniform_int(cfg.margin_px, cfg.canvas - 4);
        const int ortho_max = static_cast<int>(dominant / cfg.dominance);
        const int ortho = rng.uniform_int(-ortho_max, ortho_max);
        int dx = 0, dy = 0;
        switch (r.pred) {
          case Predicate::Above: dy = dominant; dx = ortho; break;
          case Predicate::Below: dy = -dominant; dx = ortho; break;
          case Predicate::LeftOf: dx = dominant; dy = ortho; break;
          case Predicate::RightOf: dx = -dominant; dy = ortho; break;
        }
        if (!subject_placed) { dx = -dx; dy = -dy; }
        target.cx = anchor.cx + dx;
        target.cy = anchor.cy + dy;
        if (!inside_canvas(target, cfg.canvas)) continue;
        target_ok = true;
        for (int p : placed)
          if (!pair_ok(std::min(p, target_id), std::max(p, target_id)))
            target_ok = false;
      }
      if (!target_ok) { ok = false; break; }
      placed.push_back(target_id);
    }
    if (ok) return true;
  }
  return false;
}

SynthScene finish_scene(std::vector<EntitySpec> entities,
                        std::vector<SceneRelation> rels, bool single_clause,
                        const WorldConfig& cfg, uint64_t seed) {
  SynthScene scene;
  scene.entities = std::move(entities);
  scene.relations = std::move(rels);
  scene.seed = seed;
  scene.image = render(scene.entities, cfg.canvas);
  scene.caption = tokenize(caption_text(scene.entities, scene.relations, single_clause));
  auto [sg, map] = parse_caption(scene.caption, RelationLexicon::defaults());
  scene.sg = std::move(sg);
  scene.map = std::move(map);
  // The parser must reproduce the intended bindings exactly.
  require(scene.sg.size() == static_cast<int>(scene.relations.size()),
          ErrorCode::GrammarError, "scene caption parse disagrees with layout");
  for (size_t k = 0; k < scene.relations.size(); ++k) {
    const auto& r = scene.relations[k];
    const auto& t = scene.sg.triplets[k];
    require(phrase_text(scene.caption, t.subject) ==
                    scene.entities[static_cast<size_t>(r.subject)].phrase() &&
                phrase_text(scene.caption, t.relation) == predicate_text(r.pred) &&
                phrase_text(scene.caption, t.object) ==
                    scene.entities[static_cast<size_t>(r.object)].phrase(),
            ErrorCode::GrammarError, "scene caption parse disagrees with layout");
  }
  return scene;
}

}  // namespace

Rgb palette_color(EntityColor c) {
  switch (c) {
    case EntityColor::Red: return {255, 0, 0};
    case EntityColor::Green: return {0, 255, 0};
    case EntityColor::Blue: return {0, 0, 255};
    case EntityColor::Yellow: return {255, 255, 0};
  }
  return kWhite;
}

std::string shape_name(EntityShape s) {
  switch (s) {
    case EntityShape::Circle: return "circle";
    case EntityShape::Square: return "square";
    case EntityShape::Triangle: return "triangle";
  }
  return "?";
}

std::string color_name(EntityColor c) {
  switch (c) {
    case EntityColor::Red: return "red";
    case EntityColor::Green: return "green";
    case EntityColor::Blue: return "blue";
    case EntityColor::Yellow: return "yellow";
  }
  return "?";
}

std::string predicate_text(Predicate p) {
  switch (p) {
    case Predicate::Above: return "above";
    case Predicate::Below: return "below";
    case Predicate::LeftOf: return "left of";
    case Predicate::RightOf: return "right of";
  }
  return "?";
}

std::string EntitySpec::phrase() const {
  return "a " + color_name(color) + " " + shape_name(shape);
}

Tensor image_to_tensor(const Image& img) {
  const int h = img.height, w = img.width;
  std::vector<double> data(static_cast<size_t>(3) * h * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t src = (static_cast<size_t>(y) * w + x) * 3;
      for (int c = 0; c < 3; ++c)
        data[static_cast<size_t>(c) * h * w + static_cast<size_t>(y) * w + x] =
            img.rgb[src + c] / 255.0 * 2.0 - 1.0;
    }
  }
  return Tensor::from_data({3, h, w}, std::move(data));
}

Image tensor_to_image(const Tensor& t) {
  require(t.ndim() == 3 && t.dim(0) == 3, ErrorCode::ShapeMismatch,
          "expected a [3,H,W] tensor");
  Image img;
  img.height = t.dim(1);
  img.width = t.dim(2);
  img.rgb.assign(static_cast<size_t>(img.width) * img.height * 3, 0);
  const auto d = t.data();
  const size_t plane = static_cast<size_t>(img.height) * img.width;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const size_t px = static_cast<size_t>(y) * img.width + x;
      for (int c = 0; c < 3; ++c) {
        double v = (d[c * plane + px] + 1.0) / 2.0 * 255.0;
        long b = std::lround(v);
        img.rgb[px * 3 + c] = static_cast<uint8_t>(std::clamp(b, 0L, 255L));
      }
    }
  }
  return img;
}

Image render(const std::vector<EntitySpec>& entities, int canvas) {
  Image img;
  img.width = img.height = canvas;
  img.rgb.assign(static_cast<size_t>(canvas) * canvas * 3, 255);
  for (const auto& e : entities) {
    require(inside_canvas(e, canvas), ErrorCode::OutOfCanvas,
            e.phrase() + " does not fit the canvas");
    const Rgb col = palette_color(e.color);
    Bounds b = entity_bounds(e);
    for (int y = b.min_y; y <= b.max_y; ++y) {
      for (int x = b.min_x; x <= b.max_x; ++x) {
        if (!pixel_in_shape(e, x, y)) continue;
        const size_t i = (static_cast<size_t>(y) * canvas + x) * 3;
        img.rgb[i] = col.r;
        img.rgb[i + 1] = col.g;
        img.rgb[i + 2] = col.b;
      }
    }
  }
  return img;
}

ExtractedGraph extract_scene_graph(const Image& img, const WorldConfig& cfg) {
  const int w = img.width, h = img.height;
  ExtractedGraph out;

  // Per-pixel palette classification (-1 = background/unmatched).
  std::vector<int> color_of(static_cast<size_t>(w) * h, -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Rgb px = img.at(x, y);
      int best = -1, best_diff = cfg.color_tolerance + 1;
      for (int c = 0; c < 4; ++c) {
        const Rgb pal = palette_color(static_cast<EntityColor>(c));
        const int diff = std::max({std::abs(px.r - pal.r), std::abs(px.g - pal.g),
                                   std::abs(px.b - pal.b)});
        if (diff <= cfg.color_tolerance && diff < best_diff) {
          best = c;
          best_diff = diff;
        }
      }
      color_of[static_cast<size_t>(y) * w + x] = best;
    }
  }

  struct Component {
    EntityColor color;
    EntityShape shape;
    double cx, cy;
  };
  std::vector<Component> comps;
  std::vector<char> seen(static_cast<size_t>(w) * h, 0);
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const size_t start = static_cast<size_t>(y0) * w + x0;
      if (seen[start] || color_of[start] < 0) continue;
      const int color = color_of[start];
      // 4-connected flood fill
      std::vector<std::pair<int, int>> pixels;
      std::queue<std::pair<int, int>> frontier;
      frontier.push({x0, y0});
      seen[start] = 1;
      while (!frontier.empty()) {
        auto [x, y] = frontier.front();
        frontier.pop();
        pixels.push_back({x, y});
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
          const size_t ni = static_cast<size_t>(ny[k]) * w + nx[k];
          if (seen[ni] || color_of[ni] != color) continue;
          seen[ni] = 1;
          frontier.push({nx[k], ny[k]});
        }
      }
      if (static_cast<int>(pixels.size()) < cfg.min_component_px) continue;

      int min_x = w, max_x = -1, min_y = h, max_y = -1;
      for (auto [x, y] : pixels) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
      const double fill = static_cast<double>(pixels.size()) /
                          ((max_x - min_x + 1) * (max_y - min_y + 1));
      EntityShape shape;
      if (fill >= 0.9) {
        shape = EntityShape::Square;
      } else if (fill >= 0.65) {
        shape = EntityShape::Circle;
      } else if (fill >= 0.35) {
        shape = EntityShape::Triangle;
      } else {
        out.diagnostics.push_back(
            "UnrecognizableComponent: " + color_name(static_cast<EntityColor>(color)) +
            " component of " + std::to_string(pixels.size()) + "px, fill ratio " +
            std::to_string(fill));
        continue;
      }
      comps.push_back({static_cast<EntityColor>(color), shape,
                       (min_x + max_x) / 2.0, (min_y + max_y) / 2.0});
    }
  }

  for (const auto& c : comps)
    out.entities.push_back("a " + color_name(c.color) + " " + shape_name(c.shape));

  for (size_t i = 0; i < comps.size(); ++i) {
    for (size_t j = i + 1; j < comps.size(); ++j) {
      const double dx = comps[j].cx - comps[i].cx;
      const double dy = comps[j].cy - comps[i].cy;
      switch (salient_axis(dx, dy, cfg)) {
        case PairAxis::Vertical: {
          const size_t upper = dy > 0 ? i : j;
          const size_t lower = dy > 0 ? j : i;
          out.triplets.push_back({out.entities[upper], "above", out.entities[lower]});
          break;
        }
        case PairAxis::Horizontal: {
          const size_t left = dx > 0 ? i : j;
          const size_t right = dx > 0 ? j : i;
          out.triplets.push_back({out.entities[left], "left of", out.entities[right]});
          break;
        }
        case PairAxis::None:
          break;
      }
    }
  }
  return out;
}

std::array<std::string, 3> canonical_triplet(const std::string& s,
                                             const std::string& r,
                                             const std::string& o) {
  if (r == "below") return {o, "above", s};
  if (r == "right of") return {o, "left of", s};
  return {s, r, o};
}

SynthScene sample_scene(Rng& rng, int n_relations, const WorldConfig& cfg,
                        const std::set<std::pair<int, int>>* forbidden_pairs) {
  require(n_relations >= 1 && n_relations <= 3, ErrorCode::InvalidConfig,
          "n_relations must be in [1, 3]");
  const uint64_t seed_tag = rng.next_u64();
  const int n_entities = n_relations == 1 ? 2 : 3;
  int attempts_used = 0;
  int structural_draws = 0;

  while (attempts_used < cfg.max_rejections && structural_draws < 2000) {
    ++structural_draws;
    Pattern pat;
    if (n_relations == 1) {
      pat = Pattern::Single;
    } else if (n_relations == 2) {
      pat = static_cast<Pattern>(1 + rng.uniform_int(0, 2));
    } else {
      pat = Pattern::ThreeRel;
    }

    std::vector<EntitySpec> entities;
    std::set<int> used_types;
    bool distinct = true;
    for (int i = 0; i < n_entities; ++i) {
      EntitySpec e;
      e.shape = static_cast<EntityShape>(rng.uniform_int(0, 2));
      e.color = static_cast<EntityColor>(rng.uniform_int(0, 3));
      e.size = rng.uniform_int(cfg.min_size, cfg.max_size);
      if (!used_types.insert(e.type_id()).second) distinct = false;
      entities.push_back(e);
    }
    if (!distinct) continue;

    std::vector<SceneRelation> rels = pattern_relations(pat, rng);
    if (cyclic_triangle(rels)) continue;
    if (forbidden_pairs) {
      bool blocked = false;
      for (const auto& r : rels) {
        auto key = ordered_pair(entities[static_cast<size_t>(r.subject)].type_id(),
                                entities[static_cast<size_t>(r.object)].type_id());
        if (forbidden_pairs->count(key)) blocked = true;
      }
      if (blocked) continue;
    }
    const bool single_clause =
        (pat == Pattern::SharedSubject && rng.uniform() < 0.5) ||
        pat == Pattern::ThreeRel || pat == Pattern::Single;

    const int budget =
        std::min(n_relations == 3 ? 150 : 300, cfg.max_rejections - attempts_used);
    if (try_place(rng, entities, rels, cfg, budget, &attempts_used))
      return finish_scene(std::move(entities), std::move(rels), single_clause,
                          cfg, seed_tag);
  }
  fail(ErrorCode::SamplingExhausted,
       "no consistent placement after " + std::to_string(attempts_used) +
           " rejections");
}

std::optional<SynthScene> sample_scene_for_layout(
    Rng& rng, std::vector<EntitySpec> entities,
    const std::vector<SceneRelation>& relations, bool single_clause,
    const WorldConfig& cfg) {
  const uint64_t seed_tag = rng.next_u64();
  int attempts_used = 0;
  if (!try_place(rng, entities, relations, cfg, cfg.max_rejections, &attempts_used))
    return std::nullopt;
  return finish_scene(std::move(entities), relations, single_clause, cfg, seed_tag);
}

HoldoutSpec HoldoutSpec::make(uint64_t seed) {
  Rng rng = Rng::derive(seed, 0x484f4c44ULL);  // "HOLD"
  std::vector<int> t(12);
  for (int i = 0; i < 12; ++i) t[i] = i;
  for (int i = 11; i > 0; --i) std::swap(t[i], t[rng.uniform_int(0, i)]);

  HoldoutSpec spec;
  auto hold = [&spec, &t](int a, int b) {
    spec.pairs.insert(ordered_pair(t[a], t[b]));
  };
  // One triangle (supports 3-relation scenarios), two shared-vertex stars,
  // and a few scattered pairs.
  hold(0, 1); hold(0, 2); hold(1, 2);
  hold(3, 4); hold(3, 5); hold(3, 6);
  hold(7, 8); hold(7, 9);
  hold(10, 11); hold(4, 8); hold(5, 10); hold(2, 9); hold(6, 11);
  return spec;
}

bool HoldoutSpec::holds_pair(int type_a, int type_b) const {
  return pairs.count(ordered_pair(type_a, type_b)) > 0;
}

bool HoldoutSpec::scene_uses_holdout(const SynthScene& scene) const {
  for (const auto& r : scene.relations) {
    if (holds_pair(scene.entities[static_cast<size_t>(r.subject)].type_id(),
                   scene.entities[static_cast<size_t>(r.object)].type_id()))
      return true;
  }
  return false;
}

std::string scene_record_to_json_line(const SceneRecord& rec) {
  json j;
  j["id"] = rec.id;
  j["image_path"] = rec.image_path;
  j["caption"] = rec.caption;
  j["scene_graph"] = json::array();
  for (const auto& t : rec.scene_graph) j["scene_graph"].push_back({t[0], t[1], t[2]});
  j["mapping"] = rec.mapping;
  j["seed"] = rec.seed;
  return j.dump();
}

SceneRecord scene_record_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    fail(ErrorCode::MissingField, std::string("malformed scene record: ") + e.what());
  }
  SceneRecord rec;
  try {
    rec.id = j.at("id").get<std::string>();
    rec.image_path = j.at("image_path").get<std::string>();
    rec.caption = j.at("caption").get<std::string>();
    for (const auto& t : j.at("scene_graph"))
      rec.scene_graph.push_back({t.at(0).get<std::string>(), t.at(1).get<std::string>(),
                                 t.at(2).get<std::string>()});
    rec.mapping = j.at("mapping").get<std::vector<std::vector<int>>>();
    rec.seed = j.at("seed").get<uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::MissingField, std::string("malformed scene record: ") + e.what());
  }
  return rec;
}

void write_manifest(const std::string& path, const std::vector<SceneRecord>& records) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write manifest " + path);
  for (const auto& r : records) out << scene_record_to_json_line(r) << '\n';
  require(out.good(), ErrorCode::IoError, "failed writing manifest " + path);
}

std::vector<SceneRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingDataset, "manifest not found: " + path);
  std::vector<SceneRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(scene_record_from_json_line(line));
  }
  return records;
}

SceneRecord record_from_scene(const SynthScene& scene, const std::string& id,
                              const std::string& image_path) {
  SceneRecord rec;
  rec.id = id;
  rec.image_path = image_path;
  rec.caption = scene.caption.text;
  for (const auto& t : scene.sg.triplets)
    rec.scene_graph.push_back({phrase_text(scene.caption, t.subject),
                               phrase_text(scene.caption, t.relation),
                               phrase_text(scene.caption, t.object)});
  rec.mapping = scene.map.membership;
  rec.seed = scene.seed;
  return rec;
}

std::vector<SceneRecord> build_eval_scenarios(uint64_t seed, int count,
                                              const HoldoutSpec& holdout,
                                              const WorldConfig& cfg) {
  // Adjacency of held-out pairs over the 12 entity types.
  std::vector<std::vector<int>> adj(12);
  for (const auto& [a, b] : holdout.pairs) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<std::array<int, 3>> triangles;
  for (const auto& [a, b] : holdout.pairs)
    for (int c = 0; c < 12; ++c)
      if (c != a && c != b && holdout.holds_pair(a, c) && holdout.holds_pair(b, c) &&
          c > b)
        triangles.push_back({a, b, c});
  std::vector<int> hubs;
  for (int v = 0; v < 12; ++v)
    if (adj[v].size() >= 2) hubs.push_back(v);
  require(!hubs.empty(), ErrorCode::InvalidConfig, "holdout set has no hub");

  auto entity_for_type = [](int type, Rng& rng, const WorldConfig& wc) {
    EntitySpec e;
    e.shape = static_cast<EntityShape>(type / 4);
    e.color = static_cast<EntityColor>(type % 4);
    e.size = rng.uniform_int(wc.min_size, wc.max_size);
    return e;
  };

  std::vector<SceneRecord> scenarios;
  std::set<std::string> combos_seen;
  int stream = 0;
  while (static_cast<int>(scenarios.size()) < count) {
    Rng rng = Rng::derive(seed, 0x5343454eULL, static_cast<uint64_t>(stream++));
    require(stream < 100000, ErrorCode::SamplingExhausted,
            "could not build enough distinct evaluation scenarios");

    const bool want_three =
        !triangles.empty() && (static_cast<int>(scenarios.size()) % 10 >= 7);
    std::vector<int> types;
    std::vector<SceneRelation> rels;
    bool single_clause = false;
    if (want_three) {
      const auto& tri = triangles[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int>(triangles.size()) - 1))];
      types = {tri[0], tri[1], tri[2]};
      rels = pattern_relations(Pattern::ThreeRel, rng);
      single_clause = true;
    } else {
      const int hub = hubs[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int>(hubs.size()) - 1))];
      int a = adj[hub][static_cast<size_t>(
          rng.uniform_int(0, static_cast<int>(adj[hub].size()) - 1))];
      int b = adj[hub][static_cast<size_t>(
          rng.uniform_int(0, static_cast<int>(adj[hub].size()) - 1))];
      if (a == b) continue;
      types = {hub, a, b};
      const Pattern pat = static_cast<Pattern>(1 + rng.uniform_int(0, 2));
      // Relations must sit on held-out pairs (hub-a and hub-b).
      auto pred = [&rng]() { return static_cast<Predicate>(rng.uniform_int(0, 3)); };
      switch (pat) {
        case Pattern::SharedSubject:
          rels = {{0, 1, pred()}, {0, 2, pred()}};
          single_clause = rng.uniform() < 0.5;
          break;
        case Pattern::Chain:
          rels = {{1, 0, pred()}, {0, 2, pred()}};
          break;
        default:
          rels = {{1, 0, pred()}, {2, 0, pred()}};
          break;
      }
    }

    std::vector<EntitySpec> entities;
    for (int t : types) entities.push_back(entity_for_type(t, rng, cfg));

    // Distinctness of the relation combination across scenarios.
    std::vector<std::string> combo;
    for (const auto& r : rels)
      combo.push_back(entities[static_cast<size_t>(r.subject)].phrase() + "|" +
                      predicate_text(r.pred) + "|" +
                      entities[static_cast<size_t>(r.object)].phrase());
    std::sort(combo.begin(), combo.end());
    std::string key;
    for (const auto& c : combo) key += c + ";";
    if (combos_seen.count(key)) continue;

    auto scene = sample_scene_for_layout(rng, entities, rels, single_clause, cfg);
    if (!scene) continue;
    combos_seen.insert(key);
    char name[32];
    std::snprintf(name, sizeof(name), "scenario_%03d",
                  static_cast<int>(scenarios.size()));
    scenarios.push_back(record_from_scene(*scene, name, ""));
  }
  return scenarios;
}

}  // namespace sgad
