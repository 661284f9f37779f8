// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sgad/rng.hpp"
#include "sgad/sgtext.hpp"
#include "sgad/tensor.hpp"

namespace sgad {

enum class EntityShape { Circle, Square, Triangle };
enum class EntityColor { Red, Green, Blue, Yellow };
enum class Predicate { Above, Below, LeftOf, RightOf };

struct Rgb {
  uint8_t r, g, b;
};

Rgb palette_color(EntityColor c);
constexpr Rgb kWhite{255, 255, 255};

std::string shape_name(EntityShape s);
std::string color_name(EntityColor c);
std::string predicate_text(Predicate p);

struct EntitySpec {
  EntityShape shape;
  EntityColor color;
  int cx = 0;
  int cy = 0;
  int size = 5;  // radius / half-side, 4..7

  // "a red circle"
  std::string phrase() const;
  // Dense type id in [0, 12): shape * 4 + color.
  int type_id() const { return static_cast<int>(shape) * 4 + static_cast<int>(color); }
};

struct SceneRelation {
  int subject = 0;
  int object = 0;
  Predicate pred = Predicate::Above;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel

  Rgb at(int x, int y) const {
    size_t i = (static_cast<size_t>(y) * width + x) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
};

// [3,H,W] tensor in [-1,1] <-> 8-bit image (clamped).
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

struct WorldConfig {
  int canvas = 32;
  int min_size = 4;
  int max_size = 7;
  int margin_px = 6;        // minimum axis displacement for a relation
  double dominance = 2.0;   // winning axis must be >= dominance * other axis
  int color_tolerance = 10; // per-channel match tolerance in the extractor
  int min_component_px = 8;
  int max_rejections = 10000;
};

struct SynthScene {
  std::vector<EntitySpec> entities;
  std::vector<SceneRelation> relations;
  Image image;
  Caption caption;
  SceneGraph sg;
  TokenTripletMap map;
  uint64_t seed = 0;
};

// White background, hard-edged palette shapes. Throws OutOfCanvas if an
// entity sticks out.
Image render(const std::vector<EntitySpec>& entities, int canvas = 32);

struct ExtractedGraph {
  std::vector<std::array<std::string, 3>> triplets;  // canonical direction
  std::vector<std::string> entities;                 // "a red circle", ...
  std::vector<std::string> diagnostics;              // skipped components
};

// Deterministic oracle standing in for the vision-language extractor:
// palette connected components, bounding-box fill-ratio shape classification,
// displacement-based predicates.
ExtractedGraph extract_scene_graph(const Image& img, const WorldConfig& cfg = {});

// Normalizes "below"/"right of" triplets to the canonical "above"/"left of"
// direction used by the extractor.
std::array<std::string, 3> canonical_triplet(const std::string& s,
                                             const std::string& r,
                                             const std::string& o);

// Rejection-samples a relational scene: entities, consistent placements,
// caption, graph and token map (caption parse round-trips by construction).
SynthScene sample_scene(Rng& rng, int n_relations, const WorldConfig& cfg = {},
                        const std::set<std::pair<int, int>>* forbidden_pairs = nullptr);

// Same, but for a fixed entity/relation layout (used for held-out scenarios).
// Returns nothing if the layout cannot be placed within the rejection budget.
std::optional<SynthScene> sample_scene_for_layout(
    Rng& rng, std::vector<EntitySpec> entities,
    const std::vector<SceneRelation>& relations, bool single_clause,
    const WorldConfig& cfg = {});

// Held-out (entity-type, entity-type) pairs: relations over these pairs never
// occur in training scenes and make up the evaluation scenarios.
struct HoldoutSpec {
  std::set<std::pair<int, int>> pairs;  // unordered, first < second

  static HoldoutSpec make(uint64_t seed);
  bool holds_pair(int type_a, int type_b) const;
  bool scene_uses_holdout(const SynthScene& scene) const;
};

// One dataset row (JSON Lines manifest).
struct SceneRecord {
  std::string id;
  std::string image_path;
  std::string caption;
  std::vector<std::array<std::string, 3>> scene_graph;
  std::vector<std::vector<int>> mapping;  // per-token triplet memberships
  uint64_t seed = 0;
};

std::string scene_record_to_json_line(const SceneRecord& rec);
SceneRecord scene_record_from_json_line(const std::string& line);

void write_manifest(const std::string& path, const std::vector<SceneRecord>& records);
std::vector<SceneRecord> read_manifest(const std::string& path);

SceneRecord record_from_scene(const SynthScene& scene, const std::string& id,
                              const std::string& image_path);

// Evaluation scenarios: 2-3 relations drawn entirely from held-out pairs.
std::vector<SceneRecord> build_eval_scenarios(uint64_t seed, int count,
                                              const HoldoutSpec& holdout,
                                              const WorldConfig& cfg = {});

}  // namespace sgad
