// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgad/pipeline.hpp"
#include "sgad/synthworld.hpp"

namespace sgad {

// |a intersect b| / |a union b| with multiset semantics (min / max counts);
// 1.0 when both sides are empty.
double multiset_iou(const std::vector<std::string>& a,
                    const std::vector<std::string>& b);

struct SceneEval {
  double sg_iou = 0.0;
  double entity_iou = 0.0;
  double relation_iou = 0.0;
};

// Reference triplets are canonicalized (below/right-of swapped to the
// above/left-of direction) before comparison. The reference entity list is
// derived from the graph; the extracted entity list comes from the extractor.
SceneEval evaluate_graphs(const std::vector<std::array<std::string, 3>>& reference,
                          const ExtractedGraph& extracted);

struct EvalReport {
  std::vector<SceneEval> per_scene;
  double sg_iou = 0.0;
  double entity_iou = 0.0;
  double relation_iou = 0.0;
  int n_scenes = 0;
  std::vector<std::string> diagnostics;

  nlohmann::json to_json() const;
};

EvalReport aggregate_evals(const std::vector<SceneEval>& per_scene,
                           std::vector<std::string> diagnostics = {});

// Evaluates generated images against their scenario references using the
// oracle extractor.
EvalReport evaluate_images(const std::vector<Image>& images,
                           const std::vector<const SceneRecord*>& references,
                           const WorldConfig& cfg = {});

struct ExperimentRow {
  std::string variant;
  double sg_iou = 0.0;
  double entity_iou = 0.0;
  double relation_iou = 0.0;
  int n_scenes = 0;
  int n_samples = 0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;  // baseline, adapter_nomask, sg_adapter
  std::string csv() const;
  const ExperimentRow& row(const std::string& variant) const;
};

struct ExperimentOptions {
  std::string out_dir = "experiment";
  int scenarios = 20;
  int samples_per_scenario = 16;
  bool keep_images = true;
  bool verbose = false;
  int threads = 2;
};

// Trains the three variants identically (same seeds, steps, data), samples
// the held-out scenarios, evaluates, and writes <out_dir>/experiment.csv.
ExperimentResult run_experiment(const RunConfig& cfg, const ExperimentOptions& opts);

}  // namespace sgad
