// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace sgad {

struct DatasetConfig {
  int size = 5000;
  int n_relations_min = 1;
  int n_relations_max = 3;
  uint64_t seed = 1;
  std::string out_dir = "dataset";
};

struct ModelConfig {
  int D = 64;
  int layers = 2;
  int heads = 4;
  int T = 200;
  int image_size = 32;
};

struct TrainConfig {
  int batch = 4;
  double lr = 1e-5;
  int steps = 2000;
  int freeze_encoder_at = 500;
};

struct SampleConfig {
  double guidance_fraction = 0.3;
  uint64_t seed = 0;
  int count = 1;
};

struct PathsConfig {
  std::string checkpoint = "model.sgad";
  std::string manifest = "dataset/manifest.jsonl";
};

// Strict configuration: unknown keys are rejected so experiment typos fail
// loudly.
struct RunConfig {
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  SampleConfig sample;
  PathsConfig paths;
  uint64_t seed = 0;  // global seed (--seed)

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_json_file(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;
};

}  // namespace sgad
