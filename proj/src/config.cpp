// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/config.hpp"

#include <fstream>
#include <set>

#include "sgad/errors.hpp"

namespace sgad {

namespace {

using json = nlohmann::json;

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  require(j.is_object(), ErrorCode::InvalidConfig, where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    require(allowed.count(it.key()) > 0, ErrorCode::InvalidConfig,
            "unknown key \"" + it.key() + "\" in " + where);
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::InvalidConfig, std::string("bad value for \"") + key + "\"");
    }
  }
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  check_keys(j, "config",
             {"dataset", "model", "train", "sample", "paths", "seed"});
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, "dataset", {"size", "n_relations", "seed", "out_dir"});
    get_if(d, "size", cfg.dataset.size);
    if (d.contains("n_relations")) {
      const json& r = d.at("n_relations");
      require(r.is_array() && r.size() == 2, ErrorCode::InvalidConfig,
              "dataset.n_relations must be [min, max]");
      cfg.dataset.n_relations_min = r[0].get<int>();
      cfg.dataset.n_relations_max = r[1].get<int>();
    }
    get_if(d, "seed", cfg.dataset.seed);
    get_if(d, "out_dir", cfg.dataset.out_dir);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model", {"D", "layers", "heads", "T", "image_size"});
    get_if(m, "D", cfg.model.D);
    get_if(m, "layers", cfg.model.layers);
    get_if(m, "heads", cfg.model.heads);
    get_if(m, "T", cfg.model.T);
    get_if(m, "image_size", cfg.model.image_size);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train", {"batch", "lr", "steps", "freeze_encoder_at"});
    get_if(t, "batch", cfg.train.batch);
    get_if(t, "lr", cfg.train.lr);
    get_if(t, "steps", cfg.train.steps);
    get_if(t, "freeze_encoder_at", cfg.train.freeze_encoder_at);
  }
  if (j.contains("sample")) {
    const json& s = j.at("sample");
    check_keys(s, "sample", {"guidance_fraction", "seed", "count"});
    get_if(s, "guidance_fraction", cfg.sample.guidance_fraction);
    get_if(s, "seed", cfg.sample.seed);
    get_if(s, "count", cfg.sample.count);
  }
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    check_keys(p, "paths", {"checkpoint", "manifest"});
    get_if(p, "checkpoint", cfg.paths.checkpoint);
    get_if(p, "manifest", cfg.paths.manifest);
  }
  get_if(j, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed config: ") + e.what());
  }
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  json j;
  j["dataset"] = {{"size", dataset.size},
                  {"n_relations", {dataset.n_relations_min, dataset.n_relations_max}},
                  {"seed", dataset.seed},
                  {"out_dir", dataset.out_dir}};
  j["model"] = {{"D", model.D},
                {"layers", model.layers},
                {"heads", model.heads},
                {"T", model.T},
                {"image_size", model.image_size}};
  j["train"] = {{"batch", train.batch},
                {"lr", train.lr},
                {"steps", train.steps},
                {"freeze_encoder_at", train.freeze_encoder_at}};
  j["sample"] = {{"guidance_fraction", sample.guidance_fraction},
                 {"seed", sample.seed},
                 {"count", sample.count}};
  j["paths"] = {{"checkpoint", paths.checkpoint}, {"manifest", paths.manifest}};
  j["seed"] = seed;
  return j;
}

void RunConfig::validate() const {
  require(dataset.size >= 1, ErrorCode::InvalidConfig, "dataset.size must be >= 1");
  require(dataset.n_relations_min >= 1 && dataset.n_relations_max <= 3 &&
              dataset.n_relations_min <= dataset.n_relations_max,
          ErrorCode::InvalidConfig, "dataset.n_relations must lie within [1, 3]");
  require(!dataset.out_dir.empty(), ErrorCode::InvalidConfig,
          "dataset.out_dir must be set");
  require(model.D >= 1 && model.layers >= 1 && model.heads >= 1,
          ErrorCode::InvalidConfig, "model dimensions must be >= 1");
  require(model.D % model.heads == 0, ErrorCode::InvalidConfig,
          "model.D must be divisible by model.heads");
  require(model.T >= 1, ErrorCode::InvalidConfig, "model.T must be >= 1");
  require(model.image_size >= 8 && model.image_size % 4 == 0,
          ErrorCode::InvalidConfig, "model.image_size must be a multiple of 4");
  require(train.batch >= 1 && train.steps >= 0 && train.lr > 0.0,
          ErrorCode::InvalidConfig, "train settings out of range");
  require(train.freeze_encoder_at >= 0, ErrorCode::InvalidConfig,
          "train.freeze_encoder_at must be >= 0");
  require(sample.guidance_fraction >= 0.0 && sample.guidance_fraction <= 1.0,
          ErrorCode::InvalidConfig, "sample.guidance_fraction must be in [0,1]");
  require(sample.count >= 1, ErrorCode::InvalidConfig, "sample.count must be >= 1");
}

}  // namespace sgad
