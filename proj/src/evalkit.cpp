// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/evalkit.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "sgad/errors.hpp"
#include "sgad/png_io.hpp"

namespace sgad {

namespace fs = std::filesystem;

double multiset_iou(const std::vector<std::string>& a,
                    const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::map<std::string, int> ca, cb;
  for (const auto& s : a) ++ca[s];
  for (const auto& s : b) ++cb[s];
  int inter = 0, uni = 0;
  for (const auto& [key, na] : ca) {
    auto it = cb.find(key);
    const int nb = it == cb.end() ? 0 : it->second;
    inter += std::min(na, nb);
    uni += std::max(na, nb);
  }
  for (const auto& [key, nb] : cb)
    if (!ca.count(key)) uni += nb;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

namespace {

std::string triplet_key(const std::array<std::string, 3>& t) {
  return t[0] + " | " + t[1] + " | " + t[2];
}

}  // namespace

SceneEval evaluate_graphs(const std::vector<std::array<std::string, 3>>& reference,
                          const ExtractedGraph& extracted) {
  std::vector<std::string> ref_triplets, ref_relations, ref_entities;
  std::set<std::string> ref_entity_set;
  for (const auto& t : reference) {
    auto canon = canonical_triplet(t[0], t[1], t[2]);
    ref_triplets.push_back(triplet_key(canon));
    ref_relations.push_back(canon[1]);
    ref_entity_set.insert(canon[0]);
    ref_entity_set.insert(canon[2]);
  }
  ref_entities.assign(ref_entity_set.begin(), ref_entity_set.end());

  std::vector<std::string> ext_triplets, ext_relations;
  for (const auto& t : extracted.triplets) {
    ext_triplets.push_back(triplet_key(t));
    ext_relations.push_back(t[1]);
  }

  SceneEval eval;
  eval.sg_iou = multiset_iou(ref_triplets, ext_triplets);
  eval.entity_iou = multiset_iou(ref_entities, extracted.entities);
  eval.relation_iou = multiset_iou(ref_relations, ext_relations);
  return eval;
}

EvalReport aggregate_evals(const std::vector<SceneEval>& per_scene,
                           std::vector<std::string> diagnostics) {
  EvalReport report;
  report.per_scene = per_scene;
  report.diagnostics = std::move(diagnostics);
  report.n_scenes = static_cast<int>(per_scene.size());
  for (const auto& e : per_scene) {
    report.sg_iou += e.sg_iou;
    report.entity_iou += e.entity_iou;
    report.relation_iou += e.relation_iou;
  }
  if (report.n_scenes > 0) {
    report.sg_iou /= report.n_scenes;
    report.entity_iou /= report.n_scenes;
    report.relation_iou /= report.n_scenes;
  }
  return report;
}

EvalReport evaluate_images(const std::vector<Image>& images,
                           const std::vector<const SceneRecord*>& references,
                           const WorldConfig& cfg) {
  require(images.size() == references.size(), ErrorCode::MissingReference,
          "image/reference count mismatch");
  std::vector<SceneEval> evals;
  std::vector<std::string> diagnostics;
  for (size_t i = 0; i < images.size(); ++i) {
    require(references[i] != nullptr, ErrorCode::MissingReference,
            "missing reference graph");
    ExtractedGraph ext = extract_scene_graph(images[i], cfg);
    evals.push_back(evaluate_graphs(references[i]->scene_graph, ext));
    for (const auto& d : ext.diagnostics)
      diagnostics.push_back(references[i]->id + ": " + d);
  }
  return aggregate_evals(evals, std::move(diagnostics));
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["sg_iou"] = sg_iou;
  j["entity_iou"] = entity_iou;
  j["relation_iou"] = relation_iou;
  j["n_scenes"] = n_scenes;
  j["per_scene"] = nlohmann::json::array();
  for (const auto& e : per_scene)
    j["per_scene"].push_back({{"sg_iou", e.sg_iou},
                              {"entity_iou", e.entity_iou},
                              {"relation_iou", e.relation_iou}});
  j["diagnostics"] = diagnostics;
  return j;
}

std::string ExperimentResult::csv() const {
  std::ostringstream out;
  out << "variant,sg_iou,entity_iou,relation_iou,n_scenes,n_samples\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%d,%d\n",
                  r.variant.c_str(), r.sg_iou, r.entity_iou, r.relation_iou,
                  r.n_scenes, r.n_samples);
    out << line;
  }
  return out.str();
}

const ExperimentRow& ExperimentResult::row(const std::string& variant) const {
  for (const auto& r : rows)
    if (r.variant == variant) return r;
  fail(ErrorCode::MissingReference, "no experiment row for " + variant);
}

ExperimentResult run_experiment(const RunConfig& cfg, const ExperimentOptions& opts) {
  cfg.validate();
  fs::create_directories(opts.out_dir);

  // Training data (generated once, shared by all variants).
  const std::string manifest = manifest_path_for(cfg.dataset);
  if (!file_exists(manifest)) {
    if (opts.verbose) std::fprintf(stderr, "generating %d scenes...\n", cfg.dataset.size);
    generate_dataset(cfg);
  }
  Dataset dataset = Dataset::load(manifest);

  // Held-out scenarios (no images; references only).
  const HoldoutSpec holdout = HoldoutSpec::make(cfg.dataset.seed);
  WorldConfig wc;
  wc.canvas = cfg.model.image_size;
  std::vector<SceneRecord> scenarios =
      build_eval_scenarios(cfg.dataset.seed, opts.scenarios, holdout, wc);

  ExperimentResult result;
  for (Variant variant : {Variant::Baseline, Variant::AdapterNoMask,
                          Variant::FullSgAdapter}) {
    const std::string vname = variant_name(variant);
    const std::string ckpt = opts.out_dir + "/" + vname + ".sgad";
    std::unique_ptr<ModelBundle> bundle;
    if (file_exists(ckpt)) {
      bundle = ModelBundle::load(ckpt);
      require(bundle->variant == variant, ErrorCode::CheckpointVersionMismatch,
              "checkpoint " + ckpt + " holds a different variant");
    } else {
      bundle = ModelBundle::create(cfg, variant);
    }
    if (bundle->step < cfg.train.steps) {
      if (opts.verbose)
        std::fprintf(stderr, "training %s from step %lld to %d...\n", vname.c_str(),
                     static_cast<long long>(bundle->step), cfg.train.steps);
      TrainOptions topts;
      topts.log_path = opts.out_dir + "/" + vname + "_train.csv";
      topts.checkpoint_path = ckpt;
      topts.checkpoint_every = 500;
      if (opts.verbose) {
        topts.progress = [&](int64_t step, double loss) {
          if (step % 200 == 0)
            std::fprintf(stderr, "  [%s] step %lld loss %.1f\n", vname.c_str(),
                         static_cast<long long>(step), loss);
        };
      }
      train_loop(*bundle, dataset, cfg.train.steps, topts);
    }

    // Sample every scenario; images split across worker threads, seeds fixed
    // per (scenario, sample) so all variants see the same noise.
    const int n_scenarios = static_cast<int>(scenarios.size());
    const int per = opts.samples_per_scenario;
    std::vector<Image> images(static_cast<size_t>(n_scenarios) * per);
    std::vector<const SceneRecord*> refs(static_cast<size_t>(n_scenarios) * per);
    std::vector<CaptionConditioning> conds(n_scenarios);
    for (int s = 0; s < n_scenarios; ++s)
      conds[s] = build_conditioning(*bundle, scenarios[s].caption,
                                    cfg.sample.guidance_fraction > 0.0);

    std::atomic<int> next{0};
    auto worker = [&]() {
      omp_set_num_threads(1);  // the thread pool already saturates the cores
      while (true) {
        const int job = next.fetch_add(1);
        if (job >= n_scenarios * per) break;
        const int s = job / per;
        const int i = job % per;
        const uint64_t seed = cfg.sample.seed +
                              static_cast<uint64_t>(s) * 1000 +
                              static_cast<uint64_t>(i);
        std::vector<Tensor> img = sample_caption(*bundle, conds[s],
                                                 cfg.sample.guidance_fraction,
                                                 seed, 1);
        images[job] = tensor_to_image(img[0]);
        refs[job] = &scenarios[s];
      }
    };
    {
      std::vector<std::thread> pool;
      for (int t = 0; t < std::max(1, opts.threads); ++t)
        pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }

    if (opts.keep_images) {
      const std::string img_dir = opts.out_dir + "/samples/" + vname;
      fs::create_directories(img_dir);
      for (int s = 0; s < n_scenarios; ++s) {
        for (int i = 0; i < per; ++i) {
          char name[64];
          std::snprintf(name, sizeof(name), "%s/scenario_%03d_%02d.png",
                        img_dir.c_str(), s, i);
          const Image& im = images[static_cast<size_t>(s) * per + i];
          write_png_rgb(name, im.width, im.height, im.rgb);
        }
      }
    }

    EvalReport report = evaluate_images(images, refs, wc);
    {
      std::ofstream rj(opts.out_dir + "/" + vname + "_eval.json");
      rj << report.to_json().dump(2) << '\n';
    }
    ExperimentRow row;
    row.variant = vname;
    row.sg_iou = report.sg_iou;
    row.entity_iou = report.entity_iou;
    row.relation_iou = report.relation_iou;
    row.n_scenes = n_scenarios;
    row.n_samples = n_scenarios * per;
    result.rows.push_back(row);
    if (opts.verbose)
      std::fprintf(stderr, "%s: sg_iou=%.3f entity_iou=%.3f relation_iou=%.3f\n",
                   vname.c_str(), row.sg_iou, row.entity_iou, row.relation_iou);
  }

  std::ofstream csv(opts.out_dir + "/experiment.csv");
  require(csv.good(), ErrorCode::IoError, "cannot write experiment.csv");
  csv << result.csv();
  return result;
}

}  // namespace sgad
