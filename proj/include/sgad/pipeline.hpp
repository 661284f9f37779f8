// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sgad/adapter.hpp"
#include "sgad/checkpoint.hpp"
#include "sgad/config.hpp"
#include "sgad/diffkit.hpp"
#include "sgad/optim.hpp"
#include "sgad/synthworld.hpp"
#include "sgad/textenc.hpp"

namespace sgad {

enum class Variant { Baseline, AdapterNoMask, FullSgAdapter };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// One training scene held in memory: parsed caption, masks, image bytes.
struct LoadedScene {
  SceneRecord rec;
  Caption caption;
  SceneGraph sg;
  TokenTripletMap map;
  AttentionMask sg_mask;  // N x K
  Image image;            // empty for image-free scenario records

  Tensor x0() const { return image_to_tensor(image); }
};

class Dataset {
 public:
  // Loads the manifest and decodes every referenced PNG (paths are relative
  // to the manifest directory). with_images=false skips image loading for
  // scenario records.
  static Dataset load(const std::string& manifest_path, bool with_images = true);
  static LoadedScene load_record(const SceneRecord& rec, const std::string& image_root,
                                 bool with_image);

  size_t size() const { return scenes_.size(); }
  const LoadedScene& scene(size_t i) const { return scenes_[i]; }

 private:
  std::vector<LoadedScene> scenes_;
};

// Encoder + adapter + denoiser + schedule with a shared parameter set; the
// unit of checkpointing.
struct ModelBundle {
  RunConfig cfg;
  Variant variant = Variant::Baseline;
  RelationLexicon lexicon;
  Vocabulary vocab;
  ParamSet params;
  std::unique_ptr<TextEncoder> encoder;
  std::unique_ptr<SgAdapter> adapter;
  std::unique_ptr<Denoiser> denoiser;
  NoiseSchedule sched;
  AdamW opt;
  int64_t step = 0;

  static std::unique_ptr<ModelBundle> create(const RunConfig& cfg, Variant variant);
  static std::unique_ptr<ModelBundle> load(const std::string& checkpoint_path);
  void save(const std::string& checkpoint_path) const;

  // Phase control: the encoder trains until train.freeze_encoder_at, then
  // freezes; adapter variants activate the adapter from that step on.
  bool adapter_active() const;
  void apply_phase();

  // Conditioning for one scene under this bundle's variant. Returns the mask
  // by value because the no-SG-mask ablation synthesizes an all-zero one.
  AttentionMask conditioning_mask(const LoadedScene& scene) const;
};

struct TrainOptions {
  std::string log_path;         // CSV: step, loss, lr, wallclock_s
  std::string checkpoint_path;  // saved every checkpoint_every and at the end
  int checkpoint_every = 1000;
  std::function<void(int64_t, double)> progress;
};

struct TrainResult {
  int64_t steps_run = 0;
  double final_loss = 0.0;
};

// Runs bundle.step -> target_steps. Per-step randomness derives from
// (cfg.seed, step) so an interrupted run resumed from a checkpoint is
// bit-identical to an uninterrupted one.
TrainResult train_loop(ModelBundle& bundle, const Dataset& dataset,
                       int64_t target_steps, const TrainOptions& opts);

// Parse + encode + (optionally) refine a caption for sampling.
struct CaptionConditioning {
  Caption caption;
  SceneGraph sg;
  TokenTripletMap map;
  Tensor w;          // plain encoder output
  Tensor w_refined;  // defined only when the variant refines and needed
};

CaptionConditioning build_conditioning(const ModelBundle& bundle,
                                       const std::string& caption_text,
                                       bool need_refined);

// Deterministic sampling of `count` images with seeds base_seed .. +count-1.
std::vector<Tensor> sample_caption(const ModelBundle& bundle,
                                   const CaptionConditioning& cond,
                                   double guidance_fraction, uint64_t base_seed,
                                   int count);

// Dataset generation honoring the held-out split (training scenes never use
// held-out entity pairs). Writes PNGs plus out_dir/manifest.jsonl.
std::vector<SceneRecord> generate_dataset(const RunConfig& cfg);

std::string manifest_path_for(const DatasetConfig& dataset);

}  // namespace sgad
