// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sgad/errors.hpp"
#include "sgad/png_io.hpp"

namespace sgad {

namespace fs = std::filesystem;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::AdapterNoMask: return "adapter_nomask";
    case Variant::FullSgAdapter: return "sg_adapter";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "baseline") return Variant::Baseline;
  if (name == "adapter_nomask") return Variant::AdapterNoMask;
  if (name == "sg_adapter") return Variant::FullSgAdapter;
  fail(ErrorCode::InvalidConfig, "unknown variant \"" + name + "\"");
}

LoadedScene Dataset::load_record(const SceneRecord& rec, const std::string& image_root,
                                 bool with_image) {
  LoadedScene scene;
  scene.rec = rec;
  scene.caption = tokenize(rec.caption);
  auto [sg, map] = parse_caption(scene.caption, RelationLexicon::defaults());
  scene.sg = std::move(sg);
  scene.map = std::move(map);
  require(scene.map.membership == rec.mapping, ErrorCode::IndexMismatch,
          "manifest mapping disagrees with the parsed caption for " + rec.id);
  require(scene.sg.size() == static_cast<int>(rec.scene_graph.size()),
          ErrorCode::IndexMismatch,
          "manifest scene graph disagrees with the parsed caption for " + rec.id);
  scene.sg_mask = build_sg_cross_mask(scene.map, scene.sg.size());
  if (with_image && !rec.image_path.empty()) {
    const std::string path = image_root.empty()
                                 ? rec.image_path
                                 : image_root + "/" + rec.image_path;
    PngImage png = read_png_rgb(path);
    scene.image.width = png.width;
    scene.image.height = png.height;
    scene.image.rgb = std::move(png.rgb);
  }
  return scene;
}

Dataset Dataset::load(const std::string& manifest_path, bool with_images) {
  require(file_exists(manifest_path), ErrorCode::MissingDataset,
          "manifest not found: " + manifest_path);
  const std::string root = fs::path(manifest_path).parent_path().string();
  Dataset ds;
  for (const auto& rec : read_manifest(manifest_path))
    ds.scenes_.push_back(load_record(rec, root, with_images));
  require(!ds.scenes_.empty(), ErrorCode::MissingDataset,
          "manifest is empty: " + manifest_path);
  return ds;
}

std::unique_ptr<ModelBundle> ModelBundle::create(const RunConfig& cfg,
                                                 Variant variant) {
  cfg.validate();
  auto bundle = std::make_unique<ModelBundle>();
  bundle->cfg = cfg;
  bundle->variant = variant;
  bundle->lexicon = RelationLexicon::defaults();
  bundle->vocab = Vocabulary::build_default(bundle->lexicon);

  EncoderConfig ec;
  ec.vocab_size = bundle->vocab.size();
  ec.embed_dim = cfg.model.D;
  ec.layers = cfg.model.layers;
  ec.heads = cfg.model.heads;

  Rng enc_rng = Rng::derive(cfg.seed, 0x454e43ULL);   // "ENC"
  Rng ada_rng = Rng::derive(cfg.seed, 0x414441ULL);   // "ADA"
  Rng den_rng = Rng::derive(cfg.seed, 0x44454eULL);   // "DEN"
  bundle->encoder = std::make_unique<TextEncoder>(ec, bundle->params, enc_rng);
  bundle->adapter = std::make_unique<SgAdapter>(
      AdapterConfig{cfg.model.D, cfg.model.heads}, bundle->params, ada_rng);
  DenoiserConfig dc;
  dc.image_size = cfg.model.image_size;
  dc.cond_dim = cfg.model.D;
  bundle->denoiser = std::make_unique<Denoiser>(dc, bundle->params, den_rng);
  bundle->sched = NoiseSchedule::linear(cfg.model.T);
  bundle->opt.config().lr = cfg.train.lr;
  bundle->apply_phase();
  return bundle;
}

bool ModelBundle::adapter_active() const {
  return variant != Variant::Baseline && step >= cfg.train.freeze_encoder_at;
}

void ModelBundle::apply_phase() {
  const bool pretraining = step < cfg.train.freeze_encoder_at;
  encoder->set_trainable(pretraining);
  adapter->set_trainable(adapter_active());
  denoiser->set_trainable(true);
}

AttentionMask ModelBundle::conditioning_mask(const LoadedScene& scene) const {
  if (variant == Variant::AdapterNoMask)
    return all_zero_mask(scene.caption.size(), scene.sg.size(), MaskKind::SgCross);
  return scene.sg_mask;
}

void ModelBundle::save(const std::string& checkpoint_path) const {
  std::vector<CheckpointEntry> entries;
  for (const auto& p : params.items()) {
    entries.push_back({p.name, p.tensor.shape(),
                       std::vector<double>(p.tensor.data().begin(),
                                           p.tensor.data().end())});
  }
  for (const auto& [name, slot] : opt.state()) {
    entries.push_back({"opt/m/" + name, {static_cast<int>(slot.m.size())}, slot.m});
    entries.push_back({"opt/v/" + name, {static_cast<int>(slot.v.size())}, slot.v});
  }
  nlohmann::json sidecar;
  sidecar["config"] = cfg.to_json();
  sidecar["variant"] = variant_name(variant);
  sidecar["step"] = step;
  sidecar["opt_step"] = opt.step_count();
  sidecar["vocab"] = vocab.tokens();
  nlohmann::json lex = nlohmann::json::array();
  for (const auto& phrase : lexicon.phrases()) {
    std::string joined;
    for (size_t i = 0; i < phrase.size(); ++i) {
      if (i) joined += ' ';
      joined += phrase[i];
    }
    lex.push_back(joined);
  }
  sidecar["lexicon"] = lex;
  write_checkpoint(checkpoint_path, entries, sidecar);
}

std::unique_ptr<ModelBundle> ModelBundle::load(const std::string& checkpoint_path) {
  Checkpoint ckpt = read_checkpoint(checkpoint_path);
  RunConfig cfg;
  Variant variant;
  try {
    cfg = RunConfig::from_json(ckpt.sidecar.at("config"));
    variant = variant_from_name(ckpt.sidecar.at("variant").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CheckpointVersionMismatch,
         std::string("sidecar missing fields: ") + e.what());
  }
  auto bundle = create(cfg, variant);
  for (auto& p : bundle->params.items()) {
    const CheckpointEntry* e = ckpt.find(p.name);
    require(e != nullptr, ErrorCode::CheckpointVersionMismatch,
            "checkpoint lacks parameter " + p.name);
    require(e->shape == p.tensor.shape(), ErrorCode::CheckpointVersionMismatch,
            "checkpoint shape mismatch for " + p.name);
    auto dst = p.tensor.raw_data();
    std::copy(e->data.begin(), e->data.end(), dst.begin());
  }
  for (const auto& p : bundle->params.items()) {
    const CheckpointEntry* m = ckpt.find("opt/m/" + p.name);
    const CheckpointEntry* v = ckpt.find("opt/v/" + p.name);
    if (m && v) {
      AdamW::Slot slot;
      slot.m = m->data;
      slot.v = v->data;
      bundle->opt.state()[p.name] = std::move(slot);
    }
  }
  bundle->step = ckpt.sidecar.value("step", int64_t{0});
  bundle->opt.set_step_count(ckpt.sidecar.value("opt_step", int64_t{0}));
  bundle->apply_phase();
  return bundle;
}

TrainResult train_loop(ModelBundle& bundle, const Dataset& dataset,
                       int64_t target_steps, const TrainOptions& opts) {
  require(dataset.size() > 0, ErrorCode::MissingDataset, "empty dataset");
  const auto t0 = std::chrono::steady_clock::now();

  std::ofstream log;
  if (!opts.log_path.empty()) {
    const bool fresh = !file_exists(opts.log_path) || bundle.step == 0;
    log.open(opts.log_path, fresh ? std::ios::trunc : std::ios::app);
    require(log.good(), ErrorCode::IoError, "cannot write log " + opts.log_path);
    if (fresh) {
      log << "# variant=" << variant_name(bundle.variant) << "\n";
      log << "# conditioning_mask="
          << (bundle.variant == Variant::Baseline
                  ? "none"
                  : (bundle.variant == Variant::AdapterNoMask ? "all_zero" : "sg"))
          << "\n";
      log << "# total_params=" << bundle.params.total_params() << "\n";
      log << "step,loss,lr,wallclock_s\n";
    }
  }

  TrainResult result;
  result.steps_run = 0;
  double last_loss = 0.0;
  while (bundle.step < target_steps) {
    bundle.apply_phase();
    Rng step_rng = Rng::derive(bundle.cfg.seed, 0x545241494eULL,
                               static_cast<uint64_t>(bundle.step));  // "TRAIN"
    std::vector<DiffusionBatchItem> batch;
    std::vector<AttentionMask> masks(bundle.cfg.train.batch);
    const bool use_adapter = bundle.adapter_active();
    for (int b = 0; b < bundle.cfg.train.batch; ++b) {
      const LoadedScene& scene =
          dataset.scene(static_cast<size_t>(step_rng.uniform_int(
              0, static_cast<int>(dataset.size()) - 1)));
      DiffusionBatchItem item;
      item.x0 = scene.x0();
      item.w = bundle.encoder->encode(scene.caption, bundle.vocab,
                                      EncodeMaskKind::Causal);
      if (use_adapter) {
        item.e = bundle.adapter->build_triplet_embeddings(
            scene.caption, scene.sg, *bundle.encoder, bundle.vocab);
        masks[b] = bundle.conditioning_mask(scene);
        item.sg_mask = &masks[b];
      }
      batch.push_back(std::move(item));
    }
    bundle.params.zero_grad();
    Tensor loss = training_loss(batch, *bundle.denoiser,
                                use_adapter ? bundle.adapter.get() : nullptr,
                                bundle.sched, step_rng);
    loss.backward();
    bundle.opt.step(bundle.params);
    bundle.step += 1;
    result.steps_run += 1;
    last_loss = loss.item();

    if (log.is_open()) {
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      log << bundle.step << ',' << last_loss << ',' << bundle.opt.config().lr
          << ',' << wall << '\n';
    }
    if (opts.progress) opts.progress(bundle.step, last_loss);
    if (!opts.checkpoint_path.empty() && opts.checkpoint_every > 0 &&
        bundle.step % opts.checkpoint_every == 0 && bundle.step < target_steps) {
      bundle.save(opts.checkpoint_path);
    }
  }
  if (!opts.checkpoint_path.empty()) bundle.save(opts.checkpoint_path);
  result.final_loss = last_loss;
  return result;
}

CaptionConditioning build_conditioning(const ModelBundle& bundle,
                                       const std::string& caption_text,
                                       bool need_refined) {
  NoGradGuard guard;
  CaptionConditioning cond;
  cond.caption = tokenize(caption_text);
  auto [sg, map] = parse_caption(cond.caption, bundle.lexicon);
  cond.sg = std::move(sg);
  cond.map = std::move(map);
  cond.w = bundle.encoder->encode(cond.caption, bundle.vocab, EncodeMaskKind::Causal);
  if (need_refined && bundle.variant != Variant::Baseline) {
    Tensor e = bundle.adapter->build_triplet_embeddings(cond.caption, cond.sg,
                                                        *bundle.encoder,
                                                        bundle.vocab);
    AttentionMask mask =
        bundle.variant == Variant::AdapterNoMask
            ? all_zero_mask(cond.caption.size(), cond.sg.size(), MaskKind::SgCross)
            : build_sg_cross_mask(cond.map, cond.sg.size());
    cond.w_refined = bundle.adapter->refine(cond.w, e, mask);
  }
  return cond;
}

std::vector<Tensor> sample_caption(const ModelBundle& bundle,
                                   const CaptionConditioning& cond,
                                   double guidance_fraction, uint64_t base_seed,
                                   int count) {
  std::vector<Tensor> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    SamplerConfig sc;
    sc.guidance_fraction = guidance_fraction;
    sc.seed = base_seed + static_cast<uint64_t>(i);
    const Tensor& guided = cond.w_refined.defined() ? cond.w_refined : cond.w;
    out.push_back(sample_image(*bundle.denoiser, bundle.sched, cond.w, guided, sc));
  }
  return out;
}

std::string manifest_path_for(const DatasetConfig& dataset) {
  return dataset.out_dir + "/manifest.jsonl";
}

std::vector<SceneRecord> generate_dataset(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.dataset.out_dir);
  const HoldoutSpec holdout = HoldoutSpec::make(cfg.dataset.seed);
  WorldConfig wc;
  wc.canvas = cfg.model.image_size;

  std::vector<SceneRecord> records;
  records.reserve(cfg.dataset.size);
  for (int i = 0; i < cfg.dataset.size; ++i) {
    Rng pick = Rng::derive(cfg.dataset.seed, 0x4e52454cULL, static_cast<uint64_t>(i));
    const int n_rel = pick.uniform_int(cfg.dataset.n_relations_min,
                                       cfg.dataset.n_relations_max);
    SynthScene scene;
    bool done = false;
    for (int attempt = 0; attempt < 64 && !done; ++attempt) {
      Rng rng = Rng::derive(cfg.dataset.seed, 0x5343ULL,
                            static_cast<uint64_t>(i) * 64 + attempt);
      try {
        scene = sample_scene(rng, n_rel, wc, &holdout.pairs);
        done = true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SamplingExhausted) throw;
      }
    }
    require(done, ErrorCode::SamplingExhausted,
            "could not sample scene " + std::to_string(i));

    char id[32];
    std::snprintf(id, sizeof(id), "scene_%06d", i);
    const std::string png_name = std::string(id) + ".png";
    write_png_rgb(cfg.dataset.out_dir + "/" + png_name, scene.image.width,
                  scene.image.height, scene.image.rgb);
    records.push_back(record_from_scene(scene, id, png_name));
  }
  write_manifest(manifest_path_for(cfg.dataset), records);
  return records;
}

}  // namespace sgad
