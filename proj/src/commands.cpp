// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <vector>

#include "sgad/errors.hpp"
#include "sgad/evalkit.hpp"
#include "sgad/pipeline.hpp"
#include "sgad/png_io.hpp"

namespace sgad {

namespace fs = std::filesystem;

namespace {

int guard(std::ostream& err, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

// ---- finite-difference machinery for grad-check ----

double fd_partial(const std::function<double()>& f, Tensor leaf, size_t index,
                  double h) {
  auto data = leaf.raw_data();
  const double saved = data[index];
  data[index] = saved + h;
  const double fp = f();
  data[index] = saved - h;
  const double fm = f();
  data[index] = saved;
  return (fp - fm) / (2.0 * h);
}

struct FdOutcome {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance;
  bool ok() const { return max_rel_err < tolerance; }
};

// Checks backward() against central differences over (a sample of) the
// coordinates of each leaf.
FdOutcome fd_check(const std::string& name, const std::function<Tensor()>& build,
                   const std::vector<Tensor>& leaves, double tolerance,
                   int coords_per_leaf = -1) {
  for (Tensor t : leaves) t.zero_grad();
  Tensor loss = build();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : leaves) {
    auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(t.numel(), 0.0);
  }
  auto eval = [&]() {
    NoGradGuard guard;
    return build().item();
  };
  FdOutcome out{name, 0.0, tolerance};
  for (size_t li = 0; li < leaves.size(); ++li) {
    Tensor t = leaves[li];
    std::vector<int64_t> coords;
    if (coords_per_leaf < 0 || t.numel() <= coords_per_leaf) {
      for (int64_t i = 0; i < t.numel(); ++i) coords.push_back(i);
    } else {
      for (int c = 0; c < coords_per_leaf; ++c)
        coords.push_back(t.numel() * c / coords_per_leaf);
    }
    for (int64_t i : coords) {
      const double n = fd_partial(eval, t, static_cast<size_t>(i), 1e-5);
      const double a = analytic[li][static_cast<size_t>(i)];
      const double rel = std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-4});
      out.max_rel_err = std::max(out.max_rel_err, rel);
    }
  }
  return out;
}

std::vector<FdOutcome> run_op_checks() {
  std::vector<FdOutcome> results;
  Rng rng(421);

  {
    Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
    Tensor b = Tensor::randn({4, 2}, rng, 1.0, true);
    results.push_back(fd_check("matmul", [&] { return sum(matmul(a, b)); }, {a, b}, 1e-4));
  }
  {
    Tensor logits = Tensor::randn({3, 5}, rng, 1.5, true);
    Tensor probe = Tensor::randn({3, 5}, rng);
    AttentionMask mask = all_zero_mask(3, 5, MaskKind::Causal);
    for (int i = 0; i < 3; ++i)
      for (int j = i + 2; j < 5; ++j) mask.entries[i * 5 + j] = kNegInf;
    results.push_back(fd_check(
        "masked_softmax",
        [&] { return sum(mul(masked_softmax(logits, mask), probe)); }, {logits},
        1e-4));
  }
  {
    Tensor q = Tensor::randn({3, 4}, rng, 1.0, true);
    Tensor k = Tensor::randn({4, 4}, rng, 1.0, true);
    Tensor v = Tensor::randn({4, 4}, rng, 1.0, true);
    AttentionMask mask = all_zero_mask(3, 4, MaskKind::Causal);
    mask.entries[3] = kNegInf;
    results.push_back(fd_check(
        "attention", [&] { return sum(attention(q, k, v, &mask)); }, {q, k, v}, 1e-4));
  }
  {
    Tensor x = Tensor::randn({3, 6}, rng, 2.0, true);
    Tensor g = Tensor::randn({6}, rng, 1.0, true);
    Tensor b = Tensor::randn({6}, rng, 1.0, true);
    Tensor probe = Tensor::randn({3, 6}, rng);
    results.push_back(fd_check(
        "layer_norm", [&] { return sum(mul(layer_norm(x, g, b), probe)); },
        {x, g, b}, 1e-4));
  }
  {
    Tensor x = Tensor::randn({4, 3}, rng, 1.0, true);
    Tensor w = Tensor::randn({3, 5}, rng, 1.0, true);
    Tensor b = Tensor::randn({5}, rng, 1.0, true);
    results.push_back(fd_check(
        "linear+gelu", [&] { return sum(gelu(linear(x, w, b))); }, {x, w, b}, 1e-4));
  }
  {
    Tensor a = Tensor::randn({2, 4}, rng, 1.0, true);
    Tensor b = Tensor::randn({2, 4}, rng, 1.0, true);
    results.push_back(fd_check("mse", [&] { return mse(a, b); }, {a, b}, 1e-4));
  }
  {
    Tensor x = Tensor::randn({2, 6, 6}, rng, 1.0, true);
    Tensor w = Tensor::randn({3, 2, 3, 3}, rng, 0.5, true);
    Tensor b = Tensor::randn({3}, rng, 0.5, true);
    results.push_back(fd_check(
        "conv2d_s1", [&] { return sum(conv2d(x, w, b, 1, 1)); }, {x, w, b}, 1e-4));
    results.push_back(fd_check(
        "conv2d_s2", [&] { return sum(conv2d(x, w, b, 2, 1)); }, {x, w, b}, 1e-4));
  }
  {
    Tensor x = Tensor::randn({2, 3, 3}, rng, 1.0, true);
    Tensor t = Tensor::randn({2}, rng, 1.0, true);
    Tensor probe = Tensor::randn({2, 36}, rng);
    results.push_back(fd_check(
        "upsample+channel_bias",
        [&] {
          return sum(mul(reshape(upsample_nearest2x(add_channel_bias(x, t)), {2, 36}),
                         probe));
        },
        {x, t}, 1e-4));
  }
  {
    Tensor x = Tensor::randn({4, 6}, rng, 1.0, true);
    Tensor rows = Tensor::randn({2, 6}, rng, 1.0, true);
    Tensor probe = Tensor::randn({4, 6}, rng);
    results.push_back(fd_check(
        "gather/scatter/slice/concat",
        [&] {
          Tensor s = scatter_rows(x, rows, {1, 3});
          Tensor c = concat_cols({slice_cols(s, 0, 3), slice_cols(s, 3, 3)});
          return sum(mul(gather_rows(c, {0, 1, 2, 3}), probe));
        },
        {x, rows}, 1e-4));
  }
  return results;
}

std::vector<FdOutcome> run_composed_checks() {
  std::vector<FdOutcome> results;
  RunConfig cfg;
  cfg.model.D = 8;
  cfg.model.layers = 1;
  cfg.model.heads = 2;
  cfg.model.T = 10;
  cfg.model.image_size = 8;
  cfg.train.batch = 1;
  cfg.seed = 5;

  const std::string caption = "a red circle above a blue square";
  Rng img_rng(99);

  // Encoder path: baseline conditioning, encoder trainable.
  {
    cfg.train.freeze_encoder_at = 1000;
    auto bundle = ModelBundle::create(cfg, Variant::Baseline);
    bundle->apply_phase();
    Tensor x0 = Tensor::randn({3, 8, 8}, img_rng, 0.5);
    Caption cap = tokenize(caption);
    auto build = [&]() {
      Rng loss_rng(31);
      DiffusionBatchItem item;
      item.x0 = x0;
      item.w = bundle->encoder->encode(cap, bundle->vocab, EncodeMaskKind::Causal);
      return training_loss({item}, *bundle->denoiser, nullptr, bundle->sched,
                           loss_rng);
    };
    std::vector<Tensor> leaves;
    for (const auto& p : bundle->params.items())
      if (p.trainable()) leaves.push_back(p.tensor);
    results.push_back(fd_check("composed encoder+denoiser loss", build, leaves,
                               1e-3, 3));
  }

  // Adapter path: refine + training loss, frozen encoder.
  {
    cfg.train.freeze_encoder_at = 0;
    auto bundle = ModelBundle::create(cfg, Variant::FullSgAdapter);
    bundle->apply_phase();
    // move the adapter off its zero init so out_proj gradients are generic
    Rng jitter(7);
    for (auto& p : bundle->params.items()) {
      if (p.name.rfind("adapter/", 0) != 0) continue;
      auto d = p.tensor.raw_data();
      for (auto& v : d) v += 0.2 * jitter.normal();
    }
    Tensor x0 = Tensor::randn({3, 8, 8}, img_rng, 0.5);
    Caption cap = tokenize(caption);
    auto [sg, map] = parse_caption(cap, bundle->lexicon);
    AttentionMask mask = build_sg_cross_mask(map, sg.size());
    auto build = [&]() {
      Rng loss_rng(33);
      DiffusionBatchItem item;
      item.x0 = x0;
      item.w = bundle->encoder->encode(cap, bundle->vocab, EncodeMaskKind::Causal);
      item.e = bundle->adapter->build_triplet_embeddings(cap, sg, *bundle->encoder,
                                                         bundle->vocab);
      item.sg_mask = &mask;
      return training_loss({item}, *bundle->denoiser, bundle->adapter.get(),
                           bundle->sched, loss_rng);
    };
    std::vector<Tensor> leaves;
    for (const auto& p : bundle->params.items())
      if (p.trainable()) leaves.push_back(p.tensor);
    results.push_back(fd_check("composed refine+training_loss", build, leaves,
                               1e-3, 3));
  }
  return results;
}

}  // namespace

int cmd_gen_data(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    auto records = generate_dataset(cfg);
    int by_rel[4] = {0, 0, 0, 0};
    for (const auto& r : records) {
      const size_t k = r.scene_graph.size();
      if (k <= 3) ++by_rel[k];
    }
    out << "wrote " << records.size() << " scenes to " << cfg.dataset.out_dir
        << " (1-rel " << by_rel[1] << ", 2-rel " << by_rel[2] << ", 3-rel "
        << by_rel[3] << ")\n";
    out << "manifest: " << manifest_path_for(cfg.dataset) << "\n";
  });
}

int cmd_train(const RunConfig& cfg, const std::string& variant,
              std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    const Variant v = variant_from_name(variant);
    Dataset dataset = Dataset::load(cfg.paths.manifest);
    std::unique_ptr<ModelBundle> bundle;
    if (file_exists(cfg.paths.checkpoint)) {
      bundle = ModelBundle::load(cfg.paths.checkpoint);
      require(bundle->variant == v, ErrorCode::CheckpointVersionMismatch,
              "checkpoint holds variant " + variant_name(bundle->variant));
      out << "resuming from step " << bundle->step << "\n";
    } else {
      bundle = ModelBundle::create(cfg, v);
    }
    TrainOptions opts;
    opts.checkpoint_path = cfg.paths.checkpoint;
    opts.log_path = cfg.paths.checkpoint + ".log.csv";
    TrainResult res = train_loop(*bundle, dataset, cfg.train.steps, opts);
    out << "trained " << res.steps_run << " steps (variant " << variant
        << "), final loss " << res.final_loss << "\n";
    out << "checkpoint: " << cfg.paths.checkpoint << "\n";
  });
}

int cmd_sample(const RunConfig& cfg, const std::string& caption,
               const std::string& out_dir, std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    auto bundle = ModelBundle::load(cfg.paths.checkpoint);
    const int guided = guided_step_count(cfg.sample.guidance_fraction,
                                         bundle->sched.steps);
    CaptionConditioning cond = build_conditioning(*bundle, caption, guided > 0);
    out << "parsed K=" << cond.sg.size() << " triplets over "
        << cond.caption.size() << " tokens; guided steps " << guided << "/"
        << bundle->sched.steps << "\n";
    fs::create_directories(out_dir);
    std::vector<Tensor> images =
        sample_caption(*bundle, cond, cfg.sample.guidance_fraction,
                       cfg.sample.seed, cfg.sample.count);
    for (int i = 0; i < cfg.sample.count; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "sample_%06llu.png",
                    static_cast<unsigned long long>(cfg.sample.seed + i));
      Image img = tensor_to_image(images[static_cast<size_t>(i)]);
      write_png_rgb(out_dir + "/" + name, img.width, img.height, img.rgb);
      out << out_dir << "/" << name << "\n";
    }
  });
}

int cmd_eval(const RunConfig& cfg, const std::string& out_dir,
             std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    require(file_exists(cfg.paths.checkpoint), ErrorCode::MissingCheckpoint,
            "checkpoint not found: " + cfg.paths.checkpoint);
    auto bundle = ModelBundle::load(cfg.paths.checkpoint);
    const HoldoutSpec holdout = HoldoutSpec::make(cfg.dataset.seed);
    WorldConfig wc;
    wc.canvas = cfg.model.image_size;
    auto scenarios = build_eval_scenarios(cfg.dataset.seed, 20, holdout, wc);
    const int per = cfg.sample.count;

    std::vector<Image> images;
    std::vector<const SceneRecord*> refs;
    for (size_t s = 0; s < scenarios.size(); ++s) {
      CaptionConditioning cond =
          build_conditioning(*bundle, scenarios[s].caption,
                             cfg.sample.guidance_fraction > 0.0);
      auto imgs = sample_caption(*bundle, cond, cfg.sample.guidance_fraction,
                                 cfg.sample.seed + s * 1000, per);
      for (auto& t : imgs) {
        images.push_back(tensor_to_image(t));
        refs.push_back(&scenarios[s]);
      }
    }
    EvalReport report = evaluate_images(images, refs, wc);
    fs::create_directories(out_dir);
    {
      std::ofstream j(out_dir + "/eval.json");
      require(j.good(), ErrorCode::IoError, "cannot write eval.json");
      j << report.to_json().dump(2) << '\n';
    }
    {
      std::ofstream c(out_dir + "/eval.csv");
      require(c.good(), ErrorCode::IoError, "cannot write eval.csv");
      c << "variant,sg_iou,entity_iou,relation_iou,n_scenes,n_samples\n";
      c << variant_name(bundle->variant) << ',' << report.sg_iou << ','
        << report.entity_iou << ',' << report.relation_iou << ','
        << scenarios.size() << ',' << images.size() << '\n';
    }
    out << "sg_iou=" << report.sg_iou << " entity_iou=" << report.entity_iou
        << " relation_iou=" << report.relation_iou << " over " << images.size()
        << " samples\n";
    out << "report: " << out_dir << "/eval.json\n";
  });
}

int cmd_inspect_mask(const std::string& caption, const std::string& kind,
                     bool json_only, std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    Caption cap = tokenize(caption);
    auto [sg, map] = parse_caption(cap, RelationLexicon::defaults());
    AttentionMask mask;
    if (kind == "sg") {
      mask = build_sg_cross_mask(map, sg.size());
    } else if (kind == "causal") {
      mask = build_causal_mask(cap.size());
    } else if (kind == "aligned") {
      mask = build_triplet_aligned_mask(map);
    } else {
      fail(ErrorCode::InvalidConfig, "unknown mask kind \"" + kind + "\"");
    }
    if (!json_only) out << mask_to_grid(mask);
    out << mask_to_json(mask) << "\n";
  });
}

int cmd_grad_check(std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    auto results = run_op_checks();
    auto composed = run_composed_checks();
    results.insert(results.end(), composed.begin(), composed.end());
    bool all_ok = true;
    for (const auto& r : results) {
      char line[160];
      std::snprintf(line, sizeof(line), "%-34s max_rel_err=%.3e (tol %.0e) %s",
                    r.name.c_str(), r.max_rel_err, r.tolerance,
                    r.ok() ? "ok" : "FAIL");
      out << line << "\n";
      all_ok = all_ok && r.ok();
    }
    require(all_ok, ErrorCode::ShapeMismatch, "gradient check failed");
  });
}

int cmd_experiment(const RunConfig& cfg, const std::string& out_dir,
                   int scenarios, int samples_per_scenario, bool verbose,
                   std::ostream& out, std::ostream& err) {
  return guard(err, [&] {
    ExperimentOptions opts;
    opts.out_dir = out_dir;
    opts.scenarios = scenarios;
    opts.samples_per_scenario = samples_per_scenario;
    opts.verbose = verbose;
    ExperimentResult result = run_experiment(cfg, opts);
    out << result.csv();
    out << "table: " << out_dir << "/experiment.csv\n";
  });
}

}  // namespace sgad
