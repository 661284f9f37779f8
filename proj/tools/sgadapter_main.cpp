// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sgad/commands.hpp"
#include "sgad/config.hpp"
#include "sgad/errors.hpp"

using namespace sgad;

int main(int argc, char** argv) {
  CLI::App app{"scene-graph conditioned toy diffusion"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  app.add_option("--config", config_path, "JSON config file (strict keys)");
  app.add_flag_callback("--version", [] {});
  auto* seed_opt = app.add_option("--seed", seed, "global seed override");
  app.add_option("--out", out_dir, "output directory override");

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");

  std::string variant = "sg_adapter";
  auto* train = app.add_subcommand("train", "train a model variant");
  train->add_option("--variant", variant,
                    "baseline | adapter_nomask | sg_adapter");

  std::string caption;
  int count = 0;
  double guidance = -1.0;
  auto* sample = app.add_subcommand("sample", "sample images for a caption");
  sample->add_option("--caption", caption, "caption to condition on")->required();
  sample->add_option("--count", count, "number of images");
  sample->add_option("--guidance-fraction", guidance,
                     "fraction of guided sampling steps");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on held-out scenarios");

  std::string mask_caption, mask_kind = "sg";
  bool json_only = false;
  auto* inspect = app.add_subcommand("inspect-mask", "print a caption's attention mask");
  inspect->add_option("--caption", mask_caption, "caption")->required();
  inspect->add_option("--kind", mask_kind, "sg | causal | aligned");
  inspect->add_flag("--json", json_only, "JSON output only");

  auto* grad = app.add_subcommand("grad-check", "finite-difference gradient audit");

  int scenarios = 20, samples_per = 16;
  bool verbose = false;
  auto* experiment =
      app.add_subcommand("experiment", "train and compare the three variants");
  experiment->add_option("--scenarios", scenarios, "held-out scenario count");
  experiment->add_option("--samples", samples_per, "samples per scenario");
  experiment->add_flag("--verbose", verbose, "progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  seed_set = seed_opt->count() > 0;

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = RunConfig::from_json_file(config_path);
    if (seed_set) cfg.seed = seed;
    if (count > 0) cfg.sample.count = count;
    if (guidance >= 0.0) cfg.sample.guidance_fraction = guidance;
    cfg.validate();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  }

  if (*gen) {
    if (!out_dir.empty()) cfg.dataset.out_dir = out_dir;
    return cmd_gen_data(cfg, std::cout, std::cerr);
  }
  if (*train) return cmd_train(cfg, variant, std::cout, std::cerr);
  if (*sample)
    return cmd_sample(cfg, caption, out_dir.empty() ? "samples" : out_dir,
                      std::cout, std::cerr);
  if (*eval)
    return cmd_eval(cfg, out_dir.empty() ? "eval" : out_dir, std::cout, std::cerr);
  if (*inspect)
    return cmd_inspect_mask(mask_caption, mask_kind, json_only, std::cout, std::cerr);
  if (*grad) return cmd_grad_check(std::cout, std::cerr);
  if (*experiment)
    return cmd_experiment(cfg, out_dir.empty() ? "experiment" : out_dir,
                          scenarios, samples_per, verbose, std::cout, std::cerr);
  return 1;
}
