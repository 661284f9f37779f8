// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sgad/adapter.hpp"
#include "sgad/maskkit.hpp"
#include "sgad/optim.hpp"
#include "sgad/rng.hpp"
#include "sgad/tensor.hpp"

namespace sgad {

struct NoiseSchedule {
  int steps = 200;
  // Index t in [1, steps]; index 0 holds the conventions beta_0 = 0,
  // alpha_bar_0 = 1.
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  static NoiseSchedule linear(int steps = 200, double beta_start = 1e-4,
                              double beta_end = 0.02);
};

// Forward process x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps,
                const NoiseSchedule& sched);

struct DenoiserConfig {
  int image_size = 32;
  int in_channels = 3;
  int base_channels = 12;  // widths are {base, 2*base, 4*base}
  int cond_dim = 64;       // width of the conditioning token embeddings
};

// Small convolutional encoder-decoder over [3,H,W] images with sinusoidal
// timestep embeddings added to channel features and one mid-block
// cross-attention from spatial positions (queries) to conditioning tokens.
class Denoiser {
 public:
  Denoiser(const DenoiserConfig& cfg, ParamSet& params, Rng& rng,
           const std::string& prefix = "denoiser/");

  const DenoiserConfig& config() const { return cfg_; }

  // eps prediction; cond is an [N x cond_dim] token matrix.
  Tensor forward(const Tensor& x_t, int t, const Tensor& cond) const;

  void set_trainable(bool trainable);

 private:
  Tensor timestep_embedding(int t) const;

  DenoiserConfig cfg_;
  int c1_, c2_, c3_;
  Tensor in_w_, in_b_;
  Tensor d1_w_, d1_b_, d2_w_, d2_b_;
  Tensor temb1_w_, temb1_b_, temb2_w_, temb2_b_;  // time MLP
  Tensor tproj2_w_, tproj2_b_, tproj3_w_, tproj3_b_;
  Tensor pos_embed_;  // [spatial x c3] learned mid-block positions
  Tensor attn_ln_g_, attn_ln_b_;
  Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
  Tensor ffn_ln_g_, ffn_ln_b_, f1_w_, f1_b_, f2_w_, f2_b_;
  Tensor mid_w_, mid_b_;
  Tensor u1_w_, u1_b_, u2_w_, u2_b_;
  Tensor out_w_, out_b_;  // zero-initialized: eps_theta == 0 at init
  std::vector<Tensor> all_params_;
};

// One training example: clean image plus the conditioning inputs.
struct DiffusionBatchItem {
  Tensor x0;            // [3,H,W]
  Tensor w;             // [N x D] text embeddings
  Tensor e;             // [K x D] triplet embeddings; undefined => condition on w
  const AttentionMask* sg_mask = nullptr;
};

// Mean over the batch of || eps - eps_theta(x_t, t, f(w,e,M)) ||^2 with
// per-sample t ~ U[1,T] and eps ~ N(0,I). adapter == nullptr conditions on
// plain w.
Tensor training_loss(const std::vector<DiffusionBatchItem>& batch,
                     const Denoiser& model, const SgAdapter* adapter,
                     const NoiseSchedule& sched, Rng& rng);

struct SamplerConfig {
  double guidance_fraction = 0.3;  // fraction of early steps that use w'
  uint64_t seed = 0;
};

int guided_step_count(double guidance_fraction, int steps);

// Ancestral DDPM sampling from pure noise. The first ceil(fraction * T) steps
// condition on cond_guided (when defined), the rest on cond_plain.
// Deterministic given the seed; runs without building a backward graph.
Tensor sample_image(const Denoiser& model, const NoiseSchedule& sched,
                    const Tensor& cond_plain, const Tensor& cond_guided,
                    const SamplerConfig& cfg);

}  // namespace sgad
