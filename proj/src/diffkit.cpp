// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/diffkit.hpp"

#include <cmath>

#include "sgad/errors.hpp"
#include "sgad/textenc.hpp"

namespace sgad {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  require(steps >= 1, ErrorCode::InvalidConfig, "schedule needs steps >= 1");
  NoiseSchedule s;
  s.steps = steps;
  s.beta.assign(steps + 1, 0.0);
  s.alpha.assign(steps + 1, 1.0);
  s.alpha_bar.assign(steps + 1, 1.0);
  for (int t = 1; t <= steps; ++t) {
    s.beta[t] = steps == 1 ? beta_start
                           : beta_start + (beta_end - beta_start) * (t - 1) / (steps - 1);
    require(s.beta[t] > 0.0 && s.beta[t] < 1.0, ErrorCode::InvalidConfig,
            "beta out of range");
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
  }
  return s;
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& eps,
                const NoiseSchedule& sched) {
  require(t >= 1 && t <= sched.steps, ErrorCode::StepOutOfRange,
          "diffusion step " + std::to_string(t) + " outside [1, " +
              std::to_string(sched.steps) + "]");
  require(x0.shape() == eps.shape(), ErrorCode::ShapeMismatch,
          "noise shape does not match image");
  const double a = std::sqrt(sched.alpha_bar[t]);
  const double b = std::sqrt(1.0 - sched.alpha_bar[t]);
  return add(scale(x0, a), scale(eps, b));
}

Denoiser::Denoiser(const DenoiserConfig& cfg, ParamSet& params, Rng& rng,
                   const std::string& prefix)
    : cfg_(cfg) {
  require(cfg_.image_size >= 8 && cfg_.image_size % 4 == 0, ErrorCode::InvalidConfig,
          "image_size must be a multiple of 4 and >= 8");
  c1_ = cfg_.base_channels;
  c2_ = 2 * cfg_.base_channels;
  c3_ = 4 * cfg_.base_channels;
  const int spatial = (cfg_.image_size / 4) * (cfg_.image_size / 4);

  auto reg = [&](const std::string& name, Tensor t) {
    params.add(prefix + name, t);
    all_params_.push_back(t);
    return t;
  };
  auto conv_w = [&](int oc, int ic, int k) {
    const double stddev = std::sqrt(2.0 / (ic * k * k + oc));
    return Tensor::randn({oc, ic, k, k}, rng, stddev, true);
  };

  in_w_ = reg("in_w", conv_w(c1_, cfg_.in_channels, 3));
  in_b_ = reg("in_b", Tensor::zeros({c1_}, true));
  d1_w_ = reg("d1_w", conv_w(c2_, c1_, 3));
  d1_b_ = reg("d1_b", Tensor::zeros({c2_}, true));
  d2_w_ = reg("d2_w", conv_w(c3_, c2_, 3));
  d2_b_ = reg("d2_b", Tensor::zeros({c3_}, true));

  temb1_w_ = reg("temb1_w", init_linear_weight(c3_, c3_, rng));
  temb1_b_ = reg("temb1_b", Tensor::zeros({c3_}, true));
  temb2_w_ = reg("temb2_w", init_linear_weight(c3_, c3_, rng));
  temb2_b_ = reg("temb2_b", Tensor::zeros({c3_}, true));
  tproj2_w_ = reg("tproj2_w", init_linear_weight(c3_, c2_, rng));
  tproj2_b_ = reg("tproj2_b", Tensor::zeros({c2_}, true));
  tproj3_w_ = reg("tproj3_w", init_linear_weight(c3_, c3_, rng));
  tproj3_b_ = reg("tproj3_b", Tensor::zeros({c3_}, true));

  pos_embed_ = reg("pos_embed", Tensor::randn({spatial, c3_}, rng, 0.02, true));
  attn_ln_g_ = reg("attn_ln_g", Tensor::from_data({c3_}, std::vector<double>(c3_, 1.0), true));
  attn_ln_b_ = reg("attn_ln_b", Tensor::zeros({c3_}, true));
  wq_ = reg("wq", init_linear_weight(c3_, c3_, rng));
  bq_ = reg("bq", Tensor::zeros({c3_}, true));
  wk_ = reg("wk", init_linear_weight(cfg_.cond_dim, c3_, rng));
  bk_ = reg("bk", Tensor::zeros({c3_}, true));
  wv_ = reg("wv", init_linear_weight(cfg_.cond_dim, c3_, rng));
  bv_ = reg("bv", Tensor::zeros({c3_}, true));
  wo_ = reg("wo", init_linear_weight(c3_, c3_, rng));
  bo_ = reg("bo", Tensor::zeros({c3_}, true));
  ffn_ln_g_ = reg("ffn_ln_g", Tensor::from_data({c3_}, std::vector<double>(c3_, 1.0), true));
  ffn_ln_b_ = reg("ffn_ln_b", Tensor::zeros({c3_}, true));
  f1_w_ = reg("f1_w", init_linear_weight(c3_, 2 * c3_, rng));
  f1_b_ = reg("f1_b", Tensor::zeros({2 * c3_}, true));
  f2_w_ = reg("f2_w", init_linear_weight(2 * c3_, c3_, rng));
  f2_b_ = reg("f2_b", Tensor::zeros({c3_}, true));

  mid_w_ = reg("mid_w", conv_w(c3_, c3_, 3));
  mid_b_ = reg("mid_b", Tensor::zeros({c3_}, true));
  u1_w_ = reg("u1_w", conv_w(c2_, c3_, 3));
  u1_b_ = reg("u1_b", Tensor::zeros({c2_}, true));
  u2_w_ = reg("u2_w", conv_w(c1_, c2_, 3));
  u2_b_ = reg("u2_b", Tensor::zeros({c1_}, true));
  out_w_ = reg("out_w", Tensor::zeros({cfg_.in_channels, c1_, 3, 3}, true));
  out_b_ = reg("out_b", Tensor::zeros({cfg_.in_channels}, true));
}

void Denoiser::set_trainable(bool trainable) {
  for (auto& t : all_params_) t.set_requires_grad(trainable);
}

Tensor Denoiser::timestep_embedding(int t) const {
  // Standard sinusoidal embedding of width c3.
  const int dim = c3_;
  const int half = dim / 2;
  std::vector<double> data(dim, 0.0);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    data[i] = std::sin(t * freq);
    data[half + i] = std::cos(t * freq);
  }
  return Tensor::from_data({1, dim}, std::move(data));
}

Tensor Denoiser::forward(const Tensor& x_t, int t, const Tensor& cond) const {
  require(x_t.ndim() == 3 && x_t.dim(0) == cfg_.in_channels &&
              x_t.dim(1) == cfg_.image_size && x_t.dim(2) == cfg_.image_size,
          ErrorCode::ShapeMismatch, "denoiser input shape mismatch");
  require(cond.ndim() == 2 && cond.dim(1) == cfg_.cond_dim,
          ErrorCode::ShapeMismatch, "conditioning width mismatch");

  Tensor temb = linear(gelu(linear(timestep_embedding(t), temb1_w_, temb1_b_)),
                       temb2_w_, temb2_b_);  // [1 x c3]
  Tensor temb2 = reshape(linear(temb, tproj2_w_, tproj2_b_), {c2_});
  Tensor temb3 = reshape(linear(temb, tproj3_w_, tproj3_b_), {c3_});

  Tensor h1 = gelu(conv2d(x_t, in_w_, in_b_, 1, 1));                    // [c1,H,W]
  Tensor h2 = gelu(add_channel_bias(conv2d(h1, d1_w_, d1_b_, 2, 1), temb2));
  Tensor h3 = gelu(add_channel_bias(conv2d(h2, d2_w_, d2_b_, 2, 1), temb3));

  // Mid-block cross-attention over flattened spatial positions.
  const int hs = cfg_.image_size / 4;
  const int spatial = hs * hs;
  Tensor rows = add(transpose(reshape(h3, {c3_, spatial})), pos_embed_);
  Tensor attn = multi_head_attention(layer_norm(rows, attn_ln_g_, attn_ln_b_),
                                     cond, 1, wq_, bq_, wk_, bk_, wv_, bv_,
                                     wo_, bo_, nullptr);
  Tensor r1 = add(rows, attn);
  Tensor ffn = linear(gelu(linear(layer_norm(r1, ffn_ln_g_, ffn_ln_b_), f1_w_, f1_b_)),
                      f2_w_, f2_b_);
  Tensor r2 = add(r1, ffn);
  Tensor mid_in = reshape(transpose(r2), {c3_, hs, hs});
  Tensor mid = gelu(conv2d(mid_in, mid_w_, mid_b_, 1, 1));

  Tensor u1 = gelu(add(conv2d(upsample_nearest2x(mid), u1_w_, u1_b_, 1, 1), h2));
  Tensor u2 = gelu(add(conv2d(upsample_nearest2x(u1), u2_w_, u2_b_, 1, 1), h1));
  return conv2d(u2, out_w_, out_b_, 1, 1);
}

Tensor training_loss(const std::vector<DiffusionBatchItem>& batch,
                     const Denoiser& model, const SgAdapter* adapter,
                     const NoiseSchedule& sched, Rng& rng) {
  require(!batch.empty(), ErrorCode::InvalidSize, "empty training batch");
  std::vector<Tensor> per_sample;
  per_sample.reserve(batch.size());
  for (const auto& item : batch) {
    const int t = rng.uniform_int(1, sched.steps);
    Tensor eps = Tensor::randn(item.x0.shape(), rng);
    Tensor x_t = q_sample(item.x0, t, eps, sched);
    Tensor cond = item.w;
    if (adapter && item.e.defined()) {
      require(item.sg_mask != nullptr, ErrorCode::MissingMap,
              "adapter conditioning needs an SG mask");
      cond = adapter->refine(item.w, item.e, *item.sg_mask);
    }
    Tensor pred = model.forward(x_t, t, cond);
    per_sample.push_back(sum_sq_diff(eps, pred));
  }
  Tensor total = per_sample[0];
  for (size_t i = 1; i < per_sample.size(); ++i) total = add(total, per_sample[i]);
  return scale(total, 1.0 / static_cast<double>(per_sample.size()));
}

int guided_step_count(double guidance_fraction, int steps) {
  require(guidance_fraction >= 0.0 && guidance_fraction <= 1.0,
          ErrorCode::InvalidConfig, "guidance_fraction must be in [0,1]");
  return static_cast<int>(std::ceil(guidance_fraction * steps - 1e-12));
}

Tensor sample_image(const Denoiser& model, const NoiseSchedule& sched,
                    const Tensor& cond_plain, const Tensor& cond_guided,
                    const SamplerConfig& cfg) {
  NoGradGuard guard;
  const int guided = guided_step_count(cfg.guidance_fraction, sched.steps);
  require(guided == 0 || cond_guided.defined(), ErrorCode::MissingMap,
          "guided sampling requested without refined conditioning");
  Rng rng = Rng::derive(cfg.seed, 0x53414d50ULL);  // "SAMP"

  const auto& shape = std::vector<int>{model.config().in_channels,
                                       model.config().image_size,
                                       model.config().image_size};
  Tensor x = Tensor::randn(shape, rng);
  for (int step = 0; step < sched.steps; ++step) {
    const int t = sched.steps - step;
    const Tensor& cond = step < guided ? cond_guided : cond_plain;
    Tensor eps_hat = model.forward(x, t, cond);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha[t]);
    const double eps_coef = sched.beta[t] / std::sqrt(1.0 - sched.alpha_bar[t]);
    Tensor mean = scale(sub(x, scale(eps_hat, eps_coef)), inv_sqrt_alpha);
    if (t > 1) {
      Tensor z = Tensor::randn(shape, rng);
      x = add(mean, scale(z, std::sqrt(sched.beta[t])));
    } else {
      x = mean;
    }
  }
  return x;
}

}  // namespace sgad
