// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "sgad/maskkit.hpp"
#include "sgad/optim.hpp"
#include "sgad/sgtext.hpp"
#include "sgad/tensor.hpp"
#include "sgad/textenc.hpp"

namespace sgad {

struct AdapterConfig {
  int embed_dim = 64;
  int heads = 4;
};

// Masked cross-attention adapter refining token embeddings w with composite
// triplet embeddings e. One pre-LN transformer block; the attention output
// projection and the second FFN layer start at zero so the adapter is the
// identity at initialization.
class SgAdapter {
 public:
  SgAdapter(const AdapterConfig& cfg, ParamSet& params, Rng& rng,
            const std::string& prefix = "adapter/");

  const AdapterConfig& config() const { return cfg_; }

  // e[k] = l(concat(pooled subject, pooled relation, pooled object)).
  Tensor build_triplet_embeddings(const Caption& caption, const SceneGraph& sg,
                                  const TextEncoder& encoder,
                                  const Vocabulary& vocab) const;

  // Rows whose token belongs to no triplet pass through unchanged; the rest
  // go through masked cross-attention into e plus an FFN block.
  Tensor refine(const Tensor& w, const Tensor& e, const AttentionMask& mask) const;

  void set_trainable(bool trainable);

 private:
  AdapterConfig cfg_;
  Tensor l_w_, l_b_;    // [3D x D] composite projection
  Tensor ln1_g_, ln1_b_;
  Tensor wq_, bq_, wk_, bk_, wv_, bv_;
  Tensor wo_, bo_;      // zero-initialized
  Tensor ln2_g_, ln2_b_;
  Tensor f1_w_, f1_b_;
  Tensor f2_w_, f2_b_;  // zero-initialized
  std::vector<Tensor> all_params_;
};

}  // namespace sgad
