// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "sgad/maskkit.hpp"
#include "sgad/optim.hpp"
#include "sgad/sgtext.hpp"
#include "sgad/tensor.hpp"

namespace sgad {

struct EncoderConfig {
  int vocab_size = 0;
  int embed_dim = 64;
  int layers = 2;
  int heads = 4;
  int max_tokens = 77;

  int d_k() const { return embed_dim / heads; }
  void validate() const;
};

// Token ids are dense [0, size); id 0 is reserved for unknown tokens.
class Vocabulary {
 public:
  static Vocabulary build_default(const RelationLexicon& lexicon);
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int id(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

enum class EncodeMaskKind { Causal, TripletAligned };

// Toy causal transformer standing in for the CLIP text encoder: learned token
// and position embeddings followed by pre-LN attention blocks.
class TextEncoder {
 public:
  TextEncoder(const EncoderConfig& cfg, ParamSet& params, Rng& rng,
              const std::string& prefix = "encoder/");

  const EncoderConfig& config() const { return cfg_; }

  // Contextualized embeddings w = E_T(c), shape [N x D]. The triplet-aligned
  // kind realizes the hard-mask-swap probe and requires a membership map.
  Tensor encode(const Caption& caption, const Vocabulary& vocab,
                EncodeMaskKind kind,
                const TokenTripletMap* map = nullptr) const;

  // Shared core over raw token ids and an explicit mask.
  Tensor encode_ids(const std::vector<int>& ids, const AttentionMask& mask) const;

  // Pooled phrase embedding: causal encoding of the phrase alone, final-token
  // row, shape [D].
  Tensor encode_phrase(const std::vector<std::string>& phrase_tokens,
                       const Vocabulary& vocab) const;

  void set_trainable(bool trainable);

 private:
  struct Block {
    Tensor ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b, f1_w, f1_b, f2_w, f2_b;
  };

  EncoderConfig cfg_;
  Tensor tok_embed_;  // [V x D]
  Tensor pos_embed_;  // [max_tokens x D], zero-initialized
  std::vector<Block> blocks_;
  std::vector<Tensor> all_params_;
};

// Multi-head attention built from the single-head primitive by column slicing
// and concatenation. Exposed for reuse by the adapter and denoiser.
Tensor multi_head_attention(const Tensor& q_in, const Tensor& kv_in, int heads,
                            const Tensor& wq, const Tensor& bq, const Tensor& wk,
                            const Tensor& bk, const Tensor& wv, const Tensor& bv,
                            const Tensor& wo, const Tensor& bo,
                            const AttentionMask* mask);

// Xavier-style init helper shared by the models.
Tensor init_linear_weight(int in, int out, Rng& rng);

}  // namespace sgad
