// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/adapter.hpp"

#include "sgad/errors.hpp"

namespace sgad {

SgAdapter::SgAdapter(const AdapterConfig& cfg, ParamSet& params, Rng& rng,
                     const std::string& prefix)
    : cfg_(cfg) {
  require(cfg_.embed_dim >= 1 && cfg_.heads >= 1, ErrorCode::InvalidConfig,
          "adapter dimensions must be >= 1");
  require(cfg_.embed_dim % cfg_.heads == 0, ErrorCode::InvalidConfig,
          "embed_dim must be divisible by heads");
  const int d = cfg_.embed_dim;
  auto reg = [&](const std::string& name, Tensor t) {
    params.add(prefix + name, t);
    all_params_.push_back(t);
    return t;
  };
  l_w_ = reg("l_w", init_linear_weight(3 * d, d, rng));
  l_b_ = reg("l_b", Tensor::zeros({d}, true));
  ln1_g_ = reg("ln1_g", Tensor::from_data({d}, std::vector<double>(d, 1.0), true));
  ln1_b_ = reg("ln1_b", Tensor::zeros({d}, true));
  wq_ = reg("wq", init_linear_weight(d, d, rng));
  bq_ = reg("bq", Tensor::zeros({d}, true));
  wk_ = reg("wk", init_linear_weight(d, d, rng));
  bk_ = reg("bk", Tensor::zeros({d}, true));
  wv_ = reg("wv", init_linear_weight(d, d, rng));
  bv_ = reg("bv", Tensor::zeros({d}, true));
  wo_ = reg("wo", Tensor::zeros({d, d}, true));
  bo_ = reg("bo", Tensor::zeros({d}, true));
  ln2_g_ = reg("ln2_g", Tensor::from_data({d}, std::vector<double>(d, 1.0), true));
  ln2_b_ = reg("ln2_b", Tensor::zeros({d}, true));
  f1_w_ = reg("f1_w", init_linear_weight(d, 4 * d, rng));
  f1_b_ = reg("f1_b", Tensor::zeros({4 * d}, true));
  f2_w_ = reg("f2_w", Tensor::zeros({4 * d, d}, true));
  f2_b_ = reg("f2_b", Tensor::zeros({d}, true));
}

void SgAdapter::set_trainable(bool trainable) {
  for (auto& t : all_params_) t.set_requires_grad(trainable);
}

Tensor SgAdapter::build_triplet_embeddings(const Caption& caption,
                                           const SceneGraph& sg,
                                           const TextEncoder& encoder,
                                           const Vocabulary& vocab) const {
  require(sg.size() >= 1, ErrorCode::InvalidSize, "scene graph has no triplets");
  auto phrase_words = [&](const std::vector<int>& idx) {
    std::vector<std::string> words;
    words.reserve(idx.size());
    for (int i : idx) words.push_back(caption.tokens[i].text);
    return words;
  };
  std::vector<Tensor> rows;
  rows.reserve(sg.triplets.size());
  const int d = cfg_.embed_dim;
  for (const Triplet& t : sg.triplets) {
    Tensor s = reshape(encoder.encode_phrase(phrase_words(t.subject), vocab), {1, d});
    Tensor r = reshape(encoder.encode_phrase(phrase_words(t.relation), vocab), {1, d});
    Tensor o = reshape(encoder.encode_phrase(phrase_words(t.object), vocab), {1, d});
    rows.push_back(linear(concat_cols({s, r, o}), l_w_, l_b_));
  }
  return concat_rows(rows);
}

Tensor SgAdapter::refine(const Tensor& w, const Tensor& e,
                         const AttentionMask& mask) const {
  require(w.ndim() == 2 && e.ndim() == 2, ErrorCode::ShapeMismatch,
          "refine needs 2-D w and e");
  const int n = w.dim(0);
  const int k = e.dim(0);
  require(w.dim(1) == cfg_.embed_dim && e.dim(1) == cfg_.embed_dim,
          ErrorCode::ShapeMismatch, "embedding width mismatch");
  require(mask.rows == n && mask.cols == k, ErrorCode::MaskMismatch,
          "mask shape does not match (N, K)");

  // Tokens outside every triplet keep their embedding unchanged.
  std::vector<char> is_empty(n, 0);
  for (int i : mask.empty_rows) is_empty[i] = 1;
  std::vector<int> active;
  for (int i = 0; i < n; ++i)
    if (!is_empty[i]) active.push_back(i);
  if (active.empty()) return w;

  AttentionMask sub;
  sub.kind = mask.kind;
  sub.rows = static_cast<int>(active.size());
  sub.cols = k;
  sub.entries.resize(static_cast<size_t>(sub.rows) * k);
  for (int i = 0; i < sub.rows; ++i)
    for (int j = 0; j < k; ++j)
      sub.entries[static_cast<size_t>(i) * k + j] = mask.at(active[i], j);

  Tensor wn = gather_rows(w, active);
  Tensor attn = multi_head_attention(layer_norm(wn, ln1_g_, ln1_b_), e,
                                     cfg_.heads, wq_, bq_, wk_, bk_, wv_, bv_,
                                     wo_, bo_, &sub);
  Tensor h = add(wn, attn);
  Tensor f = linear(gelu(linear(layer_norm(h, ln2_g_, ln2_b_), f1_w_, f1_b_)),
                    f2_w_, f2_b_);
  Tensor refined = add(h, f);
  if (static_cast<int>(active.size()) == n) {
    return refined;
  }
  return scatter_rows(w, refined, active);
}

}  // namespace sgad
