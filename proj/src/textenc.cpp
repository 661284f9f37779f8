// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/textenc.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "sgad/errors.hpp"

namespace sgad {

void EncoderConfig::validate() const {
  require(vocab_size >= 1, ErrorCode::InvalidConfig, "vocab_size must be >= 1");
  require(embed_dim >= 1 && layers >= 1 && heads >= 1 && max_tokens >= 1,
          ErrorCode::InvalidConfig, "encoder dimensions must be >= 1");
  require(embed_dim % heads == 0, ErrorCode::InvalidConfig,
          "embed_dim must be divisible by heads");
}

Vocabulary Vocabulary::build_default(const RelationLexicon& lexicon) {
  std::set<std::string> words;
  for (const auto& noun : grammar_nouns()) words.insert(noun);
  for (const auto& color : grammar_colors()) words.insert(color);
  for (const auto& phrase : lexicon.phrases())
    for (const auto& w : phrase) words.insert(w);
  words.insert("a");
  words.insert("an");
  words.insert("and");
  words.insert(".");
  words.insert(",");
  std::vector<std::string> tokens;
  tokens.push_back("<unk>");
  tokens.insert(tokens.end(), words.begin(), words.end());
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  require(!tokens.empty(), ErrorCode::InvalidConfig, "empty vocabulary");
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (size_t i = 0; i < v.tokens_.size(); ++i) {
    require(!v.index_.count(v.tokens_[i]), ErrorCode::InvalidConfig,
            "duplicate vocabulary token " + v.tokens_[i]);
    v.index_[v.tokens_[i]] = static_cast<int>(i);
  }
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open vocabulary " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write vocabulary " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

Tensor init_linear_weight(int in, int out, Rng& rng) {
  const double stddev = std::sqrt(2.0 / (in + out));
  return Tensor::randn({in, out}, rng, stddev, true);
}

TextEncoder::TextEncoder(const EncoderConfig& cfg, ParamSet& params, Rng& rng,
                         const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.embed_dim;
  auto reg = [&](const std::string& name, Tensor t) {
    params.add(prefix + name, t);
    all_params_.push_back(t);
    return t;
  };
  tok_embed_ = reg("tok_embed", Tensor::randn({cfg_.vocab_size, d}, rng, 0.02, true));
  pos_embed_ = reg("pos_embed", Tensor::zeros({cfg_.max_tokens, d}, true));
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string base = "block" + std::to_string(l) + "/";
    Block b;
    b.ln1_g = reg(base + "ln1_g", Tensor::from_data({d}, std::vector<double>(d, 1.0), true));
    b.ln1_b = reg(base + "ln1_b", Tensor::zeros({d}, true));
    b.wq = reg(base + "wq", init_linear_weight(d, d, rng));
    b.bq = reg(base + "bq", Tensor::zeros({d}, true));
    b.wk = reg(base + "wk", init_linear_weight(d, d, rng));
    b.bk = reg(base + "bk", Tensor::zeros({d}, true));
    b.wv = reg(base + "wv", init_linear_weight(d, d, rng));
    b.bv = reg(base + "bv", Tensor::zeros({d}, true));
    b.wo = reg(base + "wo", init_linear_weight(d, d, rng));
    b.bo = reg(base + "bo", Tensor::zeros({d}, true));
    b.ln2_g = reg(base + "ln2_g", Tensor::from_data({d}, std::vector<double>(d, 1.0), true));
    b.ln2_b = reg(base + "ln2_b", Tensor::zeros({d}, true));
    b.f1_w = reg(base + "f1_w", init_linear_weight(d, 4 * d, rng));
    b.f1_b = reg(base + "f1_b", Tensor::zeros({4 * d}, true));
    b.f2_w = reg(base + "f2_w", init_linear_weight(4 * d, d, rng));
    b.f2_b = reg(base + "f2_b", Tensor::zeros({d}, true));
    blocks_.push_back(std::move(b));
  }
}

void TextEncoder::set_trainable(bool trainable) {
  for (auto& t : all_params_) t.set_requires_grad(trainable);
}

Tensor multi_head_attention(const Tensor& q_in, const Tensor& kv_in, int heads,
                            const Tensor& wq, const Tensor& bq, const Tensor& wk,
                            const Tensor& bk, const Tensor& wv, const Tensor& bv,
                            const Tensor& wo, const Tensor& bo,
                            const AttentionMask* mask) {
  Tensor q = linear(q_in, wq, bq);
  Tensor k = linear(kv_in, wk, bk);
  Tensor v = linear(kv_in, wv, bv);
  const int d_model = q.dim(1);
  require(d_model % heads == 0, ErrorCode::ShapeMismatch,
          "attention width not divisible by heads");
  const int dk = d_model / heads;
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    outs.push_back(attention(slice_cols(q, h * dk, dk), slice_cols(k, h * dk, dk),
                             slice_cols(v, h * dk, dk), mask));
  }
  return linear(concat_cols(outs), wo, bo);
}

Tensor TextEncoder::encode_ids(const std::vector<int>& ids,
                               const AttentionMask& mask) const {
  const int n = static_cast<int>(ids.size());
  require(n >= 1, ErrorCode::EmptyCaption, "no tokens to encode");
  require(n <= cfg_.max_tokens, ErrorCode::TooLong,
          "sequence exceeds max_tokens");
  require(mask.rows == n && mask.cols == n, ErrorCode::MaskMismatch,
          "mask does not match token count");
  std::vector<int> positions(n);
  for (int i = 0; i < n; ++i) {
    positions[i] = i;
    require(ids[i] >= 0 && ids[i] < cfg_.vocab_size, ErrorCode::ShapeMismatch,
            "token id out of range");
  }
  Tensor x = add(gather_rows(tok_embed_, ids), gather_rows(pos_embed_, positions));
  for (const Block& b : blocks_) {
    Tensor nx = layer_norm(x, b.ln1_g, b.ln1_b);
    Tensor h = add(x, multi_head_attention(nx, nx, cfg_.heads, b.wq, b.bq,
                                           b.wk, b.bk, b.wv, b.bv, b.wo, b.bo,
                                           &mask));
    Tensor f = linear(gelu(linear(layer_norm(h, b.ln2_g, b.ln2_b), b.f1_w, b.f1_b)),
                      b.f2_w, b.f2_b);
    x = add(h, f);
  }
  return x;
}

Tensor TextEncoder::encode(const Caption& caption, const Vocabulary& vocab,
                           EncodeMaskKind kind, const TokenTripletMap* map) const {
  const int n = caption.size();
  std::vector<int> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = vocab.id(caption.tokens[i].text);
  AttentionMask mask;
  if (kind == EncodeMaskKind::Causal) {
    mask = build_causal_mask(n);
  } else {
    require(map != nullptr, ErrorCode::MissingMap,
            "triplet-aligned encoding requires a token-triplet map");
    require(map->token_count() == n, ErrorCode::MaskMismatch,
            "token-triplet map does not match caption length");
    mask = build_triplet_aligned_mask(*map);
  }
  return encode_ids(ids, mask);
}

Tensor TextEncoder::encode_phrase(const std::vector<std::string>& phrase_tokens,
                                  const Vocabulary& vocab) const {
  require(!phrase_tokens.empty(), ErrorCode::EmptyPhrase,
          "cannot encode an empty phrase");
  require(phrase_tokens.size() <= 6, ErrorCode::TooLong,
          "phrase exceeds 6 tokens");
  const int n = static_cast<int>(phrase_tokens.size());
  std::vector<int> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = vocab.id(phrase_tokens[i]);
  Tensor w = encode_ids(ids, build_causal_mask(n));
  return reshape(gather_rows(w, {n - 1}), {cfg_.embed_dim});
}

}  // namespace sgad
