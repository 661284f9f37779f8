// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/maskkit.hpp"

#include <json.hpp>

#include "sgad/errors.hpp"

namespace sgad {

AttentionMask build_causal_mask(int n) {
  require(n >= 1, ErrorCode::InvalidSize, "causal mask needs n >= 1");
  AttentionMask mask;
  mask.kind = MaskKind::Causal;
  mask.rows = mask.cols = n;
  mask.entries.assign(static_cast<size_t>(n) * n, kNegInf);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j)
      mask.entries[static_cast<size_t>(i) * n + j] = 0.0;
  return mask;
}

AttentionMask build_triplet_aligned_mask(const TokenTripletMap& map) {
  const int n = map.token_count();
  require(n >= 1, ErrorCode::InvalidSize, "triplet-aligned mask needs n >= 1");
  AttentionMask mask;
  mask.kind = MaskKind::TripletAligned;
  mask.rows = mask.cols = n;
  mask.entries.assign(static_cast<size_t>(n) * n, kNegInf);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || map.intersects(i, j))
        mask.entries[static_cast<size_t>(i) * n + j] = 0.0;
    }
  }
  return mask;
}

AttentionMask build_sg_cross_mask(const TokenTripletMap& map, int k) {
  const int n = map.token_count();
  require(n >= 1, ErrorCode::InvalidSize, "SG cross mask needs n >= 1");
  require(k >= 1, ErrorCode::InvalidSize, "SG cross mask needs k >= 1");
  for (int i = 0; i < n; ++i)
    for (int t : map.membership[i])
      require(t >= 0 && t < k, ErrorCode::TripletIndexOutOfRange,
              "token " + std::to_string(i) + " references triplet " +
                  std::to_string(t) + " but k = " + std::to_string(k));
  AttentionMask mask;
  mask.kind = MaskKind::SgCross;
  mask.rows = n;
  mask.cols = k;
  mask.entries.assign(static_cast<size_t>(n) * k, kNegInf);
  for (int i = 0; i < n; ++i) {
    if (map.membership[i].empty()) {
      mask.empty_rows.push_back(i);
      continue;
    }
    for (int t : map.membership[i])
      mask.entries[static_cast<size_t>(i) * k + t] = 0.0;
  }
  return mask;
}

AttentionMask all_zero_mask(int rows, int cols, MaskKind kind) {
  require(rows >= 1 && cols >= 1, ErrorCode::InvalidSize,
          "mask dimensions must be positive");
  AttentionMask mask;
  mask.kind = kind;
  mask.rows = rows;
  mask.cols = cols;
  mask.entries.assign(static_cast<size_t>(rows) * cols, 0.0);
  return mask;
}

std::string mask_to_grid(const AttentionMask& mask) {
  std::string out;
  out.reserve(static_cast<size_t>(mask.rows) * (mask.cols + 1));
  for (int i = 0; i < mask.rows; ++i) {
    for (int j = 0; j < mask.cols; ++j)
      out.push_back(mask.allowed(i, j) ? '.' : '#');
    out.push_back('\n');
  }
  return out;
}

std::string mask_to_json(const AttentionMask& mask) {
  nlohmann::json j;
  j["rows"] = mask.rows;
  j["cols"] = mask.cols;
  j["allowed"] = nlohmann::json::array();
  for (int i = 0; i < mask.rows; ++i)
    for (int j2 = 0; j2 < mask.cols; ++j2)
      if (mask.allowed(i, j2)) j["allowed"].push_back({i, j2});
  return j.dump();
}

}  // namespace sgad
