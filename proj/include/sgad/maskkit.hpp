// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "sgad/sgtext.hpp"

namespace sgad {

// Finite large-negative sentinel used instead of IEEE -inf so softmax
// gradients stay NaN-free; exp(kNegInf + anything reasonable) underflows to
// exactly 0.0 in double precision.
constexpr double kNegInf = -1e9;

enum class MaskKind { Causal, TripletAligned, SgCross };

// Dense additive attention mask; every entry is exactly 0.0 or kNegInf.
struct AttentionMask {
  MaskKind kind = MaskKind::Causal;
  int rows = 0;
  int cols = 0;
  std::vector<double> entries;  // row-major
  std::vector<int> empty_rows;  // SgCross rows with no allowed column

  double at(int i, int j) const { return entries[static_cast<size_t>(i) * cols + j]; }
  bool allowed(int i, int j) const { return at(i, j) == 0.0; }
};

// Eq.-style causal mask: (i, j) allowed iff j <= i.
AttentionMask build_causal_mask(int n);

// Token-token mask allowing attention where the two tokens share a triplet;
// the diagonal is always allowed so no softmax row is fully masked.
AttentionMask build_triplet_aligned_mask(const TokenTripletMap& map);

// Token-row x triplet-column cross mask: (i, k) allowed iff token i belongs
// to triplet k. Rows of tokens outside every triplet come back fully masked
// and are listed in empty_rows.
AttentionMask build_sg_cross_mask(const TokenTripletMap& map, int k);

// Fully-allowed mask (used by the no-SG-mask ablation and as the "no mask"
// attention path).
AttentionMask all_zero_mask(int rows, int cols, MaskKind kind);

// Plain-text grid: '.' allowed, '#' masked.
std::string mask_to_grid(const AttentionMask& mask);

// {"rows": r, "cols": c, "allowed": [[i, j], ...]}
std::string mask_to_json(const AttentionMask& mask);

}  // namespace sgad
