// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sgad/tensor.hpp"

namespace sgad::testutil {

// Central finite difference of f w.r.t. one element of a leaf tensor.
// Independent oracle for every backward implementation.
inline double numeric_partial(const std::function<double()>& f, Tensor leaf,
                              size_t index, double h = 1e-5) {
  auto data = leaf.raw_data();
  const double saved = data[index];
  data[index] = saved + h;
  const double fp = f();
  data[index] = saved - h;
  const double fm = f();
  data[index] = saved;
  return (fp - fm) / (2.0 * h);
}

struct GradCheck {
  double max_rel_err = 0.0;
  std::string worst;  // "<leaf>[i]: analytic vs numeric"
};

// Compares backward() gradients of a scalar-returning builder against central
// finite differences for every element of every listed leaf. Relative error
// uses denominator max(|a|, |n|, 1e-4) so true-zero gradients are not flagged
// by finite-difference round-off.
inline GradCheck check_gradients(const std::function<Tensor()>& build_loss,
                                 std::vector<std::pair<std::string, Tensor>> leaves,
                                 double h = 1e-5) {
  for (auto& [name, t] : leaves) {
    t.zero_grad();
  }
  Tensor loss = build_loss();
  loss.backward();

  std::vector<std::vector<double>> analytic;
  for (auto& [name, t] : leaves) {
    auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(t.numel(), 0.0);
  }

  auto eval = [&]() {
    NoGradGuard guard;
    return build_loss().item();
  };

  GradCheck result;
  for (size_t li = 0; li < leaves.size(); ++li) {
    Tensor t = leaves[li].second;
    for (int64_t i = 0; i < t.numel(); ++i) {
      const double n = numeric_partial(eval, t, static_cast<size_t>(i), h);
      const double a = analytic[li][static_cast<size_t>(i)];
      const double denom = std::max({std::fabs(a), std::fabs(n), 1e-4});
      const double rel = std::fabs(a - n) / denom;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = leaves[li].first + "[" + std::to_string(i) + "]: " +
                       std::to_string(a) + " vs " + std::to_string(n);
      }
    }
  }
  return result;
}

}  // namespace sgad::testutil
