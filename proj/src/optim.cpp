// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/optim.hpp"

#include <cmath>

#include "sgad/errors.hpp"

namespace sgad {

Tensor ParamSet::add(const std::string& name, Tensor t) {
  require(!index_.count(name), ErrorCode::InvalidConfig,
          "duplicate parameter name " + name);
  index_[name] = items_.size();
  items_.push_back({name, t});
  return t;
}

bool ParamSet::has(const std::string& name) const { return index_.count(name) > 0; }

Tensor ParamSet::get(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorCode::InvalidConfig,
          "unknown parameter " + name);
  return items_[it->second].tensor;
}

void ParamSet::zero_grad() {
  for (auto& p : items_) p.tensor.zero_grad();
}

int64_t ParamSet::total_params(bool trainable_only) const {
  int64_t total = 0;
  for (const auto& p : items_)
    if (!trainable_only || p.trainable()) total += p.tensor.numel();
  return total;
}

void AdamW::step(ParamSet& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& p : params.items()) {
    if (!p.trainable() || !p.tensor.has_grad()) continue;
    auto data = p.tensor.raw_data();
    auto grad = p.tensor.grad();
    Slot& slot = state_[p.name];
    if (slot.m.size() != data.size()) {
      slot.m.assign(data.size(), 0.0);
      slot.v.assign(data.size(), 0.0);
    }
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * g;
      slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = slot.m[i] / bc1;
      const double vhat = slot.v[i] / bc2;
      data[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                            cfg_.weight_decay * data[i]);
    }
  }
}

}  // namespace sgad
