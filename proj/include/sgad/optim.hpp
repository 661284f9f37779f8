// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sgad/tensor.hpp"

namespace sgad {

struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable() const { return tensor.requires_grad(); }
};

// Ordered collection of named parameters; name paths are unique.
class ParamSet {
 public:
  Tensor add(const std::string& name, Tensor t);
  bool has(const std::string& name) const;
  Tensor get(const std::string& name) const;
  const std::vector<Parameter>& items() const { return items_; }
  std::vector<Parameter>& items() { return items_; }

  void zero_grad();
  int64_t total_params(bool trainable_only = false) const;

 private:
  std::vector<Parameter> items_;
  std::map<std::string, size_t> index_;
};

struct AdamWConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay. Moments are keyed by parameter name so
// they survive checkpointing and reordering.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  AdamWConfig& config() { return cfg_; }
  const AdamWConfig& config() const { return cfg_; }

  void step(ParamSet& params);
  int64_t step_count() const { return t_; }

  struct Slot { std::vector<double> m, v; };
  const std::map<std::string, Slot>& state() const { return state_; }
  std::map<std::string, Slot>& state() { return state_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  AdamWConfig cfg_;
  int64_t t_ = 0;
  std::map<std::string, Slot> state_;
};

}  // namespace sgad
