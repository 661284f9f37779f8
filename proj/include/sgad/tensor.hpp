// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sgad/maskkit.hpp"
#include "sgad/rng.hpp"

namespace sgad {

// Dense row-major 64-bit tensor with reverse-mode gradient tracking. Values
// are immutable once they participate in a graph; only leaf tensors (model
// parameters, test probes) are mutated through raw_data().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor constant(std::vector<int> shape, double value);
  static Tensor scalar(double value);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  int ndim() const;
  int dim(int i) const;
  int64_t numel() const;

  std::span<const double> data() const;
  std::span<double> raw_data();  // leaf mutation only
  std::span<const double> grad() const;
  bool has_grad() const;
  bool requires_grad() const;
  void set_requires_grad(bool v);
  void zero_grad();

  double item() const;  // scalar tensors
  double at(std::initializer_list<int> idx) const;

  // Runs reverse-mode accumulation from this scalar through the recorded
  // graph in reverse topological order.
  void backward() const;

  struct Node;
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_op_result(std::vector<int> shape, std::vector<double> data,
                               std::vector<Tensor> parents,
                               std::function<void(Node&)> backward_fn);
};

// While a guard is alive, newly created ops record no backward graph
// (sampling and evaluation run under one to keep memory flat).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};
bool grad_enabled();

// ---- elementwise / shape ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor gelu(const Tensor& x);
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor transpose(const Tensor& x);  // 2-D

// ---- matrix / attention ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add_row_broadcast(const Tensor& x, const Tensor& bias);
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});
Tensor masked_softmax(const Tensor& logits, const AttentionMask* mask);
Tensor masked_softmax(const Tensor& logits, const AttentionMask& mask);
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const AttentionMask* mask);
inline Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        const AttentionMask& mask) {
  return attention(q, k, v, &mask);
}

// ---- normalization / reductions ----
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
Tensor sum(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor sum_sq_diff(const Tensor& a, const Tensor& b);  // ||a - b||^2
Tensor mse(const Tensor& a, const Tensor& b);

// ---- slicing / stacking ----
Tensor slice_cols(const Tensor& x, int start, int len);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor concat_rows(const std::vector<Tensor>& xs);
Tensor gather_rows(const Tensor& x, const std::vector<int>& rows);
// Copy of base with base[rows[i]] replaced by rows_tensor[i].
Tensor scatter_rows(const Tensor& base, const Tensor& rows_tensor,
                    const std::vector<int>& rows);

// ---- image ops ([C,H,W] layout) ----
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int pad);
Tensor upsample_nearest2x(const Tensor& x);
Tensor add_channel_bias(const Tensor& x, const Tensor& per_channel);

}  // namespace sgad
