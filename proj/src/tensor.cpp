// Copyright (C) 2026 The sgadapter Authors
// SPDX-License-Identifier: Apache-2.0

#include "sgad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_set>

#include "sgad/errors.hpp"

namespace sgad {

struct Tensor::Node {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

namespace {

thread_local int g_no_grad_depth = 0;

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

void check_shape(const std::vector<int>& shape) {
  require(!shape.empty(), ErrorCode::ShapeMismatch, "empty shape");
  for (int d : shape)
    require(d >= 1, ErrorCode::ShapeMismatch, "non-positive dimension");
}

using Node = Tensor::Node;

std::shared_ptr<Node> new_node(std::vector<int> shape, std::vector<double> data) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  return n;
}

// Accumulates C += op(A) * op(B); all matrices row-major.
void mm_acc(const double* a, const double* b, double* c, int m, int p, int n,
            bool trans_a, bool trans_b) {
  const int64_t work = static_cast<int64_t>(m) * p * n;
  const bool par = work > 65536;
  if (!trans_a && !trans_b) {
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<size_t>(i) * n;
      const double* arow = a + static_cast<size_t>(i) * p;
      for (int k = 0; k < p; ++k) {
        const double av = arow[k];
        const double* brow = b + static_cast<size_t>(k) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    // B is [n x p]; C[i,j] += A[i,:] . B[j,:]
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<size_t>(i) * n;
      const double* arow = a + static_cast<size_t>(i) * p;
      for (int j = 0; j < n; ++j) {
        const double* brow = b + static_cast<size_t>(j) * p;
        double acc = 0.0;
        for (int k = 0; k < p; ++k) acc += arow[k] * brow[k];
        crow[j] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
    // A is [p x m]; C[i,j] += sum_k A[k,i] * B[k,j]
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<size_t>(i) * n;
      for (int k = 0; k < p; ++k) {
        const double av = a[static_cast<size_t>(k) * m + i];
        const double* brow = b + static_cast<size_t>(k) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    fail(ErrorCode::ShapeMismatch, "mm_acc: double transpose unsupported");
  }
}

}  // namespace

Tensor make_op_result(std::vector<int> shape, std::vector<double> data,
                      std::vector<Tensor> parents,
                      std::function<void(Node&)> backward_fn) {
  auto node = new_node(std::move(shape), std::move(data));
  bool track = false;
  if (g_no_grad_depth == 0) {
    for (const Tensor& p : parents)
      if (p.defined() && p.requires_grad()) { track = true; break; }
  }
  if (track) {
    node->requires_grad = true;
    for (const Tensor& p : parents)
      if (p.defined()) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

// ---- Tensor basics ----

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  check_shape(shape);
  int64_t n = shape_numel(shape);
  auto node = new_node(std::move(shape), std::vector<double>(n, 0.0));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::constant(std::vector<int> shape, double value) {
  check_shape(shape);
  int64_t n = shape_numel(shape);
  auto node = new_node(std::move(shape), std::vector<double>(n, value));
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return constant({1}, value); }

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
  check_shape(shape);
  require(shape_numel(shape) == static_cast<int64_t>(data.size()),
          ErrorCode::ShapeMismatch, "data length does not match shape");
  auto node = new_node(std::move(shape), std::move(data));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double stddev,
                     bool requires_grad) {
  check_shape(shape);
  int64_t n = shape_numel(shape);
  std::vector<double> data(n);
  for (auto& v : data) v = rng.normal() * stddev;
  auto node = new_node(std::move(shape), std::move(data));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

const std::vector<int>& Tensor::shape() const { return node_->shape; }
int Tensor::ndim() const { return static_cast<int>(node_->shape.size()); }
int Tensor::dim(int i) const { return node_->shape[i]; }
int64_t Tensor::numel() const { return static_cast<int64_t>(node_->data.size()); }

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::raw_data() { return node_->data; }
std::span<const double> Tensor::grad() const {
  static const std::vector<double> kEmpty;
  return node_->grad.empty() ? std::span<const double>(kEmpty) : std::span<const double>(node_->grad);
}
bool Tensor::has_grad() const { return !node_->grad.empty(); }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool v) { node_->requires_grad = v; }
void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  require(numel() == 1, ErrorCode::ShapeMismatch, "item() on non-scalar");
  return node_->data[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  require(static_cast<int>(idx.size()) == ndim(), ErrorCode::ShapeMismatch,
          "index rank mismatch");
  size_t flat = 0;
  auto it = idx.begin();
  for (int d = 0; d < ndim(); ++d, ++it) flat = flat * node_->shape[d] + *it;
  return node_->data[flat];
}

void Tensor::backward() const {
  require(defined(), ErrorCode::BackwardOnNonScalar, "backward on empty tensor");
  require(numel() == 1, ErrorCode::BackwardOnNonScalar,
          "backward requires a scalar loss");
  if (!node_->requires_grad) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame { Node* n; size_t next; };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  visited.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node* p = f.n->parents[f.next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// ---- op helpers ----

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), ErrorCode::ShapeMismatch,
          std::string(op) + ": shapes differ");
}

void acc(std::vector<double>& dst, const std::vector<double>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
  auto an = a.node(); auto bn = b.node();
  return make_op_result(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) { an->ensure_grad(); acc(an->grad, self.grad); }
    if (bn->requires_grad) { bn->ensure_grad(); acc(bn->grad, self.grad); }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
  auto an = a.node(); auto bn = b.node();
  return make_op_result(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) { an->ensure_grad(); acc(an->grad, self.grad); }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < bn->grad.size(); ++i) bn->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bd = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
  auto an = a.node(); auto bn = b.node();
  return make_op_result(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < an->grad.size(); ++i)
        an->grad[i] += self.grad[i] * bn->data[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < bn->grad.size(); ++i)
        bn->grad[i] += self.grad[i] * an->data[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  auto an = a.node();
  return make_op_result(a.shape(), std::move(out), {a}, [an, s](Node& self) {
    an->ensure_grad();
    for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[i] * s;
  });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = 0.5 * xd[i] * (1.0 + std::erf(xd[i] * kInvSqrt2));
  auto xn = x.node();
  return make_op_result(x.shape(), std::move(out), {x}, [xn](Node& self) {
    xn->ensure_grad();
    for (size_t i = 0; i < xn->grad.size(); ++i) {
      double v = xn->data[i];
      double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      xn->grad[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  check_shape(shape);
  require(shape_numel(shape) == x.numel(), ErrorCode::ShapeMismatch,
          "reshape changes element count");
  std::vector<double> out(x.data().begin(), x.data().end());
  auto xn = x.node();
  return make_op_result(std::move(shape), std::move(out), {x}, [xn](Node& self) {
    xn->ensure_grad();
    acc(xn->grad, self.grad);
  });
}

Tensor transpose(const Tensor& x) {
  require(x.ndim() == 2, ErrorCode::ShapeMismatch, "transpose needs a 2-D tensor");
  const int r = x.dim(0), c = x.dim(1);
  std::vector<double> out(static_cast<size_t>(r) * c);
  const auto xd = x.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<size_t>(j) * r + i] = xd[static_cast<size_t>(i) * c + j];
  auto xn = x.node();
  return make_op_result({c, r}, std::move(out), {x}, [xn, r, c](Node& self) {
    xn->ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j)
        xn->grad[static_cast<size_t>(i) * c + j] +=
            self.grad[static_cast<size_t>(j) * r + i];
  });
}

// ---- matrix ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2, ErrorCode::ShapeMismatch,
          "matmul needs 2-D tensors");
  const int m = a.dim(0), p = a.dim(1), n = b.dim(1);
  require(b.dim(0) == p, ErrorCode::ShapeMismatch,
          "matmul inner dimensions disagree");
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  mm_acc(a.data().data(), b.data().data(), out.data(), m, p, n, false, false);
  auto an = a.node(); auto bn = b.node();
  return make_op_result({m, n}, std::move(out), {a, b},
                        [an, bn, m, p, n](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      mm_acc(self.grad.data(), bn->data.data(), an->grad.data(), m, n, p,
             false, true);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      mm_acc(an->data.data(), self.grad.data(), bn->grad.data(), p, m, n,
             true, false);
    }
  });
}

Tensor add_row_broadcast(const Tensor& x, const Tensor& bias) {
  require(x.ndim() == 2 && bias.ndim() == 1, ErrorCode::ShapeMismatch,
          "add_row_broadcast needs [r x c] and [c]");
  const int r = x.dim(0), c = x.dim(1);
  require(bias.dim(0) == c, ErrorCode::ShapeMismatch,
          "bias length does not match columns");
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto bd = bias.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<size_t>(i) * c + j] += bd[j];
  auto xn = x.node(); auto bn = bias.node();
  return make_op_result(x.shape(), std::move(out), {x, bias},
                        [xn, bn, r, c](Node& self) {
    if (xn->requires_grad) { xn->ensure_grad(); acc(xn->grad, self.grad); }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          bn->grad[j] += self.grad[static_cast<size_t>(i) * c + j];
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  Tensor y = matmul(x, weight);
  if (bias.defined()) y = add_row_broadcast(y, bias);
  return y;
}

Tensor masked_softmax(const Tensor& logits, const AttentionMask& mask) {
  return masked_softmax(logits, &mask);
}

Tensor masked_softmax(const Tensor& logits, const AttentionMask* mask) {
  require(logits.ndim() == 2, ErrorCode::ShapeMismatch,
          "masked_softmax needs a 2-D tensor");
  const int r = logits.dim(0), c = logits.dim(1);
  if (mask) {
    require(mask->rows == r && mask->cols == c, ErrorCode::ShapeMismatch,
            "mask shape does not match logits");
    for (int i = 0; i < r; ++i) {
      bool any = false;
      for (int j = 0; j < c; ++j)
        if (mask->allowed(i, j)) { any = true; break; }
      require(any, ErrorCode::FullyMaskedRow,
              "row " + std::to_string(i) + " of the mask allows nothing");
    }
  }
  std::vector<double> out(static_cast<size_t>(r) * c);
  const auto ld = logits.data();
  for (int i = 0; i < r; ++i) {
    const double* lrow = ld.data() + static_cast<size_t>(i) * c;
    double* orow = out.data() + static_cast<size_t>(i) * c;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < c; ++j) {
      // Allowed entries skip the addition entirely so a fully-allowed mask is
      // bit-identical to no mask at all.
      double v = lrow[j];
      if (mask) {
        double m = mask->at(i, j);
        if (m != 0.0) v += m;
      }
      orow[j] = v;
      if (v > mx) mx = v;
    }
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      orow[j] = std::exp(orow[j] - mx);
      s += orow[j];
    }
    double inv = 1.0 / s;
    for (int j = 0; j < c; ++j) orow[j] *= inv;
  }
  auto ln = logits.node();
  return make_op_result({r, c}, std::move(out), {logits}, [ln, r, c](Node& self) {
    ln->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double* w = self.data.data() + static_cast<size_t>(i) * c;
      const double* dw = self.grad.data() + static_cast<size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += w[j] * dw[j];
      double* dl = ln->grad.data() + static_cast<size_t>(i) * c;
      for (int j = 0; j < c; ++j) dl[j] += w[j] * (dw[j] - dot);
    }
  });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const AttentionMask* mask) {
  require(q.ndim() == 2 && k.ndim() == 2 && v.ndim() == 2,
          ErrorCode::ShapeMismatch, "attention needs 2-D tensors");
  const int d = q.dim(1);
  require(k.dim(1) == d, ErrorCode::ShapeMismatch, "q/k dimension mismatch");
  require(v.dim(0) == k.dim(0), ErrorCode::ShapeMismatch,
          "k/v row counts differ");
  Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
  Tensor probs = masked_softmax(scores, mask);
  return matmul(probs, v);
}

// ---- normalization / reductions ----

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  require(x.ndim() == 2, ErrorCode::ShapeMismatch, "layer_norm needs [r x c]");
  const int r = x.dim(0), c = x.dim(1);
  require(gain.ndim() == 1 && gain.dim(0) == c, ErrorCode::ShapeMismatch,
          "gain length mismatch");
  require(bias.ndim() == 1 && bias.dim(0) == c, ErrorCode::ShapeMismatch,
          "bias length mismatch");
  std::vector<double> out(static_cast<size_t>(r) * c);
  std::vector<double> inv_sigma(r), mu(r);
  const auto xd = x.data();
  const auto gd = gain.data();
  const auto bd = bias.data();
  for (int i = 0; i < r; ++i) {
    const double* row = xd.data() + static_cast<size_t>(i) * c;
    double m = 0.0;
    for (int j = 0; j < c; ++j) m += row[j];
    m /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (row[j] - m) * (row[j] - m);
    var /= c;
    double is = 1.0 / std::sqrt(var + eps);
    mu[i] = m;
    inv_sigma[i] = is;
    double* orow = out.data() + static_cast<size_t>(i) * c;
    for (int j = 0; j < c; ++j) orow[j] = (row[j] - m) * is * gd[j] + bd[j];
  }
  auto xn = x.node(); auto gn = gain.node(); auto bn = bias.node();
  return make_op_result(x.shape(), std::move(out), {x, gain, bias},
                        [xn, gn, bn, r, c, mu, inv_sigma](Node& self) {
    std::vector<double> xhat(c), dxhat(c);
    for (int i = 0; i < r; ++i) {
      const double* row = xn->data.data() + static_cast<size_t>(i) * c;
      const double* dout = self.grad.data() + static_cast<size_t>(i) * c;
      for (int j = 0; j < c; ++j) xhat[j] = (row[j] - mu[i]) * inv_sigma[i];
      if (gn->requires_grad) {
        gn->ensure_grad();
        for (int j = 0; j < c; ++j) gn->grad[j] += dout[j] * xhat[j];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int j = 0; j < c; ++j) bn->grad[j] += dout[j];
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int j = 0; j < c; ++j) {
          dxhat[j] = dout[j] * gn->data[j];
          mean_dxhat += dxhat[j];
          mean_dxhat_xhat += dxhat[j] * xhat[j];
        }
        mean_dxhat /= c;
        mean_dxhat_xhat /= c;
        double* dx = xn->grad.data() + static_cast<size_t>(i) * c;
        for (int j = 0; j < c; ++j)
          dx[j] += inv_sigma[i] * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  auto xn = x.node();
  return make_op_result({1}, {s}, {x}, [xn](Node& self) {
    xn->ensure_grad();
    for (auto& g : xn->grad) g += self.grad[0];
  });
}

Tensor mean_all(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum_sq_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sum_sq_diff");
  const auto ad = a.data(); const auto bd = b.data();
  double s = 0.0;
  for (size_t i = 0; i < ad.size(); ++i) {
    double d = ad[i] - bd[i];
    s += d * d;
  }
  auto an = a.node(); auto bn = b.node();
  return make_op_result({1}, {s}, {a, b}, [an, bn](Node& self) {
    const double g = self.grad[0];
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < an->grad.size(); ++i)
        an->grad[i] += 2.0 * g * (an->data[i] - bn->data[i]);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < bn->grad.size(); ++i)
        bn->grad[i] -= 2.0 * g * (an->data[i] - bn->data[i]);
    }
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  return scale(sum_sq_diff(a, b), 1.0 / static_cast<double>(a.numel()));
}

// ---- slicing / stacking ----

Tensor slice_cols(const Tensor& x, int start, int len) {
  require(x.ndim() == 2, ErrorCode::ShapeMismatch, "slice_cols needs [r x c]");
  const int r = x.dim(0), c = x.dim(1);
  require(start >= 0 && len >= 1 && start + len <= c, ErrorCode::ShapeMismatch,
          "column slice out of range");
  std::vector<double> out(static_cast<size_t>(r) * len);
  const auto xd = x.data();
  for (int i = 0; i < r; ++i)
    std::memcpy(out.data() + static_cast<size_t>(i) * len,
                xd.data() + static_cast<size_t>(i) * c + start,
                sizeof(double) * len);
  auto xn = x.node();
  return make_op_result({r, len}, std::move(out), {x},
                        [xn, r, c, start, len](Node& self) {
    xn->ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < len; ++j)
        xn->grad[static_cast<size_t>(i) * c + start + j] +=
            self.grad[static_cast<size_t>(i) * len + j];
  });
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
  require(!xs.empty(), ErrorCode::ShapeMismatch, "concat_cols of nothing");
  const int r = xs[0].dim(0);
  int total = 0;
  for (const auto& x : xs) {
    require(x.ndim() == 2 && x.dim(0) == r, ErrorCode::ShapeMismatch,
            "concat_cols row mismatch");
    total += x.dim(1);
  }
  std::vector<double> out(static_cast<size_t>(r) * total);
  int off = 0;
  for (const auto& x : xs) {
    const int c = x.dim(1);
    const auto xd = x.data();
    for (int i = 0; i < r; ++i)
      std::memcpy(out.data() + static_cast<size_t>(i) * total + off,
                  xd.data() + static_cast<size_t>(i) * c, sizeof(double) * c);
    off += c;
  }
  std::vector<int> offsets;
  {
    int o = 0;
    for (const auto& x : xs) { offsets.push_back(o); o += x.dim(1); }
  }
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& x : xs) nodes.push_back(x.node());
  return make_op_result({r, total}, std::move(out), xs,
                        [nodes, offsets, r, total](Node& self) {
    for (size_t t = 0; t < nodes.size(); ++t) {
      if (!nodes[t]->requires_grad) continue;
      nodes[t]->ensure_grad();
      const int c = nodes[t]->shape[1];
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          nodes[t]->grad[static_cast<size_t>(i) * c + j] +=
              self.grad[static_cast<size_t>(i) * total + offsets[t] + j];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
  require(!xs.empty(), ErrorCode::ShapeMismatch, "concat_rows of nothing");
  const int c = xs[0].ndim() == 1 ? xs[0].dim(0) : xs[0].dim(1);
  int total_rows = 0;
  for (const auto& x : xs) {
    if (x.ndim() == 1) {
      require(x.dim(0) == c, ErrorCode::ShapeMismatch, "concat_rows width mismatch");
      total_rows += 1;
    } else {
      require(x.ndim() == 2 && x.dim(1) == c, ErrorCode::ShapeMismatch,
              "concat_rows width mismatch");
      total_rows += x.dim(0);
    }
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(total_rows) * c);
  for (const auto& x : xs) out.insert(out.end(), x.data().begin(), x.data().end());
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& x : xs) nodes.push_back(x.node());
  return make_op_result({total_rows, c}, std::move(out), xs,
                        [nodes](Node& self) {
    size_t off = 0;
    for (const auto& n : nodes) {
      const size_t sz = n->data.size();
      if (n->requires_grad) {
        n->ensure_grad();
        for (size_t i = 0; i < sz; ++i) n->grad[i] += self.grad[off + i];
      }
      off += sz;
    }
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows) {
  require(x.ndim() == 2, ErrorCode::ShapeMismatch, "gather_rows needs [r x c]");
  const int r = x.dim(0), c = x.dim(1);
  for (int i : rows)
    require(i >= 0 && i < r, ErrorCode::ShapeMismatch, "row index out of range");
  require(!rows.empty(), ErrorCode::ShapeMismatch, "gather_rows of nothing");
  std::vector<double> out(rows.size() * static_cast<size_t>(c));
  const auto xd = x.data();
  for (size_t i = 0; i < rows.size(); ++i)
    std::memcpy(out.data() + i * c, xd.data() + static_cast<size_t>(rows[i]) * c,
                sizeof(double) * c);
  auto xn = x.node();
  auto idx = rows;
  return make_op_result({static_cast<int>(rows.size()), c}, std::move(out), {x},
                        [xn, idx, c](Node& self) {
    xn->ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < c; ++j)
        xn->grad[static_cast<size_t>(idx[i]) * c + j] +=
            self.grad[i * c + j];
  });
}

Tensor scatter_rows(const Tensor& base, const Tensor& rows_tensor,
                    const std::vector<int>& rows) {
  require(base.ndim() == 2 && rows_tensor.ndim() == 2, ErrorCode::ShapeMismatch,
          "scatter_rows needs 2-D tensors");
  const int r = base.dim(0), c = base.dim(1);
  require(rows_tensor.dim(1) == c, ErrorCode::ShapeMismatch,
          "scatter_rows width mismatch");
  require(rows_tensor.dim(0) == static_cast<int>(rows.size()),
          ErrorCode::ShapeMismatch, "scatter_rows row-count mismatch");
  std::vector<char> replaced(r, 0);
  for (int i : rows) {
    require(i >= 0 && i < r, ErrorCode::ShapeMismatch, "row index out of range");
    replaced[i] = 1;
  }
  std::vector<double> out(base.data().begin(), base.data().end());
  const auto rd = rows_tensor.data();
  for (size_t i = 0; i < rows.size(); ++i)
    std::memcpy(out.data() + static_cast<size_t>(rows[i]) * c, rd.data() + i * c,
                sizeof(double) * c);
  auto bn = base.node(); auto rn = rows_tensor.node();
  auto idx = rows;
  return make_op_result({r, c}, std::move(out), {base, rows_tensor},
                        [bn, rn, idx, replaced, r, c](Node& self) {
    if (rn->requires_grad) {
      rn->ensure_grad();
      for (size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < c; ++j)
          rn->grad[i * c + j] += self.grad[static_cast<size_t>(idx[i]) * c + j];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int i = 0; i < r; ++i) {
        if (replaced[i]) continue;
        for (int j = 0; j < c; ++j)
          bn->grad[static_cast<size_t>(i) * c + j] +=
              self.grad[static_cast<size_t>(i) * c + j];
      }
    }
  });
}

// ---- image ops ----

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int pad) {
  require(x.ndim() == 3 && w.ndim() == 4, ErrorCode::ShapeMismatch,
          "conv2d needs x[C,H,W] and w[OC,IC,kh,kw]");
  const int ic = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int oc = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  require(w.dim(1) == ic, ErrorCode::ShapeMismatch,
          "conv2d input channel mismatch");
  require(stride >= 1 && pad >= 0, ErrorCode::ShapeMismatch,
          "conv2d stride/pad invalid");
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (wd + 2 * pad - kw) / stride + 1;
  require(oh >= 1 && ow >= 1, ErrorCode::ShapeMismatch, "conv2d output empty");
  if (bias.defined())
    require(bias.ndim() == 1 && bias.dim(0) == oc, ErrorCode::ShapeMismatch,
            "conv2d bias length mismatch");

  std::vector<double> out(static_cast<size_t>(oc) * oh * ow, 0.0);
  const double* xd = x.data().data();
  const double* wdp = w.data().data();
  const int64_t work = static_cast<int64_t>(oc) * ic * kh * kw * oh * ow;
#pragma omp parallel for schedule(static) if (work > 65536)
  for (int o = 0; o < oc; ++o) {
    double* oplane = out.data() + static_cast<size_t>(o) * oh * ow;
    if (bias.defined()) {
      const double b = bias.data()[o];
      for (int i = 0; i < oh * ow; ++i) oplane[i] = b;
    }
    for (int i = 0; i < ic; ++i) {
      const double* xplane = xd + static_cast<size_t>(i) * h * wd;
      const double* wbase = wdp + ((static_cast<size_t>(o) * ic + i) * kh) * kw;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const double wv = wbase[ky * kw + kx];
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            const double* xrow = xplane + static_cast<size_t>(iy) * wd;
            double* orow = oplane + static_cast<size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= wd) continue;
              orow[ox] += wv * xrow[ix];
            }
          }
        }
      }
    }
  }

  auto xn = x.node(); auto wn = w.node();
  auto bn = bias.defined() ? bias.node() : nullptr;
  std::vector<Tensor> parents = {x, w};
  if (bias.defined()) parents.push_back(bias);
  return make_op_result(
      {oc, oh, ow}, std::move(out), parents,
      [xn, wn, bn, ic, h, wd, oc, kh, kw, oh, ow, stride, pad](Node& self) {
        const double* dy = self.grad.data();
        if (bn && bn->requires_grad) {
          bn->ensure_grad();
          for (int o = 0; o < oc; ++o) {
            double s = 0.0;
            const double* dplane = dy + static_cast<size_t>(o) * oh * ow;
            for (int i = 0; i < oh * ow; ++i) s += dplane[i];
            bn->grad[o] += s;
          }
        }
        if (wn->requires_grad) {
          wn->ensure_grad();
#pragma omp parallel for schedule(static) if (static_cast<int64_t>(oc) * ic * kh * kw * oh * ow > 65536)
          for (int o = 0; o < oc; ++o) {
            const double* dplane = dy + static_cast<size_t>(o) * oh * ow;
            for (int i = 0; i < ic; ++i) {
              const double* xplane = xn->data.data() + static_cast<size_t>(i) * h * wd;
              double* wbase = wn->grad.data() + ((static_cast<size_t>(o) * ic + i) * kh) * kw;
              for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                  double s = 0.0;
                  for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    const double* xrow = xplane + static_cast<size_t>(iy) * wd;
                    const double* drow = dplane + static_cast<size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                      const int ix = ox * stride - pad + kx;
                      if (ix < 0 || ix >= wd) continue;
                      s += drow[ox] * xrow[ix];
                    }
                  }
                  wbase[ky * kw + kx] += s;
                }
              }
            }
          }
        }
        if (xn->requires_grad) {
          xn->ensure_grad();
#pragma omp parallel for schedule(static) if (static_cast<int64_t>(oc) * ic * kh * kw * oh * ow > 65536)
          for (int i = 0; i < ic; ++i) {
            double* dxplane = xn->grad.data() + static_cast<size_t>(i) * h * wd;
            for (int o = 0; o < oc; ++o) {
              const double* dplane = dy + static_cast<size_t>(o) * oh * ow;
              const double* wbase = wn->data.data() + ((static_cast<size_t>(o) * ic + i) * kh) * kw;
              for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                  const double wv = wbase[ky * kw + kx];
                  for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    double* dxrow = dxplane + static_cast<size_t>(iy) * wd;
                    const double* drow = dplane + static_cast<size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                      const int ix = ox * stride - pad + kx;
                      if (ix < 0 || ix >= wd) continue;
                      dxrow[ix] += wv * drow[ox];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

Tensor upsample_nearest2x(const Tensor& x) {
  require(x.ndim() == 3, ErrorCode::ShapeMismatch, "upsample needs [C,H,W]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> out(static_cast<size_t>(c) * 4 * h * w);
  const auto xd = x.data();
  for (int ch = 0; ch < c; ++ch) {
    const double* xp = xd.data() + static_cast<size_t>(ch) * h * w;
    double* op = out.data() + static_cast<size_t>(ch) * 4 * h * w;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const double v = xp[static_cast<size_t>(y) * w + xx];
        const size_t base = static_cast<size_t>(2 * y) * 2 * w + 2 * xx;
        op[base] = v;
        op[base + 1] = v;
        op[base + 2 * w] = v;
        op[base + 2 * w + 1] = v;
      }
    }
  }
  auto xn = x.node();
  return make_op_result({c, 2 * h, 2 * w}, std::move(out), {x},
                        [xn, c, h, w](Node& self) {
    xn->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      double* dxp = xn->grad.data() + static_cast<size_t>(ch) * h * w;
      const double* dop = self.grad.data() + static_cast<size_t>(ch) * 4 * h * w;
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          const size_t base = static_cast<size_t>(2 * y) * 2 * w + 2 * xx;
          dxp[static_cast<size_t>(y) * w + xx] +=
              dop[base] + dop[base + 1] + dop[base + 2 * w] + dop[base + 2 * w + 1];
        }
      }
    }
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& per_channel) {
  require(x.ndim() == 3 && per_channel.ndim() == 1, ErrorCode::ShapeMismatch,
          "add_channel_bias needs [C,H,W] and [C]");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(per_channel.dim(0) == c, ErrorCode::ShapeMismatch,
          "channel count mismatch");
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto td = per_channel.data();
  for (int ch = 0; ch < c; ++ch) {
    double* op = out.data() + static_cast<size_t>(ch) * h * w;
    for (int i = 0; i < h * w; ++i) op[i] += td[ch];
  }
  auto xn = x.node(); auto tn = per_channel.node();
  return make_op_result(x.shape(), std::move(out), {x, per_channel},
                        [xn, tn, c, h, w](Node& self) {
    if (xn->requires_grad) { xn->ensure_grad(); acc(xn->grad, self.grad); }
    if (tn->requires_grad) {
      tn->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        double s = 0.0;
        const double* dp = self.grad.data() + static_cast<size_t>(ch) * h * w;
        for (int i = 0; i < h * w; ++i) s += dp[i];
        tn->grad[ch] += s;
      }
    }
  });
}

}  // namespace sgad
