// src/autodiff.cpp

// Copyright 2026  The svc Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>

#include "svc/autodiff.hpp"
#include "svc/errors.hpp"

namespace svc::ad {

// ---------------------------------------------------------------------------
// ParameterSet

template <typename T>
Parameter<T>& ParameterSet<T>::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (find(name) != nullptr) throw ConsistencyError("duplicate parameter name: " + name);
  Parameter<T>& p = params_.emplace_back();
  p.name = std::move(name);
  p.value = Matrix<T>::Zero(rows, cols);
  return p;
}

template <typename T>
Parameter<T>* ParameterSet<T>::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
const Parameter<T>* ParameterSet<T>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
Parameter<T>& ParameterSet<T>::at(const std::string& name) {
  Parameter<T>* p = find(name);
  if (p == nullptr) throw ConsistencyError("unknown parameter: " + name);
  return *p;
}

template <typename T>
const Parameter<T>& ParameterSet<T>::at(const std::string& name) const {
  const Parameter<T>* p = find(name);
  if (p == nullptr) throw ConsistencyError("unknown parameter: " + name);
  return *p;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) p.grad.resize(0, 0);
}

// ---------------------------------------------------------------------------
// Graph plumbing

template <typename T>
Var Graph<T>::push(Mat value, bool requires_grad, std::function<void(Graph&, int)> back) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(back);
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
typename Graph<T>::Mat& Graph<T>::grad_of(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <typename T>
Var Graph<T>::constant(Mat value) {
  return push(std::move(value), false, nullptr);
}

template <typename T>
Var Graph<T>::param(const Parameter<T>& p) {
  const bool trainable = !grad_filter_ || grad_filter_(p);
  Var v = push(p.value, trainable, nullptr);
  nodes_[v.id].source = &p;
  return v;
}

template <typename T>
void Graph<T>::accumulate_grads(ParameterSet<T>& params) const {
  for (const Node& n : nodes_) {
    if (n.source == nullptr || n.grad.size() == 0) continue;
    bool found = false;
    for (Parameter<T>& p : params) {
      if (&p != n.source) continue;
      if (p.grad.size() == 0) p.grad = Mat::Zero(p.value.rows(), p.value.cols());
      p.grad += n.grad;
      found = true;
      break;
    }
    if (!found) throw ConsistencyError("accumulate_grads: parameter " + n.source->name +
                                       " does not belong to this set");
  }
}

template <typename T>
void Graph<T>::backward(Var loss) {
  if (value(loss).size() != 1) throw ConsistencyError("backward: loss must be a scalar");
  if (!nodes_[loss.id].requires_grad) return;
  grad_of(loss.id).setOnes();
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Var Graph<T>::matmul(Var x, Var w) {
  const Mat& xv = value(x);
  const Mat& wv = value(w);
  if (xv.cols() != wv.rows())
    throw ConsistencyError("matmul: shape mismatch " + std::to_string(xv.cols()) + " vs " +
                           std::to_string(wv.rows()));
  Mat y = xv * wv;
  const bool rg = requires_grad(x) || requires_grad(w);
  return push(std::move(y), rg, [x, w](Graph& g, int self) {
    const Mat& gy = g.grad_at(self);
    if (g.requires_grad(x)) g.grad_of(x.id).noalias() += gy * g.value(w).transpose();
    if (g.requires_grad(w)) g.grad_of(w.id).noalias() += g.value(x).transpose() * gy;
  });
}

template <typename T>
Var Graph<T>::linear(Var x, Var w, Var b) {
  const Mat& xv = value(x);
  const Mat& wv = value(w);
  const Mat& bv = value(b);
  if (xv.cols() != wv.rows() || bv.rows() != 1 || bv.cols() != wv.cols())
    throw ConsistencyError("linear: shape mismatch");
  Mat y(xv.rows(), wv.cols());
  y.noalias() = xv * wv;
  y.rowwise() += bv.row(0);
  const bool rg = requires_grad(x) || requires_grad(w) || requires_grad(b);
  return push(std::move(y), rg, [x, w, b](Graph& g, int self) {
    const Mat& gy = g.grad_at(self);
    if (g.requires_grad(x)) g.grad_of(x.id).noalias() += gy * g.value(w).transpose();
    if (g.requires_grad(w)) g.grad_of(w.id).noalias() += g.value(x).transpose() * gy;
    if (g.requires_grad(b)) g.grad_of(b.id) += gy.colwise().sum();
  });
}

namespace {

struct TapRange {
  Eigen::Index offset;
  Eigen::Index first;
  Eigen::Index count;
};

TapRange tap_range(Eigen::Index rows, int kernel, int k, int dilation, Padding pad) {
  const Eigen::Index offset = pad == Padding::kCausal
                                  ? -static_cast<Eigen::Index>(kernel - 1 - k) * dilation
                                  : static_cast<Eigen::Index>(k - (kernel - 1) / 2) * dilation;
  const Eigen::Index first = std::max<Eigen::Index>(0, -offset);
  const Eigen::Index last = std::min<Eigen::Index>(rows, rows - offset);
  return {offset, first, std::max<Eigen::Index>(0, last - first)};
}

}  // namespace

template <typename T>
Var Graph<T>::conv1d(Var x, Var w, Var b, int kernel, int dilation, Padding pad) {
  const Mat& xv = value(x);
  const Mat& wv = value(w);
  const Mat& bv = value(b);
  const Eigen::Index in = xv.cols();
  if (kernel < 1 || dilation < 1) throw ConsistencyError("conv1d: bad kernel or dilation");
  if (pad == Padding::kSame && kernel % 2 == 0)
    throw ConsistencyError("conv1d: same padding needs an odd kernel");
  if (wv.rows() != kernel * in || bv.rows() != 1 || bv.cols() != wv.cols())
    throw ConsistencyError("conv1d: weight shape mismatch");

  Mat y(xv.rows(), wv.cols());
  y.rowwise() = bv.row(0);
  for (int k = 0; k < kernel; ++k) {
    const TapRange r = tap_range(xv.rows(), kernel, k, dilation, pad);
    if (r.count == 0) continue;
    y.middleRows(r.first, r.count).noalias() +=
        xv.middleRows(r.first + r.offset, r.count) * wv.middleRows(k * in, in);
  }
  const bool rg = requires_grad(x) || requires_grad(w) || requires_grad(b);
  return push(std::move(y), rg, [x, w, b, kernel, dilation, pad](Graph& g, int self) {
    const Mat& gy = g.grad_at(self);
    const Mat& xv = g.value(x);
    const Mat& wv = g.value(w);
    const Eigen::Index in = xv.cols();
    for (int k = 0; k < kernel; ++k) {
      const TapRange r = tap_range(xv.rows(), kernel, k, dilation, pad);
      if (r.count == 0) continue;
      if (g.requires_grad(x)) {
        g.grad_of(x.id).middleRows(r.first + r.offset, r.count).noalias() +=
            gy.middleRows(r.first, r.count) * wv.middleRows(k * in, in).transpose();
      }
      if (g.requires_grad(w)) {
        g.grad_of(w.id).middleRows(k * in, in).noalias() +=
            xv.middleRows(r.first + r.offset, r.count).transpose() *
            gy.middleRows(r.first, r.count);
      }
    }
    if (g.requires_grad(b)) g.grad_of(b.id) += gy.colwise().sum();
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Var Graph<T>::add(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
    throw ConsistencyError("add: shape mismatch");
  Mat y = value(a) + value(b);
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(y), rg, [a, b](Graph& g, int self) {
    const Mat& gy = g.grad_at(self);
    if (g.requires_grad(a)) g.grad_of(a.id) += gy;
    if (g.requires_grad(b)) g.grad_of(b.id) += gy;
  });
}

template <typename T>
Var Graph<T>::relu(Var x) {
  Mat y = value(x).cwiseMax(T(0));
  return push(std::move(y), requires_grad(x), [x](Graph& g, int self) {
    const Mat& gy = g.grad_at(self);
    g.grad_of(x.id).array() += (g.value(x).array() > T(0)).select(gy.array(), T(0));
  });
}

template <typename T>
Var Graph<T>::tanh(Var x) {
  Mat y = value(x).array().tanh();
  return push(std::move(y), requires_grad(x), [x](Graph& g, int self) {
    const Mat& y = g.value(Var{self});
    g.grad_of(x.id).array() += g.grad_at(self).array() * (T(1) - y.array().square());
  });
}

template <typename T>
Var Graph<T>::scale_column(Var x, Eigen::Index col, T factor) {
  if (col < 0 || col >= value(x).cols()) throw ConsistencyError("scale_column: column out of range");
  Mat y = value(x);
  y.col(col) *= factor;
  return push(std::move(y), requires_grad(x), [x, col, factor](Graph& g, int self) {
    Mat& gx = g.grad_of(x.id);
    gx += g.grad_at(self);
    gx.col(col) += (factor - T(1)) * g.grad_at(self).col(col);
  });
}

template <typename T>
Var Graph<T>::gated(Var z) {
  const Mat& zv = value(z);
  if (zv.cols() % 2 != 0) throw ConsistencyError("gated: odd channel count");
  const Eigen::Index c = zv.cols() / 2;
  Mat th = zv.leftCols(c).array().tanh();
  Mat sg = (T(1) + (-zv.rightCols(c).array()).exp()).inverse();
  Mat y = th.cwiseProduct(sg);
  return push(std::move(y), requires_grad(z),
              [z, c, th = std::move(th), sg = std::move(sg)](Graph& g, int self) {
                const Mat& gy = g.grad_at(self);
                Mat& gz = g.grad_of(z.id);
                gz.leftCols(c).array() += gy.array() * sg.array() * (T(1) - th.array().square());
                gz.rightCols(c).array() +=
                    gy.array() * th.array() * sg.array() * (T(1) - sg.array());
              });
}

// ---------------------------------------------------------------------------
// Reshaping over time

template <typename T>
Var Graph<T>::avg_pool(Var x, int stride) {
  const Mat& xv = value(x);
  if (stride < 1) throw ConsistencyError("avg_pool: stride must be positive");
  const Eigen::Index frames = (xv.rows() + stride - 1) / stride;
  Mat y(frames, xv.cols());
  for (Eigen::Index f = 0; f < frames; ++f) {
    const Eigen::Index lo = f * stride, n = std::min<Eigen::Index>(stride, xv.rows() - lo);
    y.row(f) = xv.middleRows(lo, n).colwise().sum() / static_cast<T>(n);
  }
  return push(std::move(y), requires_grad(x), [x, stride](Graph& g, int self) {
    const Mat& gy = g.grad_at(self);
    Mat& gx = g.grad_of(x.id);
    for (Eigen::Index f = 0; f < gy.rows(); ++f) {
      const Eigen::Index lo = f * stride, n = std::min<Eigen::Index>(stride, gx.rows() - lo);
      gx.middleRows(lo, n).rowwise() += gy.row(f) / static_cast<T>(n);
    }
  });
}

template <typename T>
Var Graph<T>::upsample_nearest(Var x, int factor, Eigen::Index rows) {
  const Mat& xv = value(x);
  if (factor < 1) throw ConsistencyError("upsample_nearest: factor must be positive");
  if (rows > 0 && (rows - 1) / factor >= xv.rows())
    throw ConsistencyError("upsample_nearest: " + std::to_string(xv.rows()) +
                           " frames cannot cover " + std::to_string(rows) + " rows");
  Mat y(rows, xv.cols());
  for (Eigen::Index f = 0; f * factor < rows; ++f) {
    const Eigen::Index lo = f * factor, n = std::min<Eigen::Index>(factor, rows - lo);
    y.middleRows(lo, n).rowwise() = xv.row(f);
  }
  return push(std::move(y), requires_grad(x), [x, factor](Graph& g, int self) {
    const Mat& gy = g.grad_at(self);
    Mat& gx = g.grad_of(x.id);
    for (Eigen::Index f = 0; f * factor < gy.rows(); ++f) {
      const Eigen::Index lo = f * factor, n = std::min<Eigen::Index>(factor, gy.rows() - lo);
      gx.row(f) += gy.middleRows(lo, n).colwise().sum();
    }
  });
}

template <typename T>
Var Graph<T>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ConsistencyError("concat_cols: no inputs");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw ConsistencyError("concat_cols: row count mismatch");
    cols += value(p).cols();
    rg = rg || requires_grad(p);
  }
  Mat y(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    y.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(y), rg, [inputs = std::move(inputs)](Graph& g, int self) {
    const Mat& gy = g.grad_at(self);
    Eigen::Index at = 0;
    for (Var p : inputs) {
      const Eigen::Index c = g.value(p).cols();
      if (g.requires_grad(p)) g.grad_of(p.id) += gy.middleCols(at, c);
      at += c;
    }
  });
}

template <typename T>
Var Graph<T>::broadcast_rows(Var row, Eigen::Index rows) {
  const Mat& rv = value(row);
  if (rv.rows() != 1) throw ConsistencyError("broadcast_rows: expected a single row");
  Mat y(rows, rv.cols());
  y.rowwise() = rv.row(0);
  return push(std::move(y), requires_grad(row), [row](Graph& g, int self) {
    g.grad_of(row.id) += g.grad_at(self).colwise().sum();
  });
}

template <typename T>
Var Graph<T>::select_row(Var m, Eigen::Index row) {
  const Mat& mv = value(m);
  if (row < 0 || row >= mv.rows()) throw ConsistencyError("select_row: index out of range");
  Mat y = mv.row(row);
  return push(std::move(y), requires_grad(m), [m, row](Graph& g, int self) {
    g.grad_of(m.id).row(row) += g.grad_at(self).row(0);
  });
}

template <typename T>
Var Graph<T>::mean_rows(Var x) {
  const Mat& xv = value(x);
  if (xv.rows() == 0) throw ConsistencyError("mean_rows: empty input");
  Mat y = xv.colwise().mean();
  return push(std::move(y), requires_grad(x), [x](Graph& g, int self) {
    Mat& gx = g.grad_of(x.id);
    gx.rowwise() += g.grad_at(self).row(0) / static_cast<T>(gx.rows());
  });
}

template <typename T>
Var Graph<T>::dropout(Var x, T p, std::mt19937_64& rng) {
  if (p < T(0) || p >= T(1)) throw ConsistencyError("dropout: p must be in [0, 1)");
  if (p == T(0)) return x;
  const Mat& xv = value(x);
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const T scale = T(1) / (T(1) - p);
  Mat mask(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : T(0);
  Mat y = xv.cwiseProduct(mask);
  return push(std::move(y), requires_grad(x), [x, mask = std::move(mask)](Graph& g, int self) {
    g.grad_of(x.id) += g.grad_at(self).cwiseProduct(mask);
  });
}

// ---------------------------------------------------------------------------
// Losses

template <typename T>
Var Graph<T>::softmax_cross_entropy(Var logits, std::span<const int> targets) {
  const Mat& z = value(logits);
  if (static_cast<std::size_t>(z.rows()) != targets.size())
    throw ArgumentError("cross entropy: " + std::to_string(z.rows()) + " logit rows vs " +
                        std::to_string(targets.size()) + " targets");
  if (z.rows() == 0) throw ArgumentError("cross entropy: empty input");
  Mat probs(z.rows(), z.cols());
  double total = 0.0;
  for (Eigen::Index t = 0; t < z.rows(); ++t) {
    const int y = targets[t];
    if (y < 0 || y >= z.cols()) throw ArgumentError("cross entropy: target class out of range");
    const T peak = z.row(t).maxCoeff();
    probs.row(t) = (z.row(t).array() - peak).exp();
    const T denom = probs.row(t).sum();
    probs.row(t) /= denom;
    total += static_cast<double>(peak) + std::log(static_cast<double>(denom)) -
             static_cast<double>(z(t, y));
  }
  Mat loss(1, 1);
  loss(0, 0) = static_cast<T>(total / static_cast<double>(z.rows()));
  std::vector<int> ys(targets.begin(), targets.end());
  return push(std::move(loss), requires_grad(logits),
              [logits, probs = std::move(probs), ys = std::move(ys)](Graph& g, int self) {
                const T scale = g.grad_at(self)(0, 0) / static_cast<T>(probs.rows());
                Mat& gz = g.grad_of(logits.id);
                gz += probs * scale;
                for (std::size_t t = 0; t < ys.size(); ++t) gz(static_cast<Eigen::Index>(t), ys[t]) -= scale;
              });
}

template <typename T>
Var Graph<T>::mse(Var pred, std::span<const T> target) {
  const Mat& p = value(pred);
  if (p.cols() != 1 || static_cast<std::size_t>(p.rows()) != target.size())
    throw ArgumentError("mse: " + std::to_string(p.rows()) + " predictions vs " +
                        std::to_string(target.size()) + " targets");
  if (target.empty()) throw ArgumentError("mse: empty input");
  Mat diff(p.rows(), 1);
  for (Eigen::Index i = 0; i < p.rows(); ++i) diff(i, 0) = p(i, 0) - target[i];
  Mat loss(1, 1);
  loss(0, 0) = diff.squaredNorm() / static_cast<T>(diff.rows());
  return push(std::move(loss), requires_grad(pred),
              [pred, diff = std::move(diff)](Graph& g, int self) {
                const T scale = T(2) * g.grad_at(self)(0, 0) / static_cast<T>(diff.rows());
                g.grad_of(pred.id) += diff * scale;
              });
}

template <typename T>
Var Graph<T>::weighted_sum(std::span<const Var> terms, std::span<const T> weights) {
  if (terms.size() != weights.size() || terms.empty())
    throw ConsistencyError("weighted_sum: need one weight per term");
  Mat y = Mat::Zero(1, 1);
  bool rg = false;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (value(terms[i]).size() != 1) throw ConsistencyError("weighted_sum: terms must be scalars");
    y(0, 0) += weights[i] * scalar(terms[i]);
    rg = rg || requires_grad(terms[i]);
  }
  std::vector<Var> ts(terms.begin(), terms.end());
  std::vector<T> ws(weights.begin(), weights.end());
  return push(std::move(y), rg, [ts = std::move(ts), ws = std::move(ws)](Graph& g, int self) {
    const T gy = g.grad_at(self)(0, 0);
    for (std::size_t i = 0; i < ts.size(); ++i)
      if (g.requires_grad(ts[i])) g.grad_of(ts[i].id)(0, 0) += ws[i] * gy;
  });
}

// ---------------------------------------------------------------------------
// Optimizer

template <typename T>
void adam_update(Parameter<T>& p, AdamMoments<T>& state, double lr, const AdamOptions& opts) {
  if (p.grad.size() == 0) return;
  if (state.m.size() == 0) {
    state.m = Matrix<T>::Zero(p.value.rows(), p.value.cols());
    state.v = Matrix<T>::Zero(p.value.rows(), p.value.cols());
  }
  ++state.t;
  const T b1 = static_cast<T>(opts.beta1), b2 = static_cast<T>(opts.beta2);
  state.m = b1 * state.m + (T(1) - b1) * p.grad;
  state.v = b2 * state.v + (T(1) - b2) * p.grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.t));
  const T step = static_cast<T>(lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(opts.eps);
  p.value.array() -= step * state.m.array() / ((state.v.array() * inv_c2).sqrt() + eps);
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Graph<float>;
template class Graph<double>;
template void adam_update<float>(Parameter<float>&, AdamMoments<float>&, double, const AdamOptions&);
template void adam_update<double>(Parameter<double>&, AdamMoments<double>&, double, const AdamOptions&);

}  // namespace svc::ad
