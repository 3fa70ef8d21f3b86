// include/svc/autodiff.hpp

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

#ifndef SVC_AUTODIFF_HPP_
#define SVC_AUTODIFF_HPP_

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace svc::ad {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// A named trainable tensor with its accumulated gradient.
template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
};

/// Owns parameters in insertion order; addresses stay valid for the lifetime
/// of the set.
template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, Eigen::Index rows, Eigen::Index cols);
  Parameter<T>* find(const std::string& name);
  const Parameter<T>* find(const std::string& name) const;
  Parameter<T>& at(const std::string& name);
  const Parameter<T>& at(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();

 private:
  std::deque<Parameter<T>> params_;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class Padding { kCausal, kSame };

/// Reverse-mode tape. Ops record their value eagerly and a closure that
/// propagates the output gradient back to their inputs. Nodes whose inputs do
/// not require gradients skip the backward pass.
template <typename T>
class Graph {
 public:
  using Mat = Matrix<T>;
  using GradFilter = std::function<bool(const Parameter<T>&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Parameters rejected by the filter enter the graph as constants.
  void set_grad_filter(GradFilter filter) { grad_filter_ = std::move(filter); }

  Var constant(Mat value);
  /// Leaf holding a copy of the parameter value. Gradients stay on the tape
  /// until accumulate_grads() adds them to the owning set.
  Var param(const Parameter<T>& p);

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  T scalar(Var v) const { return nodes_[v.id].value(0, 0); }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every leaf.
  void backward(Var loss);
  /// Adds leaf gradients into the matching parameters of `params`.
  void accumulate_grads(ParameterSet<T>& params) const;

  Var matmul(Var x, Var w);
  /// x * w + b, with b a [1 x cols] row broadcast over rows.
  Var linear(Var x, Var w, Var b);
  /// Dilated 1-D convolution over rows (time). w is [kernel * in x out] with
  /// tap k occupying rows [k * in, (k + 1) * in). Causal taps look back by
  /// (kernel - 1 - k) * dilation; same-padded taps are centred (odd kernel).
  Var conv1d(Var x, Var w, Var b, int kernel, int dilation, Padding pad);
  Var add(Var a, Var b);
  Var relu(Var x);
  Var tanh(Var x);
  /// Copy of x with column `col` multiplied by `factor`.
  Var scale_column(Var x, Eigen::Index col, T factor);
  /// [T x 2C] -> [T x C]: tanh(left half) * sigmoid(right half).
  Var gated(Var z);
  /// Non-overlapping mean pooling over rows; the last window may be partial.
  Var avg_pool(Var x, int stride);
  /// Row i of the output is row floor(i / factor) of x; `rows` output rows.
  Var upsample_nearest(Var x, int factor, Eigen::Index rows);
  Var concat_cols(std::span<const Var> parts);
  Var broadcast_rows(Var row, Eigen::Index rows);
  Var select_row(Var m, Eigen::Index row);
  Var mean_rows(Var x);
  /// Inverted dropout with keep-probability 1 - p.
  Var dropout(Var x, T p, std::mt19937_64& rng);
  /// Mean over rows of the softmax cross-entropy against integer targets.
  Var softmax_cross_entropy(Var logits, std::span<const int> targets);
  /// Mean squared error between a [n x 1] prediction and a target vector.
  Var mse(Var pred, std::span<const T> target);
  /// Weighted sum of [1 x 1] scalars.
  Var weighted_sum(std::span<const Var> terms, std::span<const T> weights);

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    const Parameter<T>* source = nullptr;
    std::function<void(Graph&, int)> backward;
  };

  Var push(Mat value, bool requires_grad, std::function<void(Graph&, int)> back);
  Mat& grad_of(int id);
  const Mat& grad_at(int id) const { return nodes_[id].grad; }

  std::vector<Node> nodes_;
  GradFilter grad_filter_;
};

/// Adam with bias correction; state is keyed by parameter name.
template <typename T>
struct AdamMoments {
  Matrix<T> m;
  Matrix<T> v;
  long long t = 0;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
void adam_update(Parameter<T>& p, AdamMoments<T>& state, double lr, const AdamOptions& opts);

}  // namespace svc::ad

#endif  // SVC_AUTODIFF_HPP_
