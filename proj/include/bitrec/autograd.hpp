// Copyright 2026 The BITRec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bitrec/parameter_store.hpp"
#include "bitrec/rng.hpp"
#include "bitrec/tensor.hpp"

namespace bitrec::ag {

template <class T>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor<T>& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode computation tape.
///
/// Every op appends a node holding its forward value and a closure that
/// propagates the node's gradient to its inputs. backward() walks the nodes
/// in reverse insertion order. Parameter leaves reference the store's tensors
/// directly; their gradients are added into the store's grad buffers at the
/// end of backward().
///
/// A tape built with record_gradients = false keeps forward values only and
/// is the mode used for evaluation.
template <class T>
class Tape {
 public:
  using value_type = T;

  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  Var<T> constant(Tensor<T> value);
  /// Differentiable leaf that is not bound to a store (used in tests).
  Var<T> variable(Tensor<T> value);
  /// Leaf bound to a store entry; repeated calls return the same node.
  Var<T> parameter(ParameterStore<T>& store, const std::string& name);
  /// Read-only binding; only valid on a non-recording tape.
  Var<T> parameter(const ParameterStore<T>& store, const std::string& name);

  /// Receives the tape and the gradient flowing into the op's output.
  using Backward = std::function<void(Tape&, const Tensor<T>&)>;
  /// Appends an op node. `requires_grad` should be true iff some input
  /// requires a gradient; the closure is dropped otherwise.
  Var<T> push(Tensor<T> value, bool requires_grad, Backward backward);

  const Tensor<T>& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var<T> v) const { return v.valid() && nodes_[v.id].requires_grad; }
  /// Gradient of a node, or nullptr if nothing has flowed into it yet.
  const Tensor<T>* grad(int id) const;
  /// Gradient buffer of a node, zero-initialised on first use.
  Tensor<T>& grad_buffer(int id);

  /// Seeds d(loss)/d(loss) = 1 and runs the reverse sweep. `loss` must be
  /// 1 x 1. Store gradients are accumulated, not overwritten.
  void backward(Var<T> loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    Backward backward;
    Tensor<T>* store_grad = nullptr;
  };

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> params_;
  bool recording_;
};

template <class T>
const Tensor<T>& Var<T>::value() const {
  return tape->value(id);
}

/// Binds named parameters of a store onto a tape. A const store yields
/// leaves without gradients and requires a non-recording tape.
template <class T>
class Binder {
 public:
  Binder(Tape<T>& tape, ParameterStore<T>& store) : tape_(&tape), mut_(&store), store_(&store) {}
  Binder(Tape<T>& tape, const ParameterStore<T>& store) : tape_(&tape), store_(&store) {}

  Var<T> operator()(const std::string& name) const {
    return mut_ ? tape_->parameter(*mut_, name) : tape_->parameter(*store_, name);
  }
  bool has(const std::string& name) const { return store_->contains(name); }
  const Tensor<T>& value(const std::string& name) const { return store_->value(name); }
  Tape<T>& tape() const { return *tape_; }
  Var<T> constant(Tensor<T> value) const { return tape_->constant(std::move(value)); }

 private:
  Tape<T>* tape_;
  ParameterStore<T>* mut_ = nullptr;
  const ParameterStore<T>* store_;
};

// Element-wise and broadcasting arithmetic.
template <class T> Var<T> add(Var<T> a, Var<T> b);
template <class T> Var<T> sub(Var<T> a, Var<T> b);
template <class T> Var<T> mul(Var<T> a, Var<T> b);
/// a (n x m) + row (1 x m) broadcast over rows.
template <class T> Var<T> add_row(Var<T> a, Var<T> row);
/// a * s where s is 1 x 1.
template <class T> Var<T> scale(Var<T> a, Var<T> s);
template <class T> Var<T> scale(Var<T> a, T c);
/// Element-wise product with a constant tensor (masks, indicators).
template <class T> Var<T> mul_const(Var<T> a, const Tensor<T>& c);

// Linear algebra.
/// a (n x k) . b (k x m)
template <class T> Var<T> matmul(Var<T> a, Var<T> b);
/// a (n x k) . b^T for b (m x k)
template <class T> Var<T> matmul_nt(Var<T> a, Var<T> b);
/// x . w^T + bias, w is (out x in); bias (1 x out) may be an invalid Var.
template <class T> Var<T> linear(Var<T> x, Var<T> w, Var<T> bias);

// Shape manipulation.
template <class T> Var<T> gather_rows(Var<T> table, std::span<const std::int32_t> ids);
template <class T> Var<T> concat_cols(std::span<const Var<T>> parts);
template <class T> Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t count);
template <class T> Var<T> reshape(Var<T> a, std::size_t rows, std::size_t cols);
/// Row i is second[i] where take_second[i] != 0, else first[i].
template <class T>
Var<T> where_rows(std::span<const std::uint8_t> take_second, Var<T> first, Var<T> second);

// Non-linearities.
template <class T> Var<T> sigmoid(Var<T> a);
template <class T> Var<T> tanh(Var<T> a);
/// tanh approximation of GELU.
template <class T> Var<T> gelu(Var<T> a);
/// log(a + eps)
template <class T> Var<T> log_eps(Var<T> a, T eps);
/// Training-time inverted dropout. Identity when rate == 0.
template <class T> Var<T> dropout(Var<T> a, double rate, Rng& rng);

/// Row-wise softmax of scores + additive_mask, where the mask holds 0 or
/// -inf. Rows whose entries are all -inf produce an all-zero row.
template <class T> Var<T> masked_softmax(Var<T> scores, const Tensor<T>& additive_mask);

template <class T> Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps);

/// out[i][j] = mask[i][j] * (sum_k w2[k] * tanh(left[i][k] + right[j][k] + b1[k]) + b2)
///
/// A two-layer tanh MLP evaluated on every (i, j) pair whose first layer is
/// additively separable into a query-side part `left` and a key-side part
/// `right`. Pairs with mask 0 are never evaluated and are exactly 0.
template <class T>
Var<T> pairwise_tanh_mlp(Var<T> left, Var<T> right, Var<T> b1, Var<T> w2, Var<T> b2,
                         const Tensor<T>& pair_mask);

/// Pairwise cosine similarity between the rows of e. Pairs involving a row
/// with norm below 1e-12 are 0.
template <class T> Var<T> row_cosine(Var<T> e);

// Reductions and losses (all produce 1 x 1).
template <class T> Var<T> sum(Var<T> a);
/// sum over rows r with a non-empty candidate list of
/// -log softmax(hidden[r] . table[candidates[r]])[0]; candidates[r][0] is the
/// positive item.
template <class T>
Var<T> sampled_softmax_xent(Var<T> hidden, Var<T> table,
                            std::span<const std::vector<std::int32_t>> candidates);
/// sum over rows with target >= 0 of -log softmax(logits[r])[target[r]].
template <class T>
Var<T> softmax_xent(Var<T> logits, std::span<const std::int32_t> targets);

// Free-standing numeric helpers shared with the tests.

/// Row-wise masked softmax on plain tensors, same contract as the op.
template <class T> Tensor<T> masked_softmax_values(const Tensor<T>& scores, const Tensor<T>& mask);
/// Cosine similarity; 0 when either vector's norm is below 1e-12.
template <class T> T cosine_similarity(std::span<const T> a, std::span<const T> b);

}  // namespace bitrec::ag
