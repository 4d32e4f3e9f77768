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

#include <array>
#include <span>
#include <string>
#include <vector>

#include "bitrec/autograd.hpp"
#include "bitrec/embedding.hpp"

namespace bitrec {

/// Width of the statistical context vector.
inline constexpr std::size_t kContextFeatures = 4;
/// Width of the stacked relational features: 3 item, 1 transition, 3 temporal.
inline constexpr std::size_t kRelationalFeatures = 7;
inline constexpr std::size_t kRelationalHidden = 16;
inline constexpr double kTreEpsilon = 1e-6;

/// Independent switches for the four TRE signals. A disabled signal is
/// replaced by zeros without changing any shape.
struct TreToggles {
  bool transition = true;
  bool temporal = true;
  bool item_consistency = true;
  bool context_matching = true;
};

/// Per-position prefix statistics, n x 4:
/// [(j + 1) / L, share of v_j in the prefix, share of c_j in the prefix,
///  share of commitment behaviors in the prefix].
template <class T>
Tensor<T> context_features(const Tokens& tokens, const BehaviorSchema& schema, std::size_t L);

/// Batch form, (batch, L, 4) with padded positions zero.
template <class T>
Tensor<T> context_features(const Batch& batch, const BehaviorSchema& schema);

/// [sigmoid(dt / 24), log(1 + dt), 1 / (1 + dt)] for a gap in hours.
std::array<double, 3> temporal_feature(double dt_hours);

/// Three n x n planes of temporal_feature at dt = max(t_i - t_j, 0) hours.
template <class T>
std::array<Tensor<T>, 3> temporal_features(std::span<const std::int64_t> timestamps);

/// Same-item and same-category indicator planes, n x n each.
template <class T>
std::array<Tensor<T>, 2> identity_flags(const Tokens& tokens);

/// Item-consistency planes [same item, same category, cosine(e_v_i, e_v_j)].
template <class T>
std::array<ag::Var<T>, 3> item_consistency(const Tokens& tokens, ag::Var<T> item_emb);

/// out[i][j] = B[b_i][b_j].
template <class T>
ag::Var<T> behavior_transition_lookup(std::span<const BehaviorId> behaviors, ag::Var<T> matrix);

/// (C Wq^T)(C Wk^T)^T for the context rows C_j = [e_b_j | e_c_j | H_j].
template <class T>
ag::Var<T> context_match_scores(ag::Var<T> context, ag::Var<T> wq, ag::Var<T> wk);

/// Two-layer tanh MLP applied to every pair's 7 stacked features.
template <class T>
ag::Var<T> relational_score(std::span<const ag::Var<T>> planes, ag::Var<T> w1, ag::Var<T> b1,
                            ag::Var<T> w2, ag::Var<T> b2);

/// log(sigmoid(alpha_qk / tau * s_qk + alpha_rel * s_rel) + eps) on and below
/// the diagonal, exactly 0 above it.
template <class T>
ag::Var<T> transition_bias(ag::Var<T> s_qk, ag::Var<T> s_rel, ag::Var<T> alpha_qk,
                           ag::Var<T> alpha_rel, T tau, T eps);

struct TreShape {
  std::size_t d = 0;
  std::size_t category_dim = 0;
  std::size_t match_dim = 0;
  std::size_t behaviors = 0;

  std::size_t context_dim() const { return d + category_dim + kContextFeatures; }
};

/// Registers tre.ctx.{Wq,Wk}, tre.behavior_matrix (zeros), tre.rel.{W1,b1,w2,b2}
/// and the gates tre.alpha_qk, tre.alpha_rel (ones, no weight decay).
template <class T>
void add_tre_parameters(ParameterStore<T>& store, const TreShape& shape, std::uint64_t seed);

template <class T>
struct TreOutput {
  ag::Var<T> s_qk;
  ag::Var<T> s_rel;
  ag::Var<T> bias;
};

/// The whole transition-relation bias for one sequence. It reads only the
/// tokens and embedding tables, never hidden states, so one evaluation
/// serves every layer.
template <class T>
TreOutput<T> tre_forward(const ag::Binder<T>& params, const Tokens& tokens,
                         const BehaviorSchema& schema, std::size_t L, const TreToggles& toggles);

}  // namespace bitrec
