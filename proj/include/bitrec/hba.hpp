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

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bitrec/autograd.hpp"
#include "bitrec/dataio.hpp"

namespace bitrec {

/// How behaviors are split into the two attention strata.
enum class IntensityMode {
  kFull,          ///< the schema's own partition
  kNone,          ///< no split: both channels see the whole causal prefix
  kPurchaseOnly,  ///< only the purchase behavior counts as commitment
};

std::string_view to_string(IntensityMode mode);
IntensityMode parse_intensity_mode(std::string_view text);

/// Additive {0, -inf} masks for the exploration and commitment channels.
template <class T>
struct IntensityMasks {
  Tensor<T> low;
  Tensor<T> high;
};

/// Masks over the n valid tokens of one sequence. low[i][j] = 0 iff
/// j <= i and b_j is exploration; high likewise for commitment. With
/// `split` false both masks are the plain causal mask.
template <class T>
IntensityMasks<T> intensity_masks(std::span<const BehaviorId> behaviors,
                                  const BehaviorSchema& schema, bool split = true);

/// Batch form: one pair of L x L masks per row. Padded keys are masked and
/// padded query rows are fully masked.
template <class T>
std::vector<IntensityMasks<T>> build_intensity_masks(const Batch& batch,
                                                     const BehaviorSchema& schema,
                                                     bool split = true);

template <class T>
struct HbaWeights {
  ag::Var<T> wq, wk, wv;  // d x d
  ag::Var<T> gate_w;      // d x 2d
  ag::Var<T> gate_b;      // 1 x d
  ag::Var<T> mlp_w1;      // d x 4d, input order [h_i | e_b_j | e_v_j | R_i]
  ag::Var<T> mlp_b1;      // 1 x d
  ag::Var<T> mlp_w2;      // 1 x d
  ag::Var<T> mlp_b2;      // 1 x 1
};

/// Registers `<prefix>.{Wq,Wk,Wv,gate.W,gate.b,mlp.W1,mlp.b1,mlp.w2,mlp.b2}`.
/// Weights are Xavier-uniform, biases zero.
template <class T>
void add_hba_parameters(ParameterStore<T>& store, const std::string& prefix, std::size_t d,
                        std::uint64_t seed);

template <class T>
HbaWeights<T> bind_hba(const ag::Binder<T>& params, const std::string& prefix);

/// masked_softmax(H Wq^T (H Wk^T)^T / sqrt(d) + mask) . H Wv^T. Rows whose
/// stratum is empty come out as zero vectors.
template <class T>
ag::Var<T> stratified_attention(ag::Var<T> h, const Tensor<T>& mask, ag::Var<T> wq,
                                ag::Var<T> wk, ag::Var<T> wv);

/// Row i gets (R_low_i, R_high_i) for an exploration query and
/// (R_high_i, R_low_i) for a commitment query.
template <class T>
std::pair<ag::Var<T>, ag::Var<T>> route_self_cross(ag::Var<T> r_low, ag::Var<T> r_high,
                                                   std::span<const BehaviorId> behaviors,
                                                   const BehaviorSchema& schema);

template <class T>
struct Fusion {
  ag::Var<T> fused;
  ag::Var<T> gate;
};

/// g = sigmoid([R_self | R_cross] W_g^T + b_g); fused = g * R_self + (1 - g) * R_cross.
template <class T>
Fusion<T> moe_fuse(ag::Var<T> r_self, ag::Var<T> r_cross, ag::Var<T> gate_w, ag::Var<T> gate_b);

/// b[i][j] = w2 . tanh(W1 [h_i | e_b_j | e_v_j | R_i] + b1) + b2 for j <= i,
/// exactly 0 above the diagonal.
template <class T>
ag::Var<T> hba_bias(ag::Var<T> h, ag::Var<T> behavior_emb, ag::Var<T> item_emb,
                    ag::Var<T> r_fused, const HbaWeights<T>& w);

template <class T>
struct HbaOutput {
  ag::Var<T> r_low, r_high, r_self, r_cross, gate, fused, bias;
};

/// Full aggregation for one sequence: stratified channels (sharing one set
/// of projections), routing, gated fusion and the pairwise bias.
template <class T>
HbaOutput<T> hba_forward(ag::Var<T> h, ag::Var<T> behavior_emb, ag::Var<T> item_emb,
                         const HbaWeights<T>& w, std::span<const BehaviorId> behaviors,
                         const BehaviorSchema& schema, bool split);

}  // namespace bitrec
