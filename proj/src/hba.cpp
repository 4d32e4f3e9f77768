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

#include "bitrec/hba.hpp"

#include <cmath>
#include <limits>

#include "bitrec/init.hpp"
#include "bitrec/masks.hpp"

namespace bitrec {

std::string_view to_string(IntensityMode mode) {
  switch (mode) {
    case IntensityMode::kFull: return "full";
    case IntensityMode::kNone: return "none";
    case IntensityMode::kPurchaseOnly: return "purchase_only";
  }
  return "?";
}

IntensityMode parse_intensity_mode(std::string_view text) {
  if (text == "full") return IntensityMode::kFull;
  if (text == "none") return IntensityMode::kNone;
  if (text == "purchase_only") return IntensityMode::kPurchaseOnly;
  throw Error("unknown intensity split '" + std::string(text) +
              "' (expected full, none or purchase_only)");
}

template <class T>
IntensityMasks<T> intensity_masks(std::span<const BehaviorId> behaviors,
                                  const BehaviorSchema& schema, bool split) {
  const std::size_t n = behaviors.size();
  if (!split) return {causal_mask<T>(n), causal_mask<T>(n)};
  constexpr T kOff = -std::numeric_limits<T>::infinity();
  IntensityMasks<T> m{Tensor<T>(n, n, kOff), Tensor<T>(n, n, kOff)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      (schema.is_commitment(behaviors[j]) ? m.high : m.low).at(i, j) = T(0);
    }
  }
  return m;
}

template <class T>
std::vector<IntensityMasks<T>> build_intensity_masks(const Batch& batch,
                                                     const BehaviorSchema& schema, bool split) {
  constexpr T kOff = -std::numeric_limits<T>::infinity();
  const std::size_t L = batch.length;
  std::vector<IntensityMasks<T>> out;
  for (std::size_t r = 0; r < batch.size; ++r) {
    const std::size_t pad = batch.first_valid(r);
    std::vector<BehaviorId> bs(batch.behaviors.begin() + batch.index(r, pad),
                               batch.behaviors.begin() + batch.index(r, 0) + L);
    auto inner = intensity_masks<T>(bs, schema, split);
    IntensityMasks<T> m{Tensor<T>(L, L, kOff), Tensor<T>(L, L, kOff)};
    const std::size_t n = L - pad;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        m.low.at(pad + i, pad + j) = inner.low.at(i, j);
        m.high.at(pad + i, pad + j) = inner.high.at(i, j);
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

template <class T>
void add_hba_parameters(ParameterStore<T>& store, const std::string& prefix, std::size_t d,
                        std::uint64_t seed) {
  add_xavier(store, prefix + ".Wq", d, d, seed);
  add_xavier(store, prefix + ".Wk", d, d, seed);
  add_xavier(store, prefix + ".Wv", d, d, seed);
  add_xavier(store, prefix + ".gate.W", d, 2 * d, seed);
  add_constant(store, prefix + ".gate.b", 1, d, T(0), true);
  add_xavier(store, prefix + ".mlp.W1", d, 4 * d, seed);
  add_constant(store, prefix + ".mlp.b1", 1, d, T(0), true);
  add_xavier(store, prefix + ".mlp.w2", 1, d, seed);
  add_constant(store, prefix + ".mlp.b2", 1, 1, T(0), true);
}

template <class T>
HbaWeights<T> bind_hba(const ag::Binder<T>& params, const std::string& prefix) {
  return {params(prefix + ".Wq"),     params(prefix + ".Wk"),     params(prefix + ".Wv"),
          params(prefix + ".gate.W"), params(prefix + ".gate.b"), params(prefix + ".mlp.W1"),
          params(prefix + ".mlp.b1"), params(prefix + ".mlp.w2"), params(prefix + ".mlp.b2")};
}

namespace {

template <class T>
ag::Var<T> scaled_scores(ag::Var<T> q, ag::Var<T> k) {
  const T inv = T(1) / std::sqrt(static_cast<T>(q.cols()));
  return ag::scale(ag::matmul_nt(q, k), inv);
}

}  // namespace

template <class T>
ag::Var<T> stratified_attention(ag::Var<T> h, const Tensor<T>& mask, ag::Var<T> wq,
                                ag::Var<T> wk, ag::Var<T> wv) {
  const ag::Var<T> none;
  auto scores = scaled_scores(ag::linear(h, wq, none), ag::linear(h, wk, none));
  return ag::matmul(ag::masked_softmax(scores, mask), ag::linear(h, wv, none));
}

template <class T>
std::pair<ag::Var<T>, ag::Var<T>> route_self_cross(ag::Var<T> r_low, ag::Var<T> r_high,
                                                   std::span<const BehaviorId> behaviors,
                                                   const BehaviorSchema& schema) {
  std::vector<std::uint8_t> high(behaviors.size());
  for (std::size_t i = 0; i < behaviors.size(); ++i) high[i] = schema.is_commitment(behaviors[i]);
  return {ag::where_rows<T>(high, r_low, r_high), ag::where_rows<T>(high, r_high, r_low)};
}

template <class T>
Fusion<T> moe_fuse(ag::Var<T> r_self, ag::Var<T> r_cross, ag::Var<T> gate_w, ag::Var<T> gate_b) {
  const ag::Var<T> parts[] = {r_self, r_cross};
  auto gate = ag::sigmoid(ag::linear(ag::concat_cols<T>(parts), gate_w, gate_b));
  // g * self + (1 - g) * cross == cross + g * (self - cross)
  auto fused = ag::add(r_cross, ag::mul(gate, ag::sub(r_self, r_cross)));
  return {fused, gate};
}

template <class T>
ag::Var<T> hba_bias(ag::Var<T> h, ag::Var<T> behavior_emb, ag::Var<T> item_emb,
                    ag::Var<T> r_fused, const HbaWeights<T>& w) {
  const std::size_t d = h.cols();
  if (w.mlp_w1.cols() != 4 * d) throw ShapeError("hba mlp.W1 must have 4d columns");
  const ag::Var<T> none;
  // The first layer is linear in the concatenated input, so it splits into a
  // query-side term (h_i, R_i) and a key-side term (e_b_j, e_v_j).
  auto left = ag::add(ag::linear(h, ag::slice_cols(w.mlp_w1, 0, d), none),
                      ag::linear(r_fused, ag::slice_cols(w.mlp_w1, 3 * d, d), none));
  auto right = ag::add(ag::linear(behavior_emb, ag::slice_cols(w.mlp_w1, d, d), none),
                       ag::linear(item_emb, ag::slice_cols(w.mlp_w1, 2 * d, d), none));
  return ag::pairwise_tanh_mlp(left, right, w.mlp_b1, w.mlp_w2, w.mlp_b2,
                               causal_indicator<T>(h.rows()));
}

template <class T>
HbaOutput<T> hba_forward(ag::Var<T> h, ag::Var<T> behavior_emb, ag::Var<T> item_emb,
                         const HbaWeights<T>& w, std::span<const BehaviorId> behaviors,
                         const BehaviorSchema& schema, bool split) {
  const ag::Var<T> none;
  const auto masks = intensity_masks<T>(behaviors, schema, split);
  auto scores = scaled_scores(ag::linear(h, w.wq, none), ag::linear(h, w.wk, none));
  auto v = ag::linear(h, w.wv, none);
  HbaOutput<T> out;
  out.r_low = ag::matmul(ag::masked_softmax(scores, masks.low), v);
  out.r_high = ag::matmul(ag::masked_softmax(scores, masks.high), v);
  std::tie(out.r_self, out.r_cross) = route_self_cross(out.r_low, out.r_high, behaviors, schema);
  auto fusion = moe_fuse(out.r_self, out.r_cross, w.gate_w, w.gate_b);
  out.fused = fusion.fused;
  out.gate = fusion.gate;
  out.bias = hba_bias(h, behavior_emb, item_emb, out.fused, w);
  return out;
}

#define BITREC_INSTANTIATE(T)                                                                    \
  template IntensityMasks<T> intensity_masks(std::span<const BehaviorId>, const BehaviorSchema&, \
                                             bool);                                              \
  template std::vector<IntensityMasks<T>> build_intensity_masks(const Batch&,                    \
                                                                const BehaviorSchema&, bool);    \
  template void add_hba_parameters(ParameterStore<T>&, const std::string&, std::size_t,          \
                                   std::uint64_t);                                               \
  template HbaWeights<T> bind_hba(const ag::Binder<T>&, const std::string&);                     \
  template ag::Var<T> stratified_attention(ag::Var<T>, const Tensor<T>&, ag::Var<T>, ag::Var<T>, \
                                           ag::Var<T>);                                          \
  template std::pair<ag::Var<T>, ag::Var<T>> route_self_cross(                                   \
      ag::Var<T>, ag::Var<T>, std::span<const BehaviorId>, const BehaviorSchema&);               \
  template Fusion<T> moe_fuse(ag::Var<T>, ag::Var<T>, ag::Var<T>, ag::Var<T>);                   \
  template ag::Var<T> hba_bias(ag::Var<T>, ag::Var<T>, ag::Var<T>, ag::Var<T>,                   \
                               const HbaWeights<T>&);                                            \
  template HbaOutput<T> hba_forward(ag::Var<T>, ag::Var<T>, ag::Var<T>, const HbaWeights<T>&,    \
                                    std::span<const BehaviorId>, const BehaviorSchema&, bool);

BITREC_INSTANTIATE(float)
BITREC_INSTANTIATE(double)
BITREC_INSTANTIATE(long double)

#undef BITREC_INSTANTIATE

}  // namespace bitrec
