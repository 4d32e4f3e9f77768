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

#include "bitrec/tre.hpp"

#include <cmath>
#include <unordered_map>

#include "bitrec/init.hpp"
#include "bitrec/masks.hpp"

namespace bitrec {

template <class T>
Tensor<T> context_features(const Tokens& tokens, const BehaviorSchema& schema, std::size_t L) {
  const std::size_t n = tokens.size();
  Tensor<T> out(n, kContextFeatures);
  std::unordered_map<ItemId, std::size_t> item_count;
  std::unordered_map<CategoryId, std::size_t> category_count;
  std::size_t high = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto len = static_cast<double>(j + 1);
    const std::size_t ci = ++item_count[tokens.items[j]];
    const std::size_t cc = ++category_count[tokens.categories[j]];
    high += schema.is_commitment(tokens.behaviors[j]) ? 1 : 0;
    out.at(j, 0) = static_cast<T>(len / static_cast<double>(L));
    out.at(j, 1) = static_cast<T>(static_cast<double>(ci) / len);
    out.at(j, 2) = static_cast<T>(static_cast<double>(cc) / len);
    out.at(j, 3) = static_cast<T>(static_cast<double>(high) / len);
  }
  return out;
}

template <class T>
Tensor<T> context_features(const Batch& batch, const BehaviorSchema& schema) {
  Tensor<T> out(Shape{batch.size, batch.length, kContextFeatures});
  for (std::size_t r = 0; r < batch.size; ++r) {
    const Tokens tokens = tokens_from_row(batch, r);
    const auto f = context_features<T>(tokens, schema, batch.length);
    const std::size_t pad = batch.length - tokens.size();
    std::copy(f.data(), f.data() + f.size(),
              out.data() + (r * batch.length + pad) * kContextFeatures);
  }
  return out;
}

std::array<double, 3> temporal_feature(double dt_hours) {
  const double dt = std::max(dt_hours, 0.0);
  return {1.0 / (1.0 + std::exp(-dt / 24.0)), std::log1p(dt), 1.0 / (1.0 + dt)};
}

template <class T>
std::array<Tensor<T>, 3> temporal_features(std::span<const std::int64_t> timestamps) {
  const std::size_t n = timestamps.size();
  std::array<Tensor<T>, 3> out{Tensor<T>(n, n), Tensor<T>(n, n), Tensor<T>(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double hours = static_cast<double>(timestamps[i] - timestamps[j]) / 3600.0;
      const auto f = temporal_feature(hours);
      for (std::size_t k = 0; k < 3; ++k) out[k].at(i, j) = static_cast<T>(f[k]);
    }
  }
  return out;
}

template <class T>
std::array<Tensor<T>, 2> identity_flags(const Tokens& tokens) {
  const std::size_t n = tokens.size();
  std::array<Tensor<T>, 2> out{Tensor<T>(n, n), Tensor<T>(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[0].at(i, j) = tokens.items[i] == tokens.items[j] ? T(1) : T(0);
      out[1].at(i, j) = tokens.categories[i] == tokens.categories[j] ? T(1) : T(0);
    }
  }
  return out;
}

template <class T>
std::array<ag::Var<T>, 3> item_consistency(const Tokens& tokens, ag::Var<T> item_emb) {
  auto& tape = *item_emb.tape;
  auto flags = identity_flags<T>(tokens);
  auto rows = ag::gather_rows(item_emb, std::span<const std::int32_t>(tokens.items));
  return {tape.constant(std::move(flags[0])), tape.constant(std::move(flags[1])),
          ag::row_cosine(rows)};
}

template <class T>
ag::Var<T> behavior_transition_lookup(std::span<const BehaviorId> behaviors, ag::Var<T> matrix) {
  const std::size_t n = behaviors.size(), nb = matrix.rows();
  Tensor<T> onehot(n, nb);
  for (std::size_t j = 0; j < n; ++j) onehot.at(j, behaviors[j]) = T(1);
  auto rows = ag::gather_rows(matrix, behaviors);
  return ag::matmul_nt(rows, matrix.tape->constant(std::move(onehot)));
}

template <class T>
ag::Var<T> context_match_scores(ag::Var<T> context, ag::Var<T> wq, ag::Var<T> wk) {
  const ag::Var<T> none;
  return ag::matmul_nt(ag::linear(context, wq, none), ag::linear(context, wk, none));
}

template <class T>
ag::Var<T> relational_score(std::span<const ag::Var<T>> planes, ag::Var<T> w1, ag::Var<T> b1,
                            ag::Var<T> w2, ag::Var<T> b2) {
  if (planes.empty()) throw ShapeError("relational_score: no feature planes");
  const std::size_t n = planes[0].rows();
  std::vector<ag::Var<T>> columns;
  for (const auto& p : planes) columns.push_back(ag::reshape(p, n * n, 1));
  auto features = ag::concat_cols<T>(columns);
  auto hidden = ag::tanh(ag::linear(features, w1, b1));
  return ag::reshape(ag::linear(hidden, w2, b2), n, n);
}

template <class T>
ag::Var<T> transition_bias(ag::Var<T> s_qk, ag::Var<T> s_rel, ag::Var<T> alpha_qk,
                           ag::Var<T> alpha_rel, T tau, T eps) {
  auto z = ag::add(ag::scale(ag::scale(s_qk, alpha_qk), T(1) / tau), ag::scale(s_rel, alpha_rel));
  return ag::mul_const(ag::log_eps(ag::sigmoid(z), eps), causal_indicator<T>(s_qk.rows()));
}

template <class T>
void add_tre_parameters(ParameterStore<T>& store, const TreShape& shape, std::uint64_t seed) {
  add_xavier(store, "tre.ctx.Wq", shape.match_dim, shape.context_dim(), seed);
  add_xavier(store, "tre.ctx.Wk", shape.match_dim, shape.context_dim(), seed);
  add_constant(store, "tre.behavior_matrix", shape.behaviors, shape.behaviors, T(0), true);
  add_xavier(store, "tre.rel.W1", kRelationalHidden, kRelationalFeatures, seed);
  add_constant(store, "tre.rel.b1", 1, kRelationalHidden, T(0), true);
  add_xavier(store, "tre.rel.w2", 1, kRelationalHidden, seed);
  add_constant(store, "tre.rel.b2", 1, 1, T(0), true);
  add_constant(store, "tre.alpha_qk", 1, 1, T(1), false);
  add_constant(store, "tre.alpha_rel", 1, 1, T(1), false);
}

template <class T>
TreOutput<T> tre_forward(const ag::Binder<T>& params, const Tokens& tokens,
                         const BehaviorSchema& schema, std::size_t L, const TreToggles& toggles) {
  const std::size_t n = tokens.size();
  auto zeros = [&] { return params.constant(Tensor<T>(n, n)); };
  TreOutput<T> out;

  const auto& wq = params.value("tre.ctx.Wq");
  const T tau = std::sqrt(static_cast<T>(wq.cols()));
  if (toggles.context_matching) {
    const ag::Var<T> parts[] = {
        ag::gather_rows(params("embed.behavior"), std::span<const std::int32_t>(tokens.behaviors)),
        ag::gather_rows(params("embed.category"),
                        std::span<const std::int32_t>(tokens.categories)),
        params.constant(context_features<T>(tokens, schema, L))};
    out.s_qk = context_match_scores(ag::concat_cols<T>(parts), params("tre.ctx.Wq"),
                                    params("tre.ctx.Wk"));
  } else {
    out.s_qk = zeros();
  }

  std::vector<ag::Var<T>> planes;
  if (toggles.item_consistency) {
    for (const auto& p : item_consistency(tokens, params("embed.item"))) planes.push_back(p);
  } else {
    for (int k = 0; k < 3; ++k) planes.push_back(zeros());
  }
  planes.push_back(toggles.transition
                       ? behavior_transition_lookup(std::span<const BehaviorId>(tokens.behaviors),
                                                    params("tre.behavior_matrix"))
                       : zeros());
  if (toggles.temporal) {
    for (auto& p : temporal_features<T>(tokens.timestamps)) planes.push_back(params.constant(p));
  } else {
    for (int k = 0; k < 3; ++k) planes.push_back(zeros());
  }
  out.s_rel = relational_score<T>(planes, params("tre.rel.W1"), params("tre.rel.b1"),
                                  params("tre.rel.w2"), params("tre.rel.b2"));
  out.bias = transition_bias(out.s_qk, out.s_rel, params("tre.alpha_qk"), params("tre.alpha_rel"),
                             tau, static_cast<T>(kTreEpsilon));
  return out;
}

#define BITREC_INSTANTIATE(T)                                                                   \
  template Tensor<T> context_features(const Tokens&, const BehaviorSchema&, std::size_t);       \
  template Tensor<T> context_features(const Batch&, const BehaviorSchema&);                     \
  template std::array<Tensor<T>, 3> temporal_features(std::span<const std::int64_t>);           \
  template std::array<Tensor<T>, 2> identity_flags(const Tokens&);                              \
  template std::array<ag::Var<T>, 3> item_consistency(const Tokens&, ag::Var<T>);               \
  template ag::Var<T> behavior_transition_lookup(std::span<const BehaviorId>, ag::Var<T>);      \
  template ag::Var<T> context_match_scores(ag::Var<T>, ag::Var<T>, ag::Var<T>);                 \
  template ag::Var<T> relational_score(std::span<const ag::Var<T>>, ag::Var<T>, ag::Var<T>,     \
                                       ag::Var<T>, ag::Var<T>);                                 \
  template ag::Var<T> transition_bias(ag::Var<T>, ag::Var<T>, ag::Var<T>, ag::Var<T>, T, T);    \
  template void add_tre_parameters(ParameterStore<T>&, const TreShape&, std::uint64_t);         \
  template TreOutput<T> tre_forward(const ag::Binder<T>&, const Tokens&, const BehaviorSchema&, \
                                    std::size_t, const TreToggles&);

BITREC_INSTANTIATE(float)
BITREC_INSTANTIATE(double)
BITREC_INSTANTIATE(long double)

#undef BITREC_INSTANTIATE

}  // namespace bitrec
