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

#include "bitrec/embedding.hpp"

#include <numeric>

namespace bitrec {

Tokens tokens_from_row(const Batch& batch, std::size_t row) {
  Tokens t;
  for (std::size_t p = batch.first_valid(row); p < batch.length; ++p) {
    const std::size_t at = batch.index(row, p);
    t.items.push_back(batch.items[at]);
    t.behaviors.push_back(batch.behaviors[at]);
    t.categories.push_back(batch.categories[at]);
    t.timestamps.push_back(batch.timestamps[at]);
  }
  return t;
}

Tokens tokens_from(const std::vector<Interaction>& interactions, std::size_t max_len) {
  Tokens t;
  for (const auto& x : truncate_recent(interactions, max_len)) {
    t.items.push_back(x.item);
    t.behaviors.push_back(x.behavior);
    t.categories.push_back(x.category);
    t.timestamps.push_back(x.timestamp);
  }
  return t;
}

template <class T>
void add_embedding_parameters(ParameterStore<T>& store, const EmbeddingShape& shape, double std,
                              std::uint64_t seed) {
  auto table = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    Rng rng = Rng::substream(seed, "init." + name);
    Tensor<T> t(rows, cols);
    for (auto& v : t.vec()) v = static_cast<T>(rng.normal(0.0, std));
    store.add(name, std::move(t));
  };
  table("embed.item", shape.items, shape.d);
  table("embed.behavior", shape.behaviors, shape.d);
  table("embed.category", shape.categories, shape.category_dim);
  table("embed.position", shape.max_len, shape.d);
}

template <class T>
ag::Var<T> embed_tokens(const ag::Binder<T>& params, const Tokens& tokens) {
  const std::size_t n = tokens.size();
  if (n > params.value("embed.position").rows()) {
    throw Error("sequence of " + std::to_string(n) + " tokens exceeds the position table");
  }
  std::vector<std::int32_t> positions(n);
  std::iota(positions.begin(), positions.end(), 0);
  auto x = ag::add(ag::gather_rows(params("embed.item"), std::span<const std::int32_t>(tokens.items)),
                   ag::gather_rows(params("embed.behavior"),
                                   std::span<const std::int32_t>(tokens.behaviors)));
  return ag::add(x, ag::gather_rows(params("embed.position"),
                                    std::span<const std::int32_t>(positions)));
}

template <class T>
Tensor<T> embed_sequence(const Batch& batch, const ParameterStore<T>& store) {
  const std::size_t d = store.value("embed.item").cols();
  Tensor<T> out(Shape{batch.size, batch.length, d});
  ag::Tape<T> tape(false);
  ag::Binder<T> params(tape, store);
  for (std::size_t r = 0; r < batch.size; ++r) {
    const Tokens tokens = tokens_from_row(batch, r);
    if (tokens.empty()) continue;
    const auto& x = embed_tokens(params, tokens).value();
    const std::size_t pad = batch.length - tokens.size();
    std::copy(x.data(), x.data() + x.size(), out.data() + (r * batch.length + pad) * d);
  }
  return out;
}

template void add_embedding_parameters(ParameterStore<float>&, const EmbeddingShape&, double,
                                       std::uint64_t);
template void add_embedding_parameters(ParameterStore<double>&, const EmbeddingShape&, double,
                                       std::uint64_t);
template void add_embedding_parameters(ParameterStore<long double>&, const EmbeddingShape&, double,
                                       std::uint64_t);
template ag::Var<float> embed_tokens(const ag::Binder<float>&, const Tokens&);
template ag::Var<double> embed_tokens(const ag::Binder<double>&, const Tokens&);
template ag::Var<long double> embed_tokens(const ag::Binder<long double>&, const Tokens&);
template Tensor<float> embed_sequence(const Batch&, const ParameterStore<float>&);
template Tensor<double> embed_sequence(const Batch&, const ParameterStore<double>&);

}  // namespace bitrec
