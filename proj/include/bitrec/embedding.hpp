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
#include <vector>

#include "bitrec/autograd.hpp"
#include "bitrec/dataio.hpp"

namespace bitrec {

/// The valid (unpadded) suffix of one sequence, oldest first.
struct Tokens {
  std::vector<ItemId> items;
  std::vector<BehaviorId> behaviors;
  std::vector<CategoryId> categories;
  std::vector<std::int64_t> timestamps;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
};

Tokens tokens_from_row(const Batch& batch, std::size_t row);
/// The most recent `max_len` interactions.
Tokens tokens_from(const std::vector<Interaction>& interactions, std::size_t max_len);

struct EmbeddingShape {
  std::size_t items = 0;
  std::size_t behaviors = 0;
  std::size_t categories = 0;
  std::size_t max_len = 0;
  std::size_t d = 0;
  std::size_t category_dim = 0;
};

/// Registers embed.item, embed.behavior, embed.category and embed.position,
/// each drawn from Normal(0, std) on its own named stream.
template <class T>
void add_embedding_parameters(ParameterStore<T>& store, const EmbeddingShape& shape, double std,
                              std::uint64_t seed);

/// x_p = item[v_p] + behavior[b_p] + position[p] for the n valid tokens.
/// Positions count from the first real interaction.
template <class T>
ag::Var<T> embed_tokens(const ag::Binder<T>& params, const Tokens& tokens);

/// Batch-level embedding: (batch, L, d) with padded slots exactly zero.
template <class T>
Tensor<T> embed_sequence(const Batch& batch, const ParameterStore<T>& store);

}  // namespace bitrec
