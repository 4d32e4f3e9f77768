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
#include <filesystem>
#include <string>
#include <vector>

#include "bitrec/schema.hpp"

namespace bitrec {

struct Dataset {
  Catalog catalog;
  std::vector<UserSequence> sequences;
};

/// Reads a catalog file of `item_id<TAB>category_id` rows. Item ids must be
/// dense from 0; the category count is one past the largest category id.
Catalog load_catalog(const std::filesystem::path& path);

/// Reads an interactions file (user, item, category, behavior name, seconds).
/// Lines starting with '#' and blank lines are skipped. When `catalog_path`
/// is empty the catalog is inferred from the rows themselves. Sequences come
/// back ordered by first appearance of the user, each sorted by timestamp.
Dataset load_interactions(const std::filesystem::path& path, const BehaviorSchema& schema,
                          const std::filesystem::path& catalog_path = {});

void write_interactions(const std::filesystem::path& path, const BehaviorSchema& schema,
                        const std::vector<UserSequence>& sequences);
void write_catalog(const std::filesystem::path& path, const Catalog& catalog);

struct SplitSpec {
  std::size_t min_length = 3;
};

/// One prediction task: rank `target` given `history`.
struct EvalCase {
  std::string user;
  std::vector<Interaction> history;
  Interaction target;
};

struct Splits {
  std::vector<UserSequence> train;
  std::vector<EvalCase> validation;
  std::vector<EvalCase> test;
};

/// Leave-one-out. Users with at least `min_length` interactions hold out the
/// last one for test and the second to last for validation; the training view
/// is what remains. Shorter users go to training whole.
Splits make_splits(const std::vector<UserSequence>& sequences, const SplitSpec& spec);

/// Keeps the most recent `max_len` interactions.
std::vector<Interaction> truncate_recent(const std::vector<Interaction>& interactions,
                                         std::size_t max_len);

/// Fixed-width, left-padded mini-batch. Matrices are row-major (size x L).
/// Padding slots hold id 0, timestamp 0 and valid 0.
struct Batch {
  std::size_t size = 0;
  std::size_t length = 0;
  std::vector<ItemId> items;
  std::vector<BehaviorId> behaviors;
  std::vector<CategoryId> categories;
  std::vector<std::int64_t> timestamps;
  std::vector<std::uint8_t> valid;
  /// Next-step targets per position; -1 where there is none.
  std::vector<ItemId> target_items;
  std::vector<BehaviorId> target_behaviors;

  std::size_t index(std::size_t row, std::size_t pos) const { return row * length + pos; }
  /// Index of the first valid slot of a row (== length for an empty row).
  std::size_t first_valid(std::size_t row) const;
  std::size_t valid_count(std::size_t row) const { return length - first_valid(row); }
  std::size_t target_count() const;
};

/// Single-row batch from an interaction list (truncated to the last L).
Batch make_batch(const std::vector<Interaction>& interactions, std::size_t L);

/// Splits `sequences` (taken in the given order) into batches of at most
/// `batch_size` rows.
std::vector<Batch> batch_sequences(const std::vector<UserSequence>& sequences, std::size_t L,
                                   std::size_t batch_size);

struct SyntheticConfig {
  std::size_t user_count = 1000;
  std::size_t item_count = 500;
  std::size_t category_count = 20;
  double mean_sequence_length = 20.0;
  double p_convert = 0.8;
  std::size_t conversion_window = 5;
  double mean_gap_seconds = 3600.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Planted-funnel data over the e-commerce schema.
///
/// Every user prefers one category. Each step emits a view, click, or cart on
/// an item drawn from that category with probability 0.7 and from the whole
/// catalog otherwise. A cart on item v reserves, with probability p_convert,
/// a purchase of v at a free step within the next `conversion_window` steps.
/// Purchases still pending when the nominal length is reached are appended
/// in reservation order, so no purchase ever lands outside its window and
/// no purchase occurs without a preceding cart. Gaps are exponential.
Dataset generate_synthetic(const SyntheticConfig& config);

/// Drops every interaction with the given behavior; sequences left empty
/// are removed.
std::vector<UserSequence> drop_behavior(const std::vector<UserSequence>& sequences,
                                        BehaviorId behavior);

}  // namespace bitrec
