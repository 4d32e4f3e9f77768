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

#include "bitrec/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include "bitrec/rng.hpp"

namespace bitrec {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

template <class Int>
Int parse_uint(std::string_view field, const std::string& file, std::size_t line,
               const char* what) {
  Int value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end || value < 0) {
    throw ParseError(file, line, std::string("bad ") + what + " '" + std::string(field) + "'");
  }
  return value;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool skip_line(std::string_view line) { return line.empty() || line.front() == '#'; }

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

Catalog load_catalog(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string file = path.string();
  std::map<ItemId, CategoryId> rows;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = strip_cr(raw);
    if (skip_line(line)) continue;
    const auto f = split_tabs(line);
    if (f.size() != 2) {
      throw ParseError(file, line_no, "expected 2 fields, got " + std::to_string(f.size()));
    }
    const auto item = parse_uint<ItemId>(f[0], file, line_no, "item id");
    const auto cat = parse_uint<CategoryId>(f[1], file, line_no, "category id");
    if (!rows.emplace(item, cat).second) {
      throw ParseError(file, line_no, "item " + std::to_string(item) + " listed twice");
    }
  }
  std::vector<CategoryId> category_of;
  CategoryId max_cat = -1;
  for (const auto& [item, cat] : rows) {
    if (static_cast<std::size_t>(item) != category_of.size()) {
      throw Error(file + ": item ids must be dense from 0; missing item " +
                  std::to_string(category_of.size()));
    }
    category_of.push_back(cat);
    max_cat = std::max(max_cat, cat);
  }
  return Catalog(std::move(category_of), static_cast<std::size_t>(max_cat + 1));
}

Dataset load_interactions(const std::filesystem::path& path, const BehaviorSchema& schema,
                          const std::filesystem::path& catalog_path) {
  auto in = open_input(path);
  const std::string file = path.string();
  Dataset ds;
  std::unordered_map<std::string, std::size_t> user_index;
  std::map<ItemId, CategoryId> seen_items;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = strip_cr(raw);
    if (skip_line(line)) continue;
    const auto f = split_tabs(line);
    if (f.size() != 5) {
      throw ParseError(file, line_no, "expected 5 fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty()) throw ParseError(file, line_no, "empty user id");
    Interaction x;
    x.user = std::string(f[0]);
    x.item = parse_uint<ItemId>(f[1], file, line_no, "item id");
    x.category = parse_uint<CategoryId>(f[2], file, line_no, "category id");
    const auto behavior = schema.find(f[3]);
    if (!behavior) {
      throw ParseError(file, line_no, "unknown behavior '" + std::string(f[3]) + "'");
    }
    x.behavior = *behavior;
    x.timestamp = parse_uint<std::int64_t>(f[4], file, line_no, "timestamp");
    auto [it, fresh] = seen_items.emplace(x.item, x.category);
    if (!fresh && it->second != x.category) {
      throw ParseError(file, line_no,
                       "item " + std::to_string(x.item) + " seen with two categories");
    }
    auto [u, added] = user_index.emplace(x.user, ds.sequences.size());
    if (added) ds.sequences.push_back({x.user, {}});
    ds.sequences[u->second].interactions.push_back(std::move(x));
  }
  for (auto& s : ds.sequences) s.sort_chronologically();

  if (!catalog_path.empty()) {
    ds.catalog = load_catalog(catalog_path);
    for (const auto& [item, cat] : seen_items) {
      if (!ds.catalog.contains(item)) {
        throw Error(file + ": item " + std::to_string(item) + " missing from the catalog");
      }
      if (ds.catalog.category_of(item) != cat) {
        throw Error(file + ": item " + std::to_string(item) + " has category " +
                    std::to_string(cat) + " but the catalog says " +
                    std::to_string(ds.catalog.category_of(item)));
      }
    }
  } else {
    const ItemId max_item = seen_items.empty() ? -1 : seen_items.rbegin()->first;
    std::vector<CategoryId> category_of(static_cast<std::size_t>(max_item + 1), 0);
    CategoryId max_cat = 0;
    for (const auto& [item, cat] : seen_items) {
      category_of[item] = cat;
      max_cat = std::max(max_cat, cat);
    }
    ds.catalog = Catalog(std::move(category_of), static_cast<std::size_t>(max_cat + 1));
  }
  return ds;
}

void write_interactions(const std::filesystem::path& path, const BehaviorSchema& schema,
                        const std::vector<UserSequence>& sequences) {
  auto out = open_output(path);
  out << "#user\titem\tcategory\tbehavior\ttimestamp\n";
  for (const auto& s : sequences) {
    for (const auto& x : s.interactions) {
      out << x.user << '\t' << x.item << '\t' << x.category << '\t' << schema.name(x.behavior)
          << '\t' << x.timestamp << '\n';
    }
  }
  if (!out) throw Error("write failed: " + path.string());
}

void write_catalog(const std::filesystem::path& path, const Catalog& catalog) {
  auto out = open_output(path);
  out << "#item\tcategory\n";
  for (std::size_t i = 0; i < catalog.item_count(); ++i) {
    out << i << '\t' << catalog.category_of(static_cast<ItemId>(i)) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

Splits make_splits(const std::vector<UserSequence>& sequences, const SplitSpec& spec) {
  if (spec.min_length < 1) throw Error("split.min_length must be at least 1");
  Splits out;
  for (const auto& s : sequences) {
    const auto& xs = s.interactions;
    const std::size_t n = xs.size();
    // With fewer than 3 interactions there is no history left for validation.
    if (n < std::max<std::size_t>(spec.min_length, 3)) {
      if (n > 0) out.train.push_back(s);
      continue;
    }
    UserSequence prefix{s.user, {xs.begin(), xs.end() - 2}};
    out.validation.push_back({s.user, prefix.interactions, xs[n - 2]});
    out.test.push_back({s.user, {xs.begin(), xs.end() - 1}, xs[n - 1]});
    out.train.push_back(std::move(prefix));
  }
  return out;
}

std::vector<Interaction> truncate_recent(const std::vector<Interaction>& interactions,
                                         std::size_t max_len) {
  const std::size_t keep = std::min(max_len, interactions.size());
  return {interactions.end() - static_cast<std::ptrdiff_t>(keep), interactions.end()};
}

std::size_t Batch::first_valid(std::size_t row) const {
  std::size_t p = 0;
  while (p < length && !valid[index(row, p)]) ++p;
  return p;
}

std::size_t Batch::target_count() const {
  return static_cast<std::size_t>(
      std::count_if(target_items.begin(), target_items.end(), [](ItemId t) { return t >= 0; }));
}

namespace {

void fill_row(Batch& b, std::size_t row, const std::vector<Interaction>& xs) {
  const std::size_t L = b.length;
  const std::size_t keep = std::min(L, xs.size());
  const std::size_t offset = xs.size() - keep;
  const std::size_t pad = L - keep;
  for (std::size_t k = 0; k < keep; ++k) {
    const auto& x = xs[offset + k];
    const std::size_t at = b.index(row, pad + k);
    b.items[at] = x.item;
    b.behaviors[at] = x.behavior;
    b.categories[at] = x.category;
    b.timestamps[at] = x.timestamp;
    b.valid[at] = 1;
    if (k + 1 < keep) {
      b.target_items[at] = xs[offset + k + 1].item;
      b.target_behaviors[at] = xs[offset + k + 1].behavior;
    }
  }
}

Batch empty_batch(std::size_t rows, std::size_t L) {
  if (L < 1) throw Error("sequence length L must be at least 1");
  Batch b;
  b.size = rows;
  b.length = L;
  const std::size_t n = rows * L;
  b.items.assign(n, 0);
  b.behaviors.assign(n, 0);
  b.categories.assign(n, 0);
  b.timestamps.assign(n, 0);
  b.valid.assign(n, 0);
  b.target_items.assign(n, -1);
  b.target_behaviors.assign(n, -1);
  return b;
}

}  // namespace

Batch make_batch(const std::vector<Interaction>& interactions, std::size_t L) {
  Batch b = empty_batch(1, L);
  fill_row(b, 0, interactions);
  return b;
}

std::vector<Batch> batch_sequences(const std::vector<UserSequence>& sequences, std::size_t L,
                                   std::size_t batch_size) {
  if (batch_size < 1) throw Error("batch size must be at least 1");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < sequences.size(); start += batch_size) {
    const std::size_t rows = std::min(batch_size, sequences.size() - start);
    Batch b = empty_batch(rows, L);
    for (std::size_t r = 0; r < rows; ++r) fill_row(b, r, sequences[start + r].interactions);
    out.push_back(std::move(b));
  }
  return out;
}

void SyntheticConfig::validate() const {
  if (user_count < 1 || item_count < 1 || category_count < 1) {
    throw Error("synthetic counts must be at least 1");
  }
  if (category_count > item_count) throw Error("synthetic.categories exceeds synthetic.items");
  if (!(p_convert >= 0.0 && p_convert <= 1.0)) throw Error("synthetic.p_convert must be in [0, 1]");
  if (conversion_window < 1) throw Error("synthetic.window must be at least 1");
  if (!(mean_sequence_length > 0.0)) throw Error("synthetic.mean_length must be positive");
  if (!(mean_gap_seconds > 0.0)) throw Error("synthetic.mean_gap must be positive");
}

Dataset generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  constexpr BehaviorId kView = 0, kClick = 1, kCart = 2, kPurchase = 3;
  constexpr double kPreferred = 0.7;

  Rng catalog_rng = Rng::substream(config.seed, "synthetic.catalog");
  std::vector<ItemId> perm(config.item_count);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), catalog_rng.engine());
  std::vector<CategoryId> category_of(config.item_count);
  std::vector<std::vector<ItemId>> by_category(config.category_count);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    const auto c = static_cast<CategoryId>(k % config.category_count);
    category_of[perm[k]] = c;
  }
  for (std::size_t v = 0; v < config.item_count; ++v) {
    by_category[category_of[v]].push_back(static_cast<ItemId>(v));
  }

  Dataset ds;
  ds.catalog = Catalog(category_of, config.category_count);
  Rng rng = Rng::substream(config.seed, "synthetic.users");
  const std::size_t W = config.conversion_window;
  for (std::size_t u = 0; u < config.user_count; ++u) {
    UserSequence seq;
    seq.user = "u" + std::to_string(u);
    const auto favourite = static_cast<CategoryId>(rng.below(config.category_count));
    const std::size_t n =
        std::max<std::size_t>(3, rng.poisson(config.mean_sequence_length));
    // reserved[step] = item to purchase at that step, or -1.
    std::vector<ItemId> reserved(n + W + 1, -1);
    std::int64_t now = static_cast<std::int64_t>(rng.below(86400 * 365));
    auto emit = [&](ItemId item, BehaviorId b) {
      now += 1 + static_cast<std::int64_t>(std::floor(rng.exponential(config.mean_gap_seconds)));
      seq.interactions.push_back({seq.user, item, category_of[item], b, now});
    };
    for (std::size_t t = 0; t < n; ++t) {
      if (reserved[t] >= 0) {
        emit(reserved[t], kPurchase);
        continue;
      }
      const double r = rng.uniform();
      const BehaviorId b = r < 0.55 ? kView : (r < 0.85 ? kClick : kCart);
      ItemId item;
      if (rng.uniform() < kPreferred) {
        const auto& pool = by_category[favourite];
        item = pool[rng.below(pool.size())];
      } else {
        item = static_cast<ItemId>(rng.below(config.item_count));
      }
      emit(item, b);
      if (b == kCart && rng.bernoulli(config.p_convert)) {
        std::size_t slot = t + 1 + rng.below(W);
        for (std::size_t probe = 0; probe < W && reserved[slot] >= 0; ++probe) {
          slot = t + 1 + (slot - t) % W;
        }
        if (reserved[slot] < 0) reserved[slot] = item;
      }
    }
    for (std::size_t t = n; t < reserved.size(); ++t) {
      if (reserved[t] >= 0) emit(reserved[t], kPurchase);
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

std::vector<UserSequence> drop_behavior(const std::vector<UserSequence>& sequences,
                                        BehaviorId behavior) {
  std::vector<UserSequence> out;
  for (const auto& s : sequences) {
    UserSequence kept{s.user, {}};
    for (const auto& x : s.interactions) {
      if (x.behavior != behavior) kept.interactions.push_back(x);
    }
    if (!kept.empty()) out.push_back(std::move(kept));
  }
  return out;
}

}  // namespace bitrec
