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

#include "bitrec/schema.hpp"

#include <algorithm>
#include <set>

namespace bitrec {

BehaviorSchema::BehaviorSchema(std::vector<std::string> names,
                               const std::vector<std::string>& commitment_names) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].empty()) throw SchemaError("behavior names must be non-empty");
    if (!seen.insert(names[i]).second) {
      throw SchemaError("duplicate behavior name '" + names[i] + "'");
    }
    behaviors_.push_back({static_cast<BehaviorId>(i), std::move(names[i])});
  }
  intensity_.assign(behaviors_.size(), Intensity::kExploration);
  for (const auto& name : commitment_names) {
    intensity_[id_of(name)] = Intensity::kCommitment;
  }
}

BehaviorSchema BehaviorSchema::ecommerce() {
  return BehaviorSchema({"view", "click", "cart", "purchase"}, {"cart", "purchase"});
}

std::optional<BehaviorId> BehaviorSchema::find(std::string_view name) const {
  for (const auto& b : behaviors_) {
    if (b.name == name) return b.id;
  }
  return std::nullopt;
}

BehaviorId BehaviorSchema::id_of(std::string_view name) const {
  if (auto id = find(name)) return *id;
  std::string known;
  for (const auto& b : behaviors_) known += (known.empty() ? "" : ", ") + b.name;
  throw SchemaError("unknown behavior '" + std::string(name) + "' (known: " + known + ")");
}

bool BehaviorSchema::degenerate() const {
  const auto high = std::count(intensity_.begin(), intensity_.end(), Intensity::kCommitment);
  return high == 0 || static_cast<std::size_t>(high) == intensity_.size();
}

BehaviorSchema BehaviorSchema::with_commitment(const std::vector<std::string>& names) const {
  std::vector<std::string> vocab;
  for (const auto& b : behaviors_) vocab.push_back(b.name);
  return BehaviorSchema(std::move(vocab), names);
}

void UserSequence::sort_chronologically() {
  std::stable_sort(interactions.begin(), interactions.end(),
                   [](const Interaction& a, const Interaction& b) {
                     return a.timestamp < b.timestamp;
                   });
}

Catalog::Catalog(std::vector<CategoryId> category_of, std::size_t category_count)
    : category_of_(std::move(category_of)), category_count_(category_count) {
  for (std::size_t i = 0; i < category_of_.size(); ++i) {
    const auto c = category_of_[i];
    if (c < 0 || static_cast<std::size_t>(c) >= category_count_) {
      throw SchemaError("item " + std::to_string(i) + " has category " + std::to_string(c) +
                        " outside [0, " + std::to_string(category_count_) + ")");
    }
  }
}

std::string_view to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::kUnknownBehavior: return "unknown behavior";
    case Violation::Kind::kUnknownItem: return "unknown item";
    case Violation::Kind::kUnknownCategory: return "unknown category";
    case Violation::Kind::kCategoryMismatch: return "category mismatch";
    case Violation::Kind::kNegativeTimestamp: return "negative timestamp";
    case Violation::Kind::kNonMonotoneTimestamp: return "non-monotone timestamp";
    case Violation::Kind::kForeignUser: return "foreign user";
  }
  return "unknown";
}

ValidationReport validate_schema(const BehaviorSchema& schema, const Catalog& catalog,
                                 const std::vector<UserSequence>& sequences) {
  ValidationReport report;
  if (schema.degenerate()) {
    report.warnings.push_back("behavior schema has an empty intensity stratum");
  }
  auto add = [&](Violation::Kind kind, const std::string& user, std::size_t pos,
                 std::string msg) {
    report.violations.push_back({kind, user, pos, std::move(msg)});
  };
  for (const auto& seq : sequences) {
    for (std::size_t i = 0; i < seq.interactions.size(); ++i) {
      const auto& x = seq.interactions[i];
      if (x.user != seq.user) {
        add(Violation::Kind::kForeignUser, seq.user, i, "interaction belongs to '" + x.user + "'");
      }
      if (!schema.contains(x.behavior)) {
        add(Violation::Kind::kUnknownBehavior, seq.user, i,
            "behavior id " + std::to_string(x.behavior));
      }
      const bool category_known =
          x.category >= 0 && static_cast<std::size_t>(x.category) < catalog.category_count();
      if (!category_known) {
        add(Violation::Kind::kUnknownCategory, seq.user, i,
            "category id " + std::to_string(x.category));
      }
      if (!catalog.contains(x.item)) {
        add(Violation::Kind::kUnknownItem, seq.user, i, "item id " + std::to_string(x.item));
      } else if (category_known && x.category != catalog.category_of(x.item)) {
        add(Violation::Kind::kCategoryMismatch, seq.user, i,
            "item " + std::to_string(x.item) + " is in category " +
                std::to_string(catalog.category_of(x.item)));
      }
      if (x.timestamp < 0) {
        add(Violation::Kind::kNegativeTimestamp, seq.user, i,
            "timestamp " + std::to_string(x.timestamp));
      }
      if (i > 0 && x.timestamp < seq.interactions[i - 1].timestamp) {
        add(Violation::Kind::kNonMonotoneTimestamp, seq.user, i,
            std::to_string(seq.interactions[i - 1].timestamp) + " then " +
                std::to_string(x.timestamp));
      }
    }
  }
  return report;
}

}  // namespace bitrec
