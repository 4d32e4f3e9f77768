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
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bitrec {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

using BehaviorId = std::int32_t;
using ItemId = std::int32_t;
using CategoryId = std::int32_t;

/// Intensity stratum of a behavior: exploration (0) or commitment (1).
enum class Intensity : std::uint8_t { kExploration = 0, kCommitment = 1 };

struct Behavior {
  BehaviorId id = 0;
  std::string name;
};

/// Behavior vocabulary plus the intensity partition over it.
///
/// Ids are dense in [0, size()). The partition is total: every behavior
/// carries exactly one intensity label.
class BehaviorSchema {
 public:
  BehaviorSchema() = default;
  /// Throws SchemaError on duplicate names or when a commitment name is not a
  /// known behavior.
  BehaviorSchema(std::vector<std::string> names,
                 const std::vector<std::string>& commitment_names);

  /// view, click -> exploration; cart, purchase -> commitment.
  static BehaviorSchema ecommerce();

  std::size_t size() const { return behaviors_.size(); }
  const std::vector<Behavior>& behaviors() const { return behaviors_; }
  const std::string& name(BehaviorId id) const { return behaviors_.at(id).name; }
  std::optional<BehaviorId> find(std::string_view name) const;
  /// Like find() but throws SchemaError for unknown names.
  BehaviorId id_of(std::string_view name) const;

  Intensity intensity(BehaviorId id) const { return intensity_.at(id); }
  bool is_commitment(BehaviorId id) const {
    return intensity(id) == Intensity::kCommitment;
  }
  bool contains(BehaviorId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < behaviors_.size();
  }
  /// True when one stratum is empty. Allowed, but HBA degenerates to a single
  /// channel.
  bool degenerate() const;

  /// Schema with the same vocabulary and a new commitment set.
  BehaviorSchema with_commitment(const std::vector<std::string>& names) const;

 private:
  std::vector<Behavior> behaviors_;
  std::vector<Intensity> intensity_;
};

struct Interaction {
  std::string user;
  ItemId item = 0;
  CategoryId category = 0;
  BehaviorId behavior = 0;
  std::int64_t timestamp = 0;
};

struct UserSequence {
  std::string user;
  std::vector<Interaction> interactions;

  std::size_t size() const { return interactions.size(); }
  bool empty() const { return interactions.empty(); }
  /// Stable sort by timestamp; ties keep input order.
  void sort_chronologically();
};

class Catalog {
 public:
  Catalog() = default;
  Catalog(std::vector<CategoryId> category_of, std::size_t category_count);

  std::size_t item_count() const { return category_of_.size(); }
  std::size_t category_count() const { return category_count_; }
  bool contains(ItemId item) const {
    return item >= 0 && static_cast<std::size_t>(item) < category_of_.size();
  }
  CategoryId category_of(ItemId item) const { return category_of_.at(item); }
  const std::vector<CategoryId>& categories() const { return category_of_; }

 private:
  std::vector<CategoryId> category_of_;
  std::size_t category_count_ = 0;
};

struct Violation {
  enum class Kind {
    kUnknownBehavior,
    kUnknownItem,
    kUnknownCategory,
    kCategoryMismatch,
    kNegativeTimestamp,
    kNonMonotoneTimestamp,
    kForeignUser,
  };
  Kind kind;
  std::string user;
  std::size_t position = 0;
  std::string message;
};

std::string_view to_string(Violation::Kind kind);

struct ValidationReport {
  std::vector<Violation> violations;
  /// Non-fatal findings, e.g. a schema with an empty intensity stratum.
  std::vector<std::string> warnings;

  bool ok() const { return violations.empty(); }
};

/// Reports every inconsistency between schema, catalog, and sequences.
/// Never throws; an empty violation list means the data is valid.
ValidationReport validate_schema(const BehaviorSchema& schema,
                                       const Catalog& catalog,
                                       const std::vector<UserSequence>& sequences);

}  // namespace bitrec
