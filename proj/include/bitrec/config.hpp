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
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "bitrec/dataio.hpp"
#include "bitrec/model.hpp"
#include "bitrec/trainer.hpp"

namespace bitrec {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class KeyKind { kInt, kReal, kBool, kString, kList };

struct ConfigKey {
  std::string name;
  KeyKind kind;
  std::string default_value;
  std::string help;
};

/// Every key a run accepts, in the order the resolved config is printed.
const std::vector<ConfigKey>& config_keys();

/// Flat dotted key/value settings with every default materialised.
///
/// Values are kept as text and checked against the key's kind on every
/// assignment, so a RunConfig never holds a value its converters reject on
/// syntax.
class RunConfig {
 public:
  RunConfig();

  /// Throws ConfigError for an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  const std::string& get(std::string_view key) const;

  std::int64_t integer(std::string_view key) const;
  std::size_t count(std::string_view key) const;
  double real(std::string_view key) const;
  bool boolean(std::string_view key) const;
  /// Comma-separated list; empty items are dropped.
  std::vector<std::string> list(std::string_view key) const;

  /// Applies `key = value` lines. '#' starts a comment; blank lines are
  /// skipped. Errors carry the line number.
  void merge_text(std::string_view text, const std::string& origin = "<config>");
  void merge_file(const std::filesystem::path& path);

  /// All keys as `key = value` lines in registry order. Feeding the output
  /// back through merge_text() reproduces this config.
  void write(std::ostream& out) const;

  std::uint64_t seed() const;
  std::filesystem::path out_dir() const;
  /// data.checkpoint, or <out>/model.ckpt when unset.
  std::filesystem::path checkpoint_path() const;

  BehaviorSchema schema() const;
  SplitSpec split() const;
  /// Vocabulary sizes are left at 0 for the caller to fill.
  ModelConfig model() const;
  TrainConfig train() const;
  SyntheticConfig synthetic() const;
  ModelGradCheckOptions grad_check() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace bitrec
