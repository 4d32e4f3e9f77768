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

#include "bitrec/parameter_store.hpp"

namespace bitrec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  using Error::Error;
};
/// Bad magic bytes or an unreadable manifest.
class CheckpointFormatError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
/// The file's tensors do not match the configured model.
class CheckpointShapeError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Layout: "BITR", u32 version, u32 tensor count, then per tensor u32 name
/// length, name bytes, u32 rank, u64 extents, u32 dtype (0 = f32, 1 = f64);
/// then the raw payloads in manifest order. Little-endian throughout.
template <class T>
void save_checkpoint(const ParameterStore<T>& store, const std::filesystem::path& path);

/// Reads every tensor as stored. Decay flags are not part of the file and
/// come back as true.
template <class T>
ParameterStore<T> load_checkpoint(const std::filesystem::path& path);

/// Overwrites the values of `expected` with the file's tensors. The names
/// and shapes must match exactly; a mismatch raises CheckpointShapeError
/// naming the first offending tensor.
template <class T>
void load_checkpoint_into(const std::filesystem::path& path, ParameterStore<T>& expected);

}  // namespace bitrec
