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

#include <cmath>
#include <cstdint>
#include <string>

#include "bitrec/parameter_store.hpp"
#include "bitrec/rng.hpp"

namespace bitrec {

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)), for a weight stored
/// as (fan_out x fan_in). Each parameter draws from the stream "init.<name>".
template <class T>
void add_xavier(ParameterStore<T>& store, const std::string& name, std::size_t rows,
                std::size_t cols, std::uint64_t seed) {
  Rng rng = Rng::substream(seed, "init." + name);
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor<T> t(rows, cols);
  for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(-a, a));
  store.add(name, std::move(t), true);
}

template <class T>
void add_constant(ParameterStore<T>& store, const std::string& name, std::size_t rows,
                  std::size_t cols, T value, bool decay) {
  store.add(name, Tensor<T>(rows, cols, value), decay);
}

}  // namespace bitrec
