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

#include <limits>

#include "bitrec/tensor.hpp"

namespace bitrec {

/// n x n additive mask: 0 where j <= i, -inf above the diagonal.
template <class T>
Tensor<T> causal_mask(std::size_t n) {
  Tensor<T> m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) m.at(i, j) = -std::numeric_limits<T>::infinity();
  }
  return m;
}

/// n x n indicator: 1 where j <= i, 0 above the diagonal.
template <class T>
Tensor<T> causal_indicator(std::size_t n) {
  Tensor<T> m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) m.at(i, j) = T(1);
  }
  return m;
}

}  // namespace bitrec
