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

#include <map>
#include <string>

#include "bitrec/tensor.hpp"

namespace bitrec {

/// Named learnable tensors with paired gradient buffers.
///
/// Names form a dotted namespace ("embed.item", "layer0.attn.Wq",
/// "tre.behavior_matrix", ...). Iteration is sorted by name, which fixes the
/// order of every reduction and of the checkpoint manifest.
template <class T>
class ParameterStore {
 public:
  struct Entry {
    Tensor<T> value;
    Tensor<T> grad;
    /// Whether decoupled weight decay applies. False for scalar gates and
    /// normalization parameters.
    bool decay = true;
  };

  /// Throws Error if the name is already taken.
  Tensor<T>& add(const std::string& name, Tensor<T> init, bool decay = true);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  /// Throws Error naming the missing parameter.
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;
  Tensor<T>& value(const std::string& name) { return entry(name).value; }
  const Tensor<T>& value(const std::string& name) const { return entry(name).value; }
  Tensor<T>& grad(const std::string& name) { return entry(name).grad; }
  const Tensor<T>& grad(const std::string& name) const { return entry(name).grad; }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;

  void zero_grad();

  template <class U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (const auto& [name, e] : entries_) out.add(name, e.value.template cast<U>(), e.decay);
    return out;
  }

 private:
  std::map<std::string, Entry> entries_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;
extern template class ParameterStore<long double>;

}  // namespace bitrec
