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

#include "bitrec/parameter_store.hpp"

namespace bitrec {

template <class T>
Tensor<T>& ParameterStore<T>::add(const std::string& name, Tensor<T> init, bool decay) {
  Entry e;
  e.grad = Tensor<T>(init.shape());
  e.value = std::move(init);
  e.decay = decay;
  auto [it, inserted] = entries_.emplace(name, std::move(e));
  if (!inserted) throw Error("parameter '" + name + "' registered twice");
  return it->second.value;
}

template <class T>
typename ParameterStore<T>::Entry& ParameterStore<T>::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("no parameter named '" + name + "'");
  return it->second;
}

template <class T>
const typename ParameterStore<T>::Entry& ParameterStore<T>::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("no parameter named '" + name + "'");
  return it->second;
}

template <class T>
std::size_t ParameterStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.value.size();
  return n;
}

template <class T>
void ParameterStore<T>::zero_grad() {
  for (auto& [_, e] : entries_) e.grad.fill(T(0));
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class ParameterStore<long double>;

}  // namespace bitrec
