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
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bitrec/autograd.hpp"
#include "bitrec/grad_check.hpp"
#include "bitrec/model.hpp"

namespace bitrec::test {

inline Tensor<double> random_tensor(Rng& rng, std::size_t rows, std::size_t cols,
                                    double spread = 1.0) {
  Tensor<double> t(rows, cols);
  for (auto& v : t.vec()) v = rng.normal(0.0, spread);
  return t;
}

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("bitrec_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Gradient check of one op. `build` receives the tape and one leaf per
/// input and returns the op's output; the scalar loss is the output's
/// weighted sum with fixed random weights. The perturbed losses are
/// evaluated in extended precision. Returns the worst relative error.
template <class Build>
double op_grad_error(const std::vector<Tensor<double>>& inputs, Build build,
                     std::uint64_t seed = 7, double h = 1e-5) {
  ParameterStore<double> store;
  for (std::size_t i = 0; i < inputs.size(); ++i) store.add("x" + std::to_string(i), inputs[i]);

  auto run = [&](auto& tape, const auto& params) {
    using T = typename std::remove_reference_t<decltype(tape)>::value_type;
    std::vector<ag::Var<T>> xs;
    for (std::size_t i = 0; i < inputs.size(); ++i) xs.push_back(params("x" + std::to_string(i)));
    ag::Var<T> out = build(tape, xs);
    Rng rng(seed);
    Tensor<T> weights(out.value().shape());
    for (auto& w : weights.vec()) w = static_cast<T>(rng.normal(0.0, 1.0));
    return ag::sum(ag::mul_const(out, weights));
  };
  const GradFn grad_fn = [&](ParameterStore<double>& s) {
    ag::Tape<double> tape(true);
    ag::Binder<double> params(tape, s);
    auto loss = run(tape, params);
    tape.backward(loss);
    return loss.value()[0];
  };
  const LossFn loss_fn = [&](const ParameterStore<double>& s) {
    const auto wide = s.cast<long double>();
    ag::Tape<long double> tape(false);
    ag::Binder<long double> params(tape, wide);
    return run(tape, params).value()[0];
  };
  std::vector<Coordinate> coords;
  for (const auto& [name, e] : store.entries()) {
    for (std::size_t i = 0; i < e.value.size(); ++i) coords.push_back({name, i});
  }
  return grad_check(store, grad_fn, loss_fn, coords, h).max_error;
}

}  // namespace bitrec::test
