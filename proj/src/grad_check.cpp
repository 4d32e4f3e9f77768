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

#include "bitrec/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bitrec {
namespace {

template <class T>
T finite_or_throw(T v, const char* what) {
  if (!std::isfinite(v)) throw Error(std::string("grad_check: non-finite loss during ") + what);
  return v;
}

}  // namespace

std::vector<Coordinate> sample_coordinates(const ParameterStore<double>& store, std::size_t count,
                                           Rng& rng) {
  std::vector<Coordinate> all;
  for (const auto& [name, e] : store.entries()) {
    for (std::size_t i = 0; i < e.value.size(); ++i) all.push_back({name, i});
  }
  if (all.empty()) return {};
  std::vector<Coordinate> out;
  while (out.size() < count) {
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t k = 0; k < order.size() && out.size() < count; ++k) {
      out.push_back(all[order[k]]);
    }
  }
  return out;
}

double gradient_error(double analytic, double numeric, double abs_floor) {
  const double diff = std::abs(analytic - numeric);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale < abs_floor ? diff : diff / scale;
}

GradCheckResult grad_check(ParameterStore<double>& store, const GradFn& grad_fn,
                           const LossFn& loss_fn, const std::vector<Coordinate>& coords,
                           double h) {
  store.zero_grad();
  finite_or_throw(grad_fn(store), "the analytic pass");
  GradCheckResult result;
  for (const auto& c : coords) {
    auto& entry = store.entry(c.name);
    if (c.index >= entry.value.size()) {
      throw Error("grad_check: coordinate " + std::to_string(c.index) + " outside " + c.name);
    }
    double& x = entry.value[c.index];
    const double saved = x;
    x = saved + h;
    const long double x_up = x;
    const long double up = finite_or_throw(loss_fn(store), "a perturbed evaluation");
    x = saved - h;
    const long double x_down = x;
    const long double down = finite_or_throw(loss_fn(store), "a perturbed evaluation");
    x = saved;
    CoordinateCheck check;
    check.where = c;
    check.analytic = entry.grad[c.index];
    check.numeric = static_cast<double>((up - down) / (x_up - x_down));
    check.error = gradient_error(check.analytic, check.numeric);
    if (check.error > result.max_error || result.checks.empty()) {
      result.max_error = std::max(result.max_error, check.error);
      result.worst = result.checks.size();
    }
    result.checks.push_back(check);
  }
  return result;
}

}  // namespace bitrec
