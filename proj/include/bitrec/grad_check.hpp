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

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "bitrec/parameter_store.hpp"
#include "bitrec/rng.hpp"

namespace bitrec {

struct Coordinate {
  std::string name;
  std::size_t index = 0;
};

struct CoordinateCheck {
  Coordinate where;
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;
};

struct GradCheckResult {
  double max_error = 0.0;
  std::vector<CoordinateCheck> checks;
  /// Entry of `checks` with the largest error.
  std::size_t worst = 0;
};

/// Loss as a function of the store's current values. The wider return type
/// lets a loss evaluated in extended precision keep its low-order bits
/// through the difference quotient.
using LossFn = std::function<long double(const ParameterStore<double>&)>;
/// Fills the store's gradients (already zeroed) and returns the loss.
using GradFn = std::function<double(ParameterStore<double>&)>;

/// Draws `count` coordinates uniformly over all scalars in the store
/// (without replacement while possible).
std::vector<Coordinate> sample_coordinates(const ParameterStore<double>& store, std::size_t count,
                                           Rng& rng);

/// Relative error |a - n| / max(|a|, |n|), or the absolute error when both
/// magnitudes are below `abs_floor`.
double gradient_error(double analytic, double numeric, double abs_floor = 1e-8);

/// Compares analytic gradients against central differences
/// (f(x + h) - f(x - h)) / 2h at the given coordinates. The denominator is
/// the perturbation actually representable in the store. Throws Error when a
/// loss evaluation is not finite.
GradCheckResult grad_check(ParameterStore<double>& store, const GradFn& grad_fn,
                           const LossFn& loss_fn, const std::vector<Coordinate>& coords,
                           double h = 1e-5);

}  // namespace bitrec
