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

#include <cmath>

#include "bitrec/model.hpp"

namespace bitrec {

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.d = 16;
  c.heads = 2;
  c.layers = 1;
  c.max_len = 8;
  c.item_count = 20;
  c.category_count = 5;
  c.behavior_count = 4;
  return c;
}

GradCheckResult model_grad_check(const ModelConfig& config, const BehaviorSchema& schema,
                                 const ModelGradCheckOptions& options) {
  config.validate();
  auto store = init_parameters<double>(config, options.seed);
  for (auto& [name, e] : store.entries()) {
    Rng rng = Rng::substream(options.seed, "gradcheck." + name);
    const bool gain = name.size() > 5 && name.compare(name.size() - 5, 5, ".gain") == 0;
    // Matrices scale with fan-in so that tanh and sigmoid units stay out of
    // saturation; bias rows and scalar gates get a fixed spread.
    const bool matrix = e.value.rows() > 1 && e.value.cols() > 1;
    const double spread = matrix ? 1.0 / std::sqrt(static_cast<double>(e.value.cols())) : 0.5;
    for (auto& v : e.value.vec()) v = (gain ? 1.0 : 0.0) + rng.normal(0.0, spread);
  }

  Rng data_rng = Rng::substream(options.seed, "gradcheck.data");
  std::vector<UserSequence> users;
  for (std::size_t u = 0; u < options.users; ++u) {
    UserSequence s{"u" + std::to_string(u), {}};
    std::int64_t t = 0;
    for (std::size_t k = 0; k < config.max_len; ++k) {
      Interaction x;
      x.user = s.user;
      // A small item range makes repeated items, and so same-item pairs, likely.
      x.item = static_cast<ItemId>(data_rng.below(std::min<std::size_t>(config.item_count, 8)));
      x.category = static_cast<CategoryId>(x.item % static_cast<ItemId>(config.category_count));
      x.behavior = static_cast<BehaviorId>(data_rng.below(schema.size()));
      t += static_cast<std::int64_t>(data_rng.below(3 * 24 * 3600));
      x.timestamp = t;
      s.interactions.push_back(x);
    }
    users.push_back(std::move(s));
  }
  const Batch batch = batch_sequences(users, config.max_len, users.size()).front();
  const std::uint64_t negative_seed = splitmix64(options.seed ^ fnv1a("gradcheck.negatives"));

  auto run = [&](const auto& params) {
    NegativeSampler sampler(config.item_count, options.negatives);
    Rng rng(negative_seed);
    return compute_loss(params, config, schema, batch, sampler, rng);
  };
  const GradFn grad_fn = [&](ParameterStore<double>& s) {
    ag::Tape<double> tape(true);
    ag::Binder<double> params(tape, s);
    auto terms = run(params);
    tape.backward(terms.loss);
    return terms.loss.value()[0];
  };
  // The finite-difference side runs in extended precision so that its
  // rounding stays well below the tolerance on small gradients.
  const LossFn loss_fn = [&](const ParameterStore<double>& s) {
    const auto wide = s.cast<long double>();
    ag::Tape<long double> tape(false);
    ag::Binder<long double> params(tape, wide);
    return run(params).loss.value()[0];
  };
  Rng coord_rng = Rng::substream(options.seed, "gradcheck.coordinates");
  const auto coords = sample_coordinates(store, options.coordinates, coord_rng);
  return grad_check(store, grad_fn, loss_fn, coords, options.step);
}

}  // namespace bitrec
