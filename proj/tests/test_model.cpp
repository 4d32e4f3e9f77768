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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace bitrec;

namespace {

const BehaviorSchema kSchema = BehaviorSchema::ecommerce();

std::vector<Interaction> random_history(Rng& rng, std::size_t n, const ModelConfig& c) {
  std::vector<Interaction> xs(n);
  std::int64_t t = 1000;
  for (auto& x : xs) {
    x.user = "u";
    x.item = static_cast<ItemId>(rng.below(c.item_count));
    x.category = static_cast<CategoryId>(x.item % c.category_count);
    x.behavior = static_cast<BehaviorId>(rng.below(c.behavior_count));
    t += static_cast<std::int64_t>(rng.below(20000));
    x.timestamp = t;
  }
  return xs;
}

ParameterStore<double> random_store(const ModelConfig& c, std::uint64_t seed) {
  auto store = init_parameters<double>(c, 1);
  oracle::randomize(store, seed);
  return store;
}

Tensor<double> run_hidden(const ParameterStore<double>& store, const ModelConfig& c,
                          const Tokens& tokens) {
  ag::Tape<double> tape(false);
  ag::Binder<double> params(tape, store);
  return forward_tokens(params, c, kSchema, tokens).hidden.value();
}

}  // namespace

TEST_CASE("zero layers leave the embeddings untouched") {
  auto c = tiny_model_config();
  c.layers = 0;
  const auto store = random_store(c, 2);
  Rng rng(1);
  const auto tokens = tokens_from(random_history(rng, 6, c), c.max_len);
  ag::Tape<double> tape(false);
  ag::Binder<double> params(tape, store);
  const auto hidden = forward_tokens(params, c, kSchema, tokens).hidden.value();
  const auto embedded = embed_tokens(params, tokens).value();
  CHECK(hidden.vec() == embedded.vec());
}

TEST_CASE("outputs never depend on later tokens") {
  auto c = tiny_model_config();
  c.layers = 2;
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto store = random_store(c, 10 + trial);
    const std::size_t n = 2 + rng.below(c.max_len - 1);
    auto history = random_history(rng, n, c);
    const auto base = run_hidden(store, c, tokens_from(history, c.max_len));
    const std::size_t t = 1 + rng.below(n - 1);
    auto& x = history[t];
    x.item = static_cast<ItemId>((x.item + 1 + rng.below(c.item_count - 1)) % c.item_count);
    x.category = static_cast<CategoryId>(x.item % c.category_count);
    x.behavior = static_cast<BehaviorId>((x.behavior + 1) % c.behavior_count);
    x.timestamp += 1 + static_cast<std::int64_t>(rng.below(100000));
    const auto changed = run_hidden(store, c, tokens_from(history, c.max_len));
    for (std::size_t p = 0; p < t; ++p) {
      for (std::size_t k = 0; k < c.d; ++k) {
        REQUIRE(changed.at(p, k) == base.at(p, k));
      }
    }
    bool moved = false;
    for (std::size_t k = 0; k < c.d; ++k) moved = moved || changed.at(t, k) != base.at(t, k);
    CHECK(moved);
  }
}

TEST_CASE("disabled components reduce to the vanilla transformer") {
  auto c = tiny_model_config();
  c.layers = 2;
  Rng rng(4);
  const auto tokens = tokens_from(random_history(rng, 7, c), c.max_len);
  SUBCASE("both off is bit-identical to the plain path") {
    c.enable_hba = c.enable_tre = false;
    const auto store = random_store(c, 5);
    ag::Tape<double> tape(false);
    ag::Binder<double> params(tape, store);
    const auto a = forward_tokens(params, c, kSchema, tokens);
    const auto b = forward_plain(params, c, tokens);
    CHECK(a.hidden.value().vec() == b.hidden.value().vec());
    CHECK(a.behavior_logits.value().vec() == b.behavior_logits.value().vec());
  }
  SUBCASE("zero bias weights match the plain attention") {
    auto store = random_store(c, 6);
    for (std::size_t l = 0; l < c.layers; ++l) {
      store.value("layer" + std::to_string(l) + ".beta").fill(0.0);
      store.value("layer" + std::to_string(l) + ".gamma").fill(0.0);
    }
    ag::Tape<double> tape(false);
    ag::Binder<double> params(tape, store);
    ForwardTrace<double> full, plain;
    const auto a = forward_tokens(params, c, kSchema, tokens, nullptr, &full);
    const auto b = forward_plain(params, c, tokens, &plain);
    for (std::size_t l = 0; l < c.layers; ++l) {
      for (std::size_t h = 0; h < c.heads; ++h) {
        const auto& x = full.layers[l].attention[h].vec();
        const auto& y = plain.layers[l].attention[h].vec();
        for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(x[k] - y[k]) <= 1e-6);
      }
    }
    for (std::size_t k = 0; k < a.hidden.value().size(); ++k) {
      CHECK(std::abs(a.hidden.value()[k] - b.hidden.value()[k]) <= 1e-6);
    }
  }
  SUBCASE("removing one component equals zeroing its weight") {
    auto full = random_store(c, 7);
    auto no_tre = c;
    no_tre.enable_tre = false;
    auto reduced = init_parameters<double>(no_tre, 1);
    for (auto& [name, e] : reduced.entries()) e.value = full.value(name);
    for (std::size_t l = 0; l < c.layers; ++l) {
      full.value("layer" + std::to_string(l) + ".gamma").fill(0.0);
    }
    CHECK(run_hidden(full, c, tokens).vec() == run_hidden(reduced, no_tre, tokens).vec());
  }
}

TEST_CASE("two-token attention follows the additive bias") {
  auto c = tiny_model_config();
  c.enable_hba = false;
  c.heads = 1;
  auto store = random_store(c, 8);
  store.value("layer0.attn.Wq").fill(0.0);
  store.value("layer0.gamma").fill(1.0);
  Rng rng(9);
  const auto tokens = tokens_from(random_history(rng, 2, c), c.max_len);
  ag::Tape<double> tape(false);
  ag::Binder<double> params(tape, store);
  ForwardTrace<double> trace;
  forward_tokens(params, c, kSchema, tokens, nullptr, &trace);
  const auto& b = trace.tre_bias;
  const auto& w = trace.layers[0].attention[0];
  CHECK(w.at(0, 0) == 1.0);
  CHECK(w.at(0, 1) == 0.0);
  const double want = 1.0 / (1.0 + std::exp(b.at(1, 1) - b.at(1, 0)));
  CHECK(w.at(1, 0) == doctest::Approx(want).epsilon(1e-14));
  CHECK(w.at(1, 1) == doctest::Approx(1.0 - want).epsilon(1e-14));
}

TEST_CASE("full candidate set reproduces the full softmax") {
  auto c = tiny_model_config();
  c.item_count = 50;
  c.behavior_loss_weight = 0.0;
  const auto store = random_store(c, 11);
  Rng rng(12);
  std::vector<UserSequence> users;
  for (int u = 0; u < 3; ++u) users.push_back({"u" + std::to_string(u), random_history(rng, 6, c)});
  const auto batch = batch_sequences(users, c.max_len, 3)[0];

  NegativeSampler sampler(c.item_count, c.item_count - 1);
  Rng neg(1);
  ag::Tape<double> tape(false);
  ag::Binder<double> params(tape, store);
  const auto terms = compute_loss(params, c, kSchema, batch, sampler, neg);

  const auto out = forward(batch, store, c, kSchema);
  double total = 0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < batch.size; ++r) {
    for (std::size_t p = 0; p < batch.length; ++p) {
      const auto at = batch.index(r, p);
      if (batch.target_items[at] < 0) continue;
      const double* s = out.item_scores.data() + at * c.item_count;
      const double m = *std::max_element(s, s + c.item_count);
      double z = 0;
      for (std::size_t v = 0; v < c.item_count; ++v) z += std::exp(s[v] - m);
      total += m + std::log(z) - s[batch.target_items[at]];
      ++count;
    }
  }
  CHECK(terms.targets == count);
  CHECK(std::abs(terms.loss.value()[0] - total / count) <= 1e-5);
}

TEST_CASE("negative sampler") {
  NegativeSampler sampler(30, 10);
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto positive = static_cast<ItemId>(rng.below(30));
    auto cands = sampler.candidates(positive, rng);
    REQUIRE(cands.size() == 11);
    CHECK(cands[0] == positive);
    std::sort(cands.begin() + 1, cands.end());
    CHECK(std::adjacent_find(cands.begin() + 1, cands.end()) == cands.end());
    for (std::size_t k = 1; k < cands.size(); ++k) {
      CHECK(cands[k] != positive);
      CHECK(cands[k] >= 0);
      CHECK(cands[k] < 30);
    }
  }
  CHECK_THROWS_AS(NegativeSampler(1, 1), Error);
}

TEST_CASE("next-item prediction") {
  auto c = tiny_model_config();
  Rng rng(13);
  const auto history = random_history(rng, 5, c);
  SUBCASE("scores agree with the batch forward pass") {
    const auto store = random_store(c, 14);
    const auto scores = score_next(history, store, c, kSchema);
    const auto out = forward(make_batch(history, c.max_len), store, c, kSchema);
    const double* last = out.item_scores.data() + (c.max_len - 1) * c.item_count;
    for (std::size_t v = 0; v < c.item_count; ++v) CHECK(scores[v] == last[v]);
  }
  SUBCASE("top-k is the descending order of scores with ties by id") {
    auto store = init_parameters<float>(c, 1);
    {
      auto wide = random_store(c, 15);
      for (auto& [name, e] : store.entries()) {
        for (std::size_t k = 0; k < e.value.size(); ++k) {
          e.value[k] = static_cast<float>(wide.value(name)[k]);
        }
      }
    }
    auto& items = store.value("embed.item");
    for (std::size_t k = 0; k < c.d; ++k) items.at(12, k) = items.at(3, k);
    const auto scores = score_next(history, store, c, kSchema);
    const auto pred = predict_next(history, store, c, kSchema, c.item_count);
    REQUIRE(pred.items.size() == c.item_count);
    std::vector<ItemId> order(c.item_count);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](ItemId a, ItemId b) { return scores[a] > scores[b]; });
    for (std::size_t k = 0; k < order.size(); ++k) {
      CHECK(pred.items[k].first == order[k]);
      CHECK(pred.items[k].second == scores[order[k]]);
    }
    const auto at3 = std::find_if(pred.items.begin(), pred.items.end(),
                                  [](const auto& p) { return p.first == 3; });
    REQUIRE(at3 + 1 != pred.items.end());
    CHECK((at3 + 1)->first == 12);
    CHECK(predict_next(history, store, c, kSchema, 4).items.size() == 4);
    double mass = 0;
    for (double p : pred.behavior_probs) mass += p;
    CHECK(pred.behavior_probs.size() == 4);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(predict_next({}, store, c, kSchema, 3), Error);
  }
}

TEST_CASE("whole-model gradient check") {
  auto c = tiny_model_config();
  ModelGradCheckOptions options;
  options.coordinates = 64;
  SUBCASE("full model") {
    const auto r = model_grad_check(c, kSchema, options);
    CHECK(r.max_error < 1e-5);
  }
  SUBCASE("purchase-only intensity without TRE") {
    c.intensity = IntensityMode::kPurchaseOnly;
    c.enable_tre = false;
    CHECK(model_grad_check(c, kSchema, options).max_error < 1e-5);
  }
  SUBCASE("plain model") {
    c.enable_hba = c.enable_tre = false;
    CHECK(model_grad_check(c, kSchema, options).max_error < 1e-5);
  }
}

TEST_CASE("configuration validation") {
  auto c = tiny_model_config();
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = tiny_model_config();
  c.item_count = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = tiny_model_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}
