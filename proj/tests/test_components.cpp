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
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace bitrec;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ParameterStore<double> embedding_store(std::size_t d) {
  ParameterStore<double> store;
  add_embedding_parameters(store, {5, 4, 3, 8, d, 2}, 0.02, 1);
  return store;
}

Tokens tokens_of(std::vector<ItemId> items, std::vector<BehaviorId> behaviors,
                 std::vector<CategoryId> categories = {}, std::vector<std::int64_t> ts = {}) {
  Tokens t;
  const std::size_t n = items.size();
  t.items = std::move(items);
  t.behaviors = std::move(behaviors);
  t.categories = categories.empty() ? std::vector<CategoryId>(n, 0) : std::move(categories);
  t.timestamps = ts.empty() ? std::vector<std::int64_t>(n, 0) : std::move(ts);
  return t;
}

ModelConfig small_config() {
  auto c = tiny_model_config();
  c.max_len = 16;
  return c;
}

}  // namespace

TEST_CASE("token embedding is a sum of rows") {
  auto store = embedding_store(2);
  store.value("embed.item").fill(0.0);
  store.value("embed.item").at(1, 0) = 1.0;
  store.value("embed.item").at(1, 1) = 2.0;
  store.value("embed.behavior").at(3, 0) = 0.5;
  store.value("embed.behavior").at(3, 1) = -1.0;
  store.value("embed.position").fill(0.0);
  ag::Tape<double> tape(false);
  ag::Binder<double> params(tape, std::as_const(store));
  const auto x = embed_tokens(params, tokens_of({1}, {3})).value();
  CHECK(x.at(0, 0) == 1.5);
  CHECK(x.at(0, 1) == 1.0);
}

TEST_CASE("token embedding properties") {
  auto store = embedding_store(4);
  ag::Tape<double> tape(false);
  ag::Binder<double> params(tape, std::as_const(store));
  SUBCASE("zero item table leaves behavior plus position") {
    store.value("embed.item").fill(0.0);
    const auto x = embed_tokens(params, tokens_of({2, 4}, {1, 3})).value();
    for (std::size_t p = 0; p < 2; ++p) {
      for (std::size_t c = 0; c < 4; ++c) {
        const BehaviorId b = p == 0 ? 1 : 3;
        CHECK(x.at(p, c) == store.value("embed.behavior").at(b, c) +
                                store.value("embed.position").at(p, c));
      }
    }
  }
  SUBCASE("behavior difference does not depend on item or position") {
    const auto a = embed_tokens(params, tokens_of({0, 2, 4}, {1, 1, 1})).value();
    const auto b = embed_tokens(params, tokens_of({0, 2, 4}, {2, 2, 2})).value();
    const auto& eb = store.value("embed.behavior");
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t c = 0; c < 4; ++c) {
        CHECK(a.at(p, c) - b.at(p, c) == doctest::Approx(eb.at(1, c) - eb.at(2, c)).epsilon(1e-12));
      }
    }
  }
  SUBCASE("batch form pads with zeros and starts positions at the first token") {
    std::vector<Interaction> xs(2);
    xs[0].item = 2;
    xs[1].item = 3;
    const auto batch = make_batch(xs, 5);
    const auto e = embed_sequence(batch, store);
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(e[(0 * 5 + 0) * 4 + c] == 0.0);
      CHECK(e[(0 * 5 + 3) * 4 + c] == store.value("embed.item").at(2, c) +
                                           store.value("embed.behavior").at(0, c) +
                                           store.value("embed.position").at(0, c));
    }
  }
  SUBCASE("over-long sequence is rejected") {
    std::vector<ItemId> items(9, 0);
    std::vector<BehaviorId> bs(9, 0);
    CHECK_THROWS_AS(embed_tokens(params, tokens_of(items, bs)), Error);
  }
}

TEST_CASE("intensity masks") {
  const BehaviorSchema schema({"low", "high"}, {"high"});
  SUBCASE("alternating behaviors") {
    const std::vector<BehaviorId> b{0, 1, 0, 1};
    const auto m = intensity_masks<double>(b, schema);
    const double want_low[] = {0.0, -kInf, 0.0, -kInf};
    const double want_high[] = {-kInf, 0.0, -kInf, 0.0};
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(m.low.at(3, j) == want_low[j]);
      CHECK(m.high.at(3, j) == want_high[j]);
    }
  }
  SUBCASE("first query of exploration type") {
    const std::vector<BehaviorId> b{0, 1, 1};
    const auto m = intensity_masks<double>(b, schema);
    CHECK(m.low.at(0, 0) == 0.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(m.high.at(0, j) == -kInf);
  }
  SUBCASE("all commitment") {
    const std::vector<BehaviorId> b{1, 1, 1};
    const auto m = intensity_masks<double>(b, schema);
    for (double v : m.low.vec()) CHECK(v == -kInf);
  }
  SUBCASE("matches the per-pair rule on random sequences") {
    Rng rng(3);
    const auto ecommerce = BehaviorSchema::ecommerce();
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 1 + rng.below(16);
      std::vector<BehaviorId> bs(n);
      for (auto& x : bs) x = static_cast<BehaviorId>(rng.below(4));
      const auto m = intensity_masks<double>(bs, ecommerce);
      const auto s = oracle::strata(bs, ecommerce);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          CHECK((m.low.at(i, j) == 0.0) == s.low[i][j]);
          CHECK((m.high.at(i, j) == 0.0) == s.high[i][j]);
        }
      }
    }
  }
  SUBCASE("no split gives the causal mask on both channels") {
    const std::vector<BehaviorId> b{0, 1, 0};
    const auto m = intensity_masks<double>(b, schema, false);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        const double want = j <= i ? 0.0 : -kInf;
        CHECK(m.low.at(i, j) == want);
        CHECK(m.high.at(i, j) == want);
      }
    }
  }
  SUBCASE("batch form masks padding") {
    std::vector<Interaction> xs(2);
    xs[0].behavior = 0;
    xs[1].behavior = 1;
    const auto ms = build_intensity_masks<double>(make_batch(xs, 4), schema);
    CHECK(ms[0].low.at(2, 2) == 0.0);
    CHECK(ms[0].high.at(3, 3) == 0.0);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(ms[0].low.at(0, j) == -kInf);
      CHECK(ms[0].high.at(1, j) == -kInf);
    }
  }
}

TEST_CASE("stratified attention cases") {
  ag::Tape<double> tape(false);
  Rng rng(5);
  auto h = tape.constant(test::random_tensor(rng, 3, 2));
  Tensor<double> eye(2, 2);
  eye.at(0, 0) = eye.at(1, 1) = 1.0;
  auto id = tape.constant(eye);
  auto zero = tape.constant(Tensor<double>(2, 2));
  SUBCASE("uniform scores average the allowed rows") {
    Tensor<double> mask(3, 3);
    const auto r = stratified_attention(h, mask, zero, zero, id).value();
    for (std::size_t c = 0; c < 2; ++c) {
      const double mean = (h.value().at(0, c) + h.value().at(1, c) + h.value().at(2, c)) / 3.0;
      CHECK(r.at(1, c) == doctest::Approx(mean).epsilon(1e-14));
    }
  }
  SUBCASE("single allowed key and empty stratum") {
    auto mask = Tensor<double>::matrix(3, 3, {-kInf, -kInf, -kInf, -kInf, 0.0, -kInf, -kInf, -kInf,
                                              -kInf});
    const auto r = stratified_attention(h, mask, id, id, id).value();
    CHECK(r.at(1, 0) == h.value().at(1, 0));
    CHECK(r.at(1, 1) == h.value().at(1, 1));
    CHECK(r.at(0, 0) == 0.0);
    CHECK(r.at(2, 1) == 0.0);
  }
}

TEST_CASE("routing and fusion") {
  const BehaviorSchema schema({"low", "high"}, {"high"});
  ag::Tape<double> tape(false);
  Rng rng(6);
  auto lo = tape.constant(test::random_tensor(rng, 2, 3));
  auto hi = tape.constant(test::random_tensor(rng, 2, 3));
  const std::vector<BehaviorId> b{0, 1};
  auto [self, cross] = route_self_cross(lo, hi, std::span<const BehaviorId>(b), schema);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(self.value().at(0, c) == lo.value().at(0, c));
    CHECK(cross.value().at(0, c) == hi.value().at(0, c));
    CHECK(self.value().at(1, c) == hi.value().at(1, c));
    CHECK(cross.value().at(1, c) == lo.value().at(1, c));
  }
  SUBCASE("identical channels route to themselves") {
    auto [s2, c2] = route_self_cross(lo, lo, std::span<const BehaviorId>(b), schema);
    CHECK(s2.value().vec() == lo.value().vec());
    CHECK(c2.value().vec() == lo.value().vec());
  }
  SUBCASE("zero gate averages") {
    auto f = moe_fuse(self, cross, tape.constant(Tensor<double>(3, 6)),
                      tape.constant(Tensor<double>(1, 3)));
    for (double g : f.gate.value().vec()) CHECK(g == 0.5);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(f.fused.value().at(i, c) ==
              doctest::Approx((self.value().at(i, c) + cross.value().at(i, c)) / 2).epsilon(1e-15));
  }
  SUBCASE("saturated gate selects self") {
    auto f = moe_fuse(self, cross, tape.constant(Tensor<double>(3, 6)),
                      tape.constant(Tensor<double>(1, 3, 60.0)));
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(f.fused.value().at(i, c) == doctest::Approx(self.value().at(i, c)).epsilon(1e-12));
  }
  SUBCASE("equal inputs are a fixed point") {
    auto f = moe_fuse(lo, lo, tape.constant(test::random_tensor(rng, 3, 6)),
                      tape.constant(test::random_tensor(rng, 1, 3)));
    for (std::size_t k = 0; k < 6; ++k) CHECK(f.fused.value()[k] == lo.value()[k]);
  }
}

TEST_CASE("hba bias cases") {
  ParameterStore<double> store;
  add_hba_parameters(store, "hba", 2, 1);
  Rng rng(8);
  ag::Tape<double> tape(false);
  ag::Binder<double> params(tape, std::as_const(store));
  auto h = tape.constant(test::random_tensor(rng, 2, 2));
  auto eb = tape.constant(test::random_tensor(rng, 2, 2));
  auto ev = tape.constant(test::random_tensor(rng, 2, 2));
  auto r = tape.constant(test::random_tensor(rng, 2, 2));
  SUBCASE("zero weights give zero bias") {
    for (auto name : {"hba.mlp.W1", "hba.mlp.w2"}) store.value(name).fill(0.0);
    const auto b = hba_bias(h, eb, ev, r, bind_hba(params, "hba")).value();
    for (double v : b.vec()) CHECK(v == 0.0);
  }
  SUBCASE("single pass-through unit") {
    // Hidden unit 0 copies coordinate 1 of h_i; the rest is switched off.
    store.value("hba.mlp.W1").fill(0.0);
    store.value("hba.mlp.W1").at(0, 1) = 1.0;
    store.value("hba.mlp.w2").fill(0.0);
    store.value("hba.mlp.w2")[0] = 1.0;
    const auto b = hba_bias(h, eb, ev, r, bind_hba(params, "hba")).value();
    CHECK(b.at(0, 0) == doctest::Approx(std::tanh(h.value().at(0, 1))).epsilon(1e-15));
    CHECK(b.at(1, 0) == doctest::Approx(std::tanh(h.value().at(1, 1))).epsilon(1e-15));
    CHECK(b.at(1, 1) == doctest::Approx(std::tanh(h.value().at(1, 1))).epsilon(1e-15));
    CHECK(b.at(0, 1) == 0.0);
  }
  SUBCASE("above the diagonal is exactly zero") {
    oracle::randomize(store, 3);
    auto big = tape.constant(test::random_tensor(rng, 5, 2));
    const auto b = hba_bias(big, big, big, big, bind_hba(params, "hba")).value();
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = i + 1; j < 5; ++j) CHECK(b.at(i, j) == 0.0);
  }
}

TEST_CASE("hba forward matches the per-pair oracle") {
  const auto schema = BehaviorSchema::ecommerce();
  ParameterStore<double> store;
  add_hba_parameters(store, "hba", 6, 2);
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    oracle::randomize(store, 100 + trial);
    const std::size_t n = 1 + rng.below(12);
    const auto h = test::random_tensor(rng, n, 6), eb = test::random_tensor(rng, n, 6),
               ev = test::random_tensor(rng, n, 6);
    std::vector<BehaviorId> bs(n);
    for (auto& x : bs) x = static_cast<BehaviorId>(rng.below(4));
    ag::Tape<double> tape(false);
    ag::Binder<double> params(tape, std::as_const(store));
    const auto got = hba_forward(tape.constant(h), tape.constant(eb), tape.constant(ev),
                                 bind_hba(params, "hba"), std::span<const BehaviorId>(bs), schema,
                                 true);
    const auto want = oracle::hba(oracle::to_mat(h), oracle::to_mat(eb), oracle::to_mat(ev), store,
                                  "hba", bs, schema);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 6; ++c) {
        CHECK(got.r_low.value().at(i, c) == doctest::Approx(want.r_low[i][c]).epsilon(1e-10));
        CHECK(got.r_high.value().at(i, c) == doctest::Approx(want.r_high[i][c]).epsilon(1e-10));
        CHECK(got.fused.value().at(i, c) == doctest::Approx(want.fused[i][c]).epsilon(1e-10));
      }
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(std::abs(got.bias.value().at(i, j) - want.bias[i][j]) < 1e-10);
      }
    }
  }
}

TEST_CASE("context features") {
  const BehaviorSchema schema({"low", "high"}, {"high"});
  SUBCASE("hand count") {
    const auto t = tokens_of({7, 7, 9}, {0, 1, 0}, {1, 1, 2});
    const auto f = context_features<double>(t, schema, 3);
    CHECK(f.at(2, 0) == 1.0);
    CHECK(f.at(2, 1) == doctest::Approx(1.0 / 3));
    CHECK(f.at(2, 2) == doctest::Approx(1.0 / 3));
    CHECK(f.at(2, 3) == doctest::Approx(1.0 / 3));
  }
  SUBCASE("singleton prefix") {
    const auto t = tokens_of({4, 5}, {1, 0});
    const auto f = context_features<double>(t, schema, 8);
    CHECK(f.at(0, 0) == 1.0 / 8);
    CHECK(f.at(0, 1) == 1.0);
    CHECK(f.at(0, 2) == 1.0);
    CHECK(f.at(0, 3) == 1.0);
  }
  SUBCASE("no commitment behaviors") {
    const auto t = tokens_of({1, 2, 3}, {0, 0, 0});
    const auto f = context_features<double>(t, schema, 4);
    for (std::size_t j = 0; j < 3; ++j) CHECK(f.at(j, 3) == 0.0);
  }
}

TEST_CASE("temporal feature") {
  const auto z = temporal_feature(0.0);
  CHECK(z[0] == 0.5);
  CHECK(z[1] == 0.0);
  CHECK(z[2] == 1.0);
  const auto day = temporal_feature(24.0);
  CHECK(day[0] == doctest::Approx(0.7310585786300049).epsilon(1e-15));
  CHECK(day[1] == doctest::Approx(3.2188758248682006).epsilon(1e-15));
  CHECK(day[2] == doctest::Approx(0.04).epsilon(1e-15));
  for (double a : {0.5, 3.0, 30.0, 400.0}) {
    const double b = a * 1.5;
    CHECK(temporal_feature(b)[1] > temporal_feature(a)[1]);
    CHECK(temporal_feature(b)[2] < temporal_feature(a)[2]);
  }
}

TEST_CASE("relational pieces") {
  ag::Tape<double> tape(false);
  SUBCASE("item consistency of a pair with itself") {
    const auto t = tokens_of({1, 2}, {0, 0}, {0, 1});
    auto table = tape.constant(Tensor<double>::matrix(3, 2, {0, 0, 1, 2, 3, 1}));
    const auto planes = item_consistency(t, table);
    CHECK(planes[0].value().at(1, 1) == 1.0);
    CHECK(planes[1].value().at(1, 1) == 1.0);
    CHECK(planes[2].value().at(1, 1) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("orthogonal items in one category") {
    const auto t = tokens_of({0, 1}, {0, 0}, {4, 4});
    auto table = tape.constant(Tensor<double>::matrix(2, 2, {1, 0, 0, 3}));
    const auto planes = item_consistency(t, table);
    CHECK(planes[0].value().at(1, 0) == 0.0);
    CHECK(planes[1].value().at(1, 0) == 1.0);
    CHECK(planes[2].value().at(1, 0) == 0.0);
  }
  SUBCASE("antipodal items") {
    const auto t = tokens_of({0, 1}, {0, 0}, {1, 2});
    auto table = tape.constant(Tensor<double>::matrix(2, 2, {1, -2, -1, 2}));
    const auto planes = item_consistency(t, table);
    CHECK(planes[0].value().at(1, 0) == 0.0);
    CHECK(planes[1].value().at(1, 0) == 0.0);
    CHECK(planes[2].value().at(1, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  }
  SUBCASE("behavior transition lookup") {
    const auto schema = BehaviorSchema::ecommerce();
    const BehaviorId cart = schema.id_of("cart"), purchase = schema.id_of("purchase");
    const std::vector<BehaviorId> bs{cart, purchase, 0, cart};
    Tensor<double> m(4, 4);
    auto zero = behavior_transition_lookup(std::span<const BehaviorId>(bs), tape.constant(m));
    for (double v : zero.value().vec()) CHECK(v == 0.0);
    m.at(purchase, cart) = 0.7;
    auto out = behavior_transition_lookup(std::span<const BehaviorId>(bs), tape.constant(m));
    CHECK(out.value().at(1, 0) == 0.7);
    CHECK(out.value().at(1, 3) == 0.7);
    CHECK(out.value().at(0, 1) == 0.0);
    CHECK(out.value().at(1, 1) == 0.0);
  }
  SUBCASE("context matching") {
    Rng rng(2);
    auto ctx = tape.constant(test::random_tensor(rng, 3, 4));
    auto zero = tape.constant(Tensor<double>(1, 4));
    auto wk = tape.constant(test::random_tensor(rng, 1, 4));
    for (double v : context_match_scores(ctx, zero, wk).value().vec()) CHECK(v == 0.0);
    auto same = tape.constant(Tensor<double>::matrix(3, 2, {1, 2, 1, 2, 1, 2}));
    auto wq2 = tape.constant(test::random_tensor(rng, 1, 2));
    auto wk2 = tape.constant(test::random_tensor(rng, 1, 2));
    const auto s = context_match_scores(same, wq2, wk2).value();
    for (double v : s.vec()) CHECK(v == doctest::Approx(s[0]).epsilon(1e-15));
    // One-dimensional projections: q = 2 x0 - x1, k = x0 + 3 x1.
    auto two = tape.constant(Tensor<double>::matrix(2, 2, {1, 0, 2, 1}));
    auto q = tape.constant(Tensor<double>::matrix(1, 2, {2, -1}));
    auto k = tape.constant(Tensor<double>::matrix(1, 2, {1, 3}));
    const auto hand = context_match_scores(two, q, k).value();
    CHECK(hand.at(0, 0) == 2.0);   // q0 = 2, k0 = 1
    CHECK(hand.at(0, 1) == 10.0);  // k1 = 5
    CHECK(hand.at(1, 0) == 3.0);   // q1 = 3
    CHECK(hand.at(1, 1) == 15.0);
  }
  SUBCASE("relational score") {
    Rng rng(4);
    std::vector<ag::Var<double>> planes;
    for (std::size_t k = 0; k < kRelationalFeatures; ++k)
      planes.push_back(tape.constant(test::random_tensor(rng, 3, 3)));
    auto w1 = tape.constant(Tensor<double>(kRelationalHidden, kRelationalFeatures));
    auto b1 = tape.constant(Tensor<double>(1, kRelationalHidden));
    auto w2 = tape.constant(Tensor<double>(1, kRelationalHidden));
    auto b2 = tape.constant(Tensor<double>::scalar(0.3));
    for (double v : relational_score<double>(planes, w1, b1, w2, b2).value().vec()) CHECK(v == 0.3);

    // Identical features at two pairs give identical scores.
    auto rw1 = tape.constant(test::random_tensor(rng, kRelationalHidden, kRelationalFeatures));
    auto rb1 = tape.constant(test::random_tensor(rng, 1, kRelationalHidden));
    auto rw2 = tape.constant(test::random_tensor(rng, 1, kRelationalHidden));
    std::vector<ag::Var<double>> same;
    for (std::size_t k = 0; k < kRelationalFeatures; ++k) {
      auto t = test::random_tensor(rng, 2, 2);
      t.at(1, 0) = t.at(0, 1);
      same.push_back(tape.constant(t));
    }
    const auto s = relational_score<double>(same, rw1, rb1, rw2, b2).value();
    CHECK(s.at(1, 0) == s.at(0, 1));

    // A single pass-through unit with tanh(u) ~ u for a small input.
    Tensor<double> lin(kRelationalHidden, kRelationalFeatures);
    const double w[] = {1, -2, 0.5, 0, 3, 1, -1};
    for (std::size_t k = 0; k < kRelationalFeatures; ++k) lin.at(0, k) = w[k] * 1e-3;
    Tensor<double> out(1, kRelationalHidden);
    out[0] = 1.0;
    std::vector<ag::Var<double>> one;
    const double f[] = {1, 0, 0.25, 0.7, 0.5, 0, 1};
    for (std::size_t k = 0; k < kRelationalFeatures; ++k)
      one.push_back(tape.constant(Tensor<double>::scalar(f[k])));
    const double u = 1e-3 * (1 - 0 + 0.125 + 0 + 1.5 + 0 - 1);
    const auto v = relational_score<double>(one, tape.constant(lin), b1, tape.constant(out),
                                            tape.constant(Tensor<double>::scalar(0.0)))
                       .value();
    CHECK(v[0] == doctest::Approx(std::tanh(u)).epsilon(1e-15));
  }
}

TEST_CASE("transition bias") {
  ag::Tape<double> tape(false);
  Rng rng(7);
  auto s_qk = tape.constant(test::random_tensor(rng, 4, 4));
  auto s_rel = tape.constant(test::random_tensor(rng, 4, 4));
  auto zero = tape.constant(Tensor<double>::scalar(0.0));
  SUBCASE("closed gates") {
    const auto b = transition_bias(s_qk, s_rel, zero, zero, 2.0, 1e-6).value();
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        if (j <= i) CHECK(b.at(i, j) == doctest::Approx(std::log(0.5 + 1e-6)).epsilon(1e-15));
        else CHECK(b.at(i, j) == 0.0);
      }
    }
    CHECK(std::log(0.5 + 1e-6) == doctest::Approx(-0.69315).epsilon(1e-5));
  }
  SUBCASE("saturated weight") {
    auto big = tape.constant(Tensor<double>(4, 4, 100.0));
    auto one = tape.constant(Tensor<double>::scalar(1.0));
    const auto b = transition_bias(big, big, one, one, 1.0, 1e-6).value();
    CHECK(b.at(3, 1) == doctest::Approx(std::log1p(1e-6)).epsilon(1e-12));
  }
}

TEST_CASE("tre forward matches the per-pair oracle") {
  const auto schema = BehaviorSchema::ecommerce();
  auto config = small_config();
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    auto store = init_parameters<double>(config, 1);
    oracle::randomize(store, 200 + trial);
    const std::size_t n = 1 + rng.below(16);
    const auto t = oracle::random_tokens(rng, n, config.item_count, config.category_count, 4);
    ag::Tape<double> tape(false);
    ag::Binder<double> params(tape, std::as_const(store));
    const auto got = tre_forward(params, t, schema, config.max_len, {});
    const auto want = oracle::tre(t, store, schema, config.max_len);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(std::abs(got.s_qk.value().at(i, j) - want.s_qk[i][j]) < 1e-10);
        CHECK(std::abs(got.s_rel.value().at(i, j) - want.s_rel[i][j]) < 1e-10);
        CHECK(std::abs(got.bias.value().at(i, j) - want.bias[i][j]) < 1e-10);
      }
    }
  }
}

TEST_CASE("tre toggles zero their signal") {
  const auto schema = BehaviorSchema::ecommerce();
  auto config = small_config();
  auto store = init_parameters<double>(config, 1);
  oracle::randomize(store, 5);
  Rng rng(11);
  const auto t = oracle::random_tokens(rng, 6, config.item_count, config.category_count, 4);
  ag::Tape<double> tape(false);
  ag::Binder<double> params(tape, std::as_const(store));
  TreToggles off;
  off.context_matching = false;
  for (double v : tre_forward(params, t, schema, config.max_len, off).s_qk.value().vec()) {
    CHECK(v == 0.0);
  }
  // With every relational signal off the score is the MLP at the origin.
  TreToggles none{false, false, false, false};
  const auto s = tre_forward(params, t, schema, config.max_len, none).s_rel.value();
  for (double v : s.vec()) CHECK(v == s[0]);
}

TEST_CASE("behavior matrix shape follows the schema") {
  auto config = small_config();
  const auto store = init_parameters<double>(config, 1);
  CHECK(store.value("tre.behavior_matrix").rows() == 4);
  CHECK(store.value("tre.behavior_matrix").cols() == 4);
  for (double v : store.value("tre.behavior_matrix").vec()) CHECK(v == 0.0);
}
