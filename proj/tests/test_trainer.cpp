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
#include <fstream>
#include <sstream>

#include "bitrec/checkpoint.hpp"
#include "bitrec/trainer.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bitrec;

namespace {

struct SmallRun {
  Dataset data;
  ModelConfig model;
  TrainConfig train;
};

SmallRun small_run() {
  SyntheticConfig sc;
  sc.user_count = 24;
  sc.item_count = 30;
  sc.category_count = 4;
  sc.mean_sequence_length = 8;
  sc.seed = 3;
  SmallRun r{generate_synthetic(sc), tiny_model_config(), {}};
  r.model.item_count = r.data.catalog.item_count();
  r.model.category_count = r.data.catalog.category_count();
  r.train.epochs = 3;
  r.train.batch_size = 8;
  r.train.negatives = 10;
  r.train.learning_rate = 5e-3;
  r.train.cutoffs = {5, 10};
  return r;
}

std::string bytes_of(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.warmup_fraction = 0.1;
  CHECK(lr_schedule(0, 100, c) == 0.0);
  CHECK(lr_schedule(5, 100, c) == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(lr_schedule(10, 100, c) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(lr_schedule(55, 100, c) == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(std::abs(lr_schedule(100, 100, c)) < 1e-18);
  SUBCASE("continuous at the warmup boundary") {
    c.warmup_fraction = 0.15;
    const double edge = 0.15 * 7;
    CHECK(lr_schedule(edge - 1e-9, 7, c) == doctest::Approx(lr_schedule(edge, 7, c)).epsilon(1e-6));
    CHECK(lr_schedule(edge + 1e-9, 7, c) == doctest::Approx(lr_schedule(edge, 7, c)).epsilon(1e-6));
  }
  SUBCASE("no warmup starts at the peak") {
    c.warmup_fraction = 0.0;
    CHECK(lr_schedule(0, 10, c) == 1e-3);
  }
  SUBCASE("non-increasing after warmup") {
    double prev = lr_schedule(10, 100, c);
    for (int s = 11; s <= 100; ++s) {
      const double now = lr_schedule(s, 100, c);
      CHECK(now <= prev);
      prev = now;
    }
  }
  CHECK_THROWS_AS(lr_schedule(0, 0, c), Error);
  CHECK_THROWS_AS(lr_schedule(101, 100, c), Error);
}

TEST_CASE("optimizer update against a hand computation") {
  ParameterStore<float> store;
  store.add("w", Tensor<float>::matrix(1, 2, {1.0f, -2.0f}), true);
  store.add("g", Tensor<float>::matrix(1, 1, {0.5f}), false);
  AdamW opt({0.9, 0.999, 1e-8, 0.1});
  const double grads[2][3] = {{0.2, -0.4, 1.0}, {-0.1, 0.3, 2.0}};
  double w[3] = {1.0, -2.0, 0.5};
  double m[3] = {}, v[3] = {};
  const double lr = 0.01;
  for (int t = 1; t <= 2; ++t) {
    store.grad("w")[0] = static_cast<float>(grads[t - 1][0]);
    store.grad("w")[1] = static_cast<float>(grads[t - 1][1]);
    store.grad("g")[0] = static_cast<float>(grads[t - 1][2]);
    opt.step(store, lr);
    for (int i = 0; i < 3; ++i) {
      const double g = static_cast<float>(grads[t - 1][i]);
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      if (i < 2) w[i] -= lr * 0.1 * w[i];
      w[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
      w[i] = static_cast<float>(w[i]);
    }
  }
  CHECK(store.value("w")[0] == doctest::Approx(w[0]).epsilon(1e-6));
  CHECK(store.value("w")[1] == doctest::Approx(w[1]).epsilon(1e-6));
  CHECK(store.value("g")[0] == doctest::Approx(w[2]).epsilon(1e-6));
  CHECK(opt.steps() == 2);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  ParameterStore<float> store;
  store.add("w", Tensor<float>::matrix(2, 2, {1, 2, 3, 4}));
  store.grad("w").fill(0.7f);
  const auto before = store.value("w").vec();
  AdamW opt;
  for (int i = 0; i < 3; ++i) opt.step(store, 0.0);
  CHECK(store.value("w").vec() == before);
}

TEST_CASE("training") {
  auto r = small_run();
  const auto splits = make_splits(r.data.sequences, {});
  const auto schema = BehaviorSchema::ecommerce();
  SUBCASE("reduces the training loss") {
    const auto result = train(splits.train, splits.validation, schema, r.model, r.train);
    CHECK(result.final_loss < result.initial_loss);
    CHECK(result.log.size() == 3);
    CHECK(result.log.back().validated);
    CHECK(result.kept_epoch == 3);
    CHECK(result.steps == 3 * ((splits.train.size() + 7) / 8));
  }
  SUBCASE("is deterministic for a fixed seed") {
    const auto a = train(splits.train, splits.validation, schema, r.model, r.train);
    const auto b = train(splits.train, splits.validation, schema, r.model, r.train);
    for (const auto& [name, e] : a.store.entries()) CHECK(e.value.vec() == b.store.value(name).vec());
    std::ostringstream la, lb;
    write_train_log(la, a);
    write_train_log(lb, b);
    CHECK(la.str() == lb.str());
  }
  SUBCASE("keep_best returns a validated epoch") {
    r.train.eval_every = 1;
    r.train.keep_best = true;
    const auto result = train(splits.train, splits.validation, schema, r.model, r.train);
    CHECK(result.kept_epoch >= 1);
    CHECK(result.kept_epoch <= 3);
    double best = -1;
    for (const auto& e : result.log) best = std::max(best, e.validation.mrr);
    CHECK(result.log[result.kept_epoch - 1].validation.mrr == best);
  }
  SUBCASE("sequences without targets are rejected") {
    std::vector<UserSequence> singles{{"a", {Interaction{"a", 1, 0, 0, 5}}}};
    CHECK_THROWS_AS(train(singles, {}, schema, r.model, r.train), Error);
  }
  SUBCASE("invalid settings are rejected") {
    r.train.warmup_fraction = 1.0;
    CHECK_THROWS_AS(train(splits.train, {}, schema, r.model, r.train), Error);
  }
}

TEST_CASE("checkpoint round trip") {
  test::TempDir dir("ckpt");
  auto config = tiny_model_config();
  const auto store = init_parameters<float>(config, 4);
  save_checkpoint(store, dir / "m.ckpt");
  SUBCASE("values come back bit-equal") {
    const auto back = load_checkpoint<float>(dir / "m.ckpt");
    REQUIRE(back.size() == store.size());
    for (const auto& [name, e] : store.entries()) {
      CHECK(back.value(name).shape() == e.value.shape());
      CHECK(back.value(name).vec() == e.value.vec());
    }
    auto into = init_parameters<float>(config, 99);
    load_checkpoint_into(dir / "m.ckpt", into);
    for (const auto& [name, e] : store.entries()) CHECK(into.value(name).vec() == e.value.vec());
    save_checkpoint(back, dir / "again.ckpt");
    CHECK(bytes_of(dir / "m.ckpt") == bytes_of(dir / "again.ckpt"));
  }
  SUBCASE("double precision round trip") {
    auto wide = init_parameters<double>(config, 4);
    wide.value("embed.item")[0] = 0.1;
    save_checkpoint(wide, dir / "d.ckpt");
    CHECK(load_checkpoint<double>(dir / "d.ckpt").value("embed.item")[0] == 0.1);
  }
  SUBCASE("a different vocabulary names the tensor") {
    auto other = config;
    other.item_count = 21;
    auto expected = init_parameters<float>(other, 4);
    try {
      load_checkpoint_into(dir / "m.ckpt", expected);
      FAIL("expected a shape error");
    } catch (const CheckpointShapeError& e) {
      CHECK(std::string(e.what()).find("embed.item") != std::string::npos);
    }
  }
  SUBCASE("a missing component is a shape error") {
    auto other = config;
    other.enable_tre = false;
    auto expected = init_parameters<float>(other, 4);
    CHECK_THROWS_AS(load_checkpoint_into(dir / "m.ckpt", expected), CheckpointShapeError);
  }
  SUBCASE("bad magic") {
    auto bytes = bytes_of(dir / "m.ckpt");
    bytes[0] = 'X';
    std::ofstream(dir / "bad.ckpt", std::ios::binary) << bytes;
    CHECK_THROWS_AS(load_checkpoint<float>(dir / "bad.ckpt"), CheckpointFormatError);
  }
  SUBCASE("unknown version") {
    auto bytes = bytes_of(dir / "m.ckpt");
    bytes[4] = 9;
    std::ofstream(dir / "v.ckpt", std::ios::binary) << bytes;
    CHECK_THROWS_AS(load_checkpoint<float>(dir / "v.ckpt"), CheckpointVersionError);
  }
  SUBCASE("truncated payload") {
    auto bytes = bytes_of(dir / "m.ckpt");
    bytes.resize(bytes.size() - 3);
    std::ofstream(dir / "t.ckpt", std::ios::binary) << bytes;
    CHECK_THROWS_AS(load_checkpoint<float>(dir / "t.ckpt"), CheckpointTruncatedError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint<float>(dir / "nope.ckpt"), CheckpointError);
  }
}
