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
#include <sstream>

#include "bitrec/experiments.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace bitrec;

TEST_CASE("rank of the target") {
  const std::vector<float> s{0.1f, 0.9f, 0.5f, 0.9f, -1.0f};
  CHECK(rank_of<float>(s, 1) == 1);
  CHECK(rank_of<float>(s, 3) == 2);
  CHECK(rank_of<float>(s, 2) == 3);
  CHECK(rank_of<float>(s, 4) == 5);
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> scores(20);
    for (auto& x : scores) x = static_cast<double>(rng.below(6));
    const auto target = static_cast<ItemId>(rng.below(20));
    CHECK(rank_of<double>(scores, target) == oracle::sort_rank(scores, target));
  }
}

TEST_CASE("metric values") {
  const std::vector<std::size_t> cutoffs{1, 5, 10};
  SUBCASE("single ranks") {
    const std::vector<std::size_t> one{1};
    auto m = compute_metrics(one, cutoffs);
    CHECK(m.hr == std::vector<double>{1, 1, 1});
    CHECK(m.ndcg == std::vector<double>{1, 1, 1});
    CHECK(m.mrr == 1.0);
    const std::vector<std::size_t> four{4};
    m = compute_metrics(four, cutoffs);
    CHECK(m.hr == std::vector<double>{0, 1, 1});
    CHECK(m.ndcg[1] == doctest::Approx(1.0 / std::log2(5.0)).epsilon(1e-15));
    CHECK(m.mrr == 0.25);
    const std::vector<std::size_t> eleven{11};
    m = compute_metrics(eleven, cutoffs);
    CHECK(m.hr == std::vector<double>{0, 0, 0});
    CHECK(m.ndcg == std::vector<double>{0, 0, 0});
    CHECK(m.mrr == doctest::Approx(1.0 / 11).epsilon(1e-15));
  }
  SUBCASE("random lists against the oracle") {
    Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<std::size_t> ranks(1 + rng.below(30));
      for (auto& r : ranks) r = 1 + rng.below(60);
      const auto m = compute_metrics(ranks, cutoffs);
      for (std::size_t k = 0; k < cutoffs.size(); ++k) {
        const auto want = oracle::metrics(ranks, cutoffs[k]);
        REQUIRE(std::abs(m.hr[k] - want.hr) < 1e-12);
        REQUIRE(std::abs(m.ndcg[k] - want.ndcg) < 1e-12);
        REQUIRE(std::abs(m.mrr - want.mrr) < 1e-12);
      }
    }
  }
  SUBCASE("bounds and monotonicity") {
    Rng rng(3);
    std::vector<std::size_t> ranks(200);
    for (auto& r : ranks) r = 1 + rng.below(30);
    const auto m = compute_metrics(ranks, cutoffs);
    for (std::size_t k = 0; k < cutoffs.size(); ++k) {
      CHECK(m.ndcg[k] <= m.hr[k]);
      CHECK(m.hr[k] <= 1.0);
      if (k > 0) CHECK(m.hr[k] >= m.hr[k - 1]);
    }
  }
  const std::vector<std::size_t> none, zero{0};
  CHECK_THROWS_AS(compute_metrics(none, cutoffs), Error);
  CHECK_THROWS_AS(compute_metrics(zero, cutoffs), Error);
}

namespace {

struct Fixture {
  Dataset data;
  ModelConfig model = tiny_model_config();
  Splits splits;
  ParameterStore<float> store;
};

Fixture fixture() {
  SyntheticConfig sc;
  sc.user_count = 30;
  sc.item_count = 25;
  sc.category_count = 4;
  sc.mean_sequence_length = 8;
  sc.seed = 5;
  Fixture f{generate_synthetic(sc)};
  f.model.item_count = f.data.catalog.item_count();
  f.model.category_count = f.data.catalog.category_count();
  f.splits = make_splits(f.data.sequences, {});
  f.store = init_parameters<float>(f.model, 2);
  return f;
}

}  // namespace

TEST_CASE("full-catalog ranking") {
  const auto f = fixture();
  const auto schema = BehaviorSchema::ecommerce();
  const auto ranks = rank_full_catalog(f.splits.test, f.store, f.model, schema, 1);
  REQUIRE(ranks.size() == f.splits.test.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    const auto scores = score_next(f.splits.test[i].history, f.store, f.model, schema);
    CHECK(ranks[i] == rank_of<float>(scores, f.splits.test[i].target.item));
  }
  SUBCASE("thread count does not change results") {
    CHECK(rank_full_catalog(f.splits.test, f.store, f.model, schema, 3) == ranks);
    const std::vector<std::size_t> cutoffs{5, 10};
    CHECK(evaluate(f.splits.test, f.store, f.model, schema, cutoffs).overall ==
          compute_metrics(ranks, cutoffs));
  }
  SUBCASE("slices partition the users") {
    const std::vector<std::size_t> cutoffs{10};
    const auto report = evaluate(f.splits.test, f.store, f.model, schema, cutoffs);
    std::size_t users = 0;
    for (const auto& [name, m] : report.by_behavior) {
      CHECK(schema.find(name).has_value());
      users += m.users;
    }
    CHECK(users == report.overall.users);
  }
}

TEST_CASE("report writers") {
  Metrics m;
  m.users = 2;
  m.cutoffs = {10};
  m.hr = {0.5};
  m.ndcg = {0.25};
  m.mrr = 0.125;
  EvalReport r{m, {{"purchase", m}}};
  const std::vector<LabeledReport> reports{{"full", "none", r}};
  std::ostringstream tsv, jsonl;
  write_report_tsv(tsv, reports);
  write_report_jsonl(jsonl, reports);
  std::istringstream lines(tsv.str());
  std::string header, first, second;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(header.find("HR@10") != std::string::npos);
  CHECK(first.rfind("full\tnone\tall", 0) == 0);
  CHECK(second.rfind("full\tnone\tpurchase", 0) == 0);
  std::istringstream js(jsonl.str());
  std::string line;
  std::size_t count = 0;
  while (std::getline(js, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("variant") == "full");
    CHECK(j.contains("metric"));
    CHECK(j.contains("value"));
    ++count;
  }
  CHECK(count == 2 * 4);  // users, HR@10, NDCG@10, MRR per slice
}

TEST_CASE("ablation variants") {
  const auto base = tiny_model_config();
  CHECK(ablation_variants().size() == 9);
  CHECK(ablation_variants().front() == "full");
  CHECK_FALSE(apply_variant(base, "wo_hba").enable_hba);
  CHECK_FALSE(apply_variant(base, "wo_tre").enable_tre);
  CHECK(apply_variant(base, "wo_intensity_split").intensity == IntensityMode::kNone);
  CHECK(apply_variant(base, "purchase_only_high").intensity == IntensityMode::kPurchaseOnly);
  CHECK_FALSE(apply_variant(base, "wo_temporal").tre.temporal);
  CHECK_FALSE(apply_variant(base, "wo_behavior_transition").tre.transition);
  CHECK_FALSE(apply_variant(base, "wo_item_consistency").tre.item_consistency);
  CHECK_FALSE(apply_variant(base, "wo_context_matching").tre.context_matching);
  try {
    apply_variant(base, "wo_everything");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("wo_temporal") != std::string::npos);
  }
}

TEST_CASE("experiments on a small dataset") {
  const auto f = fixture();
  const auto schema = BehaviorSchema::ecommerce();
  TrainConfig train;
  train.epochs = 1;
  train.batch_size = 16;
  train.negatives = 8;
  train.cutoffs = {10};
  SUBCASE("ablation produces one report per variant") {
    const auto reports = run_ablation({"full", "wo_tre"}, f.splits, schema, f.model, train);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].variant == "full");
    CHECK(reports[1].variant == "wo_tre");
    CHECK(reports[0].report.overall.users == f.splits.test.size());
  }
  SUBCASE("masking an absent behavior changes nothing") {
    auto splits = f.splits;
    const BehaviorId click = schema.id_of("click");
    splits.train = drop_behavior(splits.train, click);
    const auto reports = behavior_masking_eval({"click"}, splits, schema, f.model, train);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].mask == "none");
    CHECK(reports[1].mask == "click");
    CHECK(reports[0].report == reports[1].report);
  }
  SUBCASE("unknown behavior") {
    CHECK_THROWS_AS(behavior_masking_eval({"teleport"}, f.splits, schema, f.model, train), Error);
  }
}
