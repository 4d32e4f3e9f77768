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

#include "bitrec/experiments.hpp"

#include <algorithm>

namespace bitrec {

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> names{
      "full",   "wo_hba",      "wo_intensity_split",  "purchase_only_high",
      "wo_tre", "wo_behavior_transition", "wo_temporal", "wo_item_consistency",
      "wo_context_matching"};
  return names;
}

ModelConfig apply_variant(const ModelConfig& base, std::string_view variant) {
  ModelConfig m = base;
  if (variant == "full") {
  } else if (variant == "wo_hba") {
    m.enable_hba = false;
  } else if (variant == "wo_intensity_split") {
    m.intensity = IntensityMode::kNone;
  } else if (variant == "purchase_only_high") {
    m.intensity = IntensityMode::kPurchaseOnly;
  } else if (variant == "wo_tre") {
    m.enable_tre = false;
  } else if (variant == "wo_behavior_transition") {
    m.tre.transition = false;
  } else if (variant == "wo_temporal") {
    m.tre.temporal = false;
  } else if (variant == "wo_item_consistency") {
    m.tre.item_consistency = false;
  } else if (variant == "wo_context_matching") {
    m.tre.context_matching = false;
  } else {
    std::string known;
    for (const auto& n : ablation_variants()) known += (known.empty() ? "" : ", ") + n;
    throw Error("unknown ablation variant '" + std::string(variant) + "' (valid: " + known + ")");
  }
  return m;
}

std::vector<LabeledReport> run_ablation(const std::vector<std::string>& variants,
                                        const Splits& splits, const BehaviorSchema& schema,
                                        const ModelConfig& model, const TrainConfig& train_config,
                                        std::ostream* log) {
  std::vector<ModelConfig> configs;
  for (const auto& v : variants) configs.push_back(apply_variant(model, v));
  if (splits.test.empty()) throw Error("ablation needs at least one test case");
  std::vector<LabeledReport> out;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    if (log) *log << "== variant " << variants[i] << '\n';
    auto result = train(splits.train, splits.validation, schema, configs[i], train_config, log);
    out.push_back({variants[i], "none",
                   evaluate(splits.test, result.store, configs[i], schema, train_config.cutoffs)});
  }
  return out;
}

std::vector<LabeledReport> behavior_masking_eval(const std::vector<std::string>& behaviors,
                                                 const Splits& splits,
                                                 const BehaviorSchema& schema,
                                                 const ModelConfig& model,
                                                 const TrainConfig& train_config,
                                                 std::ostream* log) {
  std::vector<BehaviorId> ids;
  for (const auto& b : behaviors) ids.push_back(schema.id_of(b));
  if (splits.test.empty()) throw Error("masking study needs at least one test case");

  std::vector<LabeledReport> out;
  auto run = [&](const std::string& mask, const std::vector<UserSequence>& train_seqs) {
    if (log) *log << "== mask " << mask << '\n';
    auto result = train(train_seqs, splits.validation, schema, model, train_config, log);
    out.push_back({"full", mask,
                   evaluate(splits.test, result.store, model, schema, train_config.cutoffs)});
  };
  run("none", splits.train);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    auto masked = drop_behavior(splits.train, ids[k]);
    for (const auto& s : masked) {
      for (const auto& x : s.interactions) {
        if (x.behavior == ids[k]) throw Error("internal: masked behavior survived filtering");
      }
    }
    const bool any_target = std::any_of(masked.begin(), masked.end(),
                                        [](const UserSequence& s) { return s.size() >= 2; });
    if (!any_target) {
      throw Error("masking behavior '" + behaviors[k] + "' leaves no training sequences");
    }
    run(behaviors[k], masked);
  }
  return out;
}

}  // namespace bitrec
