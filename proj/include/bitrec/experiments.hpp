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

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "bitrec/trainer.hpp"

namespace bitrec {

/// full, wo_hba, wo_intensity_split, purchase_only_high, wo_tre,
/// wo_behavior_transition, wo_temporal, wo_item_consistency,
/// wo_context_matching.
const std::vector<std::string>& ablation_variants();

/// The model configuration for one ablation variant. Throws Error listing
/// the valid names for an unknown variant.
ModelConfig apply_variant(const ModelConfig& base, std::string_view variant);

/// Trains and tests every variant from the same seed and data.
std::vector<LabeledReport> run_ablation(const std::vector<std::string>& variants,
                                        const Splits& splits, const BehaviorSchema& schema,
                                        const ModelConfig& model, const TrainConfig& train,
                                        std::ostream* log = nullptr);

/// For each named behavior, trains with that behavior removed from the
/// training sequences and tests on the complete held-out histories. The
/// first row is the unmasked reference (mask "none"). Throws Error for an
/// unknown behavior or when masking leaves no training targets.
std::vector<LabeledReport> behavior_masking_eval(const std::vector<std::string>& behaviors,
                                                 const Splits& splits,
                                                 const BehaviorSchema& schema,
                                                 const ModelConfig& model,
                                                 const TrainConfig& train,
                                                 std::ostream* log = nullptr);

}  // namespace bitrec
