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
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bitrec/model.hpp"

namespace bitrec {

struct Metrics {
  std::size_t users = 0;
  std::vector<std::size_t> cutoffs;
  std::vector<double> hr;    // per cutoff
  std::vector<double> ndcg;  // per cutoff
  double mrr = 0.0;

  bool operator==(const Metrics&) const = default;
};

struct EvalReport {
  Metrics overall;
  /// Keyed by behavior name of the held-out target.
  std::map<std::string, Metrics> by_behavior;

  bool operator==(const EvalReport&) const = default;
};

/// 1 + #items scoring strictly higher + #items with an equal score and a
/// lower id.
template <class T>
std::size_t rank_of(std::span<const T> scores, ItemId target);

/// HR@K, NDCG@K and MRR averaged over `ranks` (each >= 1). Throws Error on
/// an empty list or a zero rank.
Metrics compute_metrics(std::span<const std::size_t> ranks, std::span<const std::size_t> cutoffs);

/// Worker count from BITREC_THREADS (default 1).
std::size_t eval_threads();

/// Full-catalog rank of every case's target. Users are spread over
/// `threads` workers; the output order is the input order.
std::vector<std::size_t> rank_full_catalog(const std::vector<EvalCase>& cases,
                                           const ParameterStore<float>& store,
                                           const ModelConfig& config, const BehaviorSchema& schema,
                                           std::size_t threads = eval_threads());

/// Ranks the cases and aggregates overall and per target behavior.
EvalReport evaluate(const std::vector<EvalCase>& cases, const ParameterStore<float>& store,
                    const ModelConfig& config, const BehaviorSchema& schema,
                    std::span<const std::size_t> cutoffs);

/// A report tagged with the experiment cell that produced it.
struct LabeledReport {
  std::string variant;
  std::string mask;
  EvalReport report;
};

/// One row per report and target-behavior slice ("all" first), metrics as
/// columns.
void write_report_tsv(std::ostream& out, const std::vector<LabeledReport>& reports);
/// One JSON object per line: variant, mask, slice, metric, value.
void write_report_jsonl(std::ostream& out, const std::vector<LabeledReport>& reports);

}  // namespace bitrec
