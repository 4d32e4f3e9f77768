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

#include "bitrec/evaluator.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <thread>

#include "json.hpp"

namespace bitrec {

template <class T>
std::size_t rank_of(std::span<const T> scores, ItemId target) {
  const T s = scores[static_cast<std::size_t>(target)];
  std::size_t ahead = 0;
  for (std::size_t v = 0; v < scores.size(); ++v) {
    if (scores[v] > s || (scores[v] == s && v < static_cast<std::size_t>(target))) ++ahead;
  }
  return ahead + 1;
}

template std::size_t rank_of(std::span<const float>, ItemId);
template std::size_t rank_of(std::span<const double>, ItemId);

Metrics compute_metrics(std::span<const std::size_t> ranks, std::span<const std::size_t> cutoffs) {
  if (ranks.empty()) throw Error("cannot compute metrics over zero ranks");
  Metrics m;
  m.users = ranks.size();
  m.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  m.hr.assign(cutoffs.size(), 0.0);
  m.ndcg.assign(cutoffs.size(), 0.0);
  for (const std::size_t r : ranks) {
    if (r == 0) throw Error("ranks start at 1");
    m.mrr += 1.0 / static_cast<double>(r);
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      if (r > cutoffs[c]) continue;
      m.hr[c] += 1.0;
      m.ndcg[c] += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
  }
  const auto n = static_cast<double>(ranks.size());
  m.mrr /= n;
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    m.hr[c] /= n;
    m.ndcg[c] /= n;
  }
  return m;
}

std::size_t eval_threads() {
  const char* env = std::getenv("BITREC_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw Error("BITREC_THREADS must be a positive integer");
  return static_cast<std::size_t>(n);
}

std::vector<std::size_t> rank_full_catalog(const std::vector<EvalCase>& cases,
                                           const ParameterStore<float>& store,
                                           const ModelConfig& config, const BehaviorSchema& schema,
                                           std::size_t threads) {
  std::vector<std::size_t> ranks(cases.size(), 0);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto scores = score_next(cases[i].history, store, config, schema);
      ranks[i] = rank_of(std::span<const float>(scores), cases[i].target.item);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, cases.size()));
  if (threads == 1) {
    work(0, cases.size());
    return ranks;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (cases.size() + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk, end = std::min(cases.size(), begin + chunk);
    pool.emplace_back([&, t, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return ranks;
}

EvalReport evaluate(const std::vector<EvalCase>& cases, const ParameterStore<float>& store,
                    const ModelConfig& config, const BehaviorSchema& schema,
                    std::span<const std::size_t> cutoffs) {
  const auto ranks = rank_full_catalog(cases, store, config, schema);
  EvalReport report;
  report.overall = compute_metrics(ranks, cutoffs);
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    groups[schema.name(cases[i].target.behavior)].push_back(ranks[i]);
  }
  for (const auto& [name, rs] : groups) report.by_behavior[name] = compute_metrics(rs, cutoffs);
  return report;
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

template <class Fn>
void for_each_slice(const EvalReport& r, Fn&& fn) {
  fn(std::string("all"), r.overall);
  for (const auto& [name, m] : r.by_behavior) fn(name, m);
}

}  // namespace

void write_report_tsv(std::ostream& out, const std::vector<LabeledReport>& reports) {
  if (reports.empty()) return;
  const auto& cutoffs = reports.front().report.overall.cutoffs;
  out << "variant\tmask\tslice\tusers";
  for (auto k : cutoffs) out << "\tHR@" << k << "\tNDCG@" << k;
  out << "\tMRR\n";
  for (const auto& lr : reports) {
    for_each_slice(lr.report, [&](const std::string& slice, const Metrics& m) {
      out << lr.variant << '\t' << lr.mask << '\t' << slice << '\t' << m.users;
      for (std::size_t c = 0; c < m.cutoffs.size(); ++c) {
        out << '\t' << fixed(m.hr[c]) << '\t' << fixed(m.ndcg[c]);
      }
      out << '\t' << fixed(m.mrr) << '\n';
    });
  }
}

void write_report_jsonl(std::ostream& out, const std::vector<LabeledReport>& reports) {
  for (const auto& lr : reports) {
    for_each_slice(lr.report, [&](const std::string& slice, const Metrics& m) {
      auto emit = [&](const std::string& metric, double value) {
        nlohmann::ordered_json j;
        j["variant"] = lr.variant;
        j["mask"] = lr.mask;
        j["slice"] = slice;
        j["metric"] = metric;
        j["value"] = value;
        out << j.dump() << '\n';
      };
      emit("users", static_cast<double>(m.users));
      for (std::size_t c = 0; c < m.cutoffs.size(); ++c) {
        emit("HR@" + std::to_string(m.cutoffs[c]), m.hr[c]);
        emit("NDCG@" + std::to_string(m.cutoffs[c]), m.ndcg[c]);
      }
      emit("MRR", m.mrr);
    });
  }
}

}  // namespace bitrec
