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

#include "bitrec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

namespace bitrec {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw Error("train.lr must be non-negative");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw Error("train.warmup_fraction must be in [0, 1)");
  }
  if (batch_size < 1) throw Error("train.batch_size must be at least 1");
  if (negatives < 1) throw Error("train.negatives must be at least 1");
  if (weight_decay < 0.0) throw Error("train.weight_decay must be non-negative");
  if (cutoffs.empty()) throw Error("at least one evaluation cutoff is required");
}

double lr_schedule(double step, std::size_t total_steps, const TrainConfig& config) {
  if (total_steps == 0) throw Error("lr_schedule: total_steps must be positive");
  const auto total = static_cast<double>(total_steps);
  if (step < 0.0 || step > total) throw Error("lr_schedule: step outside [0, total_steps]");
  const double peak = config.learning_rate;
  const double warmup = config.warmup_fraction * total;
  if (step < warmup) return peak * step / warmup;
  const double progress = (step - warmup) / (total - warmup);
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void AdamW::step(ParameterStore<float>& store, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (auto& [name, e] : store.entries()) {
    auto& st = state_[name];
    const std::size_t n = e.value.size();
    if (st.m.size() != n) {
      st.m.assign(n, 0.0);
      st.v.assign(n, 0.0);
    }
    const double shrink = e.decay ? 1.0 - lr * config_.weight_decay : 1.0;
    float* p = e.value.data();
    const float* g = e.grad.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i];
      st.m[i] = config_.beta1 * st.m[i] + (1.0 - config_.beta1) * gi;
      st.v[i] = config_.beta2 * st.v[i] + (1.0 - config_.beta2) * gi * gi;
      const double mhat = st.m[i] / c1;
      const double vhat = st.v[i] / c2;
      const double pi = static_cast<double>(p[i]) * shrink;
      p[i] = static_cast<float>(pi - lr * mhat / (std::sqrt(vhat) + config_.eps));
    }
  }
}

namespace {

std::vector<UserSequence> trainable(const std::vector<UserSequence>& sequences) {
  std::vector<UserSequence> out;
  for (const auto& s : sequences) {
    if (s.size() >= 2) out.push_back(s);
  }
  return out;
}

}  // namespace

double mean_loss(const std::vector<UserSequence>& sequences, const ParameterStore<float>& store,
                 const ModelConfig& model, const BehaviorSchema& schema,
                 const TrainConfig& train, std::uint64_t negative_seed) {
  NegativeSampler sampler(model.item_count, train.negatives);
  Rng rng(negative_seed);
  double sum = 0.0;
  std::size_t targets = 0;
  for (const auto& batch : batch_sequences(sequences, model.max_len, train.batch_size)) {
    ag::Tape<float> tape(false);
    ag::Binder<float> params(tape, store);
    const auto terms = compute_loss(params, model, schema, batch, sampler, rng);
    sum += terms.item + model.behavior_loss_weight * terms.behavior;
    targets += terms.targets;
  }
  if (targets == 0) throw Error("no training targets: every sequence has fewer than 2 events");
  return sum / static_cast<double>(targets);
}

TrainResult train(const std::vector<UserSequence>& sequences,
                  const std::vector<EvalCase>& validation, const BehaviorSchema& schema,
                  const ModelConfig& model, const TrainConfig& config, std::ostream* log) {
  config.validate();
  model.validate();
  const auto data = trainable(sequences);
  if (data.empty()) throw Error("no training targets: every sequence has fewer than 2 events");

  TrainResult result;
  result.store = init_parameters<float>(model, config.seed);
  Rng data_rng = Rng::substream(config.seed, "data");
  Rng negative_rng = Rng::substream(config.seed, "negatives");
  Rng dropout_rng = Rng::substream(config.seed, "dropout");
  const std::uint64_t probe_seed = splitmix64(config.seed ^ fnv1a("negatives.probe"));
  NegativeSampler sampler(model.item_count, config.negatives);
  AdamW optimizer({0.9, 0.999, 1e-8, config.weight_decay});

  const std::size_t per_epoch = (data.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total = per_epoch * config.epochs;
  result.initial_loss = mean_loss(data, result.store, model, schema, config, probe_seed);
  if (log) *log << "initial loss " << result.initial_loss << '\n';

  ParameterStore<float> best;
  double best_mrr = -1.0;
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), data_rng.engine());
    std::vector<UserSequence> shuffled;
    shuffled.reserve(data.size());
    for (auto i : order) shuffled.push_back(data[i]);

    EpochLog entry;
    entry.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t targets = 0;
    for (const auto& batch : batch_sequences(shuffled, model.max_len, config.batch_size)) {
      result.store.zero_grad();
      ag::Tape<float> tape(true);
      ag::Binder<float> params(tape, result.store);
      auto terms = compute_loss(params, model, schema, batch, sampler, negative_rng, &dropout_rng);
      const double value = terms.loss.value()[0];
      if (!std::isfinite(value)) {
        throw Error("non-finite loss at step " + std::to_string(result.steps + 1) + " (epoch " +
                    std::to_string(epoch) + ")");
      }
      if (terms.targets == 0) continue;
      tape.backward(terms.loss);
      entry.learning_rate = lr_schedule(static_cast<double>(result.steps + 1), total, config);
      optimizer.step(result.store, entry.learning_rate);
      ++result.steps;
      loss_sum += terms.item + model.behavior_loss_weight * terms.behavior;
      targets += terms.targets;
    }
    entry.train_loss = targets ? loss_sum / static_cast<double>(targets) : 0.0;

    const bool due = (config.eval_every > 0 && epoch % config.eval_every == 0) ||
                     epoch == config.epochs;
    if (due && !validation.empty()) {
      entry.validation =
          evaluate(validation, result.store, model, schema, config.cutoffs).overall;
      entry.validated = true;
      if (config.keep_best && entry.validation.mrr > best_mrr) {
        best_mrr = entry.validation.mrr;
        best = result.store;
        result.kept_epoch = epoch;
      }
    }
    if (log) {
      *log << "epoch " << epoch << " loss " << entry.train_loss << " lr " << entry.learning_rate;
      if (entry.validated) *log << " val_mrr " << entry.validation.mrr;
      *log << '\n';
    }
    result.log.push_back(std::move(entry));
  }
  if (config.keep_best && best_mrr >= 0.0) {
    result.store = std::move(best);
  } else {
    result.kept_epoch = config.epochs;
  }
  result.final_loss = mean_loss(data, result.store, model, schema, config, probe_seed);
  if (log) *log << "final loss " << result.final_loss << '\n';
  return result;
}

void write_train_log(std::ostream& out, const TrainResult& result) {
  char buf[64];
  out << "epoch\ttrain_loss\tlr\tval_mrr\n";
  for (const auto& e : result.log) {
    std::snprintf(buf, sizeof buf, "%.6f\t%.6g", e.train_loss, e.learning_rate);
    out << e.epoch << '\t' << buf << '\t';
    if (e.validated) {
      std::snprintf(buf, sizeof buf, "%.6f", e.validation.mrr);
      out << buf;
    } else {
      out << '-';
    }
    out << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.6f\t%.6f", result.initial_loss, result.final_loss);
  out << "# initial_loss\tfinal_loss\n# " << buf << '\n';
}

}  // namespace bitrec
