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

#include <cstdint>
#include <map>
#include <ostream>
#include <vector>

#include "bitrec/evaluator.hpp"

namespace bitrec {

struct TrainConfig {
  double learning_rate = 2e-4;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double weight_decay = 0.01;
  double warmup_fraction = 0.1;
  std::size_t negatives = 128;
  std::uint64_t seed = 1;
  /// Validate every this many epochs; 0 validates only after the last one.
  std::size_t eval_every = 0;
  /// Return the parameters from the epoch with the best validation MRR.
  bool keep_best = false;
  std::vector<std::size_t> cutoffs{10, 50};

  void validate() const;
};

/// Linear warmup from 0 to the peak over warmup_fraction * total_steps
/// (a real-valued boundary), then half-cosine decay to 0 at total_steps.
/// Throws Error when total_steps is 0 or step is out of range.
double lr_schedule(double step, std::size_t total_steps, const TrainConfig& config);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adaptive-moment optimizer with decoupled weight decay. Entries whose
/// `decay` flag is false are never decayed.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  /// p <- p - lr * wd * p (when decayed), then
  /// p <- p - lr * m_hat / (sqrt(v_hat) + eps).
  void step(ParameterStore<float>& store, double lr);
  std::uint64_t steps() const { return t_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamWConfig config_;
  std::map<std::string, Moments> state_;
  std::uint64_t t_ = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  /// Mean joint loss per target over the epoch's updates.
  double train_loss = 0.0;
  double learning_rate = 0.0;
  bool validated = false;
  Metrics validation;
};

struct TrainResult {
  ParameterStore<float> store;
  std::vector<EpochLog> log;
  /// Mean loss over the training set at initialisation and after training,
  /// both measured with the same fixed negative draws and no updates.
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t steps = 0;
  /// Epoch whose parameters were returned (the last unless keep_best).
  std::size_t kept_epoch = 0;
};

/// Mean joint loss over `sequences` for fixed parameters.
double mean_loss(const std::vector<UserSequence>& sequences, const ParameterStore<float>& store,
                 const ModelConfig& model, const BehaviorSchema& schema,
                 const TrainConfig& train, std::uint64_t negative_seed);

/// Trains from scratch. Batches follow a per-epoch shuffle of the sequences
/// drawn from the "data" stream; negatives come from the "negatives" stream.
/// Progress lines go to `log` when non-null. Throws Error naming the step
/// when the loss becomes non-finite.
TrainResult train(const std::vector<UserSequence>& sequences,
                  const std::vector<EvalCase>& validation, const BehaviorSchema& schema,
                  const ModelConfig& model, const TrainConfig& config,
                  std::ostream* log = nullptr);

void write_train_log(std::ostream& out, const TrainResult& result);

}  // namespace bitrec
