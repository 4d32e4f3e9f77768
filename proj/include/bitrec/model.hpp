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
#include <string>
#include <utility>
#include <vector>

#include "bitrec/embedding.hpp"
#include "bitrec/grad_check.hpp"
#include "bitrec/hba.hpp"
#include "bitrec/tre.hpp"

namespace bitrec {

struct ModelConfig {
  std::size_t d = 128;
  std::size_t heads = 2;
  std::size_t layers = 2;
  std::size_t max_len = 50;
  double dropout = 0.0;
  bool enable_hba = true;
  bool enable_tre = true;
  IntensityMode intensity = IntensityMode::kFull;
  /// Behavior treated as the sole commitment behavior under kPurchaseOnly.
  std::string purchase_behavior = "purchase";
  TreToggles tre;
  /// Context matching width; 0 means d.
  std::size_t tre_match_dim = 0;
  /// Category embedding width; 0 means ceil(d / 4).
  std::size_t category_dim = 0;
  double behavior_loss_weight = 1.0;
  double init_std = 0.02;

  // Vocabulary sizes, filled in from the catalog and schema.
  std::size_t item_count = 0;
  std::size_t category_count = 0;
  std::size_t behavior_count = 0;

  std::size_t head_dim() const { return d / heads; }
  std::size_t resolved_category_dim() const { return category_dim ? category_dim : (d + 3) / 4; }
  std::size_t resolved_match_dim() const { return tre_match_dim ? tre_match_dim : d; }
  /// Throws Error on inconsistent settings.
  void validate() const;
};

/// Builds every parameter the configuration needs. Each tensor draws from
/// its own stream derived from (seed, name), so disabling a component never
/// changes the initial values of the others.
template <class T>
ParameterStore<T> init_parameters(const ModelConfig& config, std::uint64_t seed);

/// The schema HBA stratifies with (differs from `schema` only under
/// kPurchaseOnly).
BehaviorSchema hba_schema(const ModelConfig& config, const BehaviorSchema& schema);

/// Values captured from one sequence's forward pass.
template <class T>
struct LayerTrace {
  /// Attention weights per head, n x n.
  std::vector<Tensor<T>> attention;
  Tensor<T> hba_bias;
  Tensor<T> hba_gate;
  Tensor<T> r_low, r_high, r_fused;
};

template <class T>
struct ForwardTrace {
  Tensor<T> tre_bias;
  Tensor<T> tre_s_qk, tre_s_rel;
  std::vector<LayerTrace<T>> layers;
};

template <class T>
struct SequenceOutput {
  /// Residual stream after the last block, n x d. Equals the token
  /// embeddings for a zero-layer model.
  ag::Var<T> hidden;
  /// Output-normalised hidden states, scored against item embeddings.
  ag::Var<T> normed;
  /// n x |B|
  ag::Var<T> behavior_logits;
};

/// Forward pass over the valid tokens of one sequence. `dropout_rng` enables
/// dropout when non-null and config.dropout > 0.
template <class T>
SequenceOutput<T> forward_tokens(const ag::Binder<T>& params, const ModelConfig& config,
                                 const BehaviorSchema& schema, const Tokens& tokens,
                                 Rng* dropout_rng = nullptr, ForwardTrace<T>* trace = nullptr);

/// Reference causal transformer over the same main parameters, with no bias
/// terms at all.
template <class T>
SequenceOutput<T> forward_plain(const ag::Binder<T>& params, const ModelConfig& config,
                                const Tokens& tokens, ForwardTrace<T>* trace = nullptr);

/// Batch-level results in padded (batch, L, .) layout; padded slots are 0.
template <class T>
struct ForwardOutput {
  Tensor<T> hidden;           // (batch, L, d)
  Tensor<T> item_scores;      // (batch, L, |V|)
  Tensor<T> behavior_logits;  // (batch, L, |B|)
};

template <class T>
ForwardOutput<T> forward(const Batch& batch, const ParameterStore<T>& store,
                         const ModelConfig& config, const BehaviorSchema& schema);

/// Uniform negatives without replacement, never the positive.
class NegativeSampler {
 public:
  NegativeSampler(std::size_t item_count, std::size_t count);

  /// [positive, negatives...]. When count >= |V| - 1 every other item is
  /// returned in id order and no randomness is consumed.
  std::vector<std::int32_t> candidates(ItemId positive, Rng& rng);

  std::size_t item_count() const { return item_count_; }
  std::size_t count() const { return count_; }

 private:
  std::size_t item_count_;
  std::size_t count_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t generation_ = 0;
};

template <class T>
struct LossTerms {
  ag::Var<T> loss;    // (item + weight * behavior) / targets
  double item = 0;    // summed item cross-entropy
  double behavior = 0;
  std::size_t targets = 0;
};

/// Joint next-step loss over every valid target position in the batch.
/// Throws Error when the catalog has fewer than two items.
template <class T>
LossTerms<T> compute_loss(const ag::Binder<T>& params, const ModelConfig& config,
                          const BehaviorSchema& schema, const Batch& batch,
                          NegativeSampler& sampler, Rng& negative_rng,
                          Rng* dropout_rng = nullptr);

/// Scores of every item for the position after `history`.
template <class T>
std::vector<T> score_next(const std::vector<Interaction>& history, const ParameterStore<T>& store,
                          const ModelConfig& config, const BehaviorSchema& schema);

struct Prediction {
  std::vector<std::pair<ItemId, float>> items;
  std::vector<double> behavior_probs;
};

/// Top-k items (score descending, ties by ascending id) and the behavior
/// distribution for the step after `history`. Throws Error on empty history.
Prediction predict_next(const std::vector<Interaction>& history,
                        const ParameterStore<float>& store, const ModelConfig& config,
                        const BehaviorSchema& schema, std::size_t top_k);

/// The small configuration used for whole-model gradient checks: L = 8,
/// d = 16, 2 heads, 1 layer, 20 items, 5 categories, the 4-behavior
/// e-commerce schema, HBA and TRE on.
ModelConfig tiny_model_config();

struct ModelGradCheckOptions {
  std::size_t coordinates = 256;
  double step = 1e-5;
  std::uint64_t seed = 1;
  std::size_t users = 2;
  std::size_t negatives = 8;
};

/// Central-difference check of the joint loss. Analytic gradients come from
/// the double-precision tape; the perturbed losses are evaluated in extended
/// precision. Every
/// parameter, gates included, is first moved to a random non-trivial value
/// so that no path is switched off by its zero initialisation.
GradCheckResult model_grad_check(const ModelConfig& config, const BehaviorSchema& schema,
                                 const ModelGradCheckOptions& options);

}  // namespace bitrec
