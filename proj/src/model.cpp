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

#include "bitrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bitrec/init.hpp"
#include "bitrec/masks.hpp"
#include "bitrec/simd.hpp"

namespace bitrec {

namespace {

constexpr double kNormEps = 1e-5;

std::string layer_prefix(std::size_t l) { return "layer" + std::to_string(l) + "."; }

template <class T>
ag::Var<T> norm(const ag::Binder<T>& params, ag::Var<T> x, const std::string& name) {
  return ag::layer_norm(x, params(name + ".gain"), params(name + ".bias"),
                        static_cast<T>(kNormEps));
}

template <class T>
ag::Var<T> maybe_dropout(ag::Var<T> x, const ModelConfig& config, Rng* rng) {
  if (rng == nullptr || config.dropout <= 0.0) return x;
  return ag::dropout(x, config.dropout, *rng);
}

/// Multi-head causal attention with an optional additive bias shared by all
/// heads, followed by the output projection.
template <class T>
ag::Var<T> attention_block(const ag::Binder<T>& params, const std::string& p, ag::Var<T> a,
                           std::size_t heads, const Tensor<T>& mask, ag::Var<T> bias,
                           LayerTrace<T>* trace) {
  const ag::Var<T> none;
  const std::size_t d = a.cols(), dk = d / heads;
  auto q = ag::linear(a, params(p + "attn.Wq"), none);
  auto k = ag::linear(a, params(p + "attn.Wk"), none);
  auto v = ag::linear(a, params(p + "attn.Wv"), none);
  const T inv = T(1) / std::sqrt(static_cast<T>(dk));
  std::vector<ag::Var<T>> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    auto s = ag::scale(ag::matmul_nt(ag::slice_cols(q, h * dk, dk), ag::slice_cols(k, h * dk, dk)),
                       inv);
    if (bias.valid()) s = ag::add(s, bias);
    auto w = ag::masked_softmax(s, mask);
    if (trace) trace->attention.push_back(w.value());
    outs.push_back(ag::matmul(w, ag::slice_cols(v, h * dk, dk)));
  }
  auto o = heads == 1 ? outs[0] : ag::concat_cols<T>(outs);
  return ag::linear(o, params(p + "attn.Wo"), params(p + "attn.bo"));
}

template <class T>
ag::Var<T> feed_forward(const ag::Binder<T>& params, const std::string& p, ag::Var<T> x) {
  auto hidden = ag::gelu(ag::linear(x, params(p + "ffn.W1"), params(p + "ffn.b1")));
  return ag::linear(hidden, params(p + "ffn.W2"), params(p + "ffn.b2"));
}

template <class T>
SequenceOutput<T> output_head(const ag::Binder<T>& params, ag::Var<T> hidden) {
  SequenceOutput<T> out;
  out.hidden = hidden;
  out.normed = norm(params, hidden, "head.ln");
  out.behavior_logits =
      ag::linear(out.normed, params("head.behavior.W"), params("head.behavior.b"));
  return out;
}

void check_tokens(const Tokens& tokens, const ModelConfig& config) {
  if (tokens.empty()) throw Error("cannot run the model on an empty sequence");
  if (tokens.size() > config.max_len) {
    throw Error("sequence of " + std::to_string(tokens.size()) + " tokens exceeds max_len " +
                std::to_string(config.max_len));
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (d == 0 || heads == 0) throw Error("model.d and model.heads must be positive");
  if (d % heads != 0) {
    throw Error("model.d (" + std::to_string(d) + ") must be divisible by model.heads (" +
                std::to_string(heads) + ")");
  }
  if (max_len < 1) throw Error("model.max_len must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("model.dropout must be in [0, 1)");
  if (behavior_loss_weight < 0.0) throw Error("model.behavior_loss_weight must be non-negative");
  if (!(init_std > 0.0)) throw Error("model.init_std must be positive");
  if (item_count < 1 || category_count < 1 || behavior_count < 1) {
    throw Error("model vocabulary sizes are not set");
  }
}

BehaviorSchema hba_schema(const ModelConfig& config, const BehaviorSchema& schema) {
  if (config.intensity != IntensityMode::kPurchaseOnly) return schema;
  return schema.with_commitment({config.purchase_behavior});
}

template <class T>
ParameterStore<T> init_parameters(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t d = config.d;
  ParameterStore<T> store;
  add_embedding_parameters(store,
                           {config.item_count, config.behavior_count, config.category_count,
                            config.max_len, d, config.resolved_category_dim()},
                           config.init_std, seed);
  auto add_norm = [&](const std::string& name) {
    add_constant(store, name + ".gain", 1, d, T(1), false);
    add_constant(store, name + ".bias", 1, d, T(0), false);
  };
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = layer_prefix(l);
    add_norm(p + "ln1");
    add_norm(p + "ln2");
    for (const char* w : {"attn.Wq", "attn.Wk", "attn.Wv", "attn.Wo"}) {
      add_xavier(store, p + w, d, d, seed);
    }
    add_constant(store, p + "attn.bo", 1, d, T(0), true);
    add_xavier(store, p + "ffn.W1", 4 * d, d, seed);
    add_constant(store, p + "ffn.b1", 1, 4 * d, T(0), true);
    add_xavier(store, p + "ffn.W2", d, 4 * d, seed);
    add_constant(store, p + "ffn.b2", 1, d, T(0), true);
    if (config.enable_hba) {
      add_hba_parameters(store, p + "hba", d, seed);
      add_constant(store, p + "beta", 1, 1, T(0), false);
    }
    if (config.enable_tre) add_constant(store, p + "gamma", 1, 1, T(0), false);
  }
  add_norm("head.ln");
  add_xavier(store, "head.behavior.W", config.behavior_count, d, seed);
  add_constant(store, "head.behavior.b", 1, config.behavior_count, T(0), true);
  if (config.enable_tre) {
    add_tre_parameters(store,
                       {d, config.resolved_category_dim(), config.resolved_match_dim(),
                        config.behavior_count},
                       seed);
  }
  return store;
}

template <class T>
SequenceOutput<T> forward_tokens(const ag::Binder<T>& params, const ModelConfig& config,
                                 const BehaviorSchema& schema, const Tokens& tokens,
                                 Rng* dropout_rng, ForwardTrace<T>* trace) {
  check_tokens(tokens, config);
  const std::size_t n = tokens.size();
  const Tensor<T> mask = causal_mask<T>(n);
  auto h = maybe_dropout(embed_tokens(params, tokens), config, dropout_rng);

  ag::Var<T> tre_bias;
  if (config.enable_tre) {
    auto tre = tre_forward(params, tokens, schema, config.max_len, config.tre);
    tre_bias = tre.bias;
    if (trace) {
      trace->tre_bias = tre.bias.value();
      trace->tre_s_qk = tre.s_qk.value();
      trace->tre_s_rel = tre.s_rel.value();
    }
  }

  ag::Var<T> behavior_emb, item_emb;
  BehaviorSchema strata;
  if (config.enable_hba) {
    behavior_emb = ag::gather_rows(params("embed.behavior"),
                                   std::span<const std::int32_t>(tokens.behaviors));
    item_emb = ag::gather_rows(params("embed.item"), std::span<const std::int32_t>(tokens.items));
    strata = hba_schema(config, schema);
  }

  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = layer_prefix(l);
    LayerTrace<T>* lt = nullptr;
    if (trace) lt = &trace->layers.emplace_back();
    auto a = norm(params, h, p + "ln1");
    ag::Var<T> bias;
    if (config.enable_hba) {
      auto hba = hba_forward(a, behavior_emb, item_emb, bind_hba(params, p + "hba"),
                             std::span<const BehaviorId>(tokens.behaviors), strata,
                             config.intensity != IntensityMode::kNone);
      bias = ag::scale(hba.bias, params(p + "beta"));
      if (lt) {
        lt->hba_bias = hba.bias.value();
        lt->hba_gate = hba.gate.value();
        lt->r_low = hba.r_low.value();
        lt->r_high = hba.r_high.value();
        lt->r_fused = hba.fused.value();
      }
    }
    if (config.enable_tre) {
      auto term = ag::scale(tre_bias, params(p + "gamma"));
      bias = bias.valid() ? ag::add(bias, term) : term;
    }
    auto attn = attention_block(params, p, a, config.heads, mask, bias, lt);
    h = ag::add(h, maybe_dropout(attn, config, dropout_rng));
    auto ffn = feed_forward(params, p, norm(params, h, p + "ln2"));
    h = ag::add(h, maybe_dropout(ffn, config, dropout_rng));
  }
  return output_head(params, h);
}

template <class T>
SequenceOutput<T> forward_plain(const ag::Binder<T>& params, const ModelConfig& config,
                                const Tokens& tokens, ForwardTrace<T>* trace) {
  check_tokens(tokens, config);
  const std::size_t n = tokens.size(), d = config.d, heads = config.heads, dk = d / heads;
  const Tensor<T> mask = causal_mask<T>(n);
  const ag::Var<T> none;
  const T inv = T(1) / std::sqrt(static_cast<T>(dk));
  auto h = embed_tokens(params, tokens);
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = layer_prefix(l);
    LayerTrace<T>* lt = trace ? &trace->layers.emplace_back() : nullptr;
    auto a = norm(params, h, p + "ln1");
    auto q = ag::linear(a, params(p + "attn.Wq"), none);
    auto k = ag::linear(a, params(p + "attn.Wk"), none);
    auto v = ag::linear(a, params(p + "attn.Wv"), none);
    std::vector<ag::Var<T>> outs;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      auto s = ag::scale(
          ag::matmul_nt(ag::slice_cols(q, hd * dk, dk), ag::slice_cols(k, hd * dk, dk)), inv);
      auto w = ag::masked_softmax(s, mask);
      if (lt) lt->attention.push_back(w.value());
      outs.push_back(ag::matmul(w, ag::slice_cols(v, hd * dk, dk)));
    }
    auto o = heads == 1 ? outs[0] : ag::concat_cols<T>(outs);
    h = ag::add(h, ag::linear(o, params(p + "attn.Wo"), params(p + "attn.bo")));
    auto b = norm(params, h, p + "ln2");
    auto f = ag::gelu(ag::linear(b, params(p + "ffn.W1"), params(p + "ffn.b1")));
    h = ag::add(h, ag::linear(f, params(p + "ffn.W2"), params(p + "ffn.b2")));
  }
  return output_head(params, h);
}

template <class T>
ForwardOutput<T> forward(const Batch& batch, const ParameterStore<T>& store,
                         const ModelConfig& config, const BehaviorSchema& schema) {
  const std::size_t L = batch.length, d = config.d, V = config.item_count,
                    B = config.behavior_count;
  ForwardOutput<T> out{Tensor<T>(Shape{batch.size, L, d}), Tensor<T>(Shape{batch.size, L, V}),
                       Tensor<T>(Shape{batch.size, L, B})};
  for (std::size_t r = 0; r < batch.size; ++r) {
    const Tokens tokens = tokens_from_row(batch, r);
    if (tokens.empty()) continue;
    ag::Tape<T> tape(false);
    ag::Binder<T> params(tape, store);
    auto res = forward_tokens(params, config, schema, tokens);
    auto scores = ag::matmul_nt(res.normed, params("embed.item"));
    const std::size_t pad = L - tokens.size();
    auto place = [&](Tensor<T>& dst, const Tensor<T>& src, std::size_t width) {
      std::copy(src.data(), src.data() + src.size(), dst.data() + (r * L + pad) * width);
    };
    place(out.hidden, res.hidden.value(), d);
    place(out.item_scores, scores.value(), V);
    place(out.behavior_logits, res.behavior_logits.value(), B);
  }
  return out;
}

NegativeSampler::NegativeSampler(std::size_t item_count, std::size_t count)
    : item_count_(item_count), count_(count), stamp_(item_count, 0) {
  if (item_count < 2) throw Error("negative sampling needs at least two items in the catalog");
}

std::vector<std::int32_t> NegativeSampler::candidates(ItemId positive, Rng& rng) {
  const std::size_t pool = item_count_ - 1;
  std::vector<std::int32_t> out{positive};
  // Map [0, pool) onto the catalog with the positive removed.
  auto item_at = [positive](std::uint64_t x) {
    return static_cast<std::int32_t>(x >= static_cast<std::uint64_t>(positive) ? x + 1 : x);
  };
  if (count_ >= pool) {
    for (std::size_t x = 0; x < pool; ++x) out.push_back(item_at(x));
    return out;
  }
  if (++generation_ == 0) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    generation_ = 1;
  }
  // Floyd's algorithm: count_ distinct draws from [0, pool).
  for (std::size_t j = pool - count_; j < pool; ++j) {
    std::uint64_t t = rng.below(j + 1);
    if (stamp_[t] == generation_) t = j;
    stamp_[t] = generation_;
    out.push_back(item_at(t));
  }
  return out;
}

template <class T>
LossTerms<T> compute_loss(const ag::Binder<T>& params, const ModelConfig& config,
                          const BehaviorSchema& schema, const Batch& batch,
                          NegativeSampler& sampler, Rng& negative_rng, Rng* dropout_rng) {
  if (config.item_count < 2) throw Error("the item loss needs at least two items");
  LossTerms<T> terms;
  ag::Var<T> total;
  const T weight = static_cast<T>(config.behavior_loss_weight);
  for (std::size_t r = 0; r < batch.size; ++r) {
    const std::size_t first = batch.first_valid(r);
    const std::size_t n = batch.length - first;
    std::vector<std::vector<std::int32_t>> candidates(n);
    std::vector<std::int32_t> behavior_targets(n, -1);
    std::size_t count = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t at = batch.index(r, first + k);
      if (batch.target_items[at] < 0) continue;
      candidates[k] = sampler.candidates(batch.target_items[at], negative_rng);
      behavior_targets[k] = batch.target_behaviors[at];
      ++count;
    }
    if (count == 0) continue;
    auto out = forward_tokens(params, config, schema, tokens_from_row(batch, r), dropout_rng);
    auto item = ag::sampled_softmax_xent(out.normed, params("embed.item"),
                                         std::span<const std::vector<std::int32_t>>(candidates));
    auto behavior =
        ag::softmax_xent(out.behavior_logits, std::span<const std::int32_t>(behavior_targets));
    terms.item += static_cast<double>(item.value()[0]);
    terms.behavior += static_cast<double>(behavior.value()[0]);
    terms.targets += count;
    auto row = ag::add(item, ag::scale(behavior, weight));
    total = total.valid() ? ag::add(total, row) : row;
  }
  if (!total.valid()) {
    terms.loss = params.constant(Tensor<T>::scalar(T(0)));
    return terms;
  }
  terms.loss = ag::scale(total, T(1) / static_cast<T>(terms.targets));
  return terms;
}

namespace {

template <class T>
struct LastStep {
  std::vector<T> scores;
  std::vector<T> behavior_logits;
};

template <class T>
LastStep<T> last_step(const std::vector<Interaction>& history, const ParameterStore<T>& store,
                      const ModelConfig& config, const BehaviorSchema& schema) {
  const Tokens tokens = tokens_from(history, config.max_len);
  ag::Tape<T> tape(false);
  ag::Binder<T> params(tape, store);
  auto out = forward_tokens(params, config, schema, tokens);
  const auto& z = out.normed.value();
  const auto& table = store.value("embed.item");
  const std::size_t last = tokens.size() - 1, d = z.cols();
  LastStep<T> step;
  step.scores.resize(table.rows());
  for (std::size_t v = 0; v < table.rows(); ++v) {
    step.scores[v] = simd::dot(z.row(last), table.row(v), d);
  }
  const auto& bl = out.behavior_logits.value();
  step.behavior_logits.assign(bl.row(last), bl.row(last) + bl.cols());
  return step;
}

}  // namespace

template <class T>
std::vector<T> score_next(const std::vector<Interaction>& history, const ParameterStore<T>& store,
                          const ModelConfig& config, const BehaviorSchema& schema) {
  return last_step(history, store, config, schema).scores;
}

Prediction predict_next(const std::vector<Interaction>& history,
                        const ParameterStore<float>& store, const ModelConfig& config,
                        const BehaviorSchema& schema, std::size_t top_k) {
  if (history.empty()) throw Error("predict_next needs a non-empty history");
  auto step = last_step(history, store, config, schema);
  std::vector<ItemId> order(step.scores.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min(top_k, order.size());
  auto better = [&](ItemId a, ItemId b) {
    return step.scores[a] != step.scores[b] ? step.scores[a] > step.scores[b] : a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    better);
  Prediction p;
  for (std::size_t i = 0; i < k; ++i) p.items.emplace_back(order[i], step.scores[order[i]]);
  const auto& logits = step.behavior_logits;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0;
  for (float l : logits) z += std::exp(static_cast<double>(l) - mx);
  for (float l : logits) p.behavior_probs.push_back(std::exp(static_cast<double>(l) - mx) / z);
  return p;
}

#define BITREC_INSTANTIATE(T)                                                                    \
  template ParameterStore<T> init_parameters(const ModelConfig&, std::uint64_t);                 \
  template SequenceOutput<T> forward_tokens(const ag::Binder<T>&, const ModelConfig&,            \
                                            const BehaviorSchema&, const Tokens&, Rng*,          \
                                            ForwardTrace<T>*);                                   \
  template SequenceOutput<T> forward_plain(const ag::Binder<T>&, const ModelConfig&,             \
                                           const Tokens&, ForwardTrace<T>*);                     \
  template ForwardOutput<T> forward(const Batch&, const ParameterStore<T>&, const ModelConfig&,  \
                                    const BehaviorSchema&);                                      \
  template LossTerms<T> compute_loss(const ag::Binder<T>&, const ModelConfig&,                   \
                                     const BehaviorSchema&, const Batch&, NegativeSampler&,      \
                                     Rng&, Rng*);                                                \
  template std::vector<T> score_next(const std::vector<Interaction>&, const ParameterStore<T>&,  \
                                     const ModelConfig&, const BehaviorSchema&);

BITREC_INSTANTIATE(float)
BITREC_INSTANTIATE(double)
BITREC_INSTANTIATE(long double)

#undef BITREC_INSTANTIATE

}  // namespace bitrec
