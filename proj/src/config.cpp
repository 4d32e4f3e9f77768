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

#include "bitrec/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bitrec {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_int(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) return false;
  out = v;
  return true;
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size() || !std::isfinite(v)) return false;
  out = v;
  return true;
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "off" || s == "no") {
    out = false;
    return true;
  }
  return false;
}

const ConfigKey* find_key(std::string_view name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::string kind_name(KeyKind kind) {
  switch (kind) {
    case KeyKind::kInt: return "an integer";
    case KeyKind::kReal: return "a number";
    case KeyKind::kBool: return "true or false";
    case KeyKind::kString: return "a string";
    case KeyKind::kList: return "a comma-separated list";
  }
  return "a value";
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  using K = KeyKind;
  static const std::vector<ConfigKey> keys = {
      {"run.seed", K::kInt, "1", "seed for every random stream"},
      {"run.out", K::kString, "out", "output directory"},
      {"data.dataset", K::kString, "", "interactions file"},
      {"data.catalog", K::kString, "", "catalog file; inferred from the interactions when empty"},
      {"data.checkpoint", K::kString, "", "checkpoint path; <run.out>/model.ckpt when empty"},
      {"data.sequence", K::kString, "", "interactions of one user for predict"},
      {"schema.behaviors", K::kList, "view,click,cart,purchase", "behavior vocabulary"},
      {"schema.high", K::kList, "cart,purchase", "commitment (high-intensity) behaviors"},
      {"split.min_length", K::kInt, "3", "shortest sequence that yields validation and test"},
      {"model.d", K::kInt, "128", "hidden width"},
      {"model.heads", K::kInt, "2", "attention heads"},
      {"model.layers", K::kInt, "2", "transformer blocks"},
      {"model.max_len", K::kInt, "50", "maximum sequence length"},
      {"model.dropout", K::kReal, "0", "dropout rate"},
      {"model.hba", K::kBool, "true", "enable intensity-stratified attention"},
      {"model.tre", K::kBool, "true", "enable the transition relation bias"},
      {"model.intensity", K::kString, "full", "full, none or purchase_only"},
      {"model.purchase_behavior", K::kString, "purchase", "commitment behavior for purchase_only"},
      {"model.tre_transition", K::kBool, "true", "behavior transition term"},
      {"model.tre_temporal", K::kBool, "true", "temporal term"},
      {"model.tre_item_consistency", K::kBool, "true", "item consistency term"},
      {"model.tre_context_matching", K::kBool, "true", "context matching term"},
      {"model.tre_match_dim", K::kInt, "0", "context matching width; 0 means model.d"},
      {"model.category_dim", K::kInt, "0", "category embedding width; 0 means ceil(d/4)"},
      {"model.behavior_loss_weight", K::kReal, "1", "weight of the behavior loss"},
      {"model.init_std", K::kReal, "0.02", "embedding init standard deviation"},
      {"train.lr", K::kReal, "0.0002", "peak learning rate"},
      {"train.epochs", K::kInt, "10", "training epochs"},
      {"train.batch_size", K::kInt, "64", "sequences per batch"},
      {"train.weight_decay", K::kReal, "0.01", "decoupled weight decay"},
      {"train.warmup", K::kReal, "0.1", "warmup fraction of all steps"},
      {"train.negatives", K::kInt, "128", "sampled negatives per target"},
      {"train.eval_every", K::kInt, "0", "validate every N epochs; 0 only after the last"},
      {"train.keep_best", K::kBool, "false", "keep the epoch with the best validation MRR"},
      {"eval.cutoffs", K::kList, "10,50", "HR and NDCG cutoffs"},
      {"synthetic.users", K::kInt, "1000", "synthetic users"},
      {"synthetic.items", K::kInt, "500", "synthetic items"},
      {"synthetic.categories", K::kInt, "20", "synthetic categories"},
      {"synthetic.mean_length", K::kReal, "20", "mean nominal sequence length"},
      {"synthetic.p_convert", K::kReal, "0.8", "probability that a cart converts"},
      {"synthetic.window", K::kInt, "5", "conversion window in steps"},
      {"synthetic.mean_gap", K::kReal, "3600", "mean gap between interactions in seconds"},
      {"ablate.variants", K::kList, "all", "ablation variants, or all"},
      {"mask.behaviors", K::kList, "all", "behaviors to mask one at a time, or all"},
      {"predict.top_k", K::kInt, "10", "items to list"},
      {"grad_check.coordinates", K::kInt, "256", "sampled coordinates"},
      {"grad_check.step", K::kReal, "0.00001", "central difference step"},
      {"grad_check.tolerance", K::kReal, "0.00001", "largest accepted relative error"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

void RunConfig::set(std::string_view key, std::string_view raw) {
  const ConfigKey* def = find_key(key);
  if (!def) throw ConfigError("unknown config key '" + std::string(key) + "'");
  const std::string value = trim(raw);
  bool ok = true;
  switch (def->kind) {
    case KeyKind::kInt: {
      std::int64_t v = 0;
      ok = parse_int(value, v);
      break;
    }
    case KeyKind::kReal: {
      double v = 0;
      ok = parse_real(value, v);
      break;
    }
    case KeyKind::kBool: {
      bool v = false;
      ok = parse_bool(value, v);
      break;
    }
    case KeyKind::kString:
    case KeyKind::kList: break;
  }
  if (!ok) {
    throw ConfigError("config key '" + def->name + "' expects " + kind_name(def->kind) +
                      ", got '" + value + "'");
  }
  values_[def->name] = value;
}

const std::string& RunConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

std::int64_t RunConfig::integer(std::string_view key) const {
  std::int64_t v = 0;
  if (!parse_int(get(key), v)) throw ConfigError("config key '" + std::string(key) + "' is not an integer");
  return v;
}

std::size_t RunConfig::count(std::string_view key) const {
  const auto v = integer(key);
  if (v < 0) throw ConfigError("config key '" + std::string(key) + "' must not be negative");
  return static_cast<std::size_t>(v);
}

double RunConfig::real(std::string_view key) const {
  double v = 0;
  if (!parse_real(get(key), v)) throw ConfigError("config key '" + std::string(key) + "' is not a number");
  return v;
}

bool RunConfig::boolean(std::string_view key) const {
  bool v = false;
  if (!parse_bool(get(key), v)) throw ConfigError("config key '" + std::string(key) + "' is not a boolean");
  return v;
}

std::vector<std::string> RunConfig::list(std::string_view key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void RunConfig::merge_text(std::string_view text, const std::string& origin) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ParseError(origin, line_no, "expected 'key = value'");
    try {
      set(trim(std::string_view(content).substr(0, eq)), std::string_view(content).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ParseError(origin, line_no, e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

void RunConfig::write(std::ostream& out) const {
  for (const auto& k : config_keys()) out << k.name << " = " << get(k.name) << "\n";
}

std::uint64_t RunConfig::seed() const { return static_cast<std::uint64_t>(integer("run.seed")); }

std::filesystem::path RunConfig::out_dir() const { return get("run.out"); }

std::filesystem::path RunConfig::checkpoint_path() const {
  const auto& explicit_path = get("data.checkpoint");
  return explicit_path.empty() ? out_dir() / "model.ckpt" : std::filesystem::path(explicit_path);
}

BehaviorSchema RunConfig::schema() const {
  return BehaviorSchema(list("schema.behaviors"), list("schema.high"));
}

SplitSpec RunConfig::split() const {
  SplitSpec s;
  s.min_length = count("split.min_length");
  return s;
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.d = count("model.d");
  m.heads = count("model.heads");
  m.layers = count("model.layers");
  m.max_len = count("model.max_len");
  m.dropout = real("model.dropout");
  m.enable_hba = boolean("model.hba");
  m.enable_tre = boolean("model.tre");
  m.intensity = parse_intensity_mode(get("model.intensity"));
  m.purchase_behavior = get("model.purchase_behavior");
  m.tre.transition = boolean("model.tre_transition");
  m.tre.temporal = boolean("model.tre_temporal");
  m.tre.item_consistency = boolean("model.tre_item_consistency");
  m.tre.context_matching = boolean("model.tre_context_matching");
  m.tre_match_dim = count("model.tre_match_dim");
  m.category_dim = count("model.category_dim");
  m.behavior_loss_weight = real("model.behavior_loss_weight");
  m.init_std = real("model.init_std");
  return m;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.learning_rate = real("train.lr");
  t.epochs = count("train.epochs");
  t.batch_size = count("train.batch_size");
  t.weight_decay = real("train.weight_decay");
  t.warmup_fraction = real("train.warmup");
  t.negatives = count("train.negatives");
  t.seed = seed();
  t.eval_every = count("train.eval_every");
  t.keep_best = boolean("train.keep_best");
  t.cutoffs.clear();
  for (const auto& c : list("eval.cutoffs")) {
    std::int64_t v = 0;
    if (!parse_int(c, v) || v <= 0) throw ConfigError("eval.cutoffs entry '" + c + "' is not a positive integer");
    t.cutoffs.push_back(static_cast<std::size_t>(v));
  }
  t.validate();
  return t;
}

SyntheticConfig RunConfig::synthetic() const {
  SyntheticConfig s;
  s.user_count = count("synthetic.users");
  s.item_count = count("synthetic.items");
  s.category_count = count("synthetic.categories");
  s.mean_sequence_length = real("synthetic.mean_length");
  s.p_convert = real("synthetic.p_convert");
  s.conversion_window = count("synthetic.window");
  s.mean_gap_seconds = real("synthetic.mean_gap");
  s.seed = seed();
  s.validate();
  return s;
}

ModelGradCheckOptions RunConfig::grad_check() const {
  ModelGradCheckOptions o;
  o.coordinates = count("grad_check.coordinates");
  o.step = real("grad_check.step");
  o.seed = seed();
  if (o.coordinates == 0) throw ConfigError("grad_check.coordinates must be positive");
  if (!(o.step > 0)) throw ConfigError("grad_check.step must be positive");
  return o;
}

}  // namespace bitrec
