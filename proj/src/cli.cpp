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

#include "bitrec/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bitrec/checkpoint.hpp"
#include "bitrec/config.hpp"
#include "bitrec/evaluator.hpp"
#include "bitrec/experiments.hpp"

namespace bitrec {
namespace {

namespace fs = std::filesystem;

ModelConfig sized_model(const RunConfig& rc, const Catalog& catalog, const BehaviorSchema& schema) {
  ModelConfig m = rc.model();
  m.item_count = catalog.item_count();
  m.category_count = catalog.category_count();
  m.behavior_count = schema.size();
  m.validate();
  return m;
}

Dataset load_dataset(const RunConfig& rc, const BehaviorSchema& schema) {
  const auto& path = rc.get("data.dataset");
  if (path.empty()) throw ConfigError("missing required --dataset (data.dataset)");
  Dataset data = load_interactions(path, schema, rc.get("data.catalog"));
  const auto report = validate_schema(schema, data.catalog, data.sequences);
  if (!report.ok()) {
    const auto& v = report.violations.front();
    throw Error("invalid dataset: " + std::to_string(report.violations.size()) +
                " violation(s), first: " + v.message);
  }
  return data;
}

void write_reports(const fs::path& dir, const std::string& stem,
                   const std::vector<LabeledReport>& reports, std::ostream& out) {
  fs::create_directories(dir);
  {
    std::ofstream tsv(dir / (stem + ".tsv"));
    write_report_tsv(tsv, reports);
  }
  {
    std::ofstream jsonl(dir / (stem + ".jsonl"));
    write_report_jsonl(jsonl, reports);
  }
  write_report_tsv(out, reports);
}

std::vector<std::string> expand_all(std::vector<std::string> names,
                                    const std::vector<std::string>& all) {
  if (names.size() == 1 && names.front() == "all") return all;
  return names;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  const auto schema = rc.schema();
  const auto data = load_dataset(rc, schema);
  const auto splits = make_splits(data.sequences, rc.split());
  const auto model = sized_model(rc, data.catalog, schema);
  const auto tc = rc.train();
  auto result = train(splits.train, splits.validation, schema, model, tc, &out);
  const fs::path dir = rc.out_dir();
  fs::create_directories(dir);
  save_checkpoint(result.store, rc.checkpoint_path());
  {
    std::ofstream log(dir / "train_log.tsv");
    write_train_log(log, result);
  }
  const auto report = evaluate(splits.test, result.store, model, schema, tc.cutoffs);
  write_reports(dir, "report", {{"model", "none", report}}, out);
  out << "checkpoint: " << rc.checkpoint_path().string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& rc, std::ostream& out) {
  const auto schema = rc.schema();
  const auto data = load_dataset(rc, schema);
  const auto splits = make_splits(data.sequences, rc.split());
  const auto model = sized_model(rc, data.catalog, schema);
  auto store = init_parameters<float>(model, rc.seed());
  load_checkpoint_into(rc.checkpoint_path(), store);
  const auto report = evaluate(splits.test, store, model, schema, rc.train().cutoffs);
  write_reports(rc.out_dir(), "eval", {{"model", "none", report}}, out);
  return 0;
}

int cmd_ablate(const RunConfig& rc, std::ostream& out) {
  const auto schema = rc.schema();
  const auto data = load_dataset(rc, schema);
  const auto splits = make_splits(data.sequences, rc.split());
  const auto model = sized_model(rc, data.catalog, schema);
  const auto variants = expand_all(rc.list("ablate.variants"), ablation_variants());
  for (const auto& v : variants) apply_variant(model, v);
  const auto reports = run_ablation(variants, splits, schema, model, rc.train(), &out);
  write_reports(rc.out_dir(), "ablation", reports, out);
  return 0;
}

int cmd_mask_eval(const RunConfig& rc, std::ostream& out) {
  const auto schema = rc.schema();
  const auto data = load_dataset(rc, schema);
  const auto splits = make_splits(data.sequences, rc.split());
  const auto model = sized_model(rc, data.catalog, schema);
  std::vector<std::string> names;
  for (const auto& b : schema.behaviors()) names.push_back(b.name);
  const auto behaviors = expand_all(rc.list("mask.behaviors"), names);
  const auto reports = behavior_masking_eval(behaviors, splits, schema, model, rc.train(), &out);
  write_reports(rc.out_dir(), "masking", reports, out);
  return 0;
}

int cmd_gen_synthetic(const RunConfig& rc, std::ostream& out) {
  const auto data = generate_synthetic(rc.synthetic());
  const fs::path dir = rc.out_dir();
  fs::create_directories(dir);
  write_interactions(dir / "interactions.tsv", BehaviorSchema::ecommerce(), data.sequences);
  write_catalog(dir / "catalog.tsv", data.catalog);
  std::size_t rows = 0;
  for (const auto& s : data.sequences) rows += s.size();
  out << "wrote " << data.sequences.size() << " users, " << rows << " interactions, "
      << data.catalog.item_count() << " items to " << dir.string() << "\n";
  return 0;
}

int cmd_grad_check(const RunConfig& rc, std::ostream& out) {
  const auto options = rc.grad_check();
  const double tolerance = rc.real("grad_check.tolerance");
  const auto result =
      model_grad_check(tiny_model_config(), BehaviorSchema::ecommerce(), options);
  const auto& w = result.checks[result.worst];
  char line[256];
  std::snprintf(line, sizeof line,
                "max rel err %.3e over %zu coordinates (worst %s[%zu]: analytic %.6e, "
                "numeric %.6e)\n",
                result.max_error, result.checks.size(), w.where.name.c_str(), w.where.index,
                w.analytic, w.numeric);
  out << line;
  if (result.max_error < tolerance) {
    out << "PASS\n";
    return 0;
  }
  out << "FAIL: tolerance " << tolerance << "\n";
  return 1;
}

int cmd_predict(const RunConfig& rc, std::ostream& out) {
  const auto schema = rc.schema();
  const auto& seq_path = rc.get("data.sequence");
  if (seq_path.empty()) throw ConfigError("missing required --sequence (data.sequence)");
  // Vocabulary sizes come from the checkpoint so that no catalog is needed.
  const auto stored = load_checkpoint<float>(rc.checkpoint_path());
  ModelConfig model = rc.model();
  if (!stored.contains("embed.item") || !stored.contains("embed.category")) {
    throw CheckpointError("checkpoint lacks embedding tables");
  }
  model.item_count = stored.value("embed.item").rows();
  model.category_count = stored.value("embed.category").rows();
  model.behavior_count = schema.size();
  model.validate();
  auto store = init_parameters<float>(model, rc.seed());
  load_checkpoint_into(rc.checkpoint_path(), store);

  const auto data = load_interactions(seq_path, schema, rc.get("data.catalog"));
  if (data.sequences.size() != 1) {
    throw Error("predict expects exactly one user in '" + seq_path + "', found " +
                std::to_string(data.sequences.size()));
  }
  const auto& history = data.sequences.front().interactions;
  for (const auto& x : history) {
    if (static_cast<std::size_t>(x.item) >= model.item_count ||
        static_cast<std::size_t>(x.category) >= model.category_count) {
      throw Error("sequence references an item or category outside the trained vocabulary");
    }
  }
  const auto p = predict_next(history, store, model, schema, rc.count("predict.top_k"));
  out << "rank\titem\tscore\n";
  char line[96];
  for (std::size_t i = 0; i < p.items.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu\t%d\t%.6f\n", i + 1, p.items[i].first,
                  static_cast<double>(p.items[i].second));
    out << line;
  }
  out << "behavior\tprobability\n";
  for (std::size_t b = 0; b < p.behavior_probs.size(); ++b) {
    std::snprintf(line, sizeof line, "\t%.6f\n", p.behavior_probs[b]);
    out << schema.name(static_cast<BehaviorId>(b)) << line;
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generative multi-behavior sequential recommender"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "key = value config file");

  static const std::map<std::string, std::string> aliases = {
      {"run.seed", "--seed"},         {"run.out", "--out"},
      {"data.dataset", "--dataset"},  {"data.catalog", "--catalog"},
      {"data.checkpoint", "--checkpoint"}, {"data.sequence", "--sequence"},
  };
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_options;
  for (const auto& key : config_keys()) {
    std::string names = "--" + key.name;
    if (auto it = aliases.find(key.name); it != aliases.end()) names += "," + it->second;
    flag_options[key.name] =
        app.add_option(names, flag_values[key.name], key.help + " [" + key.default_value + "]")
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  using Command = int (*)(const RunConfig&, std::ostream&);
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands = {
      {"train", {"fit a model, save a checkpoint and report test metrics", &cmd_train}},
      {"eval", {"full-catalog test metrics for a saved checkpoint", &cmd_eval}},
      {"ablate", {"train and test each ablation variant", &cmd_ablate}},
      {"mask-eval", {"train with each behavior removed and test", &cmd_mask_eval}},
      {"gen-synthetic", {"write a planted-funnel synthetic dataset", &cmd_gen_synthetic}},
      {"grad-check", {"finite-difference check of the tiny model's gradients", &cmd_grad_check}},
      {"predict", {"top-k next items for one user's sequence", &cmd_predict}},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, info] : commands) subs.push_back(app.add_subcommand(name, info.first));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    RunConfig rc;
    if (!config_path.empty()) rc.merge_file(config_path);
    for (const auto& key : config_keys()) {
      if (flag_options[key.name]->count() > 0) rc.set(key.name, flag_values[key.name]);
    }
    // Fail on invalid settings before any output files are touched.
    rc.schema();
    rc.model();
    rc.train();

    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      out << "# resolved config (" << commands[i].first << ")\n";
      rc.write(out);
      out << "\n";
      out.flush();
      return commands[i].second.second(rc, out);
    }
    err << "error: no subcommand\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace bitrec
