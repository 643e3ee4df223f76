// Copyright 2026 The kgrlab Authors.
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

// kgrlab command-line tool.
//
//   kgrlab kg synth|build|surrogate
//   kgrlab query sample
//   kgrlab train | eval
//   kgrlab attack kp|qm|co
//   kgrlab defend filter|advtrain
//   kgrlab experiment run
//   kgrlab report render
//
// A graph directory holds triples.tsv, categories.tsv and schema.tsv.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "kgrlab/harness.hpp"

namespace {

using namespace kgrlab;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
  bool strict = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config (JSON)");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output path (stdout when omitted, where possible)");
  app->add_option("--threads", c.threads, "worker threads");
  app->add_flag("--strict-deterministic", c.strict, "force a single thread");
}

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? default_config() : config_from_json(parse_json(read_file(c.config), c.config));
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  if (c.strict) cfg.threads = 1;
  return cfg;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty())
    std::cout << text;
  else
    write_file(path, text);
}

void emit_json(const std::string& path, const Json& j) { emit(path, j.dump(2) + "\n"); }

std::string in_dir(const std::string& dir, const char* name) { return (std::filesystem::path(dir) / name).string(); }

KnowledgeGraph read_graph(const std::string& dir) {
  return load_kg(in_dir(dir, "triples.tsv"), in_dir(dir, "categories.tsv"), in_dir(dir, "schema.tsv"));
}

void write_graph(const KnowledgeGraph& kg, const std::string& dir) {
  if (dir.empty()) throw Error(ErrorCode::kIoError, "--out directory required");
  std::filesystem::create_directories(dir);
  save_kg(kg, in_dir(dir, "triples.tsv"), in_dir(dir, "categories.tsv"), in_dir(dir, "schema.tsv"));
}

void warn_depth_cap(const std::vector<QmResult>& baits) {
  std::size_t hits = 0;
  for (const auto& b : baits) hits += b.bait.depth_cap_hit;
  if (hits > 0) std::cerr << "warning: bait expansion stopped at the depth cap for " << hits << " queries\n";
}

void warn_depth_cap(const Json& artifacts) {
  if (artifacts.contains("baits") && artifacts["baits"].value("depth_cap_hits", 0) > 0)
    std::cerr << "warning: bait expansion stopped at the depth cap for " << artifacts["baits"]["depth_cap_hits"].get<int>()
              << " queries\n";
}

Json metrics_json(const EvalResult& r, const ExperimentConfig& c) {
  Json j{{"queries", r.rankings.size()}, {"mrr", mrr(r)}};
  for (std::size_t k : c.hit_ks) j["hit@" + std::to_string(k)] = hit_at_k(r, k);
  for (std::size_t k : c.ndcg_ks) j["ndcg@" + std::to_string(k)] = ndcg_at_k(r, k);
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph reasoning and poisoning laboratory"};
  app.require_subcommand(1);

  // kg
  auto* kg_cmd = app.add_subcommand("kg", "graph construction");
  kg_cmd->require_subcommand(1);
  Common synth_opts;
  auto* synth = kg_cmd->add_subcommand("synth", "generate the configured synthetic graph");
  add_common(synth, synth_opts);
  Common build_opts;
  std::string triples, categories, schema;
  auto* build = kg_cmd->add_subcommand("build", "validate TSV files and write them in canonical form");
  add_common(build, build_opts);
  build->add_option("--triples", triples)->required();
  build->add_option("--categories", categories)->required();
  build->add_option("--schema", schema)->required();
  Common sur_opts;
  std::string sur_kg;
  double remove_fraction = 0.1;
  auto* sur = kg_cmd->add_subcommand("surrogate", "derive a fact-removed copy");
  add_common(sur, sur_opts);
  sur->add_option("--kg", sur_kg, "graph directory")->required();
  sur->add_option("--remove-fraction", remove_fraction);

  // query
  auto* query_cmd = app.add_subcommand("query", "query sampling");
  query_cmd->require_subcommand(1);
  Common sample_opts;
  std::string sample_kg, tmpl_name = "1x1", sample_mode = "train";
  std::size_t sample_count = 10;
  auto* sample = query_cmd->add_subcommand("sample", "sample answered queries of one template");
  add_common(sample, sample_opts);
  sample->add_option("--kg", sample_kg, "graph directory")->required();
  sample->add_option("--template", tmpl_name, "NxM shape, e.g. 2x1");
  sample->add_option("--count", sample_count);
  sample->add_option("--mode", sample_mode)->check(CLI::IsMember({"train", "test"}));

  // train / eval
  Common train_opts;
  std::string train_kg, train_queries;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd, train_opts);
  train_cmd->add_option("--kg", train_kg, "graph directory")->required();
  train_cmd->add_option("--queries", train_queries, "answered queries (JSON); the configured mix when omitted");
  Common eval_opts;
  std::string eval_kg, eval_model, eval_queries, eval_target;
  auto* eval_cmd = app.add_subcommand("eval", "rank queries and report metrics");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--kg", eval_kg, "graph directory")->required();
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--queries", eval_queries)->required();
  eval_cmd->add_option("--target-answer", eval_target, "score against this entity instead of the truth");

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "adversary side only");
  attack_cmd->require_subcommand(1);
  Common attack_opts;
  std::string attack_name;
  const std::pair<const char*, const char*> attacks[] = {
      {"kp", "poison the graph"}, {"qm", "optimize query baits"}, {"co", "alternate poison and baits"}};
  for (const auto& a : attacks) {
    const char* name = a.first;
    auto* sub = attack_cmd->add_subcommand(name, a.second);
    add_common(sub, attack_opts);
    sub->callback([&attack_name, name] { attack_name = name; });
  }

  // defend
  auto* defend_cmd = app.add_subcommand("defend", "countermeasures");
  defend_cmd->require_subcommand(1);
  Common filter_opts;
  std::string filter_kg, filter_model;
  double m_percent = 30.0;
  auto* filter = defend_cmd->add_subcommand("filter", "drop the least fitting facts");
  add_common(filter, filter_opts);
  filter->add_option("--kg", filter_kg, "graph directory")->required();
  filter->add_option("--model", filter_model)->required();
  filter->add_option("--m", m_percent, "percent of facts to drop");
  Common adv_opts;
  std::string adv_kg, adv_model, adv_queries;
  auto* adv = defend_cmd->add_subcommand("advtrain", "retrain with misguided twins");
  add_common(adv, adv_opts);
  adv->add_option("--kg", adv_kg, "graph directory")->required();
  adv->add_option("--model", adv_model)->required();
  adv->add_option("--queries", adv_queries, "training queries (JSON)")->required();

  // experiment / report
  auto* exp_cmd = app.add_subcommand("experiment", "end-to-end runs");
  exp_cmd->require_subcommand(1);
  Common run_opts;
  std::string run_format = "json";
  auto* run = exp_cmd->add_subcommand("run", "run the configured experiment");
  add_common(run, run_opts);
  run->add_option("--format", run_format)->check(CLI::IsMember({"json", "csv", "markdown", "md"}));
  auto* report_cmd = app.add_subcommand("report", "report utilities");
  report_cmd->require_subcommand(1);
  Common render_opts;
  std::string render_in, render_format = "markdown";
  auto* render = report_cmd->add_subcommand("render", "render a JSON report");
  add_common(render, render_opts);
  render->add_option("--in", render_in)->required();
  render->add_option("--format", render_format)->check(CLI::IsMember({"json", "csv", "markdown", "md"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const ExperimentConfig c = load_config(synth_opts);
      write_graph(load_or_generate(c), synth_opts.out);
    } else if (build->parsed()) {
      write_graph(load_kg(triples, categories, schema), build_opts.out);
    } else if (sur->parsed()) {
      const ExperimentConfig c = load_config(sur_opts);
      write_graph(derive_surrogate(read_graph(sur_kg), {remove_fraction, StageSeeds(c.seed).surrogate}), sur_opts.out);
    } else if (sample->parsed()) {
      const ExperimentConfig c = load_config(sample_opts);
      const KnowledgeGraph kg = read_graph(sample_kg);
      const auto set = sample_queries(kg, detail::template_from_name(tmpl_name), sample_count, c.seed,
                                      sample_mode == "test" ? SampleMode::kTest : SampleMode::kTrain);
      emit_json(sample_opts.out, answered_set_to_json(kg, set));
    } else if (train_cmd->parsed()) {
      const ExperimentConfig c = load_config(train_opts);
      const KnowledgeGraph kg = read_graph(train_kg);
      const auto set = train_queries.empty()
                           ? build_train_set(kg, detail::train_spec(c, c.seed))
                           : answered_set_from_json(kg, parse_json(read_file(train_queries), train_queries));
      const Model m = train_model(kg, set, c.victim_dim, c.victim_layers, c.train, c.seed);
      emit(train_opts.out, model_to_json(m).dump() + "\n");
    } else if (eval_cmd->parsed()) {
      const ExperimentConfig c = load_config(eval_opts);
      const KnowledgeGraph kg = read_graph(eval_kg);
      const Model m = load_model(eval_model);
      const auto set = answered_set_from_json(kg, parse_json(read_file(eval_queries), eval_queries));
      std::optional<EntityId> forced;
      if (!eval_target.empty()) forced = kg.entity_id(eval_target);
      emit_json(eval_opts.out, metrics_json(evaluate(m, kg, set, forced, c.threads), c));
    } else if (!attack_name.empty()) {
      const ExperimentConfig c = load_config(attack_opts);
      const Setup s = prepare_adversary(c);
      const AttackKind kind = attack_kind_from(attack_name);
      const AttackArtifacts a = run_adversary(adversary_view(s), c, kind, c.n_g, c.n_q);
      Json j{{"attack", attack_name}, {"seed", c.seed}, {"trigger", trigger_to_json(s.surrogate_kg, s.trigger)}};
      if (s.target_answer) j["target_answer"] = s.surrogate_kg.entity(*s.target_answer).name;
      if (kind == AttackKind::kCo)
        j["co"] = co_result_to_json(s.surrogate_kg, *a.co, co_config(c, c.n_g, c.n_q));
      else if (a.plan)
        j["poison"] = poison_plan_to_json(s.surrogate_kg, *a.plan, kp_config(c, c.n_g));
      if (!a.baits.empty()) {
        Json baits = Json::array();
        for (const auto& b : a.baits) baits.push_back(bait_to_json(s.surrogate_kg, b));
        j["baits"] = std::move(baits);
      }
      warn_depth_cap(a.baits);
      emit_json(attack_opts.out, j);
    } else if (filter->parsed()) {
      const KnowledgeGraph kg = read_graph(filter_kg);
      const FilterResult f = filter_low_fitness(kg, load_model(filter_model), m_percent);
      write_graph(f.kg, filter_opts.out);
      write_file(in_dir(filter_opts.out, "removed.json"), filter_result_to_json(kg, f, m_percent).dump(2) + "\n");
    } else if (adv->parsed()) {
      const ExperimentConfig c = load_config(adv_opts);
      const KnowledgeGraph kg = read_graph(adv_kg);
      const auto set = answered_set_from_json(kg, parse_json(read_file(adv_queries), adv_queries));
      DefenseConfig dc;
      dc.adv_attack = co_config(c, 0, c.adv_n_q);
      dc.adv_attack.qm.steps = c.adv_qm_steps;
      dc.seed = StageSeeds(c.seed).defense;
      TrainConfig tc = c.train;
      tc.seed = StageSeeds(c.seed).defense + 1;
      const AdvTrainResult r = adversarial_train(kg, load_model(adv_model), set, dc, tc);
      emit(adv_opts.out, model_to_json(r.model).dump() + "\n");
      std::cerr << adv_train_to_json(kg, r, set.size()).dump() << "\n";
    } else if (run->parsed()) {
      const ExperimentConfig c = load_config(run_opts);
      const Report r = run_experiment(c);
      warn_depth_cap(r.artifacts);
      emit(run_opts.out, render_report(r, run_format));
    } else if (render->parsed()) {
      const Report r = report_from_json(parse_json(read_file(render_in), render_in));
      emit(render_opts.out, render_report(r, render_format));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
