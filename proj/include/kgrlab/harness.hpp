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

// Experiment orchestration.
//
//   prepare()          victim graph, held-out split, surrogate, both models,
//                      trigger and target answer, query groups
//   run_adversary()    kp / qm / co against the surrogate side only
//   apply_attack()     poison + retrain the victim, attach baits
//   apply_defense()    filter or adversarial training on the victim side
//   run_experiment()   all of the above plus metric tables and scenarios

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "kgrlab/attack_co.hpp"
#include "kgrlab/attack_kp.hpp"
#include "kgrlab/attack_qm.hpp"
#include "kgrlab/defense.hpp"
#include "kgrlab/io.hpp"
#include "kgrlab/kg.hpp"
#include "kgrlab/metrics.hpp"
#include "kgrlab/model.hpp"
#include "kgrlab/query.hpp"
#include "kgrlab/train.hpp"

namespace kgrlab {

enum class AttackKind { kNone, kKp, kQm, kCo };
enum class DefenseKind { kNone, kFilter, kAdvTrain };

inline const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::kNone: return "none";
    case AttackKind::kKp: return "kp";
    case AttackKind::kQm: return "qm";
    case AttackKind::kCo: return "co";
  }
  return "?";
}

inline AttackKind attack_kind_from(const std::string& s) {
  if (s == "none") return AttackKind::kNone;
  if (s == "kp") return AttackKind::kKp;
  if (s == "qm") return AttackKind::kQm;
  if (s == "co") return AttackKind::kCo;
  throw Error(ErrorCode::kInvalidConfig, "attack " + s);
}

inline const char* to_string(DefenseKind k) {
  switch (k) {
    case DefenseKind::kNone: return "none";
    case DefenseKind::kFilter: return "filter";
    case DefenseKind::kAdvTrain: return "advtrain";
  }
  return "?";
}

inline DefenseKind defense_kind_from(const std::string& s) {
  if (s == "none") return DefenseKind::kNone;
  if (s == "filter") return DefenseKind::kFilter;
  if (s == "advtrain") return DefenseKind::kAdvTrain;
  throw Error(ErrorCode::kInvalidConfig, "defense " + s);
}

struct TriggerSpec {
  std::string anchor;
  std::vector<std::string> chain;
};

struct ExperimentConfig {
  std::string profile = "desk";
  std::uint64_t seed = 1;

  // Graph: files when triples is set, otherwise synthetic.
  std::string triples_path, categories_path, schema_path;
  SyntheticSpec synthetic{5, 100, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {0, 2}, {1, 3}, {2, 4}}, 0.0375, 0, 10, 0.9};

  double surrogate_remove_fraction = 0.1;
  std::size_t victim_dim = 64, victim_layers = 2;
  std::size_t surrogate_dim = 64, surrogate_layers = 2;
  TrainConfig train{0.001, 512, 10000, 4, 1.0, 0};

  std::vector<std::string> templates{"1x1", "1x2", "2x1", "2x2", "3x2", "3x1"};
  std::vector<std::size_t> train_counts{0, 300, 300, 200, 200, 200};  // 0 = every instantiation
  std::size_t test_per_template = 40;
  std::size_t q_star_eval_per_template = 20;
  std::size_t q_star_attack = 64;
  std::size_t q_non_attack = 64;

  std::optional<TriggerSpec> trigger;       // chosen from the surrogate when unset
  std::optional<std::string> target_answer;  // likewise
  std::size_t trigger_pool = 0;             // 0 = every qualifying pair

  AttackKind attack = AttackKind::kKp;
  AttackMode mode = AttackMode::kForcing;
  std::size_t n_g = 50;
  std::size_t n_q = 2;
  double lambda = 1.0;
  std::size_t kp_steps = 10000;
  std::size_t qm_steps = 10000;
  double attack_lr = 0.001;
  std::size_t depth_cap = 4;
  std::size_t co_rounds = 3;
  std::size_t finetune_steps = 1000;
  double co_tol = 1e-4;

  DefenseKind defense = DefenseKind::kNone;
  double m_percent = 30.0;
  std::size_t adv_qm_steps = 200;
  std::size_t adv_n_q = 2;

  std::vector<std::size_t> hit_ks{1, 5, 10};
  std::vector<std::size_t> ndcg_ks{5, 10};

  bool budget_sweep = false;
  std::vector<std::size_t> n_g_grid{0, 50, 100, 200};
  std::vector<std::size_t> n_q_grid{0, 1, 2, 3};
  std::vector<double> overlap_grid;  // surrogate remove fractions; empty = off
  std::vector<TriggerSpec> alt_triggers;
  double missing_entity_fraction = 0.0;

  std::size_t threads = 1;
  bool record_timing = false;
};

// Larger models and budgets, selected by profile "full".
inline void apply_full_profile(ExperimentConfig& c) {
  c.profile = "full";
  c.victim_dim = 300;
  c.victim_layers = 4;
  c.surrogate_dim = 200;
  c.surrogate_layers = 2;
  c.train.steps = 50000;
  c.n_g = 100;
}

namespace detail {

inline QueryTemplate template_from_name(const std::string& name) {
  const auto x = name.find('x');
  if (x == std::string::npos || x == 0 || x + 1 == name.size()) throw Error(ErrorCode::kInvalidConfig, "template " + name);
  try {
    return shape_template(std::stoul(name.substr(0, x)), std::stoul(name.substr(x + 1)));
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kInvalidConfig, "template " + name);
  }
}

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j[key].get<T>();
}

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, where + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw Error(ErrorCode::kInvalidConfig, "unknown key " + where + "." + item.key());
  }
}

inline Json trigger_spec_json(const TriggerSpec& t) { return {{"anchor", t.anchor}, {"chain", t.chain}}; }

inline TriggerSpec trigger_spec_from(const Json& j) {
  check_keys(j, {"anchor", "chain"}, "trigger");
  return {j.at("anchor").get<std::string>(), j.at("chain").get<std::vector<std::string>>()};
}

}  // namespace detail

inline Json config_to_json(const ExperimentConfig& c) {
  Json kg;
  if (!c.triples_path.empty()) {
    kg = {{"triples", c.triples_path}, {"categories", c.categories_path}, {"schema", c.schema_path}};
  } else {
    Json arcs = Json::array();
    for (auto [h, t] : c.synthetic.relation_arcs) arcs.push_back({h, t});
    kg = {{"synthetic",
           {{"categories", c.synthetic.n_categories},
            {"entities_per_category", c.synthetic.entities_per_category},
            {"arcs", std::move(arcs)},
            {"density", c.synthetic.fact_density},
            {"clusters", c.synthetic.clusters},
            {"affinity", c.synthetic.affinity}}}};
  }
  Json j{{"profile", c.profile},
         {"seed", c.seed},
         {"kg", std::move(kg)},
         {"surrogate", {{"remove_fraction", c.surrogate_remove_fraction}, {"dim", c.surrogate_dim}, {"layers", c.surrogate_layers}}},
         {"victim", {{"dim", c.victim_dim}, {"layers", c.victim_layers}}},
         {"train",
          {{"lr", c.train.learning_rate},
           {"batch", c.train.batch_size},
           {"steps", c.train.steps},
           {"negatives", c.train.negatives_per_positive},
           {"margin", c.train.margin}}},
         {"queries",
          {{"templates", c.templates},
           {"train_counts", c.train_counts},
           {"test_per_template", c.test_per_template},
           {"q_star_eval_per_template", c.q_star_eval_per_template},
           {"q_star_attack", c.q_star_attack},
           {"q_non_attack", c.q_non_attack}}}};
  if (c.trigger) j["trigger"] = detail::trigger_spec_json(*c.trigger);
  if (c.target_answer) j["target_answer"] = *c.target_answer;
  j["trigger_pool"] = c.trigger_pool;
  j["attack"] = {{"kind", to_string(c.attack)}, {"mode", to_string(c.mode)},  {"n_g", c.n_g},
                 {"n_q", c.n_q},                {"lambda", c.lambda},         {"kp_steps", c.kp_steps},
                 {"qm_steps", c.qm_steps},      {"lr", c.attack_lr},          {"depth_cap", c.depth_cap},
                 {"rounds", c.co_rounds},       {"finetune_steps", c.finetune_steps}, {"tol", c.co_tol}};
  j["defense"] = {{"kind", to_string(c.defense)},
                  {"m_percent", c.m_percent},
                  {"adv_qm_steps", c.adv_qm_steps},
                  {"adv_n_q", c.adv_n_q}};
  j["metrics"] = {{"hit_k", c.hit_ks}, {"ndcg_k", c.ndcg_ks}};
  Json alts = Json::array();
  for (const auto& t : c.alt_triggers) alts.push_back(detail::trigger_spec_json(t));
  j["scenarios"] = {{"budget_sweep", c.budget_sweep},
                    {"n_g_grid", c.n_g_grid},
                    {"n_q_grid", c.n_q_grid},
                    {"overlap_grid", c.overlap_grid},
                    {"alt_triggers", std::move(alts)},
                    {"missing_entity_fraction", c.missing_entity_fraction}};
  j["threads"] = c.threads;
  j["record_timing"] = c.record_timing;
  return j;
}

// Profile defaults first (KGRLAB_PROFILE, overridden by a "profile" key),
// then every key present in `j`. Unknown keys are rejected.
inline ExperimentConfig config_from_json(const Json& j) {
  using detail::check_keys;
  using detail::read_opt;
  ExperimentConfig c;
  std::string profile = "desk";
  if (const char* env = std::getenv("KGRLAB_PROFILE"); env && *env) profile = env;
  try {
    check_keys(j, {"profile", "seed", "kg", "surrogate", "victim", "train", "queries", "trigger", "target_answer",
                   "trigger_pool", "attack", "defense", "metrics", "scenarios", "threads", "record_timing"},
               "config");
    read_opt(j, "profile", profile);
    if (profile == "full") {
      apply_full_profile(c);
    } else if (profile != "desk") {
      throw Error(ErrorCode::kInvalidConfig, "profile " + profile);
    }
    read_opt(j, "seed", c.seed);
    if (j.contains("kg")) {
      const auto& kg = j["kg"];
      check_keys(kg, {"triples", "categories", "schema", "synthetic"}, "kg");
      if (kg.contains("triples")) {
        c.triples_path = kg.at("triples").get<std::string>();
        c.categories_path = kg.at("categories").get<std::string>();
        c.schema_path = kg.at("schema").get<std::string>();
      }
      if (kg.contains("synthetic")) {
        const auto& s = kg["synthetic"];
        check_keys(s, {"categories", "entities_per_category", "arcs", "density", "clusters", "affinity"}, "kg.synthetic");
        read_opt(s, "categories", c.synthetic.n_categories);
        read_opt(s, "entities_per_category", c.synthetic.entities_per_category);
        if (s.contains("arcs")) {
          c.synthetic.relation_arcs.clear();
          for (const auto& a : s["arcs"]) c.synthetic.relation_arcs.emplace_back(a.at(0).get<std::size_t>(), a.at(1).get<std::size_t>());
        }
        read_opt(s, "density", c.synthetic.fact_density);
        read_opt(s, "clusters", c.synthetic.clusters);
        read_opt(s, "affinity", c.synthetic.affinity);
      }
    }
    if (j.contains("surrogate")) {
      const auto& s = j["surrogate"];
      check_keys(s, {"remove_fraction", "dim", "layers"}, "surrogate");
      read_opt(s, "remove_fraction", c.surrogate_remove_fraction);
      read_opt(s, "dim", c.surrogate_dim);
      read_opt(s, "layers", c.surrogate_layers);
    }
    if (j.contains("victim")) {
      const auto& s = j["victim"];
      check_keys(s, {"dim", "layers"}, "victim");
      read_opt(s, "dim", c.victim_dim);
      read_opt(s, "layers", c.victim_layers);
    }
    if (j.contains("train")) {
      const auto& s = j["train"];
      check_keys(s, {"lr", "batch", "steps", "negatives", "margin"}, "train");
      read_opt(s, "lr", c.train.learning_rate);
      read_opt(s, "batch", c.train.batch_size);
      read_opt(s, "steps", c.train.steps);
      read_opt(s, "negatives", c.train.negatives_per_positive);
      read_opt(s, "margin", c.train.margin);
    }
    if (j.contains("queries")) {
      const auto& s = j["queries"];
      check_keys(s, {"templates", "train_counts", "test_per_template", "q_star_eval_per_template", "q_star_attack", "q_non_attack"},
                 "queries");
      read_opt(s, "templates", c.templates);
      read_opt(s, "train_counts", c.train_counts);
      read_opt(s, "test_per_template", c.test_per_template);
      read_opt(s, "q_star_eval_per_template", c.q_star_eval_per_template);
      read_opt(s, "q_star_attack", c.q_star_attack);
      read_opt(s, "q_non_attack", c.q_non_attack);
    }
    if (j.contains("trigger")) c.trigger = detail::trigger_spec_from(j["trigger"]);
    if (j.contains("target_answer")) c.target_answer = j["target_answer"].get<std::string>();
    read_opt(j, "trigger_pool", c.trigger_pool);
    if (j.contains("attack")) {
      const auto& s = j["attack"];
      check_keys(s, {"kind", "mode", "n_g", "n_q", "lambda", "kp_steps", "qm_steps", "lr", "depth_cap", "rounds",
                     "finetune_steps", "tol"},
                 "attack");
      if (s.contains("kind")) c.attack = attack_kind_from(s["kind"].get<std::string>());
      if (s.contains("mode")) c.mode = attack_mode_from(s["mode"].get<std::string>());
      read_opt(s, "n_g", c.n_g);
      read_opt(s, "n_q", c.n_q);
      read_opt(s, "lambda", c.lambda);
      read_opt(s, "kp_steps", c.kp_steps);
      read_opt(s, "qm_steps", c.qm_steps);
      read_opt(s, "lr", c.attack_lr);
      read_opt(s, "depth_cap", c.depth_cap);
      read_opt(s, "rounds", c.co_rounds);
      read_opt(s, "finetune_steps", c.finetune_steps);
      read_opt(s, "tol", c.co_tol);
    }
    if (j.contains("defense")) {
      const auto& s = j["defense"];
      check_keys(s, {"kind", "m_percent", "adv_qm_steps", "adv_n_q"}, "defense");
      if (s.contains("kind")) c.defense = defense_kind_from(s["kind"].get<std::string>());
      read_opt(s, "m_percent", c.m_percent);
      read_opt(s, "adv_qm_steps", c.adv_qm_steps);
      read_opt(s, "adv_n_q", c.adv_n_q);
    }
    if (j.contains("metrics")) {
      const auto& s = j["metrics"];
      check_keys(s, {"hit_k", "ndcg_k"}, "metrics");
      read_opt(s, "hit_k", c.hit_ks);
      read_opt(s, "ndcg_k", c.ndcg_ks);
    }
    if (j.contains("scenarios")) {
      const auto& s = j["scenarios"];
      check_keys(s, {"budget_sweep", "n_g_grid", "n_q_grid", "overlap_grid", "alt_triggers", "missing_entity_fraction"},
                 "scenarios");
      read_opt(s, "budget_sweep", c.budget_sweep);
      read_opt(s, "n_g_grid", c.n_g_grid);
      read_opt(s, "n_q_grid", c.n_q_grid);
      read_opt(s, "overlap_grid", c.overlap_grid);
      if (s.contains("alt_triggers"))
        for (const auto& t : s["alt_triggers"]) c.alt_triggers.push_back(detail::trigger_spec_from(t));
      read_opt(s, "missing_entity_fraction", c.missing_entity_fraction);
    }
    read_opt(j, "threads", c.threads);
    read_opt(j, "record_timing", c.record_timing);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, e.what());
  }
  c.profile = profile;
  if (c.train_counts.size() != c.templates.size())
    throw Error(ErrorCode::kInvalidConfig, "queries.train_counts needs one entry per template");
  for (const auto& t : c.templates) detail::template_from_name(t);
  if (!(c.missing_entity_fraction >= 0.0 && c.missing_entity_fraction <= 1.0))
    throw Error(ErrorCode::kInvalidConfig, "missing_entity_fraction outside [0,1]");
  if (c.threads == 0) c.threads = 1;
  return c;
}

inline ExperimentConfig default_config() { return config_from_json(Json::object()); }

// FNV-1a over the canonical config dump.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : config_to_json(c).dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written to per-index slots, which keeps the output order fixed.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Per-stage seeds derived from the master seed.
struct StageSeeds {
  std::uint64_t graph, surrogate, split, victim, surrogate_model, selection, attack, defense, missing;

  explicit StageSeeds(std::uint64_t s)
      : graph(s), surrogate(s + 1), split(s + 2), victim(s + 3), surrogate_model(s + 4), selection(s + 5),
        attack(s + 6), defense(s + 7), missing(s + 8) {}
};

struct Setup {
  KnowledgeGraph victim_kg;        // complete victim graph
  KnowledgeGraph victim_train_kg;  // minus the facts supporting test queries
  KnowledgeGraph surrogate_kg;
  Model victim;
  Model surrogate;
  std::vector<AnsweredQuery> victim_train_set;
  TriggerPattern trigger;
  std::optional<EntityId> target_answer;
  CategoryId target_category{};
  std::vector<AnsweredQuery> q_star_eval;  // victim side, contain the trigger
  std::vector<AnsweredQuery> benign_eval;  // victim side, trigger-free
  std::vector<AnsweredQuery> q_star_attack;  // surrogate side
  std::vector<AnsweredQuery> q_non_attack;   // surrogate side
  std::size_t missing_entity_queries = 0;
  std::size_t victim_train_steps = 0;
  std::size_t surrogate_train_steps = 0;
};

namespace detail {

inline std::vector<QueryTemplate> templates_of(const ExperimentConfig& c) {
  std::vector<QueryTemplate> out;
  for (const auto& n : c.templates) out.push_back(template_from_name(n));
  return out;
}

inline TrainSetSpec train_spec(const ExperimentConfig& c, std::uint64_t seed) {
  TrainSetSpec spec{templates_of(c), {}, seed};
  for (std::size_t n : c.train_counts) spec.counts.push_back(n == 0 ? std::numeric_limits<std::size_t>::max() : n);
  return spec;
}

// With `fill`, a template with fewer distinct instances than the quota is
// topped up by drawing its instances again with replacement, so every
// satisfiable template carries the same weight.
inline std::vector<AnsweredQuery> sample_group(const KnowledgeGraph& kg, const std::vector<QueryTemplate>& templates,
                                               std::size_t per_template, std::uint64_t seed, SampleMode mode,
                                               const std::function<bool(const Query&)>& accept, bool fill = false) {
  std::vector<AnsweredQuery> out;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    try {
      const std::uint64_t s = seed + 1000 * (i + 1);
      auto part = sample_queries(kg, templates[i], per_template, s, mode, accept);
      if (fill && !part.empty()) {
        std::mt19937_64 rng(s + 1);
        const std::size_t distinct = part.size();
        std::uniform_int_distribution<std::size_t> pick(0, distinct - 1);
        while (part.size() < per_template) part.push_back(part[pick(rng)]);
      }
      for (auto& aq : part) out.push_back(std::move(aq));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnsatisfiable) throw;
    }
  }
  return out;
}

inline Query chain_query(const KnowledgeGraph& kg, const TriggerPattern& t) {
  std::vector<QueryNode> nodes{{NodeKind::kAnchor, t.anchor, std::nullopt}};
  std::vector<QueryEdge> edges;
  for (std::size_t k = 0; k < t.chain.size(); ++k) {
    nodes.push_back({k + 1 == t.chain.size() ? NodeKind::kTarget : NodeKind::kVariable, std::nullopt, std::nullopt});
    edges.push_back({k, t.chain[k], k + 1});
  }
  return build_query(kg, std::move(nodes), std::move(edges));
}

// Adversary-side choice: among (anchor, relation) pairs with at least two
// successors in the surrogate, one is drawn with `seed`. A nonzero `pool`
// first keeps only the `pool` best connected by the total in-degree of those
// successors.
inline TriggerPattern choose_trigger(const KnowledgeGraph& sur, std::size_t pool, std::uint64_t seed) {
  struct Cand {
    std::size_t score;
    EntityId e;
    RelationId r;
  };
  std::vector<Cand> cands;
  for (std::size_t e = 0; e < sur.num_entities(); ++e) {
    for (std::size_t r = 0; r < sur.num_relations(); ++r) {
      const auto succ = sur.successors(static_cast<EntityId>(e), static_cast<RelationId>(r));
      if (succ.size() < 2) continue;
      std::size_t score = 0;
      for (EntityId t : succ) score += sur.in_facts(t).size();
      cands.push_back({score, static_cast<EntityId>(e), static_cast<RelationId>(r)});
    }
  }
  if (cands.empty()) throw Error(ErrorCode::kInvalidConfig, "no entity qualifies as a trigger anchor");
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return a.score != b.score ? a.score > b.score : std::tie(a.e, a.r) < std::tie(b.e, b.r);
  });
  if (pool > 0) cands.resize(std::min(pool, cands.size()));
  std::mt19937_64 rng(seed);
  const Cand& c = cands[std::uniform_int_distribution<std::size_t>(0, cands.size() - 1)(rng)];
  return make_trigger(sur, c.e, {c.r});
}

// Adversary-side choice: a non-answer from the far half of the surrogate's
// ranking for the bare trigger query, outside the perturbable set, the tail
// of at least one fact along the trigger's last relation, and outside the top
// tenth of the surrogate's ranking for every query in `q_star` (dropped when
// nothing qualifies).
inline EntityId choose_target_answer(const KnowledgeGraph& sur, const Model& model, const TriggerPattern& t,
                                     std::span<const AnsweredQuery> q_star, std::uint64_t seed) {
  const Query q = chain_query(sur, t);
  const auto truth = exact_answers(sur, q);
  const auto pert = select_perturbable(sur, t);
  const Ranking r = rank_entities(model, sur, embed_query(model, q), q.target_category());
  std::vector<EntityId> pool;
  for (std::size_t i = r.entries.size() / 2; i < r.entries.size(); ++i) {
    const EntityId e = r.entries[i].first;
    if (std::binary_search(pert.begin(), pert.end(), e) || std::binary_search(truth.begin(), truth.end(), e)) continue;
    const auto in = sur.in_facts(e);
    if (std::none_of(in.begin(), in.end(), [&](const Fact& f) { return f.relation == t.chain.back(); })) continue;
    pool.push_back(e);
  }
  if (pool.empty()) throw Error(ErrorCode::kMissingTargetAnswer, "no eligible target answer");
  std::sort(pool.begin(), pool.end());
  std::set<EntityId> near;
  const std::size_t top = std::max<std::size_t>(r.entries.size() / 10, 1);
  for (const auto& aq : q_star) {
    const Ranking qr = rank_entities(model, sur, embed_query(model, aq.query), q.target_category());
    for (std::size_t i = 0; i < std::min(top, qr.entries.size()); ++i) near.insert(qr.entries[i].first);
  }
  std::vector<EntityId> far;
  for (EntityId e : pool)
    if (!near.contains(e)) far.push_back(e);
  if (!far.empty()) pool = std::move(far);
  std::mt19937_64 rng(seed);
  return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
}

// Entities a variable node can take in some binding of the sub-query that
// ends at it.
inline std::vector<EntityId> node_bindings(const KnowledgeGraph& kg, const Query& q, std::size_t node) {
  std::vector<char> keep(q.nodes().size(), 0);
  keep[node] = 1;
  for (std::size_t i = q.nodes().size(); i-- > 0;)
    for (const auto& e : q.edges())
      if (keep[e.to] && e.from == i) keep[i] = 1;
  std::vector<std::size_t> remap(q.nodes().size());
  std::vector<QueryNode> nodes;
  for (std::size_t i = 0; i < q.nodes().size(); ++i) {
    if (!keep[i]) continue;
    remap[i] = nodes.size();
    QueryNode n = q.nodes()[i];
    if (i == node) n.kind = NodeKind::kTarget;
    nodes.push_back(n);
  }
  std::vector<QueryEdge> edges;
  for (const auto& e : q.edges())
    if (keep[e.from] && keep[e.to]) edges.push_back({remap[e.from], e.relation, remap[e.to]});
  return exact_answers(kg, build_query(kg, std::move(nodes), std::move(edges)));
}

}  // namespace detail

// Picks a seeded fraction of multi-hop queries and, for each, deletes every
// fact of the smallest entity bound to its first variable. Returns the
// affected queries' count.
inline std::size_t drop_intermediate_entities(KnowledgeGraph& train_kg, const KnowledgeGraph& full,
                                              std::span<const AnsweredQuery> queries, double fraction,
                                              std::uint64_t seed) {
  if (fraction <= 0.0) return 0;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution pick(fraction);
  std::set<EntityId> dropped;
  std::size_t count = 0;
  for (const auto& aq : queries) {
    std::optional<std::size_t> var;
    for (std::size_t i = 0; i < aq.query.nodes().size(); ++i)
      if (aq.query.nodes()[i].kind == NodeKind::kVariable) {
        var = i;
        break;
      }
    if (!var) continue;
    if (!pick(rng)) continue;
    const auto bound = detail::node_bindings(full, aq.query, *var);
    if (bound.empty()) continue;
    dropped.insert(bound.front());
    ++count;
  }
  std::vector<Fact> facts;
  for (EntityId e : dropped) {
    for (const Fact& f : train_kg.out_facts(e)) facts.push_back(f);
    for (const Fact& f : train_kg.in_facts(e)) facts.push_back(f);
  }
  train_kg = remove_facts(train_kg, facts);
  return count;
}

inline KnowledgeGraph load_or_generate(const ExperimentConfig& c) {
  if (!c.triples_path.empty()) return load_kg(c.triples_path, c.categories_path, c.schema_path);
  SyntheticSpec spec = c.synthetic;
  spec.seed = StageSeeds(c.seed).graph;
  return generate_synthetic_kg(spec);
}

inline Model train_model(const KnowledgeGraph& kg, std::span<const AnsweredQuery> set, std::size_t dim,
                         std::size_t layers, const TrainConfig& base, std::uint64_t seed) {
  TrainConfig tc = base;
  tc.seed = seed;
  return train(init_model(kg, dim, layers, seed), kg, set, tc).model;
}

inline void resolve_trigger(Setup& s, const ExperimentConfig& c, const StageSeeds& seeds) {
  if (c.trigger) {
    std::vector<RelationId> chain;
    for (const auto& r : c.trigger->chain) chain.push_back(s.victim_kg.relation_id(r));
    s.trigger = make_trigger(s.victim_kg, s.victim_kg.entity_id(c.trigger->anchor), std::move(chain));
  } else {
    s.trigger = detail::choose_trigger(s.surrogate_kg, c.trigger_pool, seeds.selection);
  }
  s.target_category = s.victim_kg.relation(s.trigger.chain.back()).tail_category;
}

// Needs the trigger and the attack groups.
inline void resolve_target_answer(Setup& s, const ExperimentConfig& c, const StageSeeds& seeds) {
  s.target_answer.reset();
  if (c.mode == AttackMode::kForcing) {
    s.target_answer = c.target_answer ? s.victim_kg.entity_id(*c.target_answer)
                                      : detail::choose_target_answer(s.surrogate_kg, s.surrogate, s.trigger,
                                                                     s.q_star_attack, seeds.selection + 1);
    if (s.victim_kg.category_of(*s.target_answer) != s.target_category)
      throw Error(ErrorCode::kIncompatibleTarget, "target answer category differs from the trigger's");
  }
}

// Samples the four query groups for the current trigger.
inline void sample_groups(Setup& s, const ExperimentConfig& c, const StageSeeds& seeds) {
  const auto templates = detail::templates_of(c);
  const TriggerPattern trig = s.trigger;
  const CategoryId cat = s.target_category;
  auto is_star = [trig, cat](const Query& q) { return q.target_category() == cat && contains_trigger(q, trig); };
  auto not_star = [trig](const Query& q) { return !contains_trigger(q, trig); };
  s.q_star_eval = detail::sample_group(s.victim_kg, templates, c.q_star_eval_per_template, seeds.split, SampleMode::kTest, is_star);
  s.benign_eval = detail::sample_group(s.victim_kg, templates, c.test_per_template, seeds.split + 1, SampleMode::kTest, not_star);
  const std::size_t t = std::max<std::size_t>(templates.size(), 1);
  s.q_star_attack = detail::sample_group(s.surrogate_kg, templates, (c.q_star_attack + t - 1) / t, seeds.split + 2,
                                         SampleMode::kTrain, is_star, true);
  s.q_non_attack = detail::sample_group(s.surrogate_kg, templates, (c.q_non_attack + t - 1) / t, seeds.split + 3,
                                        SampleMode::kTrain, not_star, true);
  if (s.q_star_attack.size() > c.q_star_attack) s.q_star_attack.resize(c.q_star_attack);
  if (s.q_non_attack.size() > c.q_non_attack) s.q_non_attack.resize(c.q_non_attack);
}

// Surrogate side first (trigger and target answer are picked by the
// adversary), then the victim's held-out split and model.
// Everything up to, but not including, the victim's split and model.
inline Setup prepare_adversary(const ExperimentConfig& c) {
  const StageSeeds seeds(c.seed);
  Setup s;
  s.victim_kg = load_or_generate(c);
  s.surrogate_kg = derive_surrogate(s.victim_kg, {c.surrogate_remove_fraction, seeds.surrogate});
  const auto sur_set = build_train_set(s.surrogate_kg, detail::train_spec(c, seeds.surrogate_model));
  s.surrogate = train_model(s.surrogate_kg, sur_set, c.surrogate_dim, c.surrogate_layers, c.train, seeds.surrogate_model);
  s.surrogate_train_steps = c.train.steps;

  resolve_trigger(s, c, seeds);
  sample_groups(s, c, seeds);
  resolve_target_answer(s, c, seeds);
  return s;
}

inline void prepare_victim(Setup& s, const ExperimentConfig& c) {
  const StageSeeds seeds(c.seed);
  std::vector<Fact> held_out;
  for (const auto* group : {&s.q_star_eval, &s.benign_eval})
    for (const auto& aq : *group) held_out.insert(held_out.end(), aq.supporting.begin(), aq.supporting.end());
  s.victim_train_kg = remove_facts(s.victim_kg, held_out);
  s.missing_entity_queries =
      drop_intermediate_entities(s.victim_train_kg, s.victim_kg, s.benign_eval, c.missing_entity_fraction, seeds.missing);
  s.victim_train_set = build_train_set(s.victim_train_kg, detail::train_spec(c, seeds.victim));
  s.victim = train_model(s.victim_train_kg, s.victim_train_set, c.victim_dim, c.victim_layers, c.train, seeds.victim);
  s.victim_train_steps = c.train.steps;
}

inline Setup prepare(const ExperimentConfig& c) {
  Setup s = prepare_adversary(c);
  prepare_victim(s, c);
  return s;
}

// ---- adversary ------------------------------------------------------------

// Everything an attack may see: the surrogate graph and model, its own
// query groups, and the victim queries it intercepts. No victim handles.
struct AdversaryView {
  const KnowledgeGraph& kg;
  const Model& model;
  const TriggerPattern& trigger;
  std::optional<EntityId> target_answer;
  std::span<const AnsweredQuery> q_star;
  std::span<const AnsweredQuery> q_non;
  std::span<const AnsweredQuery> intercepted;  // queries to misguide (truth unused)
};

inline AdversaryView adversary_view(const Setup& s) {
  return {s.surrogate_kg, s.surrogate, s.trigger, s.target_answer, s.q_star_attack, s.q_non_attack, s.q_star_eval};
}

struct AttackArtifacts {
  AttackKind kind = AttackKind::kNone;
  std::optional<PoisonPlan> plan;
  std::optional<CoResult> co;
  std::vector<QmResult> baits;  // one per intercepted query when qm is involved
  std::size_t n_g = 0;
  std::size_t n_q = 0;
};

inline KpConfig kp_config(const ExperimentConfig& c, std::size_t n_g) {
  KpConfig k;
  k.n_g = n_g;
  k.lambda = c.lambda;
  k.mode = c.mode;
  k.steps = c.kp_steps;
  k.lr = c.attack_lr;
  k.seed = StageSeeds(c.seed).attack;
  return k;
}

inline QmConfig qm_config(const ExperimentConfig& c, std::size_t n_q) {
  QmConfig q;
  q.n_q = n_q;
  q.mode = c.mode;
  q.steps = c.qm_steps;
  q.lr = c.attack_lr;
  q.seed = StageSeeds(c.seed).attack;
  q.depth_cap = c.depth_cap;
  return q;
}

inline CoConfig co_config(const ExperimentConfig& c, std::size_t n_g, std::size_t n_q) {
  CoConfig co;
  co.rounds = c.co_rounds;
  co.kp = kp_config(c, n_g);
  co.qm = qm_config(c, n_q);
  co.finetune_steps = c.finetune_steps;
  co.finetune = c.train;
  co.finetune.seed = StageSeeds(c.seed).attack + 1;
  co.refresh_queries = detail::train_spec(c, StageSeeds(c.seed).attack + 2);
  co.convergence_tol = c.co_tol;
  return co;
}

// Baits for the intercepted queries. Degradation aims away from the
// answers the surrogate graph gives; a query with none stays unbaited.
inline std::vector<QmResult> bait_intercepted(const AdversaryView& v, const Model& model, const KnowledgeGraph& kg,
                                              const QmConfig& qm, std::size_t threads) {
  std::vector<QmResult> out(v.intercepted.size());
  parallel_for(v.intercepted.size(), threads, [&](std::size_t i) {
    const Query& q = v.intercepted[i].query;
    QmConfig c = qm;
    c.seed = qm.seed + i;
    if (qm.mode == AttackMode::kForcing) {
      out[i] = run_qm(model, kg, q, *v.target_answer, c);
    } else {
      auto truth = exact_answers(kg, q);
      if (truth.empty()) {
        out[i].infected = q;
        out[i].bait.no_expansion = true;
      } else {
        out[i] = run_qm(model, kg, q, truth, c);
      }
    }
  });
  return out;
}

inline AttackArtifacts run_adversary(const AdversaryView& v, const ExperimentConfig& c, AttackKind kind,
                                     std::size_t n_g, std::size_t n_q) {
  AttackArtifacts a;
  a.kind = kind;
  a.n_g = n_g;
  a.n_q = n_q;
  switch (kind) {
    case AttackKind::kNone: break;
    case AttackKind::kKp:
      a.plan = run_kp(v.kg, v.model, v.trigger, v.target_answer, v.q_star, v.q_non, kp_config(c, n_g));
      break;
    case AttackKind::kQm:
      a.baits = bait_intercepted(v, v.model, v.kg, qm_config(c, n_q), c.threads);
      break;
    case AttackKind::kCo: {
      a.co = co_optimize(v.kg, v.model, v.trigger, v.target_answer, v.q_star, v.q_non, co_config(c, n_g, n_q));
      a.plan = a.co->plan;
      const KnowledgeGraph poisoned = add_facts(v.kg, a.plan->fact_list());
      a.baits = bait_intercepted(v, a.co->refreshed, poisoned, qm_config(c, n_q), c.threads);
      break;
    }
  }
  return a;
}

// ---- victim side ------------------------------------------------------------

struct VictimState {
  KnowledgeGraph train_kg;
  std::vector<AnsweredQuery> train_set;
  Model model;
  std::vector<AnsweredQuery> q_star;  // possibly infected
  bool retrained = false;
  Model deployed;  // in service before the current training graph arrived
};

inline VictimState clean_victim(const Setup& s) {
  return {s.victim_train_kg, s.victim_train_set, s.victim, s.q_star_eval, false, s.victim};
}

// Poison (if any) goes into the victim's training graph and the victim is
// retrained from scratch with its own seed; baits replace the target queries.
inline VictimState apply_attack(const Setup& s, const ExperimentConfig& c, const AttackArtifacts& a) {
  VictimState v = clean_victim(s);
  if (a.plan && !a.plan->facts.empty()) {
    v.train_kg = add_facts(s.victim_train_kg, a.plan->fact_list());
    const auto seed = StageSeeds(c.seed).victim;
    v.train_set = build_train_set(v.train_kg, detail::train_spec(c, seed));
    v.model = train_model(v.train_kg, v.train_set, c.victim_dim, c.victim_layers, c.train, seed);
    v.retrained = true;
  }
  if (!a.baits.empty())
    for (std::size_t i = 0; i < v.q_star.size(); ++i) v.q_star[i].query = a.baits[i].infected;
  return v;
}

struct DefenseOutcome {
  DefenseKind kind = DefenseKind::kNone;
  VictimState state;
  std::optional<FilterResult> filter;
  std::optional<AdvTrainResult> adv;
};

inline DefenseOutcome apply_defense(const VictimState& attacked, const ExperimentConfig& c, DefenseKind kind) {
  DefenseOutcome d;
  d.kind = kind;
  d.state = attacked;
  const auto seeds = StageSeeds(c.seed);
  if (kind == DefenseKind::kFilter) {
    // Filter, then train: facts are vetted by the model already in service.
    d.filter = filter_low_fitness(attacked.train_kg, attacked.deployed, c.m_percent);
    d.state.train_kg = d.filter->kg;
    d.state.train_set = build_train_set(d.state.train_kg, detail::train_spec(c, seeds.victim));
    d.state.model = train_model(d.state.train_kg, d.state.train_set, c.victim_dim, c.victim_layers, c.train, seeds.victim);
    d.state.retrained = true;
  } else if (kind == DefenseKind::kAdvTrain) {
    DefenseConfig dc;
    dc.m_percent = c.m_percent;
    dc.adv_attack = co_config(c, 0, c.adv_n_q);
    dc.adv_attack.qm.steps = c.adv_qm_steps;
    dc.seed = seeds.defense;
    TrainConfig tc = c.train;
    tc.seed = seeds.defense + 1;
    d.adv = adversarial_train(attacked.train_kg, attacked.model, attacked.train_set, dc, tc);
    d.state.model = d.adv->model;
    d.state.retrained = true;
  }
  return d;
}

// ---- evaluation -------------------------------------------------------------

inline constexpr const char* kGroupStar = "Q*";
inline constexpr const char* kGroupBenign = "Q\\Q*";

inline EvalResult evaluate(const Model& model, const KnowledgeGraph& kg, std::span<const AnsweredQuery> queries,
                           std::optional<EntityId> forced_truth, std::size_t threads = 1) {
  EvalResult r;
  r.rankings.resize(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    const auto& aq = queries[i];
    Ranking rank = rank_entities(model, kg, embed_query(model, aq.query), aq.query.target_category());
    rank.truth = forced_truth ? std::vector<EntityId>{*forced_truth} : aq.truth;
    r.rankings[i] = std::move(rank);
  });
  return r;
}

// Q* is scored against a* in Forcing mode and against its true answers
// otherwise; Q\Q* always against its true answers.
inline std::vector<MetricValue> measure(const Setup& s, const VictimState& v, const ExperimentConfig& c) {
  std::vector<MetricValue> out;
  if (!v.q_star.empty()) {
    const auto star = evaluate(v.model, s.victim_kg, v.q_star,
                               c.mode == AttackMode::kForcing ? s.target_answer : std::nullopt, c.threads);
    auto m = summarize(star, kGroupStar, c.hit_ks, c.ndcg_ks);
    out.insert(out.end(), m.begin(), m.end());
  }
  if (!s.benign_eval.empty()) {
    const auto benign = evaluate(v.model, s.victim_kg, s.benign_eval, std::nullopt, c.threads);
    auto m = summarize(benign, kGroupBenign, c.hit_ks, c.ndcg_ks);
    out.insert(out.end(), m.begin(), m.end());
  }
  return out;
}

inline double metric_value(const std::vector<MetricValue>& values, const std::string& metric, std::size_t k,
                           const std::string& group) {
  for (const auto& v : values)
    if (v.metric == metric && v.k == k && v.group == group) return v.value;
  throw Error(ErrorCode::kMismatchedSets, metric + "@" + std::to_string(k) + "/" + group);
}

// ---- report -------------------------------------------------------------------

struct Report {
  Json config;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string attack, mode, defense;
  Json setup;      // graph sizes, trigger, target answer, group sizes
  std::vector<MetricValue> before, after, defended;
  std::vector<DeltaRow> deltas;  // after vs before
  Json artifacts;  // poison facts, bait summary, co rounds, defense
  Json scenarios;  // sweeps
  Json runtime;    // step counts; wall clock only when requested

  friend bool operator==(const Report&, const Report&) = default;
};

inline Json metric_values_json(const std::vector<MetricValue>& values) {
  Json out = Json::array();
  for (const auto& v : values) out.push_back({{"metric", v.metric}, {"k", v.k}, {"group", v.group}, {"value", v.value}});
  return out;
}

inline std::vector<MetricValue> metric_values_from(const Json& j) {
  std::vector<MetricValue> out;
  for (const auto& v : j)
    out.push_back({v.at("metric").get<std::string>(), v.at("k").get<std::size_t>(), v.at("group").get<std::string>(),
                   v.at("value").get<double>()});
  return out;
}

inline Json report_to_json(const Report& r) {
  Json deltas = Json::array();
  for (const auto& d : r.deltas)
    deltas.push_back({{"metric", d.metric}, {"k", d.k}, {"group", d.group}, {"before", d.before}, {"after", d.after}, {"delta", d.delta}});
  return {{"config", r.config},
          {"config_hash", r.config_hash},
          {"seed", r.seed},
          {"attack", r.attack},
          {"mode", r.mode},
          {"defense", r.defense},
          {"setup", r.setup},
          {"metrics", {{"before", metric_values_json(r.before)}, {"after", metric_values_json(r.after)}, {"defended", metric_values_json(r.defended)}}},
          {"deltas", std::move(deltas)},
          {"artifacts", r.artifacts},
          {"scenarios", r.scenarios},
          {"runtime", r.runtime}};
}

inline Report report_from_json(const Json& j) {
  try {
    Report r;
    r.config = j.at("config");
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.attack = j.at("attack").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.defense = j.at("defense").get<std::string>();
    r.setup = j.at("setup");
    r.before = metric_values_from(j.at("metrics").at("before"));
    r.after = metric_values_from(j.at("metrics").at("after"));
    r.defended = metric_values_from(j.at("metrics").at("defended"));
    for (const auto& d : j.at("deltas"))
      r.deltas.push_back({d.at("metric").get<std::string>(), d.at("k").get<std::size_t>(), d.at("group").get<std::string>(),
                          d.at("before").get<double>(), d.at("after").get<double>(), d.at("delta").get<double>()});
    r.artifacts = j.at("artifacts");
    r.scenarios = j.at("scenarios");
    r.runtime = j.at("runtime");
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("report: ") + e.what());
  }
}

inline std::string metric_label(const std::string& metric, std::size_t k) {
  if (metric == "mrr") return "MRR";
  if (metric == "hit") return "HIT@" + std::to_string(k);
  if (metric == "ndcg") return "NDCG@" + std::to_string(k);
  return metric + "@" + std::to_string(k);
}

// One row per (metric, group, phase).
inline std::string report_csv(const Report& r) {
  std::string out = "metric,k,group,phase,value\n";
  char buf[256];
  const std::pair<const char*, const std::vector<MetricValue>*> phases[] = {
      {"before", &r.before}, {"after", &r.after}, {"defended", &r.defended}};
  for (const auto& [phase, values] : phases)
    for (const auto& v : *values) {
      std::snprintf(buf, sizeof buf, "%s,%zu,%s,%s,%.6f\n", v.metric.c_str(), v.k, v.group.c_str(), phase, v.value);
      out += buf;
    }
  return out;
}

inline std::string report_markdown(const Report& r) {
  std::string out = "# Experiment " + r.config_hash + "\n\n";
  out += "attack `" + r.attack + "`, mode `" + r.mode + "`, defense `" + r.defense + "`, seed " + std::to_string(r.seed) + "\n\n";
  const bool defended = !r.defended.empty();
  out += defended ? "| metric | group | before | after | defended |\n|---|---|---|---|---|\n"
                  : "| metric | group | before | after |\n|---|---|---|---|\n";
  for (const auto& d : r.deltas) {
    out += "| " + metric_label(d.metric, d.k) + " | " + d.group + " | " + format_metric(d.before) + " | " +
           format_cell(d.after, d.delta) + " |";
    if (defended) {
      const double v = metric_value(r.defended, d.metric, d.k, d.group);
      out += " " + format_cell(v, v - d.after) + " |";
    }
    out += "\n";
  }
  if (r.scenarios.contains("budget_sweep")) {
    out += "\n| attack | n_g | n_q | HIT@5 Q* |\n|---|---|---|---|\n";
    for (const auto& p : r.scenarios["budget_sweep"])
      out += "| " + p["attack"].get<std::string>() + " | " + std::to_string(p["n_g"].get<std::size_t>()) + " | " +
             std::to_string(p["n_q"].get<std::size_t>()) + " | " + format_metric(p["hit5_q_star"].get<double>()) + " |\n";
  }
  return out;
}

inline std::string render_report(const Report& r, const std::string& format) {
  if (format == "json") return report_to_json(r).dump(2) + "\n";
  if (format == "csv") return report_csv(r);
  if (format == "markdown" || format == "md") return report_markdown(r);
  throw Error(ErrorCode::kInvalidConfig, "report format " + format);
}

inline void emit_report(const Report& r, const std::string& format, const std::string& path) {
  write_file(path, render_report(r, format));
}

namespace detail {

inline Json artifacts_json(const KnowledgeGraph& kg, const AttackArtifacts& a, const ExperimentConfig& c) {
  Json j = Json::object();
  if (a.plan) j["poison"] = poison_plan_to_json(kg, *a.plan, kp_config(c, a.n_g));
  if (a.co) {
    Json rounds = Json::array();
    for (const auto& r : a.co->rounds) rounds.push_back({{"objective", r.objective}, {"poison_facts", r.poison_facts}});
    j["co"] = {{"rounds", std::move(rounds)}, {"objective", a.co->objective}, {"best_round", a.co->best_round}};
  }
  if (!a.baits.empty()) {
    std::size_t attached = 0, paths = 0, cap_hits = 0;
    for (const auto& b : a.baits) {
      attached += !b.bait.empty();
      paths += b.bait.paths.size();
      cap_hits += b.bait.depth_cap_hit;
    }
    j["baits"] = {{"queries", a.baits.size()}, {"attached", attached}, {"paths", paths}, {"depth_cap_hits", cap_hits}};
  }
  return j;
}

inline double hit5_star(const Setup& s, const VictimState& v, const ExperimentConfig& c) {
  if (v.q_star.empty()) return 0.0;
  const auto r = evaluate(v.model, s.victim_kg, v.q_star, c.mode == AttackMode::kForcing ? s.target_answer : std::nullopt,
                          c.threads);
  return hit_at_k(r, 5);
}

}  // namespace detail

inline Json setup_json(const Setup& s) {
  Json j{{"entities", s.victim_kg.num_entities()},
         {"relations", s.victim_kg.num_relations()},
         {"victim_facts", s.victim_kg.num_facts()},
         {"victim_train_facts", s.victim_train_kg.num_facts()},
         {"surrogate_facts", s.surrogate_kg.num_facts()},
         {"trigger", trigger_to_json(s.victim_kg, s.trigger)},
         {"target_category", s.victim_kg.category_name(s.target_category)},
         {"q_star_eval", s.q_star_eval.size()},
         {"benign_eval", s.benign_eval.size()},
         {"q_star_attack", s.q_star_attack.size()},
         {"q_non_attack", s.q_non_attack.size()},
         {"victim_train_queries", s.victim_train_set.size()},
         {"missing_entity_queries", s.missing_entity_queries}};
  j["target_answer"] = s.target_answer ? Json(s.victim_kg.entity(*s.target_answer).name) : Json(nullptr);
  return j;
}

inline Report run_experiment(const ExperimentConfig& c) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  Report r;
  r.config = config_to_json(c);
  r.config_hash = config_hash(c);
  r.seed = c.seed;
  r.attack = to_string(c.attack);
  r.mode = to_string(c.mode);
  r.defense = to_string(c.defense);

  Setup s = prepare(c);
  r.setup = setup_json(s);
  const VictimState clean = clean_victim(s);
  r.before = measure(s, clean, c);

  const AttackArtifacts a = run_adversary(adversary_view(s), c, c.attack, c.n_g, c.n_q);
  const VictimState attacked = apply_attack(s, c, a);
  r.after = measure(s, attacked, c);
  r.deltas = delta_report(r.before, r.after);
  r.artifacts = detail::artifacts_json(s.surrogate_kg, a, c);

  std::size_t retrains = attacked.retrained ? 1 : 0;
  if (c.defense != DefenseKind::kNone) {
    const DefenseOutcome d = apply_defense(attacked, c, c.defense);
    r.defended = measure(s, d.state, c);
    if (d.filter) r.artifacts["defense"] = filter_result_to_json(s.victim_kg, *d.filter, c.m_percent);
    if (d.adv) r.artifacts["defense"] = adv_train_to_json(s.victim_kg, *d.adv, attacked.train_set.size());
    retrains += d.state.retrained;
  }

  r.scenarios = Json::object();
  if (c.budget_sweep) {
    Json points = Json::array();
    auto add_point = [&](AttackKind kind, std::size_t n_g, std::size_t n_q) {
      const AttackArtifacts pa = run_adversary(adversary_view(s), c, kind, n_g, n_q);
      const VictimState pv = apply_attack(s, c, pa);
      retrains += pv.retrained;
      points.push_back({{"attack", to_string(kind)}, {"n_g", n_g}, {"n_q", n_q}, {"hit5_q_star", detail::hit5_star(s, pv, c)}});
    };
    if (c.attack == AttackKind::kKp || c.attack == AttackKind::kCo)
      for (std::size_t n_g : c.n_g_grid) add_point(AttackKind::kKp, n_g, 0);
    if (c.attack == AttackKind::kQm || c.attack == AttackKind::kCo)
      for (std::size_t n_q : c.n_q_grid) add_point(AttackKind::kQm, 0, n_q);
    if (c.attack == AttackKind::kCo)
      for (std::size_t n_g : c.n_g_grid)
        for (std::size_t n_q : c.n_q_grid) add_point(AttackKind::kCo, n_g, n_q);
    r.scenarios["budget_sweep"] = std::move(points);
  }
  if (!c.alt_triggers.empty()) {
    Json points = Json::array();
    for (const auto& t : c.alt_triggers) {
      ExperimentConfig alt = c;
      alt.trigger = t;
      alt.target_answer.reset();
      Setup as = s;
      resolve_trigger(as, alt, StageSeeds(c.seed));
      sample_groups(as, alt, StageSeeds(c.seed));
      resolve_target_answer(as, alt, StageSeeds(c.seed));
      const VictimState pv = apply_attack(as, alt, run_adversary(adversary_view(as), alt, c.attack, c.n_g, c.n_q));
      retrains += pv.retrained;
      points.push_back({{"trigger", detail::trigger_spec_json(t)},
                        {"q_star_eval", as.q_star_eval.size()},
                        {"hit5_before", detail::hit5_star(as, clean_victim(as), alt)},
                        {"hit5_after", detail::hit5_star(as, pv, alt)}});
    }
    r.scenarios["alt_triggers"] = std::move(points);
  }
  if (!c.overlap_grid.empty()) {
    Json points = Json::array();
    for (double f : c.overlap_grid) {
      Setup os = s;
      os.surrogate_kg = derive_surrogate(s.victim_kg, {f, StageSeeds(c.seed).surrogate});
      const auto sur_set = build_train_set(os.surrogate_kg, detail::train_spec(c, StageSeeds(c.seed).surrogate_model));
      os.surrogate = train_model(os.surrogate_kg, sur_set, c.surrogate_dim, c.surrogate_layers, c.train,
                                 StageSeeds(c.seed).surrogate_model);
      const VictimState pv = apply_attack(os, c, run_adversary(adversary_view(os), c, c.attack, c.n_g, c.n_q));
      retrains += pv.retrained;
      points.push_back({{"remove_fraction", f}, {"hit5_after", detail::hit5_star(os, pv, c)}});
    }
    r.scenarios["overlap_sweep"] = std::move(points);
  }
  if (c.missing_entity_fraction > 0.0) r.scenarios["missing_entity_queries"] = s.missing_entity_queries;

  r.runtime = {{"victim_train_steps", s.victim_train_steps},
               {"surrogate_train_steps", s.surrogate_train_steps},
               {"victim_retrains", retrains}};
  if (c.record_timing) r.runtime["wall_seconds"] = std::chrono::duration<double>(clock::now() - t0).count();
  return r;
}

}  // namespace kgrlab
