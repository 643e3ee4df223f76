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

// JSON formats for queries, models and attack/defense artifacts. Entities,
// relations and categories are written by name, so every reader needs the
// graph the file was written against.

#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgrlab/attack_co.hpp"
#include "kgrlab/attack_kp.hpp"
#include "kgrlab/attack_qm.hpp"
#include "kgrlab/defense.hpp"
#include "kgrlab/error.hpp"
#include "kgrlab/kg.hpp"
#include "kgrlab/model.hpp"
#include "kgrlab/query.hpp"

namespace kgrlab {

using Json = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path);
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kIoError, what + ": " + e.what());
  }
}

inline KnowledgeGraph load_kg(const std::string& triples, const std::string& categories, const std::string& schema) {
  return parse_kg(read_file(triples), read_file(categories), read_file(schema));
}

inline void save_kg(const KnowledgeGraph& kg, const std::string& triples, const std::string& categories,
                    const std::string& schema) {
  write_file(triples, serialize_triples(kg));
  write_file(categories, serialize_categories(kg));
  write_file(schema, serialize_schema(kg));
}

// ---- queries -------------------------------------------------------------

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::kAnchor: return "anchor";
    case NodeKind::kVariable: return "variable";
    case NodeKind::kTarget: return "target";
  }
  return "?";
}

inline NodeKind node_kind_from(const std::string& s) {
  if (s == "anchor") return NodeKind::kAnchor;
  if (s == "variable") return NodeKind::kVariable;
  if (s == "target") return NodeKind::kTarget;
  throw Error(ErrorCode::kIoError, "node kind " + s);
}

inline Json query_to_json(const KnowledgeGraph& kg, const Query& q) {
  Json nodes = Json::array();
  for (const auto& n : q.nodes()) {
    Json j{{"kind", to_string(n.kind)}};
    if (n.entity) j["entity"] = kg.entity(*n.entity).name;
    if (n.category) j["category"] = kg.category_name(*n.category);
    nodes.push_back(std::move(j));
  }
  Json edges = Json::array();
  for (const auto& e : q.edges())
    edges.push_back({{"from", e.from}, {"to", e.to}, {"relation", kg.relation(e.relation).name}});
  return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}, {"target_index", q.target()}};
}

inline Query query_from_json(const KnowledgeGraph& kg, const Json& j) {
  try {
    std::vector<QueryNode> nodes;
    for (const auto& n : j.at("nodes")) {
      QueryNode node{node_kind_from(n.at("kind").get<std::string>()), std::nullopt, std::nullopt};
      if (n.contains("entity")) node.entity = kg.entity_id(n["entity"].get<std::string>());
      if (n.contains("category")) node.category = kg.category_id(n["category"].get<std::string>());
      nodes.push_back(node);
    }
    std::vector<QueryEdge> edges;
    for (const auto& e : j.at("edges"))
      edges.push_back({e.at("from").get<std::size_t>(), kg.relation_id(e.at("relation").get<std::string>()),
                       e.at("to").get<std::size_t>()});
    std::optional<CategoryId> hint;
    if (edges.empty() && nodes.size() == 1) hint = nodes[0].category;
    return build_query(kg, std::move(nodes), std::move(edges), hint);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("query: ") + e.what());
  }
}

inline Json entities_to_json(const KnowledgeGraph& kg, std::span<const EntityId> ids) {
  Json out = Json::array();
  for (EntityId e : ids) out.push_back(kg.entity(e).name);
  return out;
}

inline std::vector<EntityId> entities_from_json(const KnowledgeGraph& kg, const Json& j) {
  std::vector<EntityId> out;
  for (const auto& n : j) out.push_back(kg.entity_id(n.get<std::string>()));
  return out;
}

inline Json fact_to_json(const KnowledgeGraph& kg, const Fact& f) {
  return Json::array({kg.entity(f.head).name, kg.relation(f.relation).name, kg.entity(f.tail).name});
}

inline Fact fact_from_json(const KnowledgeGraph& kg, const Json& j) {
  return {kg.entity_id(j.at(0).get<std::string>()), kg.relation_id(j.at(1).get<std::string>()),
          kg.entity_id(j.at(2).get<std::string>())};
}

inline Json answered_to_json(const KnowledgeGraph& kg, const AnsweredQuery& aq) {
  Json j = query_to_json(kg, aq.query);
  j["truth"] = entities_to_json(kg, aq.truth);
  if (!aq.supporting.empty()) {
    Json s = Json::array();
    for (const Fact& f : aq.supporting) s.push_back(fact_to_json(kg, f));
    j["supporting"] = std::move(s);
  }
  return j;
}

inline AnsweredQuery answered_from_json(const KnowledgeGraph& kg, const Json& j) {
  AnsweredQuery aq{query_from_json(kg, j), {}, {}};
  try {
    aq.truth = entities_from_json(kg, j.at("truth"));
    std::sort(aq.truth.begin(), aq.truth.end());
    if (j.contains("supporting"))
      for (const auto& f : j["supporting"]) aq.supporting.push_back(fact_from_json(kg, f));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("answered query: ") + e.what());
  }
  return aq;
}

inline Json answered_set_to_json(const KnowledgeGraph& kg, std::span<const AnsweredQuery> set) {
  Json out = Json::array();
  for (const auto& aq : set) out.push_back(answered_to_json(kg, aq));
  return out;
}

inline std::vector<AnsweredQuery> answered_set_from_json(const KnowledgeGraph& kg, const Json& j) {
  std::vector<AnsweredQuery> out;
  for (const auto& item : j) out.push_back(answered_from_json(kg, item));
  return out;
}

// ---- model checkpoints ---------------------------------------------------

namespace detail {

inline Json matrix_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat matrix_from_json(const Json& j, std::size_t rows, std::size_t cols) {
  if (j.size() != rows) throw Error(ErrorCode::kShapeMismatch, "matrix rows");
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) throw Error(ErrorCode::kShapeMismatch, "matrix cols");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
  }
  return m;
}

inline Json net_to_json(const OperatorNet& net) {
  Json layers = Json::array();
  for (std::size_t l = 0; l < net.layers(); ++l) {
    Json b = Json::array();
    for (Eigen::Index i = 0; i < net.biases()[l].size(); ++i) b.push_back(net.biases()[l][i]);
    layers.push_back({{"weight", matrix_to_json(net.weights()[l])}, {"bias", std::move(b)}});
  }
  return layers;
}

inline void net_from_json(OperatorNet& net, const Json& j) {
  if (j.size() != net.layers()) throw Error(ErrorCode::kShapeMismatch, "layer count");
  const std::size_t d = net.dim();
  for (std::size_t l = 0; l < net.layers(); ++l) {
    net.weights()[l] = matrix_from_json(j[l].at("weight"), d, d);
    const auto& b = j[l].at("bias");
    if (b.size() != d) throw Error(ErrorCode::kShapeMismatch, "bias width");
    for (std::size_t i = 0; i < d; ++i) net.biases()[l][static_cast<Eigen::Index>(i)] = b[i].get<double>();
  }
}

}  // namespace detail

// Embeddings are stored one array per entity, in id order.
inline Json model_to_json(const Model& m) {
  Json emb = Json::array();
  for (std::size_t e = 0; e < m.num_entities(); ++e) {
    Json row = Json::array();
    const auto col = m.embedding(static_cast<EntityId>(e));
    for (Eigen::Index i = 0; i < col.size(); ++i) row.push_back(col[i]);
    emb.push_back(std::move(row));
  }
  Json proj = Json::array();
  for (const auto& p : m.projections()) proj.push_back(detail::net_to_json(p));
  return {{"format", "kgrlab-model"},
          {"version", kModelFormatVersion},
          {"dim", m.dim()},
          {"layers", m.layers()},
          {"entities", m.num_entities()},
          {"relations", m.num_relations()},
          {"embeddings", std::move(emb)},
          {"projections", std::move(proj)},
          {"intersection", detail::net_to_json(m.intersection())}};
}

inline Model model_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != "kgrlab-model") throw Error(ErrorCode::kIoError, "not a model file");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw Error(ErrorCode::kIoError, "unsupported model version " + j["version"].dump());
    const auto d = j.at("dim").get<std::size_t>();
    const auto n = j.at("entities").get<std::size_t>();
    const auto r = j.at("relations").get<std::size_t>();
    const auto layers = j.at("layers").get<std::size_t>();
    if (d == 0 || layers == 0) throw Error(ErrorCode::kInvalidDim, "zero dim or layers");
    Model m(d, n, r, layers);
    const auto& emb = j.at("embeddings");
    if (emb.size() != n) throw Error(ErrorCode::kShapeMismatch, "embedding rows");
    for (std::size_t e = 0; e < n; ++e) {
      if (emb[e].size() != d) throw Error(ErrorCode::kShapeMismatch, "embedding width");
      for (std::size_t i = 0; i < d; ++i)
        m.embedding(static_cast<EntityId>(e))[static_cast<Eigen::Index>(i)] = emb[e][i].get<double>();
    }
    const auto& proj = j.at("projections");
    if (proj.size() != r) throw Error(ErrorCode::kShapeMismatch, "projection count");
    for (std::size_t k = 0; k < r; ++k) detail::net_from_json(m.projections()[k], proj[k]);
    detail::net_from_json(m.intersection(), j.at("intersection"));
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("model: ") + e.what());
  }
}

inline void save_model(const Model& m, const std::string& path) { write_file(path, model_to_json(m).dump() + "\n"); }

inline Model load_model(const std::string& path) { return model_from_json(parse_json(read_file(path), path)); }

// ---- attack and defense artifacts ------------------------------------------

inline const char* to_string(AttackMode m) { return m == AttackMode::kForcing ? "forcing" : "degradation"; }

inline AttackMode attack_mode_from(const std::string& s) {
  if (s == "forcing") return AttackMode::kForcing;
  if (s == "degradation") return AttackMode::kDegradation;
  throw Error(ErrorCode::kInvalidConfig, "mode " + s);
}

inline Json trigger_to_json(const KnowledgeGraph& kg, const TriggerPattern& t) {
  Json chain = Json::array();
  for (RelationId r : t.chain) chain.push_back(kg.relation(r).name);
  return {{"anchor", kg.entity(t.anchor).name}, {"chain", std::move(chain)}};
}

inline TriggerPattern trigger_from_json(const KnowledgeGraph& kg, const Json& j) {
  std::vector<RelationId> chain;
  for (const auto& r : j.at("chain")) chain.push_back(kg.relation_id(r.get<std::string>()));
  return make_trigger(kg, kg.entity_id(j.at("anchor").get<std::string>()), std::move(chain));
}

inline Json poison_plan_to_json(const KnowledgeGraph& kg, const PoisonPlan& plan, const KpConfig& cfg) {
  Json facts = Json::array();
  for (const auto& f : plan.facts) facts.push_back({{"fact", fact_to_json(kg, f.fact)}, {"fitness", f.fitness}});
  Json j{{"trigger", trigger_to_json(kg, plan.trigger)},
         {"mode", to_string(cfg.mode)},
         {"budget", cfg.n_g},
         {"lambda", cfg.lambda},
         {"perturbable", entities_to_json(kg, plan.perturbable)},
         {"facts", std::move(facts)},
         {"optimizer", {{"steps", plan.steps}, {"initial_loss", plan.initial_loss}, {"final_loss", plan.final_loss}}}};
  if (plan.target_answer) j["target_answer"] = kg.entity(*plan.target_answer).name;
  return j;
}

// Reads the fact list of a poison-plan file (enough to apply it).
inline std::vector<Fact> poison_facts_from_json(const KnowledgeGraph& kg, const Json& j) {
  std::vector<Fact> out;
  for (const auto& f : j.at("facts")) out.push_back(fact_from_json(kg, f.at("fact")));
  return out;
}

inline Json bait_to_json(const KnowledgeGraph& kg, const QmResult& r) {
  Json paths = Json::array();
  for (const auto& p : r.bait.paths) {
    Json rels = Json::array();
    for (RelationId rel : p.relations) rels.push_back(kg.relation(rel).name);
    paths.push_back({{"entities", entities_to_json(kg, p.entities)}, {"relations", std::move(rels)}, {"fitness", p.fitness}});
  }
  return {{"root", kg.entity(r.bait.root).name},
          {"paths", std::move(paths)},
          {"no_expansion", r.bait.no_expansion},
          {"depth_cap_hit", r.bait.depth_cap_hit},
          {"levels", r.bait.levels.size()},
          {"bait_loss", r.optimization.final_loss},
          {"infected", query_to_json(kg, r.infected)}};
}

inline Json co_result_to_json(const KnowledgeGraph& kg, const CoResult& co, const CoConfig& cfg) {
  Json rounds = Json::array();
  for (const auto& r : co.rounds)
    rounds.push_back({{"objective", r.objective}, {"poison_facts", r.poison_facts}, {"kp_final_loss", r.kp_final_loss}});
  Json baits = Json::array();
  for (const auto& b : co.baits) baits.push_back(bait_to_json(kg, b));
  return {{"rounds", std::move(rounds)},
          {"objective", co.objective},
          {"best_round", co.best_round},
          {"plan", poison_plan_to_json(kg, co.plan, cfg.kp)},
          {"baits", std::move(baits)}};
}

inline Json filter_result_to_json(const KnowledgeGraph& kg, const FilterResult& r, double m_percent) {
  Json removed = Json::array();
  for (const auto& s : r.removed) removed.push_back({{"fact", fact_to_json(kg, s.fact)}, {"fitness", s.fitness}});
  return {{"defense", "filter"}, {"m_percent", m_percent}, {"removed", std::move(removed)},
          {"remaining_facts", r.kg.num_facts()}};
}

inline Json adv_train_to_json(const KnowledgeGraph& kg, const AdvTrainResult& r, std::size_t source_size) {
  return {{"defense", "advtrain"},
          {"source_queries", source_size},
          {"augmented_queries", r.augmented.size()},
          {"decoys", entities_to_json(kg, r.decoys)}};
}

}  // namespace kgrlab
