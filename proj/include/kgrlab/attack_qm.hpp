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

// Query misguiding.
//
// A free bait vector is optimized so that intersecting it with the victim
// query lands on the desired answer. The vector is then approximated by a
// tree of real facts rooted at that answer: leaves are expanded level by
// level along incoming facts and only the n_q best leaf-to-root paths
// survive each level. The tree, with internal entities turned into
// variables, is conjoined to the query.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <tuple>
#include <variant>
#include <vector>

#include "kgrlab/attack_kp.hpp"
#include "kgrlab/error.hpp"
#include "kgrlab/kg.hpp"
#include "kgrlab/model.hpp"
#include "kgrlab/optim.hpp"
#include "kgrlab/query.hpp"

namespace kgrlab {

struct QmConfig {
  std::size_t n_q = 2;
  AttackMode mode = AttackMode::kForcing;
  std::size_t steps = 10000;
  double lr = 0.001;
  std::uint64_t seed = 0;
  std::size_t depth_cap = 4;
  double init_noise = 0.01;
};

// Forcing goal: one answer. Degradation goal: the query's true answers.
using QmGoal = std::variant<EntityId, std::vector<EntityId>>;

struct QmOptimization {
  Vec bait;
  std::vector<double> trace;
  double final_loss = 0.0;
};

// Forcing: |intersect(phi_q, b) - phi_a*|; Degradation: -|intersect(phi_q, b) - mean truth|.
inline double qm_loss(const Model& model, const Vec& query_vec, const Vec& bait, const Vec& goal, AttackMode mode,
                      Vec* grad_bait) {
  OperatorNet::Cache cache;
  const Vec pooled = 0.5 * (query_vec + bait);
  const Vec out = model.intersection().forward(pooled, cache);
  const Vec diff = out - goal;
  const double dist = diff.norm();
  const double sign = mode == AttackMode::kForcing ? 1.0 : -1.0;
  if (grad_bait) {
    if (dist > 0.0) {
      *grad_bait = 0.5 * model.intersection().backward(cache, (sign / dist) * diff, nullptr);
    } else {
      *grad_bait = Vec::Zero(bait.size());
    }
  }
  return sign * dist;
}

inline Vec qm_goal_vector(const Model& model, const QmGoal& goal) {
  if (const auto* a = std::get_if<EntityId>(&goal)) return model.embedding(*a);
  const auto& truth = std::get<std::vector<EntityId>>(goal);
  if (truth.empty()) throw Error(ErrorCode::kMissingGoal, "empty truth set");
  Vec c = Vec::Zero(static_cast<Eigen::Index>(model.dim()));
  for (EntityId e : truth) c += model.embedding(e);
  return c / static_cast<double>(truth.size());
}

// Adam on the bait vector with the model frozen. Forcing starts from phi_a*
// plus seeded noise, Degradation from phi_q plus seeded noise.
inline QmOptimization optimize_qm_embedding(const Model& model, const Query& q, const QmGoal& goal,
                                            const QmConfig& cfg) {
  const bool forcing = cfg.mode == AttackMode::kForcing;
  if (forcing != std::holds_alternative<EntityId>(goal))
    throw Error(ErrorCode::kMissingGoal, forcing ? "forcing needs a target answer" : "degradation needs a truth set");
  const Vec query_vec = embed_query(model, q);
  const Vec goal_vec = qm_goal_vector(model, goal);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.init_noise);
  QmOptimization out;
  out.bait = forcing ? Vec(goal_vec) : Vec(query_vec);
  for (Eigen::Index i = 0; i < out.bait.size(); ++i) out.bait[i] += noise(rng);

  AdamState state(static_cast<std::size_t>(out.bait.size()));
  Vec g;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    out.trace.push_back(qm_loss(model, query_vec, out.bait, goal_vec, cfg.mode, &g));
    adam_step(std::span<double>(out.bait.data(), static_cast<std::size_t>(out.bait.size())),
              std::span<const double>(g.data(), static_cast<std::size_t>(g.size())), state, cfg.lr);
  }
  out.final_loss = qm_loss(model, query_vec, out.bait, goal_vec, cfg.mode, nullptr);
  return out;
}

// A leaf-to-root chain: entities[0] is the leaf, entities.back() the root;
// relations[i] labels entities[i] -> entities[i + 1].
struct BaitPath {
  std::vector<EntityId> entities;
  std::vector<RelationId> relations;
  double fitness = 0.0;

  friend bool operator==(const BaitPath&, const BaitPath&) = default;
};

struct BaitLevel {
  std::vector<BaitPath> candidates;  // every scored leaf-to-root path
  std::vector<BaitPath> kept;        // top n_q of candidates
};

struct BaitEvidence {
  EntityId root{};
  std::vector<BaitPath> paths;  // kept paths, best first
  Query query;                  // empty (no edges) when nothing was attached
  bool no_expansion = false;    // root had no usable incoming fact
  bool depth_cap_hit = false;   // stopped by the depth cap, not by exhaustion
  std::vector<BaitLevel> levels;

  bool empty() const { return paths.empty(); }
  double fitness() const { return paths.empty() ? 0.0 : paths.front().fitness; }
};

// The path as a query: anchor at the leaf, variables inside, root as Target.
inline Vec embed_path(const Model& model, const BaitPath& path) {
  Vec v = model.embedding(path.entities.front());
  for (RelationId r : path.relations) v = model.projection(r).forward(v);
  return v;
}

inline std::set<CategoryId> query_categories(const Query& q) {
  std::set<CategoryId> cats;
  for (const auto& n : q.nodes()) cats.insert(*n.category);
  return cats;
}

namespace detail {

inline bool bait_order(const BaitPath& a, const BaitPath& b) {
  if (a.fitness != b.fitness) return a.fitness > b.fitness;
  return std::tie(a.entities, a.relations) < std::tie(b.entities, b.relations);
}

// Merges kept paths into a tree keyed by the (relation, entity) sequence
// from the root, then replaces every non-leaf, non-root entity by a variable.
inline Query bait_query(const KnowledgeGraph& kg, const std::vector<BaitPath>& paths) {
  std::vector<QueryNode> nodes;
  std::vector<QueryEdge> edges;
  nodes.push_back({NodeKind::kTarget, std::nullopt, std::nullopt});
  std::map<std::vector<std::pair<RelationId, EntityId>>, std::size_t> ids;
  for (const auto& p : paths) {
    std::vector<std::pair<RelationId, EntityId>> key;
    std::size_t parent = 0;
    const std::size_t len = p.relations.size();
    for (std::size_t k = len; k-- > 0;) {
      key.emplace_back(p.relations[k], p.entities[k]);
      const bool leaf = k == 0;
      auto it = ids.find(key);
      std::size_t node;
      if (it != ids.end() && !leaf) {
        node = it->second;
      } else {
        node = nodes.size();
        if (leaf) {
          nodes.push_back({NodeKind::kAnchor, p.entities[k], std::nullopt});
        } else {
          nodes.push_back({NodeKind::kVariable, std::nullopt, std::nullopt});
          ids.emplace(key, node);
        }
        edges.push_back({node, p.relations[k], parent});
      }
      parent = node;
    }
  }
  return build_query(kg, std::move(nodes), std::move(edges));
}

}  // namespace detail

// Level-wise tree expansion from `root`. At every level each kept path is
// extended by all incoming facts whose head lies in one of q's categories (a
// path that cannot grow stays as is), every resulting path is scored by
// -|embed_path - bait|, and the n_q best survive. Stops when no leaf grows
// or at `depth_cap` levels.
inline BaitEvidence generate_bait(const Model& model, const Vec& bait_vec, const KnowledgeGraph& kg, const Query& q,
                                  EntityId root, std::size_t n_q, std::size_t depth_cap = 4) {
  kg.check_entity(root);
  if (n_q == 0) throw Error(ErrorCode::kInvalidConfig, "bait budget must be >= 1");
  const auto cats = query_categories(q);
  BaitEvidence ev;
  ev.root = root;
  std::vector<BaitPath> current{BaitPath{{root}, {}, 0.0}};

  for (std::size_t depth = 0;; ++depth) {
    std::vector<BaitPath> candidates;
    bool grew = false;
    for (const BaitPath& p : current) {
      bool extended = false;
      for (const Fact& f : kg.in_facts(p.entities.front())) {
        if (!cats.contains(kg.category_of(f.head))) continue;
        BaitPath next;
        next.entities.reserve(p.entities.size() + 1);
        next.entities.push_back(f.head);
        next.entities.insert(next.entities.end(), p.entities.begin(), p.entities.end());
        next.relations.push_back(f.relation);
        next.relations.insert(next.relations.end(), p.relations.begin(), p.relations.end());
        candidates.push_back(std::move(next));
        extended = true;
      }
      if (!extended) candidates.push_back(p);
      grew = grew || extended;
    }
    if (!grew) break;
    if (depth == depth_cap) {
      ev.depth_cap_hit = true;
      break;
    }
    for (BaitPath& p : candidates) p.fitness = -(embed_path(model, p) - bait_vec).norm();
    std::sort(candidates.begin(), candidates.end(), detail::bait_order);
    BaitLevel level;
    level.kept.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(std::min(n_q, candidates.size())));
    level.candidates = std::move(candidates);
    current = level.kept;
    ev.levels.push_back(std::move(level));
  }

  if (ev.levels.empty()) {
    ev.no_expansion = true;
    ev.query = build_query(kg, {{NodeKind::kTarget, std::nullopt, kg.category_of(root)}}, {});
    return ev;
  }
  ev.paths = current;
  ev.query = detail::bait_query(kg, ev.paths);
  return ev;
}

struct QmResult {
  Query infected;
  BaitEvidence bait;
  QmOptimization optimization;
};

// Degradation has no designated answer; the bait is rooted at the
// non-answer of the Target category closest to intersect(phi_q, bait).
inline EntityId degradation_root(const Model& model, const KnowledgeGraph& kg, const Query& q,
                                 const std::vector<EntityId>& truth, const Vec& bait_vec) {
  const Vec pooled = 0.5 * (embed_query(model, q) + bait_vec);
  const Vec landing = model.intersection().forward(pooled);
  std::optional<EntityId> best;
  double best_dist = 0.0;
  for (EntityId e : kg.entities_of(q.target_category())) {
    if (std::binary_search(truth.begin(), truth.end(), e)) continue;
    const double d = (model.embedding(e) - landing).norm();
    if (!best || d < best_dist) {
      best = e;
      best_dist = d;
    }
  }
  if (!best) throw Error(ErrorCode::kMissingGoal, "no non-answer entity in the target category");
  return *best;
}

inline QmResult run_qm(const Model& model, const KnowledgeGraph& kg, const Query& q, const QmGoal& goal,
                       const QmConfig& cfg) {
  QmResult result;
  result.infected = q;
  if (cfg.n_q == 0) {
    result.bait.no_expansion = true;
    return result;
  }
  result.optimization = optimize_qm_embedding(model, q, goal, cfg);
  EntityId root = cfg.mode == AttackMode::kForcing
                      ? std::get<EntityId>(goal)
                      : degradation_root(model, kg, q, std::get<std::vector<EntityId>>(goal), result.optimization.bait);
  if (kg.category_of(root) != q.target_category())
    throw Error(ErrorCode::kIncompatibleTarget, "bait root category differs from the query target");
  result.bait = generate_bait(model, result.optimization.bait, kg, q, root, cfg.n_q, cfg.depth_cap);
  result.infected = conjoin(kg, q, result.bait.query);
  return result;
}

}  // namespace kgrlab
