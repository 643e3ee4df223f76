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

// Conjunctive queries over a KnowledgeGraph.
//
// A Query is a connected DAG whose sources are anchors (bound entities) and
// whose single sink is the Target. Nodes are stored in topological order with
// the Target last, so every evaluator can sweep nodes front to back.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kgrlab/error.hpp"
#include "kgrlab/kg.hpp"

namespace kgrlab {

enum class NodeKind { kAnchor, kVariable, kTarget };

struct QueryNode {
  NodeKind kind = NodeKind::kVariable;
  std::optional<EntityId> entity;      // set iff kind == kAnchor
  std::optional<CategoryId> category;  // resolved by build_query

  friend bool operator==(const QueryNode&, const QueryNode&) = default;
  friend auto operator<=>(const QueryNode&, const QueryNode&) = default;
};

struct QueryEdge {
  std::size_t from = 0;
  RelationId relation{};
  std::size_t to = 0;

  friend bool operator==(const QueryEdge&, const QueryEdge&) = default;
  friend auto operator<=>(const QueryEdge&, const QueryEdge&) = default;
};

class Query {
 public:
  Query() = default;

  const std::vector<QueryNode>& nodes() const { return nodes_; }
  const std::vector<QueryEdge>& edges() const { return edges_; }
  std::size_t target() const { return nodes_.size() - 1; }
  CategoryId target_category() const { return *nodes_.back().category; }

  // Edges entering `node`, in edge order.
  std::vector<std::size_t> in_edges(std::size_t node) const {
    std::vector<std::size_t> result;
    for (std::size_t i = 0; i < edges_.size(); ++i)
      if (edges_[i].to == node) result.push_back(i);
    return result;
  }

  std::vector<EntityId> anchors() const {
    std::vector<EntityId> result;
    for (const auto& n : nodes_)
      if (n.kind == NodeKind::kAnchor) result.push_back(*n.entity);
    return result;
  }

  // Number of anchor-to-target paths and the longest such path, in edges.
  std::size_t n_path() const { return path_stats().first; }
  std::size_t m_path() const { return path_stats().second; }

  friend bool operator==(const Query&, const Query&) = default;
  friend auto operator<=>(const Query&, const Query&) = default;

 private:
  friend Query build_query(const KnowledgeGraph&, std::vector<QueryNode>, std::vector<QueryEdge>,
                           std::optional<CategoryId>);

  std::pair<std::size_t, std::size_t> path_stats() const {
    // paths[i]: number of anchor paths ending at i; depth[i]: longest one.
    std::vector<std::size_t> paths(nodes_.size(), 0), depth(nodes_.size(), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].kind == NodeKind::kAnchor) {
        paths[i] = 1;
        continue;
      }
      for (std::size_t e : in_edges(i)) {
        paths[i] += paths[edges_[e].from];
        depth[i] = std::max(depth[i], depth[edges_[e].from] + 1);
      }
    }
    return {paths.back(), depth.back()};
  }

  std::vector<QueryNode> nodes_;
  std::vector<QueryEdge> edges_;
};

// Validates the node/edge description and returns it in topological order
// (ties by input index), Target last, edges sorted.
inline Query build_query(const KnowledgeGraph& kg, std::vector<QueryNode> nodes,
                         std::vector<QueryEdge> edges, std::optional<CategoryId> category_hint = std::nullopt) {
  const std::size_t n = nodes.size();
  std::size_t targets = 0;
  for (const auto& node : nodes) targets += node.kind == NodeKind::kTarget;
  if (targets != 1) throw Error(ErrorCode::kMultipleTargets, std::to_string(targets) + " target nodes");
  for (const auto& e : edges) {
    if (e.from >= n || e.to >= n) throw Error(ErrorCode::kDisconnected, "edge references a missing node");
    if (e.from == e.to) throw Error(ErrorCode::kCyclic, "self loop");
    kg.check_relation(e.relation);
  }

  // A lone Target is the empty conjunct (no constraint at all).
  if (n == 1 && edges.empty()) {
    Query q;
    q.nodes_ = std::move(nodes);
    if (category_hint) q.nodes_[0].category = category_hint;
    return q;
  }

  std::vector<std::size_t> indeg(n, 0), outdeg(n, 0);
  for (const auto& e : edges) {
    ++indeg[e.to];
    ++outdeg[e.from];
  }
  // Kahn's algorithm, smallest ready index first.
  std::vector<std::size_t> order;
  {
    std::vector<std::size_t> remaining = indeg;
    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
      if (remaining[i] == 0) ready.insert(i);
    while (!ready.empty()) {
      std::size_t i = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(i);
      for (const auto& e : edges)
        if (e.from == i && --remaining[e.to] == 0) ready.insert(e.to);
    }
    if (order.size() != n) throw Error(ErrorCode::kCyclic, "query graph has a cycle");
  }

  // Weak connectivity.
  {
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
      return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    for (const auto& e : edges) parent[find(e.from)] = find(e.to);
    for (std::size_t i = 1; i < n; ++i)
      if (find(i) != find(0)) throw Error(ErrorCode::kDisconnected, "query graph is not connected");
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = nodes[i];
    if (node.kind == NodeKind::kAnchor) {
      if (!node.entity) throw Error(ErrorCode::kUnknownAnchor, "anchor without entity");
      if (index(*node.entity) >= kg.num_entities())
        throw Error(ErrorCode::kUnknownAnchor, "#" + std::to_string(index(*node.entity)));
      if (indeg[i] != 0) throw Error(ErrorCode::kSchemaInconsistent, "anchor with incoming edge");
    } else {
      if (indeg[i] == 0) throw Error(ErrorCode::kDisconnected, "unanchored variable");
    }
    if (node.kind != NodeKind::kTarget && outdeg[i] == 0)
      throw Error(ErrorCode::kDisconnected, "node does not lead to the target");
  }

  // Resolve categories: anchors from the KG, the rest from incident relations.
  std::vector<std::optional<CategoryId>> cat(n);
  auto assign = [&](std::size_t i, CategoryId c) {
    if (cat[i] && *cat[i] != c) throw Error(ErrorCode::kSchemaInconsistent, "node " + std::to_string(i));
    cat[i] = c;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes[i].category) assign(i, *nodes[i].category);
    if (nodes[i].kind == NodeKind::kAnchor) assign(i, kg.category_of(*nodes[i].entity));
  }
  for (const auto& e : edges) {
    const auto& r = kg.relation(e.relation);
    assign(e.from, r.head_category);
    assign(e.to, r.tail_category);
  }
  std::size_t target_old = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (nodes[i].kind == NodeKind::kTarget) target_old = i;
  if (category_hint) assign(target_old, *category_hint);

  std::vector<std::size_t> new_index(n);
  for (std::size_t k = 0; k < n; ++k) new_index[order[k]] = k;
  Query q;
  q.nodes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    QueryNode node = nodes[i];
    node.category = cat[i];
    if (node.kind != NodeKind::kAnchor) node.entity.reset();
    q.nodes_[new_index[i]] = node;
  }
  for (auto e : edges) {
    e.from = new_index[e.from];
    e.to = new_index[e.to];
    q.edges_.push_back(e);
  }
  std::sort(q.edges_.begin(), q.edges_.end());
  q.edges_.erase(std::unique(q.edges_.begin(), q.edges_.end()), q.edges_.end());
  return q;
}

// All entities e for which some variable binding makes every query edge a
// fact with Target = e. Exhaustive backtracking; ascending ids.
inline std::vector<EntityId> exact_answers(const KnowledgeGraph& kg, const Query& q) {
  const auto& nodes = q.nodes();
  for (const auto& node : nodes)
    if (node.kind == NodeKind::kAnchor && index(*node.entity) >= kg.num_entities())
      throw Error(ErrorCode::kUnknownAnchor, "#" + std::to_string(index(*node.entity)));

  std::vector<std::vector<std::size_t>> incoming(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) incoming[i] = q.in_edges(i);

  std::vector<EntityId> binding(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].kind == NodeKind::kAnchor) binding[i] = *nodes[i].entity;

  auto candidates = [&](std::size_t i) {
    std::vector<EntityId> result;
    bool first = true;
    for (std::size_t e : incoming[i]) {
      const auto& edge = q.edges()[e];
      auto next = kg.successors(binding[edge.from], edge.relation);
      if (first) {
        result = std::move(next);
        first = false;
      } else {
        std::vector<EntityId> both;
        std::set_intersection(result.begin(), result.end(), next.begin(), next.end(),
                              std::back_inserter(both));
        result = std::move(both);
      }
      if (result.empty()) break;
    }
    return result;
  };

  std::set<EntityId> answers;
  std::function<void(std::size_t)> bind = [&](std::size_t i) {
    if (i == q.target()) {
      for (EntityId e : candidates(i)) answers.insert(e);
      return;
    }
    if (nodes[i].kind == NodeKind::kAnchor) {
      bind(i + 1);
      return;
    }
    for (EntityId e : candidates(i)) {
      binding[i] = e;
      bind(i + 1);
    }
  };
  bind(0);
  return {answers.begin(), answers.end()};
}

// Facts <u, r, t> on the Target's incoming edges that participate in some
// satisfying binding. These are what held-out evaluation removes from the
// training graph.
inline std::vector<Fact> supporting_facts(const KnowledgeGraph& kg, const Query& q) {
  const auto& nodes = q.nodes();
  std::vector<EntityId> binding(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].kind == NodeKind::kAnchor) binding[i] = *nodes[i].entity;
  const auto target_in = q.in_edges(q.target());

  std::set<Fact> support;
  std::function<void(std::size_t)> bind = [&](std::size_t i) {
    if (i == q.target()) {
      // Target candidates given bound predecessors.
      std::vector<EntityId> cands;
      bool first = true;
      for (std::size_t e : target_in) {
        const auto& edge = q.edges()[e];
        auto next = kg.successors(binding[edge.from], edge.relation);
        if (first) {
          cands = std::move(next);
          first = false;
        } else {
          std::vector<EntityId> both;
          std::set_intersection(cands.begin(), cands.end(), next.begin(), next.end(), std::back_inserter(both));
          cands = std::move(both);
        }
      }
      for (EntityId t : cands)
        for (std::size_t e : target_in) support.insert({binding[q.edges()[e].from], q.edges()[e].relation, t});
      return;
    }
    if (nodes[i].kind == NodeKind::kAnchor) {
      bind(i + 1);
      return;
    }
    std::vector<EntityId> cands;
    bool first = true;
    for (std::size_t e : q.in_edges(i)) {
      const auto& edge = q.edges()[e];
      auto next = kg.successors(binding[edge.from], edge.relation);
      if (first) {
        cands = std::move(next);
        first = false;
      } else {
        std::vector<EntityId> both;
        std::set_intersection(cands.begin(), cands.end(), next.begin(), next.end(), std::back_inserter(both));
        cands = std::move(both);
      }
    }
    for (EntityId e : cands) {
      binding[i] = e;
      bind(i + 1);
    }
  };
  bind(0);
  return {support.begin(), support.end()};
}

struct AnsweredQuery {
  Query query;
  std::vector<EntityId> truth;  // ascending, nonempty
  // Filled only for test-mode samples.
  std::vector<Fact> supporting;
};

// A query shape with unbound anchors. Every non-target node has exactly one
// outgoing edge (an in-tree toward the Target); edge relations and node
// categories may be pinned or left free.
struct QueryTemplate {
  struct Node {
    NodeKind kind = NodeKind::kVariable;
    std::optional<CategoryId> category;
  };
  struct Edge {
    std::size_t from = 0;
    std::size_t to = 0;
    std::optional<RelationId> relation;
  };

  std::string name;
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  std::size_t target() const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].kind == NodeKind::kTarget) return i;
    throw Error(ErrorCode::kInvalidSpec, "template without target");
  }

  std::size_t n_path() const {
    std::size_t count = 0;
    for (const auto& node : nodes) count += node.kind == NodeKind::kAnchor;
    return count;
  }

  std::size_t m_path() const {
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].kind != NodeKind::kAnchor) continue;
      std::size_t len = 0, at = i;
      while (nodes[at].kind != NodeKind::kTarget) {
        auto it = std::find_if(edges.begin(), edges.end(), [&](const Edge& e) { return e.from == at; });
        if (it == edges.end()) break;
        at = it->to;
        ++len;
      }
      best = std::max(best, len);
    }
    return best;
  }
};

// n_path anchor paths with maximum length m_path. For m_path = 1 all anchors
// point at the Target. Otherwise the first branch is a chain of m_path - 1
// edges into a junction variable, every other anchor links straight into the
// junction, and one edge leads from the junction to the Target.
inline QueryTemplate shape_template(std::size_t n_path, std::size_t m_path) {
  if (n_path == 0 || m_path == 0) throw Error(ErrorCode::kInvalidSpec, "n_path and m_path must be >= 1");
  QueryTemplate t;
  t.name = std::to_string(n_path) + "x" + std::to_string(m_path);
  auto add = [&](NodeKind kind) {
    t.nodes.push_back({kind, std::nullopt});
    return t.nodes.size() - 1;
  };
  if (m_path == 1) {
    std::vector<std::size_t> anchors;
    for (std::size_t i = 0; i < n_path; ++i) anchors.push_back(add(NodeKind::kAnchor));
    std::size_t target = add(NodeKind::kTarget);
    for (std::size_t a : anchors) t.edges.push_back({a, target, std::nullopt});
    return t;
  }
  std::size_t prev = add(NodeKind::kAnchor);
  for (std::size_t k = 1; k + 1 < m_path; ++k) {
    std::size_t v = add(NodeKind::kVariable);
    t.edges.push_back({prev, v, std::nullopt});
    prev = v;
  }
  std::size_t junction = add(NodeKind::kVariable);
  t.edges.push_back({prev, junction, std::nullopt});
  for (std::size_t i = 1; i < n_path; ++i) t.edges.push_back({add(NodeKind::kAnchor), junction, std::nullopt});
  std::size_t target = add(NodeKind::kTarget);
  t.edges.push_back({junction, target, std::nullopt});
  return t;
}

// The five evaluation shapes: (1,1), (1,2), (2,1), (2,2), (3,2).
inline std::vector<QueryTemplate> standard_templates() {
  return {shape_template(1, 1), shape_template(1, 2), shape_template(2, 1), shape_template(2, 2),
          shape_template(3, 2)};
}

// Optional grid n_path in [1,7] x m_path in [1,3].
inline std::vector<QueryTemplate> extended_templates() {
  std::vector<QueryTemplate> result;
  for (std::size_t m = 1; m <= 3; ++m)
    for (std::size_t n = 1; n <= 7; ++n) result.push_back(shape_template(n, m));
  return result;
}

namespace detail {

// Canonical encoding of an in-tree query: children sorted, so sibling order
// does not matter. Returns empty when two siblings are identical (a
// degenerate repeated constraint).
inline std::string canonical_key(const KnowledgeGraph& kg, const Query& q, std::size_t node, bool& degenerate) {
  const auto& n = q.nodes()[node];
  if (n.kind == NodeKind::kAnchor) return "a" + std::to_string(index(*n.entity));
  std::vector<std::string> children;
  for (std::size_t e : q.in_edges(node)) {
    const auto& edge = q.edges()[e];
    children.push_back(std::to_string(index(edge.relation)) + "(" +
                       canonical_key(kg, q, edge.from, degenerate) + ")");
  }
  std::sort(children.begin(), children.end());
  if (std::adjacent_find(children.begin(), children.end()) != children.end()) degenerate = true;
  std::string key = "[";
  for (const auto& c : children) key += c + ",";
  return key + "]";
}

}  // namespace detail

// Every distinct instantiation of `tmpl` on `kg`, sorted by canonical key.
// Instantiations come from groundings found by walking facts backward from
// each possible Target entity, so every returned query has a nonempty answer.
inline std::vector<Query> enumerate_instantiations(const KnowledgeGraph& kg, const QueryTemplate& tmpl,
                                                   std::size_t max_groundings = 5'000'000) {
  const std::size_t n = tmpl.nodes.size();
  const std::size_t target = tmpl.target();
  std::vector<std::vector<std::size_t>> children(n);  // template edges entering each node
  for (std::size_t e = 0; e < tmpl.edges.size(); ++e) children[tmpl.edges[e].to].push_back(e);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t out = 0;
    for (const auto& e : tmpl.edges) out += e.from == i;
    if (i != target && out != 1) throw Error(ErrorCode::kInvalidSpec, "template must be an in-tree");
  }

  // Nodes in DFS order from the target; each grounding step binds one edge.
  std::vector<std::size_t> edge_order;
  std::function<void(std::size_t)> visit = [&](std::size_t node) {
    for (std::size_t e : children[node]) {
      edge_order.push_back(e);
      visit(tmpl.edges[e].from);
    }
  };
  visit(target);

  std::vector<EntityId> ground(n);
  std::vector<RelationId> rel(tmpl.edges.size());
  std::map<std::string, Query> found;
  std::size_t groundings = 0;

  auto emit = [&]() {
    if (++groundings > max_groundings) throw Error(ErrorCode::kInvalidSpec, "template enumeration too large");
    std::vector<QueryNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
      nodes[i].kind = tmpl.nodes[i].kind;
      if (nodes[i].kind == NodeKind::kAnchor) nodes[i].entity = ground[i];
    }
    std::vector<QueryEdge> edges;
    for (std::size_t e = 0; e < tmpl.edges.size(); ++e) edges.push_back({tmpl.edges[e].from, rel[e], tmpl.edges[e].to});
    Query q = build_query(kg, std::move(nodes), std::move(edges));
    bool degenerate = false;
    std::string key = detail::canonical_key(kg, q, q.target(), degenerate);
    if (!degenerate) found.emplace(std::move(key), std::move(q));
  };

  std::function<void(std::size_t)> step = [&](std::size_t k) {
    if (k == edge_order.size()) {
      emit();
      return;
    }
    const auto& edge = tmpl.edges[edge_order[k]];
    const auto& from_node = tmpl.nodes[edge.from];
    for (const Fact& f : kg.in_facts(ground[edge.to])) {
      if (edge.relation && f.relation != *edge.relation) continue;
      if (from_node.category && kg.category_of(f.head) != *from_node.category) continue;
      ground[edge.from] = f.head;
      rel[edge_order[k]] = f.relation;
      step(k + 1);
    }
  };

  for (std::size_t t = 0; t < kg.num_entities(); ++t) {
    const auto e = static_cast<EntityId>(t);
    if (tmpl.nodes[target].category && kg.category_of(e) != *tmpl.nodes[target].category) continue;
    ground[target] = e;
    step(0);
  }

  std::vector<Query> result;
  result.reserve(found.size());
  for (auto& [key, q] : found) result.push_back(std::move(q));
  return result;
}

enum class SampleMode { kTrain, kTest };

// Up to `count` distinct answered queries, drawn uniformly without
// replacement from the sorted instantiation list, optionally restricted by
// `accept`. Deterministic per seed.
inline std::vector<AnsweredQuery> sample_queries(
    const KnowledgeGraph& kg, const QueryTemplate& tmpl, std::size_t count, std::uint64_t seed,
    SampleMode mode = SampleMode::kTrain, const std::function<bool(const Query&)>& accept = {}) {
  std::vector<Query> pool = enumerate_instantiations(kg, tmpl);
  if (accept) std::erase_if(pool, [&](const Query& q) { return !accept(q); });
  if (pool.empty()) throw Error(ErrorCode::kUnsatisfiable, "template " + tmpl.name);
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<AnsweredQuery> result;
  for (std::size_t i = 0; i < std::min(count, pool.size()); ++i) {
    AnsweredQuery aq{pool[order[i]], exact_answers(kg, pool[order[i]]), {}};
    if (mode == SampleMode::kTest) aq.supporting = supporting_facts(kg, aq.query);
    result.push_back(std::move(aq));
  }
  return result;
}

struct TriggerPattern {
  EntityId anchor{};
  std::vector<RelationId> chain;

  friend bool operator==(const TriggerPattern&, const TriggerPattern&) = default;
};

inline TriggerPattern make_trigger(const KnowledgeGraph& kg, EntityId anchor, std::vector<RelationId> chain) {
  if (chain.empty()) throw Error(ErrorCode::kInvalidSpec, "trigger chain is empty");
  CategoryId at = kg.category_of(anchor);
  for (RelationId r : chain) {
    const auto& rel = kg.relation(r);
    if (rel.head_category != at) throw Error(ErrorCode::kSchemaInconsistent, "trigger chain at " + rel.name);
    at = rel.tail_category;
  }
  return {anchor, std::move(chain)};
}

// True iff some path leaves an anchor equal to p.anchor and follows p.chain
// edge by edge. Extra edges around the path are ignored; since every
// non-target node leads to the Target, the final node is always the Target
// or a variable on the way to it.
inline bool contains_trigger(const Query& q, const TriggerPattern& p) {
  if (p.chain.empty()) return false;
  std::function<bool(std::size_t, std::size_t)> follow = [&](std::size_t node, std::size_t k) {
    if (k == p.chain.size()) return true;
    for (const auto& e : q.edges())
      if (e.from == node && e.relation == p.chain[k] && follow(e.to, k + 1)) return true;
    return false;
  };
  for (std::size_t i = 0; i < q.nodes().size(); ++i) {
    const auto& node = q.nodes()[i];
    if (node.kind == NodeKind::kAnchor && *node.entity == p.anchor && follow(i, 0)) return true;
  }
  return false;
}

// q AND bait: the bait's Target is unified with q's Target, bait variables
// are renamed apart. A bait with no edges leaves q unchanged.
inline Query conjoin(const KnowledgeGraph& kg, const Query& q, const Query& bait) {
  if (bait.edges().empty()) return q;
  if (bait.target_category() != q.target_category())
    throw Error(ErrorCode::kIncompatibleTarget, kg.category_name(bait.target_category()) + " vs " +
                                                    kg.category_name(q.target_category()));
  std::vector<QueryNode> nodes = q.nodes();
  std::vector<QueryEdge> edges = q.edges();
  std::vector<std::size_t> remap(bait.nodes().size());
  for (std::size_t i = 0; i < bait.nodes().size(); ++i) {
    if (i == bait.target()) {
      remap[i] = q.target();
    } else {
      remap[i] = nodes.size();
      nodes.push_back(bait.nodes()[i]);
    }
  }
  for (const auto& e : bait.edges()) edges.push_back({remap[e.from], e.relation, remap[e.to]});
  return build_query(kg, std::move(nodes), std::move(edges));
}

}  // namespace kgrlab
