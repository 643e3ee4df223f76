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

// Embedding model: an entity table plus learned projection and intersection
// operators, with hand-written reverse-mode gradients.
//
// Operators are fully connected nets of L square layers (width d), ReLU
// between layers and a linear output layer. Intersection mean-pools its
// inputs and feeds the pooled vector through its own net; a single input is
// passed through untouched.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "kgrlab/error.hpp"
#include "kgrlab/kg.hpp"
#include "kgrlab/query.hpp"

namespace kgrlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class OperatorNet {
 public:
  // Per-layer activations recorded by a forward pass.
  struct Cache {
    std::vector<Vec> inputs;  // input of each layer
    std::vector<Vec> pre;     // pre-activation of each layer
  };

  OperatorNet() = default;
  OperatorNet(std::size_t dim, std::size_t layers) : weights_(layers, Mat::Zero(dim, dim)), biases_(layers, Vec::Zero(dim)) {}

  static OperatorNet identity(std::size_t dim) {
    OperatorNet net(dim, 1);
    net.weights_[0] = Mat::Identity(dim, dim);
    return net;
  }

  std::size_t layers() const { return weights_.size(); }
  std::size_t dim() const { return weights_.empty() ? 0 : static_cast<std::size_t>(weights_[0].rows()); }

  std::vector<Mat>& weights() { return weights_; }
  const std::vector<Mat>& weights() const { return weights_; }
  std::vector<Vec>& biases() { return biases_; }
  const std::vector<Vec>& biases() const { return biases_; }

  Vec forward(const Vec& x) const {
    Vec h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Vec z = weights_[l] * h + biases_[l];
      h = l + 1 < weights_.size() ? Vec(z.cwiseMax(0.0)) : z;
    }
    return h;
  }

  Vec forward(const Vec& x, Cache& cache) const {
    cache.inputs.resize(weights_.size());
    cache.pre.resize(weights_.size());
    Vec h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      cache.inputs[l] = h;
      cache.pre[l] = weights_[l] * h + biases_[l];
      h = l + 1 < weights_.size() ? Vec(cache.pre[l].cwiseMax(0.0)) : cache.pre[l];
    }
    return h;
  }

  // Returns d(loss)/d(input). When `grad` is given, parameter gradients are
  // accumulated into it.
  Vec backward(const Cache& cache, const Vec& grad_out, OperatorNet* grad) const {
    Vec g = grad_out;
    for (std::size_t l = weights_.size(); l-- > 0;) {
      if (l + 1 < weights_.size()) g = g.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
      if (grad) {
        grad->weights_[l].noalias() += g * cache.inputs[l].transpose();
        grad->biases_[l] += g;
      }
      g = weights_[l].transpose() * g;
    }
    return g;
  }

  void set_zero() {
    for (auto& w : weights_) w.setZero();
    for (auto& b : biases_) b.setZero();
  }

  bool all_finite() const {
    for (const auto& w : weights_)
      if (!w.allFinite()) return false;
    for (const auto& b : biases_)
      if (!b.allFinite()) return false;
    return true;
  }

  friend bool operator==(const OperatorNet& a, const OperatorNet& b) {
    if (a.weights_.size() != b.weights_.size()) return false;
    for (std::size_t l = 0; l < a.weights_.size(); ++l)
      if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
    return true;
  }

 private:
  std::vector<Mat> weights_;
  std::vector<Vec> biases_;
};

class Model {
 public:
  Model() = default;
  Model(std::size_t dim, std::size_t num_entities, std::size_t num_relations, std::size_t layers)
      : embeddings_(Mat::Zero(dim, num_entities)),
        projections_(num_relations, OperatorNet(dim, layers)),
        intersection_(dim, layers) {}

  std::size_t dim() const { return static_cast<std::size_t>(embeddings_.rows()); }
  std::size_t num_entities() const { return static_cast<std::size_t>(embeddings_.cols()); }
  std::size_t num_relations() const { return projections_.size(); }
  std::size_t layers() const { return intersection_.layers(); }

  // Column e is the embedding of entity e.
  Mat& embeddings() { return embeddings_; }
  const Mat& embeddings() const { return embeddings_; }
  auto embedding(EntityId e) const { return embeddings_.col(static_cast<Eigen::Index>(check_entity(e))); }
  auto embedding(EntityId e) { return embeddings_.col(static_cast<Eigen::Index>(check_entity(e))); }

  OperatorNet& projection(RelationId r) { return projections_[check_relation(r)]; }
  const OperatorNet& projection(RelationId r) const { return projections_[check_relation(r)]; }
  std::vector<OperatorNet>& projections() { return projections_; }
  const std::vector<OperatorNet>& projections() const { return projections_; }
  OperatorNet& intersection() { return intersection_; }
  const OperatorNet& intersection() const { return intersection_; }

  // A zero-valued model of identical shape; used as a gradient accumulator.
  Model zeros_like() const {
    Model m = *this;
    m.set_zero();
    return m;
  }

  void set_zero() {
    embeddings_.setZero();
    for (auto& p : projections_) p.set_zero();
    intersection_.set_zero();
  }

  // Every trainable parameter as contiguous blocks, in a fixed order:
  // embeddings, projections (by relation, layer: weight then bias),
  // intersection.
  std::vector<std::span<double>> parameter_blocks() {
    std::vector<std::span<double>> blocks;
    blocks.emplace_back(embeddings_.data(), static_cast<std::size_t>(embeddings_.size()));
    auto add_net = [&](OperatorNet& net) {
      for (std::size_t l = 0; l < net.layers(); ++l) {
        blocks.emplace_back(net.weights()[l].data(), static_cast<std::size_t>(net.weights()[l].size()));
        blocks.emplace_back(net.biases()[l].data(), static_cast<std::size_t>(net.biases()[l].size()));
      }
    };
    for (auto& p : projections_) add_net(p);
    add_net(intersection_);
    return blocks;
  }

  std::size_t parameter_count() const {
    std::size_t n = static_cast<std::size_t>(embeddings_.size());
    const std::size_t per_net = layers() * (dim() * dim() + dim());
    return n + per_net * (projections_.size() + 1);
  }

  bool all_finite() const {
    if (!embeddings_.allFinite()) return false;
    for (const auto& p : projections_)
      if (!p.all_finite()) return false;
    return intersection_.all_finite();
  }

  friend bool operator==(const Model& a, const Model& b) {
    return a.embeddings_ == b.embeddings_ && a.projections_ == b.projections_ && a.intersection_ == b.intersection_;
  }

 private:
  std::size_t check_entity(EntityId e) const {
    if (index(e) >= num_entities()) throw Error(ErrorCode::kUnknownEntity, "#" + std::to_string(index(e)));
    return index(e);
  }
  std::size_t check_relation(RelationId r) const {
    if (index(r) >= projections_.size())
      throw Error(ErrorCode::kUnknownRelation, "#" + std::to_string(index(r)));
    return index(r);
  }

  Mat embeddings_;
  std::vector<OperatorNet> projections_;
  OperatorNet intersection_;
};

// Every parameter i.i.d. uniform in [-1/sqrt(d), 1/sqrt(d)]; sampled in the
// parameter_blocks() order.
inline Model init_model(const KnowledgeGraph& kg, std::size_t dim, std::size_t layers, std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorCode::kInvalidDim, "dim must be >= 1");
  if (layers == 0) throw Error(ErrorCode::kInvalidDim, "layers must be >= 1");
  Model model(dim, kg.num_entities(), kg.num_relations(), layers);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-bound, bound);
  for (auto block : model.parameter_blocks())
    for (double& x : block) x = uniform(rng);
  return model;
}

inline Vec project(const Model& model, RelationId r, const Vec& x) {
  const OperatorNet& net = model.projection(r);
  if (static_cast<std::size_t>(x.size()) != model.dim()) throw Error(ErrorCode::kDimMismatch, "project input");
  return net.forward(x);
}

inline Vec intersect(const Model& model, std::span<const Vec> inputs) {
  if (inputs.empty()) throw Error(ErrorCode::kEmptyInput, "intersect needs at least one input");
  if (inputs.size() == 1) return inputs[0];
  Vec pooled = Vec::Zero(inputs[0].size());
  for (const Vec& v : inputs) pooled += v;
  pooled /= static_cast<double>(inputs.size());
  return model.intersection().forward(pooled);
}

inline double distance(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimMismatch, "distance");
  return (a - b).norm();
}

// Forward record of one query embedding, consumed by backprop_query.
struct QueryTape {
  std::vector<Vec> value;                    // per node
  std::vector<OperatorNet::Cache> edge;      // per edge (projection)
  std::vector<Vec> edge_out;                 // per edge
  std::vector<OperatorNet::Cache> pool;      // per node with in-degree > 1
  std::vector<std::vector<std::size_t>> in;  // incoming edges per node
};

// Bottom-up DAG evaluation: anchors read the table, every edge projects, nodes
// with several incoming edges intersect. Returns the Target's vector.
inline Vec embed_query(const Model& model, const Query& q, QueryTape* tape = nullptr) {
  const auto& nodes = q.nodes();
  const auto& edges = q.edges();
  QueryTape local;
  QueryTape& t = tape ? *tape : local;
  t.value.assign(nodes.size(), Vec());
  t.edge.assign(edges.size(), {});
  t.edge_out.assign(edges.size(), Vec());
  t.pool.assign(nodes.size(), {});
  t.in.assign(nodes.size(), {});
  for (std::size_t e = 0; e < edges.size(); ++e) t.in[edges[e].to].push_back(e);

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].kind == NodeKind::kAnchor) {
      if (index(*nodes[i].entity) >= model.num_entities())
        throw Error(ErrorCode::kUnknownAnchor, "#" + std::to_string(index(*nodes[i].entity)));
      t.value[i] = model.embedding(*nodes[i].entity);
      continue;
    }
    for (std::size_t e : t.in[i]) {
      const OperatorNet& net = model.projection(edges[e].relation);
      t.edge_out[e] = net.forward(t.value[edges[e].from], t.edge[e]);
    }
    if (t.in[i].size() == 1) {
      t.value[i] = t.edge_out[t.in[i][0]];
    } else {
      Vec pooled = Vec::Zero(static_cast<Eigen::Index>(model.dim()));
      for (std::size_t e : t.in[i]) pooled += t.edge_out[e];
      pooled /= static_cast<double>(t.in[i].size());
      t.value[i] = model.intersection().forward(pooled, t.pool[i]);
    }
  }
  return t.value[q.target()];
}

// Reverse sweep. Anchor-row gradients go into grad->embeddings(); operator
// gradients are accumulated only when `operator_grads` is set.
inline void backprop_query(const Model& model, const Query& q, const QueryTape& tape, const Vec& grad_target,
                           Model& grad, bool operator_grads = true) {
  const auto& nodes = q.nodes();
  const auto& edges = q.edges();
  std::vector<Vec> g(nodes.size(), Vec::Zero(static_cast<Eigen::Index>(model.dim())));
  g[q.target()] = grad_target;
  for (std::size_t i = nodes.size(); i-- > 0;) {
    if (nodes[i].kind == NodeKind::kAnchor) {
      grad.embedding(*nodes[i].entity) += g[i];
      continue;
    }
    const auto& in = tape.in[i];
    Vec g_edge;
    if (in.size() == 1) {
      g_edge = g[i];
    } else {
      g_edge = model.intersection().backward(tape.pool[i], g[i], operator_grads ? &grad.intersection() : nullptr);
      g_edge /= static_cast<double>(in.size());
    }
    for (std::size_t e : in) {
      const OperatorNet& net = model.projection(edges[e].relation);
      g[edges[e].from] += net.backward(tape.edge[e], g_edge,
                                       operator_grads ? &grad.projection(edges[e].relation) : nullptr);
    }
  }
}

// Entities sorted by distance to a query vector, ties by ascending id.
struct Ranking {
  std::vector<std::pair<EntityId, double>> entries;
  std::vector<EntityId> truth;  // ascending

  // 1-based rank of e, or nullopt when e is not among the candidates.
  std::optional<std::size_t> rank_of(EntityId e) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].first == e) return i + 1;
    return std::nullopt;
  }
};

inline Ranking rank_entities(const Model& model, const KnowledgeGraph& kg, const Vec& qvec,
                             std::optional<CategoryId> candidates = std::nullopt) {
  if (static_cast<std::size_t>(qvec.size()) != model.dim()) throw Error(ErrorCode::kDimMismatch, "query vector");
  Ranking ranking;
  auto score = [&](EntityId e) { ranking.entries.emplace_back(e, (model.embedding(e) - qvec).norm()); };
  if (candidates) {
    for (EntityId e : kg.entities_of(*candidates)) score(e);
  } else {
    for (std::size_t e = 0; e < model.num_entities(); ++e) score(EntityId(e));
  }
  std::sort(ranking.entries.begin(), ranking.entries.end(), [](const auto& a, const auto& b) {
    return a.second < b.second || (a.second == b.second && a.first < b.first);
  });
  return ranking;
}

// -distance(project(r, head), tail); higher means a better-fitting fact.
inline double fact_fitness(const Model& model, const Fact& fact) {
  return -(model.projection(fact.relation).forward(model.embedding(fact.head)) - model.embedding(fact.tail)).norm();
}

}  // namespace kgrlab
