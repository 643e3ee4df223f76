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

// Knowledge poisoning.
//
// Two stages. First the embeddings of the trigger anchor and its 1-hop
// neighbors are optimized in latent space with every other parameter frozen.
// Then the optimized rows are approximated in input space: every plausible
// new fact from a perturbed entity to an unperturbed one is scored by its
// fitness and the best n_g facts are kept.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <tuple>
#include <vector>

#include "kgrlab/error.hpp"
#include "kgrlab/kg.hpp"
#include "kgrlab/model.hpp"
#include "kgrlab/optim.hpp"
#include "kgrlab/query.hpp"

namespace kgrlab {

// Forcing drives target queries toward a chosen answer; Degradation pushes
// them away from their true answers.
enum class AttackMode { kForcing, kDegradation };

struct KpConfig {
  std::size_t n_g = 100;
  double lambda = 1.0;
  AttackMode mode = AttackMode::kForcing;
  std::size_t steps = 10000;
  double lr = 0.001;
  std::uint64_t seed = 0;
};

struct ScoredFact {
  Fact fact;
  double fitness = 0.0;

  friend bool operator==(const ScoredFact&, const ScoredFact&) = default;
};

struct PoisonPlan {
  std::vector<EntityId> perturbable;  // ascending
  Mat optimized_embeddings;           // column i belongs to perturbable[i]
  std::vector<ScoredFact> facts;      // fitness nonincreasing
  TriggerPattern trigger;
  std::optional<EntityId> target_answer;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t steps = 0;

  std::vector<Fact> fact_list() const {
    std::vector<Fact> out;
    for (const auto& f : facts) out.push_back(f.fact);
    return out;
  }
};

// The trigger anchor plus every entity one hop away in either direction.
inline std::vector<EntityId> select_perturbable(const KnowledgeGraph& kg, const TriggerPattern& trigger) {
  if (index(trigger.anchor) >= kg.num_entities())
    throw Error(ErrorCode::kUnknownAnchor, "#" + std::to_string(index(trigger.anchor)));
  std::set<EntityId> result{trigger.anchor};
  for (const Fact& f : kg.out_facts(trigger.anchor)) result.insert(f.tail);
  for (const Fact& f : kg.in_facts(trigger.anchor)) result.insert(f.head);
  return {result.begin(), result.end()};
}

namespace detail {

inline Vec answer_centroid(const Model& model, std::span<const EntityId> truth) {
  Vec c = Vec::Zero(static_cast<Eigen::Index>(model.dim()));
  for (EntityId a : truth) c += model.embedding(a);
  return c / static_cast<double>(truth.size());
}

// Adds w * |embed(q) - goal| to the running loss and its gradient (w.r.t.
// entity rows only) to grad. `goal_rows` are averaged into the goal vector.
inline double add_distance_term(const Model& model, const Query& q, std::span<const EntityId> goal_rows, double w,
                                Model* grad) {
  QueryTape tape;
  const Vec qv = embed_query(model, q, grad ? &tape : nullptr);
  const Vec diff = qv - answer_centroid(model, goal_rows);
  const double dist = diff.norm();
  if (grad && dist > 0.0) {
    const Vec g = (w / dist) * diff;
    backprop_query(model, q, tape, g, *grad, /*operator_grads=*/false);
    const double share = 1.0 / static_cast<double>(goal_rows.size());
    for (EntityId a : goal_rows) grad->embedding(a) -= share * g;
  }
  return w * dist;
}

}  // namespace detail

// Forcing:     E_{Q*} |psi(q) - phi_a*| + lambda E_{Qnon} |psi(q) - phi_[q]|
// Degradation: E_{Qnon} |psi(q) - phi_[q]| - lambda E_{Q*} |psi(q) - phi_[q]|
// phi_[q] is the mean of the answer rows. Empty groups contribute zero.
// Gradients with respect to entity rows are accumulated into grad.
inline double kp_loss(const Model& model, std::span<const AnsweredQuery> q_star, std::span<const AnsweredQuery> q_non,
                      std::optional<EntityId> a_star, double lambda, AttackMode mode, Model* grad) {
  double loss = 0.0;
  if (mode == AttackMode::kForcing) {
    if (!a_star) throw Error(ErrorCode::kMissingTargetAnswer, "forcing mode needs a target answer");
    const EntityId goal[] = {*a_star};
    for (const auto& aq : q_star)
      loss += detail::add_distance_term(model, aq.query, goal, 1.0 / static_cast<double>(q_star.size()), grad);
    for (const auto& aq : q_non)
      loss += detail::add_distance_term(model, aq.query, aq.truth, lambda / static_cast<double>(q_non.size()), grad);
  } else {
    for (const auto& aq : q_non)
      loss += detail::add_distance_term(model, aq.query, aq.truth, 1.0 / static_cast<double>(q_non.size()), grad);
    for (const auto& aq : q_star)
      loss += detail::add_distance_term(model, aq.query, aq.truth, -lambda / static_cast<double>(q_star.size()), grad);
  }
  return loss;
}

struct KpOptimization {
  Mat rows;  // column i belongs to perturbable[i]
  std::vector<double> trace;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

inline Model with_rows(Model model, std::span<const EntityId> entities, const Mat& rows) {
  for (std::size_t i = 0; i < entities.size(); ++i) model.embedding(entities[i]) = rows.col(static_cast<Eigen::Index>(i));
  return model;
}

// Adam on the perturbable rows only; every other parameter stays frozen.
inline KpOptimization optimize_kp_embeddings(const Model& model, std::span<const EntityId> perturbable,
                                             std::span<const AnsweredQuery> q_star,
                                             std::span<const AnsweredQuery> q_non, std::optional<EntityId> a_star,
                                             const KpConfig& cfg) {
  if (q_star.empty()) throw Error(ErrorCode::kEmptyQStar, "no target queries");
  if (cfg.mode == AttackMode::kForcing && !a_star)
    throw Error(ErrorCode::kMissingTargetAnswer, "forcing mode needs a target answer");
  if (cfg.mode == AttackMode::kDegradation)
    for (const auto& aq : q_star)
      if (aq.truth.empty()) throw Error(ErrorCode::kInvalidConfig, "degradation needs answered target queries");

  Model work = model;
  Model grad = model.zeros_like();
  const auto d = static_cast<Eigen::Index>(model.dim());
  const auto n = static_cast<Eigen::Index>(perturbable.size());
  KpOptimization out;
  out.rows.resize(d, n);
  for (Eigen::Index i = 0; i < n; ++i) out.rows.col(i) = model.embedding(perturbable[static_cast<std::size_t>(i)]);

  AdamState state(static_cast<std::size_t>(d * n));
  Mat g_rows(d, n);
  out.initial_loss = kp_loss(work, q_star, q_non, a_star, cfg.lambda, cfg.mode, nullptr);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    grad.embeddings().setZero();
    out.trace.push_back(kp_loss(work, q_star, q_non, a_star, cfg.lambda, cfg.mode, &grad));
    for (Eigen::Index i = 0; i < n; ++i) g_rows.col(i) = grad.embedding(perturbable[static_cast<std::size_t>(i)]);
    adam_step(std::span<double>(out.rows.data(), static_cast<std::size_t>(out.rows.size())),
              std::span<const double>(g_rows.data(), static_cast<std::size_t>(g_rows.size())), state, cfg.lr);
    for (Eigen::Index i = 0; i < n; ++i) work.embedding(perturbable[static_cast<std::size_t>(i)]) = out.rows.col(i);
  }
  out.final_loss = cfg.steps == 0 ? out.initial_loss : kp_loss(work, q_star, q_non, a_star, cfg.lambda, cfg.mode, nullptr);
  return out;
}

// Every plausible, not-yet-present fact v -r-> v' with v perturbable and v'
// not, scored by fitness under `model` (which carries the optimized rows).
inline std::vector<ScoredFact> score_poison_candidates(const Model& model, const KnowledgeGraph& kg,
                                                       std::span<const EntityId> perturbable) {
  std::vector<EntityId> sorted(perturbable.begin(), perturbable.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<ScoredFact> scored;
  for (EntityId v : sorted) {
    for (std::size_t r = 0; r < kg.num_relations(); ++r) {
      const auto rel = static_cast<RelationId>(r);
      if (kg.relation(rel).head_category != kg.category_of(v)) continue;
      const Vec projected = model.projection(rel).forward(model.embedding(v));
      for (EntityId tail : kg.entities_of(kg.relation(rel).tail_category)) {
        if (std::binary_search(sorted.begin(), sorted.end(), tail)) continue;
        const Fact f{v, rel, tail};
        if (kg.contains(f)) continue;
        scored.push_back({f, -(projected - model.embedding(tail)).norm()});
      }
    }
  }
  return scored;
}

// Highest fitness first; ties by (relation, head, tail).
inline bool poison_order(const ScoredFact& a, const ScoredFact& b) {
  if (a.fitness != b.fitness) return a.fitness > b.fitness;
  return std::tie(a.fact.relation, a.fact.head, a.fact.tail) < std::tie(b.fact.relation, b.fact.head, b.fact.tail);
}

inline std::vector<ScoredFact> generate_poison_facts(const Model& model, const KnowledgeGraph& kg,
                                                     std::span<const EntityId> perturbable, std::size_t n_g) {
  if (n_g == 0) return {};
  std::vector<ScoredFact> scored = score_poison_candidates(model, kg, perturbable);
  const std::size_t keep = std::min(n_g, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), poison_order);
  scored.resize(keep);
  return scored;
}

inline PoisonPlan run_kp(const KnowledgeGraph& kg, const Model& model, const TriggerPattern& trigger,
                         std::optional<EntityId> a_star, std::span<const AnsweredQuery> q_star,
                         std::span<const AnsweredQuery> q_non, const KpConfig& cfg) {
  PoisonPlan plan;
  plan.trigger = trigger;
  plan.target_answer = a_star;
  plan.perturbable = select_perturbable(kg, trigger);
  KpOptimization opt = optimize_kp_embeddings(model, plan.perturbable, q_star, q_non, a_star, cfg);
  plan.optimized_embeddings = opt.rows;
  plan.initial_loss = opt.initial_loss;
  plan.final_loss = opt.final_loss;
  plan.steps = cfg.steps;
  const Model optimized = with_rows(model, plan.perturbable, opt.rows);
  plan.facts = generate_poison_facts(optimized, kg, plan.perturbable, cfg.n_g);
  return plan;
}

}  // namespace kgrlab
