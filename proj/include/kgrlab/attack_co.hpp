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

// Co-optimization: knowledge poisoning and query misguiding interleaved.
//
// Each round regenerates the poison plan against the current surrogate
// model, fine-tunes a copy of the original surrogate on the poisoned
// surrogate graph, then builds baits against the refreshed model. The round
// with the lowest combined objective is retained.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "kgrlab/attack_kp.hpp"
#include "kgrlab/attack_qm.hpp"
#include "kgrlab/kg.hpp"
#include "kgrlab/model.hpp"
#include "kgrlab/query.hpp"
#include "kgrlab/train.hpp"

namespace kgrlab {

struct CoConfig {
  std::size_t rounds = 3;
  KpConfig kp;
  QmConfig qm;
  std::size_t finetune_steps = 1000;
  TrainConfig finetune;       // steps is overridden by finetune_steps
  TrainSetSpec refresh_queries;  // sampled from the poisoned surrogate graph
  double convergence_tol = 1e-4;
};

struct CoRound {
  double objective = 0.0;
  std::size_t poison_facts = 0;
  double kp_final_loss = 0.0;
};

struct CoResult {
  PoisonPlan plan;
  std::vector<QmResult> baits;     // one per target query, same order
  std::vector<CoRound> rounds;     // raw per-round record
  std::vector<double> objective;   // best objective so far, per round
  std::size_t best_round = 0;
  Model refreshed;                 // surrogate fine-tuned on the retained plan
};

// Forcing: mean |embed(q*) - phi_a*|; Degradation: mean -|embed(q*) - mean truth|.
inline double co_objective(const Model& model, std::span<const AnsweredQuery> q_star,
                           std::span<const QmResult> baits, std::optional<EntityId> a_star, AttackMode mode) {
  double total = 0.0;
  for (std::size_t i = 0; i < q_star.size(); ++i) {
    const Vec qv = embed_query(model, baits[i].infected);
    if (mode == AttackMode::kForcing) {
      total += (qv - model.embedding(*a_star)).norm();
    } else {
      total -= (qv - detail::answer_centroid(model, q_star[i].truth)).norm();
    }
  }
  return q_star.empty() ? 0.0 : total / static_cast<double>(q_star.size());
}

inline QmGoal qm_goal_for(const AnsweredQuery& aq, std::optional<EntityId> a_star, AttackMode mode) {
  if (mode == AttackMode::kForcing) return *a_star;
  return aq.truth;
}

// Fine-tunes `model` on training queries sampled from `kg`.
inline Model refresh_surrogate(const Model& model, const KnowledgeGraph& kg, const CoConfig& cfg) {
  if (cfg.finetune_steps == 0) return model;
  auto train_set = build_train_set(kg, cfg.refresh_queries);
  if (train_set.empty()) return model;
  TrainConfig tc = cfg.finetune;
  tc.steps = cfg.finetune_steps;
  return train(model, kg, train_set, tc).model;
}

// Baits for every target query against `model`; query i uses seed qm.seed + i.
inline std::vector<QmResult> bait_all(const Model& model, const KnowledgeGraph& kg,
                                      std::span<const AnsweredQuery> q_star, std::optional<EntityId> a_star,
                                      const QmConfig& qm) {
  std::vector<QmResult> out;
  out.reserve(q_star.size());
  for (std::size_t i = 0; i < q_star.size(); ++i) {
    QmConfig c = qm;
    c.seed = qm.seed + i;
    out.push_back(run_qm(model, kg, q_star[i].query, qm_goal_for(q_star[i], a_star, qm.mode), c));
  }
  return out;
}

inline CoResult co_optimize(const KnowledgeGraph& kg, const Model& model, const TriggerPattern& trigger,
                            std::optional<EntityId> a_star, std::span<const AnsweredQuery> q_star,
                            std::span<const AnsweredQuery> q_non, const CoConfig& cfg) {
  if (cfg.rounds == 0) throw Error(ErrorCode::kInvalidConfig, "rounds must be >= 1");
  if (cfg.kp.mode != cfg.qm.mode) throw Error(ErrorCode::kInvalidConfig, "kp and qm modes differ");
  CoResult result;
  Model current = model;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    PoisonPlan plan = run_kp(kg, current, trigger, a_star, q_star, q_non, cfg.kp);
    const KnowledgeGraph poisoned = add_facts(kg, plan.fact_list());
    Model refreshed = refresh_surrogate(model, poisoned, cfg);
    std::vector<QmResult> baits = bait_all(refreshed, poisoned, q_star, a_star, cfg.qm);
    const double objective = co_objective(refreshed, q_star, baits, a_star, cfg.qm.mode);
    result.rounds.push_back({objective, plan.facts.size(), plan.final_loss});

    const double previous = best;
    if (round == 0 || objective < best) {
      best = objective;
      result.best_round = round;
      result.plan = std::move(plan);
      result.baits = std::move(baits);
      result.refreshed = refreshed;
    }
    result.objective.push_back(best);
    current = std::move(refreshed);
    if (round > 0 && previous - best < cfg.convergence_tol) break;
  }
  return result;
}

}  // namespace kgrlab
