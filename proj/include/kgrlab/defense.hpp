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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "kgrlab/attack_co.hpp"
#include "kgrlab/attack_kp.hpp"
#include "kgrlab/attack_qm.hpp"
#include "kgrlab/kg.hpp"
#include "kgrlab/model.hpp"
#include "kgrlab/train.hpp"

namespace kgrlab {

struct DefenseConfig {
  double m_percent = 30.0;
  CoConfig adv_attack;
  std::uint64_t seed = 0;
};

struct FilterResult {
  KnowledgeGraph kg;
  std::vector<ScoredFact> removed;  // lowest fitness first
};

// Drops the floor(|E| * m / 100) facts with the lowest fitness under the
// defender's model; ties by ascending fact key.
inline FilterResult filter_low_fitness(const KnowledgeGraph& kg, const Model& model, double m_percent) {
  if (!(m_percent >= 0.0 && m_percent <= 100.0)) throw Error(ErrorCode::kInvalidConfig, "m_percent outside [0,100]");
  std::vector<ScoredFact> scored;
  scored.reserve(kg.num_facts());
  for (const Fact& f : kg.facts()) scored.push_back({f, fact_fitness(model, f)});
  const auto count = static_cast<std::size_t>(std::floor(static_cast<double>(kg.num_facts()) * m_percent / 100.0));
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(count), scored.end(),
                    [](const ScoredFact& a, const ScoredFact& b) {
                      return a.fitness < b.fitness || (a.fitness == b.fitness && a.fact < b.fact);
                    });
  scored.resize(count);
  FilterResult result{remove_facts(kg, [&] {
                        std::vector<Fact> facts;
                        for (const auto& s : scored) facts.push_back(s.fact);
                        return facts;
                      }()),
                      std::move(scored)};
  return result;
}

struct AdvTrainResult {
  Model model;
  std::vector<AnsweredQuery> augmented;
  std::vector<EntityId> decoys;  // a* assumed for each source query
};

// Appends one adversarial twin (q*, [q]) per training query and retrains from
// `model`. Each twin is built by the misguiding phase of the configured
// co-attack against the defender's own model and graph, aimed at a seeded
// decoy answer outside the query's truth set.
inline AdvTrainResult adversarial_train(const KnowledgeGraph& kg, const Model& model,
                                        std::span<const AnsweredQuery> train_set, const DefenseConfig& def_cfg,
                                        const TrainConfig& train_cfg) {
  if (train_set.empty()) throw Error(ErrorCode::kEmptyTrainSet, "no training queries");
  AdvTrainResult result;
  result.augmented.assign(train_set.begin(), train_set.end());
  std::mt19937_64 rng(def_cfg.seed);
  QmConfig qm = def_cfg.adv_attack.qm;
  qm.mode = AttackMode::kForcing;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    const AnsweredQuery& aq = train_set[i];
    const auto& pool = kg.entities_of(aq.query.target_category());
    std::vector<EntityId> decoys;
    std::set_difference(pool.begin(), pool.end(), aq.truth.begin(), aq.truth.end(), std::back_inserter(decoys));
    AnsweredQuery twin{aq.query, aq.truth, {}};
    if (!decoys.empty() && qm.n_q > 0) {
      std::uniform_int_distribution<std::size_t> pick(0, decoys.size() - 1);
      const EntityId decoy = decoys[pick(rng)];
      result.decoys.push_back(decoy);
      QmConfig c = qm;
      c.seed = qm.seed + i;
      twin.query = run_qm(model, kg, aq.query, decoy, c).infected;
    }
    result.augmented.push_back(std::move(twin));
  }
  result.model = train(model, kg, result.augmented, train_cfg).model;
  return result;
}

}  // namespace kgrlab
