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

// End-to-end training on (query, answer set) pairs.
//
// Per example: sum over answers a of |q - phi_a|^2, plus
// max(0, margin - |q - phi_n|)^2 for every sampled negative n.

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "kgrlab/error.hpp"
#include "kgrlab/kg.hpp"
#include "kgrlab/model.hpp"
#include "kgrlab/optim.hpp"
#include "kgrlab/query.hpp"

namespace kgrlab {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 512;
  std::size_t steps = 50000;
  std::size_t negatives_per_positive = 4;
  double margin = 1.0;
  std::uint64_t seed = 0;
};

struct TrainingExample {
  Query query;
  std::vector<EntityId> truth;
  std::vector<EntityId> negatives;
};

// Mean loss over `batch`. When `grad` is set, the gradient of that mean is
// accumulated into it.
inline double training_loss(const Model& model, std::span<const TrainingExample> batch, double margin,
                            Model* grad) {
  if (batch.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  QueryTape tape;
  for (const TrainingExample& ex : batch) {
    const Vec qv = embed_query(model, ex.query, grad ? &tape : nullptr);
    Vec g_q = Vec::Zero(qv.size());
    for (EntityId a : ex.truth) {
      const Vec diff = qv - model.embedding(a);
      total += diff.squaredNorm();
      if (grad) {
        g_q += 2.0 * scale * diff;
        grad->embedding(a) -= 2.0 * scale * diff;
      }
    }
    for (EntityId n : ex.negatives) {
      const Vec diff = qv - model.embedding(n);
      const double dist = diff.norm();
      const double slack = margin - dist;
      if (slack <= 0.0) continue;
      total += slack * slack;
      if (grad && dist > 0.0) {
        // d/dq (m - |d|)^2 = -2 (m - |d|) d / |d|
        const Vec g = (-2.0 * scale * slack / dist) * diff;
        g_q += g;
        grad->embedding(n) -= g;
      }
    }
    if (grad) backprop_query(model, ex.query, tape, g_q, *grad);
  }
  return total * scale;
}

struct TrainResult {
  Model model;
  std::vector<double> loss_trace;
};

// Minibatch Adam. Batches are drawn with replacement; negatives are drawn
// uniformly from the Target category minus the answer set.
inline TrainResult train(Model model, const KnowledgeGraph& kg, std::span<const AnsweredQuery> train_set,
                         const TrainConfig& cfg) {
  if (train_set.empty()) throw Error(ErrorCode::kEmptyTrainSet, "no training queries");
  if (!(cfg.learning_rate > 0.0) || cfg.batch_size == 0 || !(cfg.margin >= 0.0))
    throw Error(ErrorCode::kInvalidConfig, "train config");
  TrainResult result{std::move(model), {}};
  if (cfg.steps == 0) return result;
  for (const auto& aq : train_set)
    for (EntityId a : aq.query.anchors())
      if (index(a) >= result.model.num_entities()) throw Error(ErrorCode::kUnknownAnchor, "training anchor");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, train_set.size() - 1);
  ModelAdam adam(result.model);
  Model grad = result.model.zeros_like();
  std::vector<TrainingExample> batch(cfg.batch_size);
  result.loss_trace.reserve(cfg.steps);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (auto& ex : batch) {
      const AnsweredQuery& aq = train_set[pick(rng)];
      ex.query = aq.query;
      ex.truth = aq.truth;
      ex.negatives.clear();
      const auto& pool = kg.entities_of(aq.query.target_category());
      if (pool.size() > aq.truth.size()) {
        std::uniform_int_distribution<std::size_t> neg(0, pool.size() - 1);
        while (ex.negatives.size() < cfg.negatives_per_positive) {
          EntityId e = pool[neg(rng)];
          if (!std::binary_search(aq.truth.begin(), aq.truth.end(), e)) ex.negatives.push_back(e);
        }
      }
    }
    grad.set_zero();
    result.loss_trace.push_back(training_loss(result.model, batch, cfg.margin, &grad));
    adam.step(result.model, grad, cfg.learning_rate);
  }
  return result;
}

// Mean distance between each query's embedding and its answers' rows.
inline double mean_answer_distance(const Model& model, std::span<const AnsweredQuery> set) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& aq : set) {
    const Vec qv = embed_query(model, aq.query);
    for (EntityId a : aq.truth) {
      total += (qv - model.embedding(a)).norm();
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

// Training-set recipe: `count` queries per template, each template sampled
// with its own derived seed.
struct TrainSetSpec {
  std::vector<QueryTemplate> templates;
  std::vector<std::size_t> counts;
  std::uint64_t seed = 0;
};

inline std::vector<AnsweredQuery> build_train_set(const KnowledgeGraph& kg, const TrainSetSpec& spec) {
  if (spec.templates.size() != spec.counts.size())
    throw Error(ErrorCode::kInvalidConfig, "one count per template");
  std::vector<AnsweredQuery> out;
  for (std::size_t i = 0; i < spec.templates.size(); ++i) {
    std::vector<AnsweredQuery> part;
    try {
      part = sample_queries(kg, spec.templates[i], spec.counts[i], spec.seed + 7919 * (i + 1));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnsatisfiable) throw;
    }
    for (auto& aq : part) out.push_back(std::move(aq));
  }
  return out;
}

}  // namespace kgrlab
