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

#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "kgrlab/metrics.hpp"
#include "kgrlab/train.hpp"

namespace kgrlab {
namespace {

using testing::fixture_a;

using testing::code_of;

TEST(Model, InitShapeBoundsAndDeterminism) {
  auto kg = fixture_a();
  Model m = init_model(kg, 8, 3, 42);
  EXPECT_EQ(m.dim(), 8u);
  EXPECT_EQ(m.num_entities(), 6u);
  EXPECT_EQ(m.num_relations(), 2u);
  EXPECT_EQ(m.layers(), 3u);
  EXPECT_EQ(m.parameter_count(), 8u * 6 + 3 * (3 * (64 + 8)));
  const double bound = 1.0 / std::sqrt(8.0);
  for (auto block : m.parameter_blocks())
    for (double x : block) {
      EXPECT_LE(std::abs(x), bound);
    }
  EXPECT_EQ(m, init_model(kg, 8, 3, 42));
  EXPECT_FALSE(m == init_model(kg, 8, 3, 43));
  EXPECT_EQ(code_of([&] { init_model(kg, 0, 1, 1); }), ErrorCode::kInvalidDim);
  EXPECT_EQ(code_of([&] { init_model(kg, 4, 0, 1); }), ErrorCode::kInvalidDim);
}

TEST(Model, OneHopIsProjectionOfAnchor) {
  auto kg = fixture_a();
  Model m = init_model(kg, 4, 2, 7);
  auto q = build_query(kg, {{NodeKind::kAnchor, kg.entity_id("P1"), std::nullopt}, {NodeKind::kTarget, std::nullopt, std::nullopt}},
                       {{0, kg.relation_id("target-by"), 1}});
  const Vec expect = project(m, kg.relation_id("target-by"), m.embedding(kg.entity_id("P1")));
  EXPECT_TRUE(embed_query(m, q).isApprox(expect, 0.0));
}

TEST(Model, IntersectionPoolsThenAppliesNet) {
  auto kg = fixture_a();
  Model m = init_model(kg, 4, 2, 9);
  const RelationId t = kg.relation_id("target-by");
  const Vec a = project(m, t, m.embedding(kg.entity_id("P1")));
  const Vec b = project(m, t, m.embedding(kg.entity_id("P2")));
  const Vec joined = m.intersection().forward(0.5 * (a + b));
  const Vec expect = project(m, kg.relation_id("mitigate-by"), joined);
  EXPECT_TRUE(embed_query(m, testing::q_intersection(kg)).isApprox(expect, 1e-14));

  const Vec inputs[] = {a, b};
  EXPECT_TRUE(intersect(m, inputs).isApprox(joined, 1e-14));
  const Vec single[] = {a};
  EXPECT_EQ(intersect(m, single), a);
  EXPECT_EQ(code_of([&] { intersect(m, std::span<const Vec>{}); }), ErrorCode::kEmptyInput);
}

TEST(Model, IntersectionIsSymmetric) {
  auto kg = fixture_a();
  Model m = init_model(kg, 5, 2, 11);
  const Vec a = Vec::Random(5), b = Vec::Random(5);
  const Vec ab[] = {a, b};
  const Vec ba[] = {b, a};
  EXPECT_TRUE(intersect(m, ab).isApprox(intersect(m, ba), 1e-14));
}

TEST(Model, ErrorsOnBadIds) {
  auto kg = fixture_a();
  Model m = init_model(kg, 4, 1, 1);
  EXPECT_EQ(code_of([&] { m.embedding(static_cast<EntityId>(99)); }), ErrorCode::kUnknownEntity);
  EXPECT_EQ(code_of([&] { m.projection(static_cast<RelationId>(9)); }), ErrorCode::kUnknownRelation);
  EXPECT_EQ(code_of([&] { project(m, kg.relation_id("target-by"), Vec::Zero(3)); }), ErrorCode::kDimMismatch);
  EXPECT_EQ(code_of([&] { distance(Vec::Zero(3), Vec::Zero(4)); }), ErrorCode::kDimMismatch);
  EXPECT_EQ(code_of([&] { rank_entities(m, kg, Vec::Zero(2)); }), ErrorCode::kDimMismatch);
}

TEST(Model, RankingRestrictsToCategory) {
  auto kg = fixture_a();
  Model m = init_model(kg, 4, 1, 1);
  const auto r = rank_entities(m, kg, Vec::Zero(4), kg.category_id("Mitigation"));
  ASSERT_EQ(r.entries.size(), 2u);
  for (std::size_t i = 1; i < r.entries.size(); ++i) EXPECT_LE(r.entries[i - 1].second, r.entries[i].second);
  EXPECT_EQ(r.rank_of(kg.entity_id("P1")), std::nullopt);
}

TEST(Model, FitnessIsNegativeDistance) {
  auto kg = fixture_a();
  Model m = init_model(kg, 4, 2, 5);
  const Fact f{kg.entity_id("P1"), kg.relation_id("target-by"), kg.entity_id("M1")};
  const double d = distance(project(m, f.relation, m.embedding(f.head)), m.embedding(f.tail));
  EXPECT_DOUBLE_EQ(fact_fitness(m, f), -d);
}

TEST(Train, LossDecreasesAndAnswersMoveCloser) {
  auto kg = generate_synthetic_kg({3, 20, {{0, 1}, {1, 2}, {2, 0}}, 0.15, 3, 1, 0.0});
  auto set = build_train_set(kg, {standard_templates(), {1000, 100, 100, 50, 50}, 4});
  ASSERT_GT(set.size(), 100u);
  Model m0 = init_model(kg, 16, 2, 1);
  TrainConfig tc{0.01, 64, 300, 4, 1.0, 2};
  auto result = train(m0, kg, set, tc);
  ASSERT_EQ(result.loss_trace.size(), 300u);
  double head = 0, tail = 0;
  for (int i = 0; i < 20; ++i) head += result.loss_trace[i], tail += result.loss_trace[280 + i];
  EXPECT_LT(tail, 0.7 * head);
  EXPECT_LT(mean_answer_distance(result.model, set), mean_answer_distance(m0, set));
  EXPECT_TRUE(result.model.all_finite());
  EXPECT_EQ(train(m0, kg, set, tc).model, result.model);
}

TEST(Train, Errors) {
  auto kg = fixture_a();
  Model m = init_model(kg, 4, 1, 1);
  TrainConfig tc;
  EXPECT_EQ(code_of([&] { train(m, kg, {}, tc); }), ErrorCode::kEmptyTrainSet);
  auto set = build_train_set(kg, {standard_templates(), {10, 10, 10, 10, 10}, 1});
  tc.learning_rate = 0.0;
  EXPECT_EQ(code_of([&] { train(m, kg, set, tc); }), ErrorCode::kInvalidConfig);
  tc = TrainConfig{};
  tc.steps = 0;
  EXPECT_EQ(train(m, kg, set, tc).model, m);
  EXPECT_EQ(code_of([&] { build_train_set(kg, {standard_templates(), {1}, 1}); }), ErrorCode::kInvalidConfig);
}

TEST(Train, TrainSetSkipsUnsatisfiableTemplates) {
  // FIXTURE-A has four distinct 1-hop queries and no 3-hop chain.
  auto kg = fixture_a();
  auto set = build_train_set(kg, {{shape_template(1, 1), shape_template(1, 3)}, {100, 100}, 1});
  EXPECT_EQ(set.size(), 4u);
}

TEST(Train, LearnsFixtureOneHop) {
  auto kg = fixture_a();
  auto set = build_train_set(kg, {{shape_template(1, 1)}, {100}, 1});
  TrainConfig tc{0.01, 8, 1500, 2, 1.0, 3};
  Model m = train(init_model(kg, 8, 2, 1), kg, set, tc).model;
  EvalResult ev;
  for (const auto& aq : set) {
    auto r = rank_entities(m, kg, embed_query(m, aq.query), aq.query.target_category());
    r.truth = aq.truth;
    ev.rankings.push_back(r);
  }
  EXPECT_DOUBLE_EQ(hit_at_k(ev, 1), 1.0);
}

}  // namespace
}  // namespace kgrlab
