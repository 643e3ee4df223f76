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

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "kgrlab/kg.hpp"

namespace kgrlab {
namespace {

using testing::fixture_a;

using testing::code_of;

TEST(ParseKg, EmptyTriplesKeepsDeclaredRelations) {
  auto kg = parse_kg("", testing::kFixtureACategories, testing::kFixtureASchema);
  EXPECT_EQ(kg.num_facts(), 0u);
  EXPECT_EQ(kg.num_relations(), 2u);
  EXPECT_TRUE(kg.find_relation("target-by"));
}

TEST(ParseKg, FixtureACounts) {
  auto kg = fixture_a();
  EXPECT_EQ(kg.num_entities(), 6u);
  EXPECT_EQ(kg.num_facts(), 5u);
  EXPECT_EQ(kg.num_relations(), 2u);
  EXPECT_EQ(kg.num_categories(), 3u);
  // first-appearance ids
  EXPECT_EQ(kg.entity_id("P1"), EntityId(0));
  EXPECT_EQ(kg.entity_id("X2"), EntityId(5));
}

TEST(ParseKg, SchemaViolation) {
  EXPECT_EQ(code_of([] {
              parse_kg("X1\ttarget-by\tP1\n", testing::kFixtureACategories, testing::kFixtureASchema);
            }),
            ErrorCode::kSchemaViolation);
}

TEST(ParseKg, ErrorPaths) {
  EXPECT_EQ(code_of([] { parse_kg("P1\ttarget-by\n", testing::kFixtureACategories, testing::kFixtureASchema); }),
            ErrorCode::kMalformedLine);
  EXPECT_EQ(code_of([] { parse_kg("P9\ttarget-by\tM1\n", testing::kFixtureACategories, testing::kFixtureASchema); }),
            ErrorCode::kUnknownCategory);
  EXPECT_EQ(code_of([] {
              parse_kg("", testing::kFixtureACategories, "r\tProduct\tMalware\nr\tMalware\tMitigation\n");
            }),
            ErrorCode::kDuplicateRelationDecl);
}

TEST(ParseKg, DuplicatesAndCommentsIgnored) {
  auto kg = parse_kg("# header\nP1\ttarget-by\tM1\nP1\ttarget-by\tM1\r\n\n", testing::kFixtureACategories,
                     testing::kFixtureASchema);
  EXPECT_EQ(kg.num_facts(), 1u);
}

TEST(ParseKg, SerializeRoundTrip) {
  auto kg = generate_synthetic_kg({4, 12, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}, 0.2, 5});
  auto back = parse_kg(serialize_triples(kg), serialize_categories(kg), serialize_schema(kg));
  EXPECT_EQ(back.facts(), kg.facts());
  EXPECT_EQ(back.num_entities(), kg.num_entities());
}

TEST(AddFacts, SetSemantics) {
  auto kg = fixture_a();
  EXPECT_EQ(add_facts(kg, {}).facts(), kg.facts());
  const Fact existing{kg.entity_id("P1"), kg.relation_id("target-by"), kg.entity_id("M1")};
  EXPECT_EQ(add_facts(kg, std::vector{existing}).num_facts(), 5u);
  const Fact fresh{kg.entity_id("P2"), kg.relation_id("target-by"), kg.entity_id("M2")};
  auto bigger = add_facts(kg, std::vector{fresh});
  EXPECT_EQ(bigger.num_facts(), 6u);
  EXPECT_TRUE(bigger.indexes_consistent());
  EXPECT_EQ(remove_facts(bigger, std::vector{fresh}).facts(), kg.facts());
}

TEST(AddFacts, Rejections) {
  auto kg = fixture_a();
  const Fact bad{kg.entity_id("P1"), kg.relation_id("mitigate-by"), kg.entity_id("X1")};
  EXPECT_EQ(code_of([&] { add_facts(kg, std::vector{bad}); }), ErrorCode::kSchemaViolation);
  const Fact ghost{EntityId(99), kg.relation_id("target-by"), kg.entity_id("M1")};
  EXPECT_EQ(code_of([&] { add_facts(kg, std::vector{ghost}); }), ErrorCode::kUnknownEntity);
}

TEST(Neighbors, FixtureA) {
  auto kg = fixture_a();
  const auto out = kg.neighbors(kg.entity_id("P1"), Direction::kOut);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], (Fact{kg.entity_id("P1"), kg.relation_id("target-by"), kg.entity_id("M1")}));
  EXPECT_EQ(out[1], (Fact{kg.entity_id("P1"), kg.relation_id("target-by"), kg.entity_id("M2")}));

  const auto in = kg.neighbors(kg.entity_id("X1"), Direction::kIn, kg.relation_id("mitigate-by"));
  ASSERT_EQ(in.size(), 1u);
  EXPECT_EQ(in[0], (Fact{kg.entity_id("M1"), kg.relation_id("mitigate-by"), kg.entity_id("X1")}));

  auto isolated = parse_kg("", testing::kFixtureACategories, testing::kFixtureASchema);
  EXPECT_TRUE(isolated.neighbors(isolated.entity_id("P1"), Direction::kOut).empty());
  EXPECT_EQ(code_of([&] { kg.neighbors(EntityId(42), Direction::kIn); }), ErrorCode::kUnknownEntity);
}

TEST(Plausible, FixtureSchema) {
  auto kg = fixture_a();
  auto id = [&](const char* n) { return kg.entity_id(n); };
  EXPECT_TRUE(kg.plausible(id("P1"), kg.relation_id("target-by"), id("M2")));
  EXPECT_FALSE(kg.plausible(id("M1"), kg.relation_id("target-by"), id("P1")));
  EXPECT_FALSE(kg.plausible(id("P1"), kg.relation_id("mitigate-by"), id("X1")));
  EXPECT_EQ(code_of([&] { kg.plausible(id("P1"), RelationId(7), id("M1")); }), ErrorCode::kUnknownRelation);
}

TEST(Surrogate, Extremes) {
  auto kg = fixture_a();
  EXPECT_EQ(derive_surrogate(kg, {0.0, 3}).facts(), kg.facts());
  auto empty = derive_surrogate(kg, {1.0, 3});
  EXPECT_EQ(empty.num_facts(), 0u);
  EXPECT_EQ(empty.num_entities(), 6u);
  EXPECT_EQ(code_of([&] { derive_surrogate(kg, {1.5, 3}); }), ErrorCode::kInvalidSpec);
}

TEST(Surrogate, FixtureGolden) {
  auto kg = fixture_a();
  auto s = derive_surrogate(kg, {0.4, 7});
  ASSERT_EQ(s.num_facts(), 3u);
  for (const Fact& f : s.facts()) EXPECT_TRUE(kg.contains(f));
  // Pinned from the first run of the sampler.
  std::vector<std::string> got;
  for (const Fact& f : s.facts()) got.push_back(s.describe(f));
  EXPECT_EQ(got, (std::vector<std::string>{"<P1, target-by, M1>", "<P1, target-by, M2>", "<P2, target-by, M1>"}));
  EXPECT_EQ(derive_surrogate(kg, {0.4, 7}).facts(), s.facts());
}

TEST(Surrogate, SubsetAndSizeProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    auto kg = generate_synthetic_kg({3, 8, {{0, 1}, {1, 2}}, 0.4, rng()});
    const double f = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto seed = rng();
    auto s = derive_surrogate(kg, {f, seed});
    EXPECT_EQ(s.num_facts(), static_cast<std::size_t>(std::llround(kg.num_facts() * (1.0 - f))));
    EXPECT_TRUE(std::includes(kg.facts().begin(), kg.facts().end(), s.facts().begin(), s.facts().end()));
    EXPECT_EQ(derive_surrogate(kg, {f, seed}).facts(), s.facts());
    EXPECT_TRUE(s.indexes_consistent());
  }
}

TEST(Synthetic, DensityExtremes) {
  EXPECT_EQ(generate_synthetic_kg({3, 10, {{0, 1}, {1, 2}}, 0.0, 1}).num_facts(), 0u);
  EXPECT_EQ(generate_synthetic_kg({3, 10, {{0, 1}, {1, 2}}, 1.0, 1}).num_facts(), 200u);
}

TEST(Synthetic, BinomialBound) {
  auto kg = generate_synthetic_kg({3, 10, {{0, 1}, {1, 2}}, 0.3, 1});
  EXPECT_GE(kg.num_facts(), 40u);
  EXPECT_LE(kg.num_facts(), 80u);
  for (const Fact& f : kg.facts()) EXPECT_TRUE(kg.plausible(f));
  EXPECT_TRUE(kg.indexes_consistent());
  EXPECT_EQ(generate_synthetic_kg({3, 10, {{0, 1}, {1, 2}}, 0.3, 1}).facts(), kg.facts());
}

TEST(Synthetic, BlockStructureKeepsExpectedCount) {
  // 4 arcs x 100 x 100 pairs x 0.05 = 2000 expected facts.
  SyntheticSpec spec{5, 100, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, 0.05, 9, 10, 0.8};
  auto kg = generate_synthetic_kg(spec);
  EXPECT_NEAR(static_cast<double>(kg.num_facts()), 2000.0, 150.0);
  EXPECT_EQ(code_of([&] {
              auto bad = spec;
              bad.fact_density = 0.5;
              generate_synthetic_kg(bad);
            }),
            ErrorCode::kInvalidSpec);
  EXPECT_EQ(code_of([] { generate_synthetic_kg({2, 5, {{0, 3}}, 0.5, 1}); }), ErrorCode::kInvalidSpec);
}

}  // namespace
}  // namespace kgrlab
