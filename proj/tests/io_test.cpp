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

#include <filesystem>

#include "fixtures.hpp"
#include "kgrlab/io.hpp"
#include "oracles.hpp"

namespace kgrlab {
namespace {

using testing::code_of;
using testing::fixture_a;
using testing::fixture_a_extended;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("kgrlab_io_" + name)).string();
}

TEST(Io, ModelRoundTripIsExact) {
  auto kg = oracle::tiny_graph(4);
  Model m = init_model(kg, 5, 3, 11);
  m.embedding(EntityId{0})[0] = 0.1 + 0.2;  // not exactly representable in short decimal
  const Model back = model_from_json(parse_json(model_to_json(m).dump(), "model"));
  EXPECT_TRUE(back == m);

  const std::string path = temp_path("model.json");
  save_model(m, path);
  EXPECT_TRUE(load_model(path) == m);
  std::filesystem::remove(path);
}

TEST(Io, ModelRejectsForeignAndMalformedFiles) {
  auto kg = fixture_a();
  Json j = model_to_json(init_model(kg, 4, 1, 1));
  Json wrong = j;
  wrong["format"] = "something-else";
  EXPECT_EQ(code_of([&] { model_from_json(wrong); }), ErrorCode::kIoError);
  wrong = j;
  wrong["version"] = kModelFormatVersion + 1;
  EXPECT_EQ(code_of([&] { model_from_json(wrong); }), ErrorCode::kIoError);
  wrong = j;
  wrong["embeddings"].erase(0);
  EXPECT_EQ(code_of([&] { model_from_json(wrong); }), ErrorCode::kShapeMismatch);
  wrong = j;
  wrong.erase("intersection");
  EXPECT_EQ(code_of([&] { model_from_json(wrong); }), ErrorCode::kIoError);
  EXPECT_EQ(code_of([&] { parse_json("{not json", "x"); }), ErrorCode::kIoError);
  EXPECT_EQ(code_of([&] { read_file(temp_path("does_not_exist")); }), ErrorCode::kIoError);
}

TEST(Io, QueryAndAnsweredSetRoundTrip) {
  auto kg = fixture_a_extended();
  std::vector<AnsweredQuery> set;
  for (const auto& t : {shape_template(1, 1), shape_template(1, 2), shape_template(2, 1)})
    for (auto& aq : sample_queries(kg, t, 10, 3, SampleMode::kTest)) set.push_back(aq);
  ASSERT_FALSE(set.empty());
  const auto back = answered_set_from_json(kg, parse_json(answered_set_to_json(kg, set).dump(), "set"));
  ASSERT_EQ(back.size(), set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(back[i].query, set[i].query);
    EXPECT_EQ(back[i].truth, set[i].truth);
    EXPECT_EQ(back[i].supporting, set[i].supporting);
  }
}

TEST(Io, QueryFromJsonNamesUnknownEntities) {
  auto kg = fixture_a();
  Json j = query_to_json(kg, testing::q_chain(kg, "P1"));
  j["nodes"][0]["entity"] = "Nobody";
  EXPECT_EQ(code_of([&] { query_from_json(kg, j); }), ErrorCode::kUnknownEntity);
  j = query_to_json(kg, testing::q_chain(kg, "P1"));
  j["edges"][0]["relation"] = "unrelated";
  EXPECT_EQ(code_of([&] { query_from_json(kg, j); }), ErrorCode::kUnknownRelation);
}

TEST(Io, KgFilesRoundTrip) {
  auto kg = fixture_a_extended();
  const std::string t = temp_path("t.tsv"), c = temp_path("c.tsv"), s = temp_path("s.tsv");
  save_kg(kg, t, c, s);
  auto back = load_kg(t, c, s);
  EXPECT_EQ(serialize_triples(back), serialize_triples(kg));
  EXPECT_EQ(serialize_categories(back), serialize_categories(kg));
  EXPECT_EQ(serialize_schema(back), serialize_schema(kg));
  for (const auto& p : {t, c, s}) std::filesystem::remove(p);
}

TEST(Io, PoisonPlanFactsRoundTrip) {
  auto kg = fixture_a();
  PoisonPlan plan;
  plan.trigger = make_trigger(kg, kg.entity_id("P1"), {kg.relation_id("target-by")});
  plan.target_answer = kg.entity_id("M2");
  plan.facts = {{{kg.entity_id("P2"), kg.relation_id("target-by"), kg.entity_id("M2")}, -0.5},
                {{kg.entity_id("M2"), kg.relation_id("mitigate-by"), kg.entity_id("X1")}, -0.75}};
  KpConfig cfg;
  cfg.n_g = 2;
  const Json j = parse_json(poison_plan_to_json(kg, plan, cfg).dump(), "plan");
  EXPECT_EQ(poison_facts_from_json(kg, j), plan.fact_list());
  EXPECT_EQ(j["target_answer"], "M2");
  EXPECT_EQ(j["budget"], 2);
  EXPECT_EQ(trigger_from_json(kg, j["trigger"]), plan.trigger);
}

}  // namespace
}  // namespace kgrlab
