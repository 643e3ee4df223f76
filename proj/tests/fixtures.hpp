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

// Shared test graphs.

#pragma once

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "kgrlab/kg.hpp"
#include "kgrlab/query.hpp"

namespace kgrlab::testing {

// The code of the Error thrown by fn; a test failure when nothing is thrown.
ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIoError;
}

inline constexpr const char* kFixtureATriples =
    "# products, malware, mitigations\n"
    "P1\ttarget-by\tM1\n"
    "P1\ttarget-by\tM2\n"
    "P2\ttarget-by\tM1\n"
    "M1\tmitigate-by\tX1\n"
    "M2\tmitigate-by\tX2\n";

inline constexpr const char* kFixtureACategories =
    "P1\tProduct\n"
    "P2\tProduct\n"
    "M1\tMalware\n"
    "M2\tMalware\n"
    "X1\tMitigation\n"
    "X2\tMitigation\n";

inline constexpr const char* kFixtureASchema =
    "target-by\tProduct\tMalware\n"
    "mitigate-by\tMalware\tMitigation\n";

inline KnowledgeGraph fixture_a() { return parse_kg(kFixtureATriples, kFixtureACategories, kFixtureASchema); }

// FIXTURE-A plus an Attack category linked to malware (launch-by), so that
// baits have somewhere to grow and poison has controls to compare against.
inline KnowledgeGraph fixture_a_extended() {
  return parse_kg(std::string(kFixtureATriples) +
                      "RCE\tlaunch-by\tM1\n"
                      "PDoS\tlaunch-by\tM2\n"
                      "RCE\tlaunch-by\tM2\n",
                  std::string(kFixtureACategories) + "RCE\tAttack\nPDoS\tAttack\n",
                  std::string(kFixtureASchema) + "launch-by\tAttack\tMalware\n");
}

inline Query q_chain(const KnowledgeGraph& kg, const std::string& anchor) {
  return build_query(kg,
                     {{NodeKind::kAnchor, kg.entity_id(anchor), std::nullopt},
                      {NodeKind::kVariable, std::nullopt, std::nullopt},
                      {NodeKind::kTarget, std::nullopt, std::nullopt}},
                     {{0, kg.relation_id("target-by"), 1}, {1, kg.relation_id("mitigate-by"), 2}});
}

// P1 -target-by-> v, P2 -target-by-> v, v -mitigate-by-> ?
inline Query q_intersection(const KnowledgeGraph& kg) {
  return build_query(kg,
                     {{NodeKind::kAnchor, kg.entity_id("P1"), std::nullopt},
                      {NodeKind::kAnchor, kg.entity_id("P2"), std::nullopt},
                      {NodeKind::kVariable, std::nullopt, std::nullopt},
                      {NodeKind::kTarget, std::nullopt, std::nullopt}},
                     {{0, kg.relation_id("target-by"), 2},
                      {1, kg.relation_id("target-by"), 2},
                      {2, kg.relation_id("mitigate-by"), 3}});
}

inline std::vector<std::string> names(const KnowledgeGraph& kg, const std::vector<EntityId>& ids) {
  std::vector<std::string> out;
  for (EntityId e : ids) out.push_back(kg.entity(e).name);
  return out;
}

}  // namespace kgrlab::testing
