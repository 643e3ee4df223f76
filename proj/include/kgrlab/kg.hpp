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

// Typed multi-relational graph store.
//
// A KnowledgeGraph owns three catalogs (categories, entities, relations) and
// a deduplicated fact set. Every fact is schema-plausible: the head and tail
// categories match the relation's declared arc. Out/in adjacency lists are
// rebuilt from the fact set on construction, so the graph is immutable and
// every "mutation" returns a fresh value.

#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgrlab/error.hpp"

namespace kgrlab {

enum class EntityId : std::uint32_t {};
enum class RelationId : std::uint32_t {};
enum class CategoryId : std::uint32_t {};

constexpr std::size_t index(EntityId id) { return static_cast<std::size_t>(id); }
constexpr std::size_t index(RelationId id) { return static_cast<std::size_t>(id); }
constexpr std::size_t index(CategoryId id) { return static_cast<std::size_t>(id); }

struct Entity {
  std::string name;
  CategoryId category;
};

struct RelationType {
  std::string name;
  CategoryId head_category;
  CategoryId tail_category;
};

// Ordered by (head, relation, tail); this is the "fact key" used for every
// deterministic tie break in the library.
struct Fact {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend auto operator<=>(const Fact&, const Fact&) = default;
};

enum class Direction { kIn, kOut };

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Validates every fact against the schema and deduplicates.
  KnowledgeGraph(std::vector<std::string> categories, std::vector<Entity> entities,
                 std::vector<RelationType> relations, std::vector<Fact> facts)
      : categories_(std::move(categories)),
        entities_(std::move(entities)),
        relations_(std::move(relations)),
        facts_(std::move(facts)) {
    for (std::size_t i = 0; i < categories_.size(); ++i) category_index_.emplace(categories_[i], i);
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      if (index(entities_[i].category) >= categories_.size())
        throw Error(ErrorCode::kUnknownCategory, entities_[i].name);
      entity_index_.emplace(entities_[i].name, i);
    }
    for (std::size_t i = 0; i < relations_.size(); ++i) {
      const auto& r = relations_[i];
      if (index(r.head_category) >= categories_.size() || index(r.tail_category) >= categories_.size())
        throw Error(ErrorCode::kUnknownCategory, r.name);
      if (!relation_index_.emplace(r.name, i).second)
        throw Error(ErrorCode::kDuplicateRelationDecl, r.name);
    }
    std::sort(facts_.begin(), facts_.end());
    facts_.erase(std::unique(facts_.begin(), facts_.end()), facts_.end());
    for (const Fact& f : facts_) {
      check_entity(f.head);
      check_entity(f.tail);
      check_relation(f.relation);
      if (!plausible(f.head, f.relation, f.tail)) throw Error(ErrorCode::kSchemaViolation, describe(f));
    }
    rebuild_indexes();
  }

  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_relations() const { return relations_.size(); }
  std::size_t num_categories() const { return categories_.size(); }
  std::size_t num_facts() const { return facts_.size(); }

  const std::vector<std::string>& categories() const { return categories_; }
  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<RelationType>& relations() const { return relations_; }
  // Sorted ascending by fact key.
  const std::vector<Fact>& facts() const { return facts_; }

  const Entity& entity(EntityId e) const {
    check_entity(e);
    return entities_[index(e)];
  }
  const RelationType& relation(RelationId r) const {
    check_relation(r);
    return relations_[index(r)];
  }
  CategoryId category_of(EntityId e) const { return entity(e).category; }
  const std::string& category_name(CategoryId c) const {
    check_category(c);
    return categories_[index(c)];
  }

  std::optional<EntityId> find_entity(std::string_view name) const {
    auto it = entity_index_.find(std::string(name));
    if (it == entity_index_.end()) return std::nullopt;
    return EntityId(it->second);
  }
  std::optional<RelationId> find_relation(std::string_view name) const {
    auto it = relation_index_.find(std::string(name));
    if (it == relation_index_.end()) return std::nullopt;
    return RelationId(it->second);
  }
  std::optional<CategoryId> find_category(std::string_view name) const {
    auto it = category_index_.find(std::string(name));
    if (it == category_index_.end()) return std::nullopt;
    return CategoryId(it->second);
  }

  EntityId entity_id(std::string_view name) const {
    if (auto e = find_entity(name)) return *e;
    throw Error(ErrorCode::kUnknownEntity, std::string(name));
  }
  RelationId relation_id(std::string_view name) const {
    if (auto r = find_relation(name)) return *r;
    throw Error(ErrorCode::kUnknownRelation, std::string(name));
  }
  CategoryId category_id(std::string_view name) const {
    if (auto c = find_category(name)) return *c;
    throw Error(ErrorCode::kUnknownCategory, std::string(name));
  }

  // Entities of one category, ascending by id.
  const std::vector<EntityId>& entities_of(CategoryId c) const {
    check_category(c);
    return by_category_[index(c)];
  }

  bool contains(const Fact& f) const { return std::binary_search(facts_.begin(), facts_.end(), f); }

  bool plausible(EntityId head, RelationId r, EntityId tail) const {
    const RelationType& rel = relation(r);
    return category_of(head) == rel.head_category && category_of(tail) == rel.tail_category;
  }
  bool plausible(const Fact& f) const { return plausible(f.head, f.relation, f.tail); }

  // Incident facts in ascending fact-key order, optionally filtered by relation.
  std::vector<Fact> neighbors(EntityId v, Direction dir,
                              std::optional<RelationId> r = std::nullopt) const {
    check_entity(v);
    if (r) check_relation(*r);
    const auto& list = dir == Direction::kOut ? out_[index(v)] : in_[index(v)];
    std::vector<Fact> result;
    for (const Fact& f : list)
      if (!r || f.relation == *r) result.push_back(f);
    return result;
  }

  // Unfiltered views; sorted ascending by fact key.
  std::span<const Fact> out_facts(EntityId v) const { return out_[index(v)]; }
  std::span<const Fact> in_facts(EntityId v) const { return in_[index(v)]; }

  // Tails t with <v, r, t>; ascending.
  std::vector<EntityId> successors(EntityId v, RelationId r) const {
    std::vector<EntityId> result;
    for (const Fact& f : out_[index(v)])
      if (f.relation == r) result.push_back(f.tail);
    return result;
  }

  // Same catalogs, different fact set.
  KnowledgeGraph with_facts(std::vector<Fact> facts) const {
    return KnowledgeGraph(categories_, entities_, relations_, std::move(facts));
  }

  std::string describe(const Fact& f) const {
    auto name = [&](EntityId e) {
      return index(e) < entities_.size() ? entities_[index(e)].name : "#" + std::to_string(index(e));
    };
    std::string rel = index(f.relation) < relations_.size() ? relations_[index(f.relation)].name
                                                            : "#" + std::to_string(index(f.relation));
    return "<" + name(f.head) + ", " + rel + ", " + name(f.tail) + ">";
  }

  // True iff the stored adjacency lists equal those rebuilt from the fact set.
  bool indexes_consistent() const {
    KnowledgeGraph copy = *this;
    copy.rebuild_indexes();
    return copy.out_ == out_ && copy.in_ == in_ && copy.by_category_ == by_category_;
  }

  void check_entity(EntityId e) const {
    if (index(e) >= entities_.size()) throw Error(ErrorCode::kUnknownEntity, "#" + std::to_string(index(e)));
  }
  void check_relation(RelationId r) const {
    if (index(r) >= relations_.size())
      throw Error(ErrorCode::kUnknownRelation, "#" + std::to_string(index(r)));
  }
  void check_category(CategoryId c) const {
    if (index(c) >= categories_.size())
      throw Error(ErrorCode::kUnknownCategory, "#" + std::to_string(index(c)));
  }

 private:
  void rebuild_indexes() {
    out_.assign(entities_.size(), {});
    in_.assign(entities_.size(), {});
    by_category_.assign(categories_.size(), {});
    for (const Fact& f : facts_) {
      out_[index(f.head)].push_back(f);
      in_[index(f.tail)].push_back(f);
    }
    // facts_ is sorted by (head, relation, tail); in-lists need their own sort.
    for (auto& list : in_) std::sort(list.begin(), list.end());
    for (std::size_t i = 0; i < entities_.size(); ++i)
      by_category_[index(entities_[i].category)].push_back(EntityId(i));
  }

  std::vector<std::string> categories_;
  std::vector<Entity> entities_;
  std::vector<RelationType> relations_;
  std::vector<Fact> facts_;

  std::unordered_map<std::string, std::size_t> category_index_;
  std::unordered_map<std::string, std::size_t> entity_index_;
  std::unordered_map<std::string, std::size_t> relation_index_;

  std::vector<std::vector<Fact>> out_;
  std::vector<std::vector<Fact>> in_;
  std::vector<std::vector<EntityId>> by_category_;
};

namespace detail {

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    fields.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

// Calls fn(line_no, fields) for every non-blank, non-comment line.
template <typename Fn>
void for_each_record(std::string_view text, std::size_t expected_fields, const char* what, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    auto fields = split_tabs(line);
    if (fields.size() != expected_fields || std::any_of(fields.begin(), fields.end(),
                                                        [](const std::string& s) { return s.empty(); }))
      throw Error(ErrorCode::kMalformedLine, std::string(what) + " line " + std::to_string(line_no));
    fn(line_no, fields);
    if (end == text.size()) break;
  }
}

}  // namespace detail

// Parses the three TSV inputs. Category ids are assigned in first-appearance
// order over the categories file then the schema; entity ids follow the
// categories file; relation ids follow the schema.
inline KnowledgeGraph parse_kg(std::string_view triples_text, std::string_view categories_text,
                               std::string_view schema_text) {
  std::vector<std::string> categories;
  std::unordered_map<std::string, CategoryId> category_ids;
  auto declare_category = [&](const std::string& name) {
    auto [it, inserted] = category_ids.emplace(name, CategoryId(categories.size()));
    if (inserted) categories.push_back(name);
    return it->second;
  };

  std::vector<Entity> entities;
  std::unordered_map<std::string, EntityId> entity_ids;
  detail::for_each_record(categories_text, 2, "categories", [&](std::size_t line_no, const auto& f) {
    CategoryId c = declare_category(f[1]);
    auto [it, inserted] = entity_ids.emplace(f[0], EntityId(entities.size()));
    if (inserted) {
      entities.push_back({f[0], c});
    } else if (entities[index(it->second)].category != c) {
      throw Error(ErrorCode::kMalformedLine,
                  "categories line " + std::to_string(line_no) + ": entity " + f[0] + " has two categories");
    }
  });

  std::vector<RelationType> relations;
  std::unordered_map<std::string, RelationId> relation_ids;
  detail::for_each_record(schema_text, 3, "schema", [&](std::size_t, const auto& f) {
    if (relation_ids.contains(f[0])) throw Error(ErrorCode::kDuplicateRelationDecl, f[0]);
    relation_ids.emplace(f[0], RelationId(relations.size()));
    relations.push_back({f[0], declare_category(f[1]), declare_category(f[2])});
  });

  std::vector<Fact> facts;
  detail::for_each_record(triples_text, 3, "triples", [&](std::size_t line_no, const auto& f) {
    auto head = entity_ids.find(f[0]);
    if (head == entity_ids.end()) throw Error(ErrorCode::kUnknownCategory, f[0]);
    auto tail = entity_ids.find(f[2]);
    if (tail == entity_ids.end()) throw Error(ErrorCode::kUnknownCategory, f[2]);
    auto rel = relation_ids.find(f[1]);
    if (rel == relation_ids.end())
      throw Error(ErrorCode::kMalformedLine,
                  "triples line " + std::to_string(line_no) + ": undeclared relation " + f[1]);
    const RelationType& r = relations[index(rel->second)];
    if (entities[index(head->second)].category != r.head_category ||
        entities[index(tail->second)].category != r.tail_category)
      throw Error(ErrorCode::kSchemaViolation, "<" + f[0] + ", " + f[1] + ", " + f[2] + ">");
    facts.push_back({head->second, rel->second, tail->second});
  });

  return KnowledgeGraph(std::move(categories), std::move(entities), std::move(relations), std::move(facts));
}

inline std::string serialize_triples(const KnowledgeGraph& kg) {
  std::string out;
  for (const Fact& f : kg.facts()) {
    out += kg.entity(f.head).name;
    out += '\t';
    out += kg.relation(f.relation).name;
    out += '\t';
    out += kg.entity(f.tail).name;
    out += '\n';
  }
  return out;
}

inline std::string serialize_categories(const KnowledgeGraph& kg) {
  std::string out;
  for (const Entity& e : kg.entities()) out += e.name + '\t' + kg.category_name(e.category) + '\n';
  return out;
}

inline std::string serialize_schema(const KnowledgeGraph& kg) {
  std::string out;
  for (const RelationType& r : kg.relations())
    out += r.name + '\t' + kg.category_name(r.head_category) + '\t' + kg.category_name(r.tail_category) + '\n';
  return out;
}

// Union of fact sets. New entities are never created.
inline KnowledgeGraph add_facts(const KnowledgeGraph& kg, std::span<const Fact> facts) {
  std::vector<Fact> merged = kg.facts();
  for (const Fact& f : facts) {
    kg.check_entity(f.head);
    kg.check_entity(f.tail);
    kg.check_relation(f.relation);
    if (!kg.plausible(f)) throw Error(ErrorCode::kSchemaViolation, kg.describe(f));
    merged.push_back(f);
  }
  return kg.with_facts(std::move(merged));
}

inline KnowledgeGraph remove_facts(const KnowledgeGraph& kg, std::span<const Fact> facts) {
  std::vector<Fact> drop(facts.begin(), facts.end());
  std::sort(drop.begin(), drop.end());
  std::vector<Fact> kept;
  kept.reserve(kg.num_facts());
  std::set_difference(kg.facts().begin(), kg.facts().end(), drop.begin(), drop.end(),
                      std::back_inserter(kept));
  return kg.with_facts(std::move(kept));
}

struct SurrogateSpec {
  double remove_fraction = 0.0;
  std::uint64_t seed = 0;
};

// Uniformly samples round(|E| * (1 - remove_fraction)) facts; catalogs shared.
inline KnowledgeGraph derive_surrogate(const KnowledgeGraph& kg, const SurrogateSpec& spec) {
  if (!(spec.remove_fraction >= 0.0 && spec.remove_fraction <= 1.0))
    throw Error(ErrorCode::kInvalidSpec, "remove_fraction must lie in [0,1]");
  const auto& facts = kg.facts();
  const auto keep = static_cast<std::size_t>(std::llround(facts.size() * (1.0 - spec.remove_fraction)));
  std::vector<std::size_t> order(facts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Fact> kept;
  kept.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) kept.push_back(facts[order[i]]);
  return kg.with_facts(std::move(kept));
}

struct SyntheticSpec {
  std::size_t n_categories = 0;
  std::size_t entities_per_category = 0;
  std::vector<std::pair<std::size_t, std::size_t>> relation_arcs;  // (head_cat, tail_cat)
  double fact_density = 0.0;
  std::uint64_t seed = 0;
  // Optional latent block structure. Each category is split into `clusters`
  // contiguous blocks and every arc maps head block i to a seeded tail block.
  // A pair inside a mapped block is linked with probability
  // density * (affinity * clusters + 1 - affinity), any other pair with
  // density * (1 - affinity); the expected fact count stays
  // density * sum(|head| * |tail|). clusters = 1 is the uniform model.
  std::size_t clusters = 1;
  double affinity = 0.0;
};

inline KnowledgeGraph generate_synthetic_kg(const SyntheticSpec& spec) {
  if (spec.n_categories == 0 || spec.entities_per_category == 0)
    throw Error(ErrorCode::kInvalidSpec, "category and entity counts must be positive");
  if (!(spec.fact_density >= 0.0 && spec.fact_density <= 1.0))
    throw Error(ErrorCode::kInvalidSpec, "fact_density must lie in [0,1]");
  if (spec.clusters == 0 || spec.clusters > spec.entities_per_category)
    throw Error(ErrorCode::kInvalidSpec, "clusters must lie in [1, entities_per_category]");
  if (!(spec.affinity >= 0.0 && spec.affinity <= 1.0))
    throw Error(ErrorCode::kInvalidSpec, "affinity must lie in [0,1]");
  const double k = static_cast<double>(spec.clusters);
  const double p_in = spec.fact_density * (spec.affinity * k + 1.0 - spec.affinity);
  const double p_out = spec.fact_density * (1.0 - spec.affinity);
  if (p_in > 1.0) throw Error(ErrorCode::kInvalidSpec, "density * affinity * clusters exceeds 1");
  for (auto [h, t] : spec.relation_arcs)
    if (h >= spec.n_categories || t >= spec.n_categories)
      throw Error(ErrorCode::kInvalidSpec, "relation arc references an undeclared category");

  const std::size_t n = spec.entities_per_category;
  std::vector<std::string> categories;
  std::vector<Entity> entities;
  for (std::size_t c = 0; c < spec.n_categories; ++c) {
    categories.push_back("C" + std::to_string(c));
    for (std::size_t i = 0; i < n; ++i)
      entities.push_back({"c" + std::to_string(c) + "_e" + std::to_string(i), CategoryId(c)});
  }
  std::vector<RelationType> relations;
  for (std::size_t r = 0; r < spec.relation_arcs.size(); ++r) {
    auto [h, t] = spec.relation_arcs[r];
    relations.push_back({"r" + std::to_string(r), CategoryId(h), CategoryId(t)});
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto block_of = [&](std::size_t i) { return i * spec.clusters / n; };
  std::vector<Fact> facts;
  for (std::size_t r = 0; r < spec.relation_arcs.size(); ++r) {
    auto [h, t] = spec.relation_arcs[r];
    std::vector<std::size_t> block_map(spec.clusters);
    for (std::size_t b = 0; b < spec.clusters; ++b) block_map[b] = b;
    std::shuffle(block_map.begin(), block_map.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double p = block_map[block_of(i)] == block_of(j) ? p_in : p_out;
        if (coin(rng) < p) facts.push_back({EntityId(h * n + i), RelationId(r), EntityId(t * n + j)});
      }
    }
  }
  return KnowledgeGraph(std::move(categories), std::move(entities), std::move(relations), std::move(facts));
}

}  // namespace kgrlab
