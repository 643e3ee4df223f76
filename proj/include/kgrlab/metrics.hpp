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
#include <cstdio>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "kgrlab/error.hpp"
#include "kgrlab/model.hpp"

namespace kgrlab {

// Rankings of one query group. For answer-forcing evaluation each ranking's
// truth is {a*}.
struct EvalResult {
  std::vector<Ranking> rankings;
};

namespace detail {

// 1-based positions of the truth entities present in the ranking.
inline std::vector<std::size_t> truth_ranks(const Ranking& r) {
  std::vector<std::size_t> ranks;
  for (std::size_t i = 0; i < r.entries.size(); ++i)
    if (std::binary_search(r.truth.begin(), r.truth.end(), r.entries[i].first)) ranks.push_back(i + 1);
  return ranks;
}

inline void require_nonempty(const EvalResult& results) {
  if (results.rankings.empty()) throw Error(ErrorCode::kEmptyResults, "no rankings");
}

}  // namespace detail

// Mean reciprocal rank. By default each query averages 1/rank over all of
// its truth entities (absent ones count 0); best_rank_only switches to the
// reciprocal of the best-ranked truth.
inline double mrr(const EvalResult& results, bool best_rank_only = false) {
  detail::require_nonempty(results);
  double total = 0.0;
  for (const Ranking& r : results.rankings) {
    if (r.truth.empty()) continue;
    auto ranks = detail::truth_ranks(r);
    if (best_rank_only) {
      total += ranks.empty() ? 0.0 : 1.0 / static_cast<double>(ranks.front());
    } else {
      double sum = 0.0;
      for (std::size_t k : ranks) sum += 1.0 / static_cast<double>(k);
      total += sum / static_cast<double>(r.truth.size());
    }
  }
  return total / static_cast<double>(results.rankings.size());
}

// Fraction of queries with at least one truth entity in the top k.
inline double hit_at_k(const EvalResult& results, std::size_t k) {
  detail::require_nonempty(results);
  if (k == 0) throw Error(ErrorCode::kInvalidK, "k must be >= 1");
  std::size_t hits = 0;
  for (const Ranking& r : results.rankings) {
    const std::size_t limit = std::min(k, r.entries.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (std::binary_search(r.truth.begin(), r.truth.end(), r.entries[i].first)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(results.rankings.size());
}

// Binary-relevance NDCG@k averaged over queries.
inline double ndcg_at_k(const EvalResult& results, std::size_t k) {
  detail::require_nonempty(results);
  if (k == 0) throw Error(ErrorCode::kInvalidK, "k must be >= 1");
  double total = 0.0;
  for (const Ranking& r : results.rankings) {
    double dcg = 0.0;
    const std::size_t limit = std::min(k, r.entries.size());
    for (std::size_t i = 0; i < limit; ++i)
      if (std::binary_search(r.truth.begin(), r.truth.end(), r.entries[i].first))
        dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    double idcg = 0.0;
    const std::size_t ideal = std::min(k, r.truth.size());
    for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    if (idcg > 0.0) total += dcg / idcg;
  }
  return total / static_cast<double>(results.rankings.size());
}

struct MetricValue {
  std::string metric;  // "mrr", "hit", "ndcg"
  std::size_t k = 0;   // 0 for mrr
  std::string group;
  double value = 0.0;

  friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

struct DeltaRow {
  std::string metric;
  std::size_t k = 0;
  std::string group;
  double before = 0.0;
  double after = 0.0;
  double delta = 0.0;

  friend bool operator==(const DeltaRow&, const DeltaRow&) = default;
};

inline std::vector<MetricValue> summarize(const EvalResult& results, const std::string& group,
                                          const std::vector<std::size_t>& hit_ks,
                                          const std::vector<std::size_t>& ndcg_ks) {
  std::vector<MetricValue> values;
  values.push_back({"mrr", 0, group, mrr(results)});
  for (std::size_t k : hit_ks) values.push_back({"hit", k, group, hit_at_k(results, k)});
  for (std::size_t k : ndcg_ks) values.push_back({"ndcg", k, group, ndcg_at_k(results, k)});
  return values;
}

// Pairs up metrics by (metric, k, group); delta = after - before.
inline std::vector<DeltaRow> delta_report(const std::vector<MetricValue>& before,
                                          const std::vector<MetricValue>& after) {
  if (before.size() != after.size()) throw Error(ErrorCode::kMismatchedSets, "metric counts differ");
  std::map<std::tuple<std::string, std::size_t, std::string>, double> lookup;
  for (const auto& v : after) lookup[{v.metric, v.k, v.group}] = v.value;
  std::vector<DeltaRow> rows;
  for (const auto& b : before) {
    auto it = lookup.find({b.metric, b.k, b.group});
    if (it == lookup.end()) throw Error(ErrorCode::kMismatchedSets, b.metric + "/" + b.group);
    rows.push_back({b.metric, b.k, b.group, b.value, it->second, it->second - b.value});
  }
  return rows;
}

inline std::string metrics_csv(const std::vector<DeltaRow>& rows) {
  std::string out = "metric,k,group,before,after,delta\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%s,%.6f,%.6f,%.6f\n", r.metric.c_str(), r.k, r.group.c_str(), r.before,
                  r.after, r.delta);
    out += buf;
  }
  return out;
}

// Two decimals without the leading zero: 0.39 -> ".39", 1 -> "1.00".
inline std::string format_metric(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", std::abs(value));
  std::string s = buf;
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  return value < 0 && s != ".00" ? "-" + s : s;
}

// ".35↑" for +0.35, ".26↓" for -0.26, ".00" when the rounded delta is zero.
inline std::string format_delta(double delta) {
  std::string s = format_metric(std::abs(delta));
  if (s == ".00") return s;
  return s + (delta > 0 ? "↑" : "↓");
}

// Table cell: after value with the signed change, e.g. ".39(.35↑)".
inline std::string format_cell(double after, double delta) {
  return format_metric(after) + "(" + format_delta(delta) + ")";
}

}  // namespace kgrlab
