#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mamo/data.hpp"
#include "mamo/error.hpp"

namespace mamo {

struct RatedPair {
  double predicted = 0.0;
  double actual = 0.0;
};

/// Mean absolute error; predictions are clamped to the rating range before
/// differencing (evaluation only — training scores stay unclamped).
inline double mae(std::span<const RatedPair> pairs, double rating_min, double rating_max) {
  if (pairs.empty()) throw ContractError("mae: empty input");
  double total = 0.0;
  for (const auto& p : pairs) {
    total += std::abs(std::clamp(p.predicted, rating_min, rating_max) - p.actual);
  }
  return total / static_cast<double>(pairs.size());
}

// DCG@N with base-2 logarithm over the actual ratings ordered by predicted
// score (descending, ties kept in input order).
inline double dcg_at_n(std::span<const double> ordered_actuals, std::size_t n) {
  double total = 0.0;
  for (std::size_t i = 0; i < n && i < ordered_actuals.size(); ++i) {
    total += (std::exp2(ordered_actuals[i]) - 1.0) /
             std::log2(static_cast<double>(i) + 2.0);
  }
  return total;
}

/// NDCG@N of one result list: DCG of actual ratings sorted by predicted
/// score over the ideal DCG. Returns 1 when the ideal DCG is zero.
inline double ndcg_at_n(std::span<const RatedPair> pairs, std::size_t n) {
  if (n < 1) throw ContractError("ndcg_at_n: N must be >= 1");
  if (pairs.size() < n) {
    throw ContractError("ndcg_at_n: N = " + std::to_string(n) + " exceeds list size " +
                        std::to_string(pairs.size()));
  }
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pairs[a].predicted > pairs[b].predicted; });
  Vec by_predicted(pairs.size());
  Vec ideal(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    by_predicted[i] = pairs[order[i]].actual;
    ideal[i] = pairs[i].actual;
  }
  std::stable_sort(ideal.begin(), ideal.end(), std::greater<double>());
  const double dcg = dcg_at_n(by_predicted, n);
  const double idcg = dcg_at_n(ideal, n);
  if (idcg == 0.0) return 1.0;
  return dcg / idcg;
}

struct TaggedPair {
  Scenario scenario = Scenario::warm_warm;
  double predicted = 0.0;
  double actual = 0.0;
};

struct ScenarioResult {
  std::size_t count = 0;
  double mae = 0.0;
  std::optional<double> ndcg;  // absent when the scenario has fewer than N records
};

struct MetricsReport {
  std::size_t ndcg_n = 3;
  std::array<ScenarioResult, 4> per_scenario;  // indexed by Scenario
  ScenarioResult overall;
};

// NDCG over a concatenated record stream: consecutive clips of length N
// (final partial clip dropped), NDCG@N per clip, averaged.
inline std::optional<double> clipped_ndcg(std::span<const RatedPair> pairs, std::size_t n) {
  const std::size_t clips = pairs.size() / n;
  if (clips == 0) return std::nullopt;
  double total = 0.0;
  for (std::size_t c = 0; c < clips; ++c) {
    total += ndcg_at_n(pairs.subspan(c * n, n), n);
  }
  return total / static_cast<double>(clips);
}

/// Per-scenario MAE and clip-averaged NDCG@N, plus the same metrics over all
/// records. Input order is preserved when slicing clips, so callers should
/// supply records in canonical (user id, query position) order.
inline MetricsReport scenario_metrics(std::span<const TaggedPair> tagged, std::size_t n,
                                      double rating_min, double rating_max) {
  if (n < 1) throw ContractError("scenario_metrics: N must be >= 1");
  MetricsReport report;
  report.ndcg_n = n;
  std::array<std::vector<RatedPair>, 4> buckets;
  std::vector<RatedPair> all;
  all.reserve(tagged.size());
  for (const auto& t : tagged) {
    buckets[static_cast<std::size_t>(t.scenario)].push_back(RatedPair{t.predicted, t.actual});
    all.push_back(RatedPair{t.predicted, t.actual});
  }
  for (std::size_t s = 0; s < 4; ++s) {
    auto& result = report.per_scenario[s];
    result.count = buckets[s].size();
    if (!buckets[s].empty()) {
      result.mae = mae(buckets[s], rating_min, rating_max);
      result.ndcg = clipped_ndcg(buckets[s], n);
    }
  }
  report.overall.count = all.size();
  if (!all.empty()) {
    report.overall.mae = mae(all, rating_min, rating_max);
    report.overall.ndcg = clipped_ndcg(all, n);
  }
  return report;
}

}  // namespace mamo
