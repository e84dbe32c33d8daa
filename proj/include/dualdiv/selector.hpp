// Copyright 2026 The dualdiv Authors.
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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dualdiv/error.hpp"
#include "dualdiv/kernel.hpp"
#include "dualdiv/objective.hpp"

namespace dualdiv {

namespace detail {

// Shortest round-trip rendering, locale independent.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// Higher gain first; equal gains go to the lower index.
inline bool ranks_before(double gain_a, Index a, double gain_b, Index b) {
  return gain_a > gain_b || (gain_a == gain_b && a < b);
}

/// Lazy-greedy heap item. `stale_gain` was exact when the selection had
/// `epoch` members and is an upper bound afterwards.
struct HeapEntry {
  Index candidate = 0;
  double stale_gain = 0.0;
  std::size_t epoch = 0;
};

struct HeapOrder {
  bool operator()(const HeapEntry& a, const HeapEntry& b) const {
    return ranks_before(b.stale_gain, b.candidate, a.stale_gain, a.candidate);
  }
};

struct Stage1Step {
  Index index = 0;
  double gain = 0.0;
  double coverage_delta = 0.0;
  double diversity_delta = 0.0;
  double objective = 0.0;  // f(S) after this step
};

struct Stage1Result {
  std::vector<Index> selected;
  std::vector<Stage1Step> steps;
  std::vector<std::string> warnings;
  std::size_t gain_evaluations = 0;
};

struct Stage2Step {
  Index index = 0;
  double gain = 0.0;
};

/// Everything one two-stage run produced.
struct SelectionReport {
  Stage1Result stage1;
  std::vector<Stage2Step> stage2;
  std::vector<double> objective_trace;
  ObjectiveConfig config;
  std::vector<std::string> warnings;
};

namespace detail {

template <class T>
class Stage1Recorder {
 public:
  Stage1Recorder(const BasicSimilarityKernel<T>& kernel, std::span<const Index> universe,
                 const ObjectiveConfig& config)
      : state(kernel, universe, config.with_lambda(config.stage1_lambda())),
        config_(config) {
    if (universe.empty()) throw DataError("stage 1: empty universe");
    if (config.k1 < 1) throw ConfigError("stage 1: k1 must be at least 1");
  }

  bool full() const { return result.selected.size() >= config_.k1; }

  // Returns false when the pick is refused because its gain is negative.
  bool accept(Index candidate, double expected_gain) {
    if (expected_gain < 0.0) {
      if (!config_.allow_negative_gain) {
        result.warnings.push_back(
            "stage1: stopped early after " + std::to_string(result.selected.size()) +
            " of " + std::to_string(config_.k1) + " picks; best remaining gain " +
            format_double(expected_gain) + " is negative");
        return false;
      }
      if (!negative_seen_) {
        negative_seen_ = true;
        result.warnings.push_back("stage1: negative gain " + format_double(expected_gain) +
                                  " accepted at step " +
                                  std::to_string(result.selected.size() + 1) +
                                  "; lambda exceeds the monotonicity bound here");
      }
    }
    if (record(candidate).gain != expected_gain) {
      throw InvariantError("stage1: committed gain differs from evaluated gain");
    }
    return true;
  }

  MarginalGain record(Index candidate) {
    const MarginalGain g = state.commit(candidate);
    result.selected.push_back(candidate);
    result.steps.push_back(
        {candidate, g.gain, g.coverage_delta, g.diversity_delta, state.value()});
    return g;
  }

  Stage1Result finish(std::size_t universe_size) {
    if (result.selected.size() < config_.k1 && universe_size < config_.k1 &&
        result.selected.size() == universe_size) {
      result.warnings.push_back("stage1: universe holds only " +
                                std::to_string(universe_size) +
                                " candidates, fewer than k1 = " +
                                std::to_string(config_.k1));
    }
    return std::move(result);
  }

  SelectionState<T> state;
  Stage1Result result;

 private:
  const ObjectiveConfig& config_;
  bool negative_seen_ = false;
};

}  // namespace detail

/// Lazy greedy maximization of f under |S| <= k1.
///
/// Heap entries carry the epoch their gain was computed at. A popped entry
/// from the current epoch is exact and wins outright; an older one is
/// re-evaluated and committed only if it still ranks ahead of the next heap
/// head, otherwise it goes back with the fresh gain.
///
/// Gains against the empty set are f({x}) and may sit below later gains when
/// cosines are negative, so the whole heap is re-keyed once after the first
/// commit. From then on stale gains bound fresh ones.
template <class T>
Stage1Result retrieve_stage1(const BasicSimilarityKernel<T>& kernel,
                             std::span<const Index> universe, const ObjectiveConfig& config) {
  detail::Stage1Recorder<T> rec(kernel, universe, config);
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapOrder> heap;
  for (Index x : universe) {
    heap.push({x, rec.state.marginal_gain(x).gain, 0});
    ++rec.result.gain_evaluations;
  }
  bool rekeyed = false;
  while (!rec.full() && !heap.empty()) {
    if (!rekeyed && rec.state.epoch() == 1) {
      rekeyed = true;
      std::vector<HeapEntry> rest;
      rest.reserve(heap.size());
      for (; !heap.empty(); heap.pop()) {
        HeapEntry e = heap.top();
        e.stale_gain = rec.state.marginal_gain(e.candidate).gain;
        e.epoch = 1;
        ++rec.result.gain_evaluations;
        rest.push_back(e);
      }
      heap = decltype(heap)(HeapOrder{}, std::move(rest));
      continue;
    }
    HeapEntry top = heap.top();
    heap.pop();
    if (top.epoch != rec.state.epoch()) {
      top.stale_gain = rec.state.marginal_gain(top.candidate).gain;
      top.epoch = rec.state.epoch();
      ++rec.result.gain_evaluations;
      if (!heap.empty() && !ranks_before(top.stale_gain, top.candidate,
                                         heap.top().stale_gain, heap.top().candidate)) {
        heap.push(top);
        continue;
      }
    }
    if (!rec.accept(top.candidate, top.stale_gain)) break;
  }
  return rec.finish(universe.size());
}

/// Plain greedy: every round re-evaluates every remaining candidate. Reference
/// for the lazy variant.
template <class T>
Stage1Result naive_greedy(const BasicSimilarityKernel<T>& kernel,
                          std::span<const Index> universe, const ObjectiveConfig& config) {
  detail::Stage1Recorder<T> rec(kernel, universe, config);
  while (!rec.full()) {
    bool found = false;
    Index best = 0;
    double best_gain = 0.0;
    for (Index x : universe) {
      if (rec.state.contains(x)) continue;
      const double g = rec.state.marginal_gain(x).gain;
      ++rec.result.gain_evaluations;
      if (!found || ranks_before(g, x, best_gain, best)) {
        found = true;
        best = x;
        best_gain = g;
      }
    }
    if (!found || !rec.accept(best, best_gain)) break;
  }
  return rec.finish(universe.size());
}

/// Ranks the stage-1 pool by singleton conditional gain f({x} + Q) - f(Q),
/// computed once per candidate, and keeps the k best in descending order.
/// `universe` is the coverage universe, normally corpus plus queries.
template <class T>
std::vector<Stage2Step> rank_stage2(const BasicSimilarityKernel<T>& kernel,
                                    std::span<const Index> pool,
                                    std::span<const Index> queries,
                                    std::span<const Index> universe,
                                    const ObjectiveConfig& config) {
  if (pool.empty()) throw DataError("stage 2: empty candidate pool");
  if (queries.empty()) throw DataError("stage 2: empty query set");
  if (config.k < 1) throw ConfigError("stage 2: k must be at least 1");
  const auto gains = conditional_gains(kernel, queries, pool, universe,
                                       config.with_lambda(config.stage2_lambda()));
  std::vector<Stage2Step> ranked;
  ranked.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) ranked.push_back({pool[i], gains[i]});
  std::sort(ranked.begin(), ranked.end(), [](const Stage2Step& a, const Stage2Step& b) {
    return ranks_before(a.gain, a.index, b.gain, b.index);
  });
  ranked.resize(std::min(ranked.size(), config.k));
  return ranked;
}

/// Both stages over a kernel spanning corpus ++ queries.
template <class T>
SelectionReport select_two_stage(const BasicSimilarityKernel<T>& kernel,
                                 std::span<const Index> corpus,
                                 std::span<const Index> queries,
                                 const ObjectiveConfig& config) {
  config.validate();
  SelectionReport report;
  report.config = config;
  report.stage1 = retrieve_stage1(kernel, corpus, config);
  std::vector<Index> universe(corpus.begin(), corpus.end());
  universe.insert(universe.end(), queries.begin(), queries.end());
  report.stage2 = rank_stage2(kernel, report.stage1.selected, queries, universe, config);
  for (const auto& s : report.stage1.steps) report.objective_trace.push_back(s.objective);
  report.warnings = report.stage1.warnings;
  return report;
}

/// Random-Similar baseline: a seeded uniform stage-1 sample, then the k
/// members with the highest mean cosine similarity to the queries.
template <class T>
SelectionReport random_similar(const BasicSimilarityKernel<T>& kernel,
                               std::span<const Index> corpus,
                               std::span<const Index> queries,
                               const ObjectiveConfig& config, std::uint64_t seed) {
  config.validate();
  if (queries.empty()) throw DataError("stage 2: empty query set");
  detail::Stage1Recorder<T> rec(kernel, corpus, config);
  std::vector<Index> pool(corpus.begin(), corpus.end());
  std::mt19937_64 rng(seed);
  const std::size_t take = std::min(config.k1, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
    rec.record(pool[i]);
  }
  SelectionReport report;
  report.config = config;
  report.stage1 = rec.finish(corpus.size());
  for (Index x : report.stage1.selected) {
    double mean = 0.0;
    for (Index q : queries) mean += kernel(x, q);
    report.stage2.push_back({x, mean / static_cast<double>(queries.size())});
  }
  std::sort(report.stage2.begin(), report.stage2.end(),
            [](const Stage2Step& a, const Stage2Step& b) {
              return ranks_before(a.gain, a.index, b.gain, b.index);
            });
  report.stage2.resize(std::min(report.stage2.size(), config.k));
  for (const auto& s : report.stage1.steps) report.objective_trace.push_back(s.objective);
  report.warnings = report.stage1.warnings;
  return report;
}

struct LambdaViolation {
  std::vector<Index> selected;
  Index candidate = 0;
  double coverage_delta = 0.0;
  double diversity_drop = 0.0;  // D(S) - D(S + x), >= 0
  double gain = 0.0;
};

struct LambdaProbe {
  // Smallest observed coverage_delta / diversity_drop; +inf when no sampled
  // pair changed the diversity term.
  double max_valid_lambda_estimate = std::numeric_limits<double>::infinity();
  std::vector<LambdaViolation> violations;
  std::size_t sampled = 0;
  std::size_t skipped = 0;  // pairs with diversity_drop <= 0
};

/// Empirical check of the lambda range in which f stays monotone: samples
/// random (S, x) pairs, reports the tightest coverage/diversity ratio seen
/// and every pair where config.lambda makes the combined gain negative.
template <class T>
LambdaProbe lambda_bound_probe(const BasicSimilarityKernel<T>& kernel,
                               std::span<const Index> universe,
                               const ObjectiveConfig& config, std::size_t trials,
                               std::uint64_t seed = 0) {
  if (trials < 1) throw ConfigError("lambda_bound_probe: trials must be at least 1");
  LambdaProbe probe;
  if (universe.size() < 2) return probe;
  std::mt19937_64 rng(seed);
  std::vector<Index> pool(universe.begin(), universe.end());
  std::uniform_int_distribution<std::size_t> size_dist(1, pool.size() - 1);
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t s = size_dist(rng);
    for (std::size_t i = 0; i <= s; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    SelectionState<T> state(kernel, universe, config);
    for (std::size_t i = 0; i < s; ++i) state.commit(pool[i]);
    const Index x = pool[s];
    const MarginalGain g = state.marginal_gain(x);
    ++probe.sampled;
    const double drop = -g.diversity_delta;
    if (drop > 0.0) {
      probe.max_valid_lambda_estimate =
          std::min(probe.max_valid_lambda_estimate, g.coverage_delta / drop);
    } else {
      ++probe.skipped;
    }
    if (g.gain < 0.0) {
      probe.violations.push_back({std::vector<Index>(pool.begin(), pool.begin() + s), x,
                                  g.coverage_delta, drop, g.gain});
    }
  }
  return probe;
}

}  // namespace dualdiv
