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
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dualdiv/detail/cholesky.hpp"
#include "dualdiv/error.hpp"
#include "dualdiv/kernel.hpp"

namespace dualdiv {

enum class TieBreak { lowest_index };

/// Weights, budgets and numerical floors shared by both selection stages.
///
/// `lambda` weighs the log-det diversity term against facility-location
/// coverage. The per-stage overrides let one binary express the coverage-only
/// baseline and both single-stage ablations.
struct ObjectiveConfig {
  double lambda = 0.1;
  double residual_floor = kDefaultResidualFloor;
  std::size_t k1 = 100;
  std::size_t k = 3;
  TieBreak tie_break = TieBreak::lowest_index;
  bool allow_negative_gain = false;
  std::optional<double> lambda_stage1;
  std::optional<double> lambda_stage2;

  double stage1_lambda() const { return lambda_stage1.value_or(lambda); }
  double stage2_lambda() const { return lambda_stage2.value_or(lambda); }

  ObjectiveConfig with_lambda(double value) const {
    ObjectiveConfig c = *this;
    c.lambda = value;
    c.lambda_stage1.reset();
    c.lambda_stage2.reset();
    return c;
  }

  void validate() const {
    auto bad_lambda = [](double v) { return !(v >= 0.0) || !std::isfinite(v); };
    if (bad_lambda(lambda) || bad_lambda(stage1_lambda()) || bad_lambda(stage2_lambda())) {
      throw ConfigError("lambda must be a finite nonnegative number");
    }
    if (!(residual_floor > 0.0 && residual_floor < 1.0)) {
      throw ConfigError("residual_floor must lie in (0, 1)");
    }
    if (k1 < 1) throw ConfigError("k1 must be at least 1");
    if (k < 1) throw ConfigError("k must be at least 1");
    if (k > k1) {
      throw ConfigError("k (" + std::to_string(k) + ") exceeds k1 (" +
                        std::to_string(k1) + ")");
    }
  }
};

struct ObjectiveValue {
  double f = 0.0;
  double coverage = 0.0;
  double diversity = 0.0;
};

struct MarginalGain {
  double gain = 0.0;
  double coverage_delta = 0.0;
  double diversity_delta = 0.0;
  // Unfloored squared norm of the candidate's direction orthogonal to the
  // span of the selected directions.
  double residual_sq = 1.0;
};

namespace detail {

template <class T>
void check_index(const BasicSimilarityKernel<T>& kernel, Index i, const char* what) {
  if (i >= kernel.size()) {
    throw ConfigError(std::string(what) + ": index " + std::to_string(i) +
                      " out of range (kernel size " + std::to_string(kernel.size()) + ")");
  }
}

template <class T>
void check_distinct(const BasicSimilarityKernel<T>& kernel, std::span<const Index> s,
                    const char* what) {
  std::vector<bool> seen(kernel.size(), false);
  for (Index i : s) {
    check_index(kernel, i, what);
    if (seen[i]) {
      throw ConfigError(std::string(what) + ": repeated index " + std::to_string(i));
    }
    seen[i] = true;
  }
}

}  // namespace detail

/// Incremental evaluation state for f(S) = C(S) + lambda * D(S).
///
/// Keeps max_{j in S} w_ij for every universe element and a Cholesky factor
/// of W_S, so a marginal gain costs one pass over the universe plus one
/// triangular solve. Read-only queries may run concurrently; `commit` needs
/// exclusive access. The kernel must outlive the state.
template <class T>
class SelectionState {
 public:
  SelectionState(const BasicSimilarityKernel<T>& kernel, std::span<const Index> universe,
                 ObjectiveConfig config)
      : kernel_(&kernel),
        universe_(universe.begin(), universe.end()),
        config_(std::move(config)),
        in_selected_(kernel.size(), false),
        cache_(universe_.size(), -std::numeric_limits<double>::infinity()) {
    for (Index i : universe_) detail::check_index(kernel, i, "universe");
  }

  const std::vector<Index>& selected() const { return selected_; }
  const std::vector<Index>& universe() const { return universe_; }
  const ObjectiveConfig& config() const { return config_; }
  std::span<const double> coverage_cache() const { return cache_; }
  const detail::GrowingCholesky& cholesky() const { return chol_; }

  // Bumped on every commit; gains computed at an older epoch are stale.
  std::size_t epoch() const { return selected_.size(); }

  bool contains(Index i) const { return i < in_selected_.size() && in_selected_[i]; }

  double coverage() const { return coverage_; }
  double logdet() const { return logdet_; }
  double value() const { return coverage_ + config_.lambda * logdet_; }

  MarginalGain marginal_gain(Index candidate) const {
    std::vector<double> z;
    return evaluate(candidate, z);
  }

  /// Adds `candidate` to S and returns the gain that was realized, identical
  /// to what marginal_gain reported against the previous state.
  MarginalGain commit(Index candidate) {
    std::vector<double> z;
    const MarginalGain g = evaluate(candidate, z);
    const auto row = kernel_->row(candidate);
    const bool first = selected_.empty();
    for (std::size_t p = 0; p < universe_.size(); ++p) {
      const double w = static_cast<double>(row[universe_[p]]);
      if (first || w > cache_[p]) cache_[p] = w;
    }
    coverage_ += g.coverage_delta;
    logdet_ += g.diversity_delta;
    chol_.append(z, std::sqrt(detail::floored(g.residual_sq, config_.residual_floor)));
    selected_.push_back(candidate);
    in_selected_[candidate] = true;
    return g;
  }

 private:
  MarginalGain evaluate(Index candidate, std::vector<double>& z) const {
    detail::check_index(*kernel_, candidate, "candidate");
    if (in_selected_[candidate]) {
      throw ConfigError("candidate " + std::to_string(candidate) + " is already selected");
    }
    const auto row = kernel_->row(candidate);
    MarginalGain g;
    double delta = 0.0;
    if (selected_.empty()) {
      for (Index i : universe_) delta += static_cast<double>(row[i]);
    } else {
      for (std::size_t p = 0; p < universe_.size(); ++p) {
        const double d = static_cast<double>(row[universe_[p]]) - cache_[p];
        if (d > 0.0) delta += d;
      }
    }
    std::vector<double> cross(selected_.size());
    for (std::size_t b = 0; b < selected_.size(); ++b) {
      cross[b] = static_cast<double>(row[selected_[b]]);
    }
    z.assign(selected_.size(), 0.0);
    g.residual_sq = detail::projection_residual(chol_, cross, (*kernel_)(candidate, candidate), z);
    g.coverage_delta = delta;
    g.diversity_delta = std::log(detail::floored(g.residual_sq, config_.residual_floor));
    g.gain = g.coverage_delta + config_.lambda * g.diversity_delta;
    return g;
  }

  const BasicSimilarityKernel<T>* kernel_;
  std::vector<Index> universe_;
  ObjectiveConfig config_;
  std::vector<bool> in_selected_;
  std::vector<double> cache_;
  detail::GrowingCholesky chol_;
  std::vector<Index> selected_;
  double coverage_ = 0.0;
  double logdet_ = 0.0;
};

/// Facility-location coverage: sum over the universe of the best similarity
/// to any member of S. S must be nonempty.
template <class T>
double coverage(const BasicSimilarityKernel<T>& kernel, std::span<const Index> universe,
                std::span<const Index> selected) {
  if (selected.empty()) throw ConfigError("coverage: empty selection");
  for (Index j : selected) detail::check_index(kernel, j, "coverage");
  double total = 0.0;
  for (Index i : universe) {
    detail::check_index(kernel, i, "coverage universe");
    const auto row = kernel.row(i);
    double best = static_cast<double>(row[selected[0]]);
    for (Index j : selected) best = std::max(best, static_cast<double>(row[j]));
    total += best;
  }
  return total;
}

/// log det(W_S) with squared Cholesky residuals floored at
/// config.residual_floor; 0 for the empty set.
template <class T>
double log_det_diversity(const BasicSimilarityKernel<T>& kernel,
                         std::span<const Index> selected, const ObjectiveConfig& config) {
  detail::check_distinct(kernel, selected, "log_det_diversity");
  return detail::floored_log_det([&](Index i, Index j) { return kernel(i, j); }, selected,
                                 config.residual_floor);
}

template <class T>
ObjectiveValue objective_value(const BasicSimilarityKernel<T>& kernel,
                               std::span<const Index> universe,
                               std::span<const Index> selected,
                               const ObjectiveConfig& config) {
  ObjectiveValue v;
  if (selected.empty()) return v;
  v.coverage = coverage(kernel, universe, selected);
  v.diversity = log_det_diversity(kernel, selected, config);
  v.f = v.coverage + config.lambda * v.diversity;
  return v;
}

/// Singleton conditional gains f({x} + Q) - f(Q) for every candidate, sharing
/// one state built from Q.
template <class T>
std::vector<double> conditional_gains(const BasicSimilarityKernel<T>& kernel,
                                      std::span<const Index> queries,
                                      std::span<const Index> candidates,
                                      std::span<const Index> universe,
                                      const ObjectiveConfig& config) {
  detail::check_distinct(kernel, queries, "conditional_gain queries");
  SelectionState<T> state(kernel, universe, config);
  for (Index q : queries) state.commit(q);
  std::vector<double> gains;
  gains.reserve(candidates.size());
  for (Index x : candidates) {
    if (state.contains(x)) {
      throw ConfigError("conditional_gain: candidate " + std::to_string(x) +
                        " is part of the query set");
    }
    gains.push_back(state.marginal_gain(x).gain);
  }
  return gains;
}

template <class T>
double conditional_gain(const BasicSimilarityKernel<T>& kernel,
                        std::span<const Index> queries, Index x,
                        std::span<const Index> universe, const ObjectiveConfig& config) {
  const Index one[] = {x};
  return conditional_gains(kernel, queries, std::span<const Index>(one), universe, config)[0];
}

}  // namespace dualdiv
