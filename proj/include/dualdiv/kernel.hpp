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
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dualdiv/detail/cholesky.hpp"
#include "dualdiv/embeddings.hpp"
#include "dualdiv/error.hpp"

namespace dualdiv {

/// Dense symmetric cosine-similarity matrix over an index universe.
///
/// Entries are stored as `T` (float by default, which halves the memory of
/// an n x n kernel) and read back as double. Position p of the universe maps
/// to the record id `id(p)`; when built from two sets the second set's
/// records follow the first's.
template <class T>
class BasicSimilarityKernel {
 public:
  using value_type = T;

  BasicSimilarityKernel() = default;

  /// Wraps a precomputed row-major matrix. Symmetry is checked.
  BasicSimilarityKernel(std::size_t n, std::vector<T> entries,
                        std::vector<std::string> ids = {})
      : n_(n), entries_(std::move(entries)), ids_(std::move(ids)) {
    if (entries_.size() != n_ * n_) {
      throw DataError("kernel: expected " + std::to_string(n_ * n_) + " entries");
    }
    if (ids_.empty()) {
      ids_.reserve(n_);
      for (std::size_t i = 0; i < n_; ++i) ids_.push_back(std::to_string(i));
    } else if (ids_.size() != n_) {
      throw DataError("kernel: id count does not match size");
    }
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        if (std::abs(double(entries_[i * n_ + j]) - double(entries_[j * n_ + i])) > 1e-12) {
          throw DataError("kernel: matrix is not symmetric");
        }
      }
    }
  }

  std::size_t size() const { return n_; }

  double operator()(Index i, Index j) const {
    return static_cast<double>(entries_[i * n_ + j]);
  }

  std::span<const T> row(Index i) const {
    return {entries_.data() + i * n_, n_};
  }

  const std::string& id(Index i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }

  template <class U>
  friend BasicSimilarityKernel<U> build_cosine_kernel(
      const std::vector<const EmbeddingRecord*>& records);

 private:
  std::size_t n_ = 0;
  std::vector<T> entries_;
  std::vector<std::string> ids_;
};

using SimilarityKernel = BasicSimilarityKernel<float>;

template <class U>
BasicSimilarityKernel<U> build_cosine_kernel(
    const std::vector<const EmbeddingRecord*>& records) {
  BasicSimilarityKernel<U> k;
  const std::size_t n = records.size();
  k.n_ = n;
  k.entries_.assign(n * n, U{});
  k.ids_.reserve(n);
  for (const auto* r : records) k.ids_.push_back(r->id);

  // Row i owns entries (i, j) and (j, i) for j >= i, so workers never
  // write the same slot.
  auto fill_rows = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < n; i += stride) {
      const auto& ui = records[i]->unit;
      for (std::size_t j = i; j < n; ++j) {
        const auto& uj = records[j]->unit;
        double dot = 0.0;
        for (std::size_t t = 0; t < ui.size(); ++t) dot += ui[t] * uj[t];
        const auto w = static_cast<U>(std::clamp(dot, -1.0, 1.0));
        k.entries_[i * n + j] = w;
        k.entries_[j * n + i] = w;
      }
    }
  };

  const std::size_t workers =
      n < 1024 ? 1 : std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  if (workers == 1) {
    fill_rows(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(fill_rows, w, workers);
  }
  return k;
}

/// Cosine kernel over `a`, or over the concatenation a ++ b when `b` is given.
template <class T = float>
BasicSimilarityKernel<T> cosine_kernel(const EmbeddingSet& a,
                                       const EmbeddingSet* b = nullptr) {
  if (b && !a.empty() && !b->empty() && a.dimension() != b->dimension()) {
    throw DataError("cosine_kernel: dimension mismatch (" +
                    std::to_string(a.dimension()) + " vs " +
                    std::to_string(b->dimension()) + ")");
  }
  std::vector<const EmbeddingRecord*> records;
  records.reserve(a.size() + (b ? b->size() : 0));
  for (const auto& r : a.records()) records.push_back(&r);
  if (b) {
    for (const auto& r : b->records()) records.push_back(&r);
  }
  for (const auto* r : records) {
    if (!(r->norm > 0.0)) throw DataError("record '" + r->id + "' has zero norm");
  }
  return build_cosine_kernel<T>(records);
}

template <class T = float>
BasicSimilarityKernel<T> cosine_kernel(const EmbeddingSet& a, const EmbeddingSet& b) {
  return cosine_kernel<T>(a, &b);
}

// Debug dump: u32 n, then n*n little-endian float64 row-major.
template <class T>
void export_kernel(std::ostream& out, const BasicSimilarityKernel<T>& kernel) {
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(kernel.size()));
  for (Index i = 0; i < kernel.size(); ++i) {
    for (Index j = 0; j < kernel.size(); ++j) detail::write_le<double>(out, kernel(i, j));
  }
}

inline constexpr double kDefaultResidualFloor = 1e-12;

struct DispersionStats {
  double mean_pairwise_sim = 0.0;
  double min_pairwise_sim = 0.0;
  double logdet = 0.0;
};

/// Pairwise-similarity summary of a subset. `logdet` uses the same floored
/// Cholesky as the diversity term of the objective.
template <class T>
DispersionStats dispersion_stats(const BasicSimilarityKernel<T>& kernel,
                                 std::span<const Index> subset,
                                 double residual_floor = kDefaultResidualFloor) {
  if (subset.size() < 2) {
    throw ConfigError("dispersion_stats: need at least 2 elements, got " +
                      std::to_string(subset.size()));
  }
  std::vector<bool> seen(kernel.size(), false);
  for (Index i : subset) {
    if (i >= kernel.size()) throw ConfigError("dispersion_stats: index out of range");
    if (seen[i]) throw ConfigError("dispersion_stats: repeated index " + std::to_string(i));
    seen[i] = true;
  }
  DispersionStats stats;
  stats.min_pairwise_sim = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < subset.size(); ++a) {
    for (std::size_t b = a + 1; b < subset.size(); ++b) {
      const double w = kernel(subset[a], subset[b]);
      sum += w;
      stats.min_pairwise_sim = std::min(stats.min_pairwise_sim, w);
      ++pairs;
    }
  }
  stats.mean_pairwise_sim = sum / static_cast<double>(pairs);
  stats.logdet = detail::floored_log_det(
      [&](Index i, Index j) { return kernel(i, j); }, subset, residual_floor);
  return stats;
}

}  // namespace dualdiv
