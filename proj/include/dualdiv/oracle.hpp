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
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dualdiv/embeddings.hpp"
#include "dualdiv/error.hpp"
#include "dualdiv/kernel.hpp"
#include "dualdiv/objective.hpp"
#include "dualdiv/synthetic.hpp"

// Brute-force reference implementations. Nothing here goes through the
// incremental state or the Cholesky code; only the kernel container is shared
// with the optimized paths.
namespace dualdiv::oracle {

/// Determinant by Gaussian elimination with partial pivoting. `a` is n x n
/// row-major and is consumed.
inline double determinant(std::vector<double> a, std::size_t n) {
  double det = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (a[pivot * n + col] == 0.0) return 0.0;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      det = -det;
    }
    const double p = a[col * n + col];
    det *= p;
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a[r * n + col] / p;
      if (factor == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
    }
  }
  return det;
}

template <class T>
double subset_determinant(const BasicSimilarityKernel<T>& kernel, std::span<const Index> s) {
  const std::size_t m = s.size();
  std::vector<double> a(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) a[i * m + j] = kernel(s[i], s[j]);
  }
  return determinant(std::move(a), m);
}

// C(S) by the defining double loop, 0 for the empty set.
template <class T>
double coverage(const BasicSimilarityKernel<T>& kernel, std::span<const Index> universe,
                std::span<const Index> s) {
  if (s.empty()) return 0.0;
  double total = 0.0;
  for (Index i : universe) {
    double best = -std::numeric_limits<double>::infinity();
    for (Index j : s) best = std::max(best, kernel(i, j));
    total += best;
  }
  return total;
}

// log det(W_S) without any floor; -inf when the determinant is not positive.
template <class T>
double log_det(const BasicSimilarityKernel<T>& kernel, std::span<const Index> s) {
  if (s.empty()) return 0.0;
  const double det = subset_determinant(kernel, s);
  return det > 0.0 ? std::log(det) : -std::numeric_limits<double>::infinity();
}

enum class Term { coverage, diversity, combined };

inline std::string_view to_string(Term t) {
  switch (t) {
    case Term::coverage: return "coverage";
    case Term::diversity: return "diversity";
    case Term::combined: return "combined";
  }
  return "?";
}

inline Term parse_term(std::string_view s) {
  if (s == "coverage") return Term::coverage;
  if (s == "diversity") return Term::diversity;
  if (s == "combined") return Term::combined;
  throw ConfigError("unknown property term '" + std::string(s) + "'");
}

template <class T>
double term_value(const BasicSimilarityKernel<T>& kernel, std::span<const Index> universe,
                  std::span<const Index> s, Term term, double lambda) {
  switch (term) {
    case Term::coverage: return oracle::coverage(kernel, universe, s);
    case Term::diversity: return oracle::log_det(kernel, s);
    case Term::combined:
      if (lambda == 0.0) return oracle::coverage(kernel, universe, s);
      return oracle::coverage(kernel, universe, s) + lambda * oracle::log_det(kernel, s);
  }
  return 0.0;
}

template <class T>
double objective(const BasicSimilarityKernel<T>& kernel, std::span<const Index> universe,
                 std::span<const Index> s, double lambda) {
  return term_value(kernel, universe, s, Term::combined, lambda);
}

struct Optimum {
  std::vector<Index> selected;
  double value = -std::numeric_limits<double>::infinity();
};

inline constexpr std::size_t kMaxBruteForce = 20;

/// Exhaustive maximum of f over nonempty subsets of the universe with at most
/// `budget` members. Ties go to the lexicographically smallest subset of
/// universe positions.
template <class T>
Optimum brute_force_optimum(const BasicSimilarityKernel<T>& kernel,
                            std::span<const Index> universe, std::size_t budget,
                            const ObjectiveConfig& config) {
  const std::size_t n = universe.size();
  if (n > kMaxBruteForce) {
    throw ConfigError("brute_force_optimum: universe of " + std::to_string(n) +
                      " exceeds the enumeration guard of " + std::to_string(kMaxBruteForce));
  }
  if (budget > n) throw ConfigError("brute_force_optimum: budget exceeds universe size");
  Optimum best;
  std::vector<std::size_t> best_pos;
  // Combinations in lexicographic order, size by size.
  for (std::size_t size = 1; size <= budget; ++size) {
    std::vector<std::size_t> pos(size);
    for (std::size_t i = 0; i < size; ++i) pos[i] = i;
    while (true) {
      std::vector<Index> s(size);
      for (std::size_t i = 0; i < size; ++i) s[i] = universe[pos[i]];
      const double v = objective(kernel, universe, s, config.lambda);
      if (v > best.value || (v == best.value && pos < best_pos)) {
        best.value = v;
        best.selected = s;
        best_pos = pos;
      }
      std::size_t i = size;
      while (i > 0 && pos[i - 1] == n - size + i - 1) --i;
      if (i == 0) break;
      ++pos[i - 1];
      for (std::size_t j = i; j < size; ++j) pos[j] = pos[j - 1] + 1;
    }
  }
  return best;
}

struct Witness {
  std::uint64_t seed = 0;
  std::vector<Index> set;
  std::vector<Index> superset;  // empty unless the property compares two sets
  Index candidate = 0;
  std::vector<double> values;
};

/// Outcome of one property over one or more instances. `failures` keeps at
/// most kMaxWitnesses examples; `failure_count` counts all of them.
struct PropertyReport {
  static constexpr std::size_t kMaxWitnesses = 32;

  std::string property_name;
  std::size_t instances_checked = 0;
  std::size_t comparisons = 0;
  std::size_t failure_count = 0;
  std::vector<Witness> failures;
  double tolerance = 0.0;

  bool passed() const { return failure_count == 0; }

  void fail(Witness w) {
    ++failure_count;
    if (failures.size() < kMaxWitnesses) failures.push_back(std::move(w));
  }

  void merge(const PropertyReport& other) {
    instances_checked += other.instances_checked;
    comparisons += other.comparisons;
    for (const auto& w : other.failures) {
      if (failures.size() < kMaxWitnesses) failures.push_back(w);
    }
    failure_count += other.failure_count;
  }
};

inline nlohmann::ordered_json to_json(const PropertyReport& r) {
  nlohmann::ordered_json j;
  j["property_name"] = r.property_name;
  j["passed"] = r.passed();
  j["instances_checked"] = r.instances_checked;
  j["comparisons"] = r.comparisons;
  j["tolerance"] = r.tolerance;
  j["failure_count"] = r.failure_count;
  auto& arr = j["failures"] = nlohmann::ordered_json::array();
  for (const auto& w : r.failures) {
    arr.push_back({{"seed", w.seed},
                   {"set", w.set},
                   {"superset", w.superset},
                   {"candidate", w.candidate},
                   {"values", w.values}});
  }
  return j;
}

// One summary line, then one line per stored witness.
inline std::string to_text(const PropertyReport& r) {
  std::ostringstream out;
  out << (r.passed() ? "PASS " : "FAIL ") << r.property_name
      << " instances=" << r.instances_checked << " comparisons=" << r.comparisons
      << " failures=" << r.failure_count << " tolerance=" << r.tolerance << '\n';
  auto list = [](const std::vector<Index>& v) {
    std::string s = "{";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s + "}";
  };
  for (const auto& w : r.failures) {
    out << "  witness seed=" << w.seed << " S=" << list(w.set);
    if (!w.superset.empty()) out << " S'=" << list(w.superset);
    out << " x=" << w.candidate << " values=";
    for (std::size_t i = 0; i < w.values.size(); ++i) out << (i ? "," : "") << w.values[i];
    out << '\n';
  }
  return out.str();
}

inline constexpr std::size_t kMaxExhaustive = 12;

struct CheckOptions {
  double tolerance = 1e-9;
  // Include S = {} (with C({}) = D({}) = 0) as a base set. The term
  // definitions only constrain nonempty sets.
  bool include_empty = true;
  std::uint64_t seed = 0;
};

namespace detail {

// Term value of every subset of the universe, indexed by position bitmask.
template <class T>
std::vector<double> subset_table(const BasicSimilarityKernel<T>& kernel,
                                 std::span<const Index> universe, Term term, double lambda) {
  const std::size_t n = universe.size();
  if (n > kMaxExhaustive) {
    throw ConfigError("exhaustive check: universe of " + std::to_string(n) +
                      " exceeds the guard of " + std::to_string(kMaxExhaustive));
  }
  std::vector<double> table(std::size_t{1} << n);
  std::vector<Index> s;
  for (std::size_t mask = 0; mask < table.size(); ++mask) {
    s.clear();
    for (std::size_t p = 0; p < n; ++p) {
      if (mask >> p & 1) s.push_back(universe[p]);
    }
    table[mask] = term_value(kernel, universe, s, term, lambda);
  }
  return table;
}

inline std::vector<Index> members(std::size_t mask, std::span<const Index> universe) {
  std::vector<Index> s;
  for (std::size_t p = 0; p < universe.size(); ++p) {
    if (mask >> p & 1) s.push_back(universe[p]);
  }
  return s;
}

}  // namespace detail

/// Exhaustive monotonicity check: coverage and combined must not decrease
/// when an element is added, diversity must not increase.
template <class T>
PropertyReport check_monotonicity(const BasicSimilarityKernel<T>& kernel,
                                  std::span<const Index> universe,
                                  const ObjectiveConfig& config, Term term,
                                  const CheckOptions& opt = {}) {
  PropertyReport rep;
  rep.property_name = std::string("monotonicity/") + std::string(to_string(term));
  rep.tolerance = opt.tolerance;
  rep.instances_checked = 1;
  const auto table = detail::subset_table(kernel, universe, term, config.lambda);
  const std::size_t n = universe.size();
  const bool decreasing = term == Term::diversity;
  for (std::size_t mask = opt.include_empty ? 0 : 1; mask < table.size(); ++mask) {
    for (std::size_t p = 0; p < n; ++p) {
      if (mask >> p & 1) continue;
      const double before = table[mask];
      const double after = table[mask | (std::size_t{1} << p)];
      ++rep.comparisons;
      const bool ok = decreasing ? after <= before + opt.tolerance
                                 : after >= before - opt.tolerance;
      if (!ok) {
        rep.fail({opt.seed, detail::members(mask, universe), {}, universe[p], {before, after}});
      }
    }
  }
  return rep;
}

/// Exhaustive diminishing-returns check over every S subset of S' and
/// x outside S'.
template <class T>
PropertyReport check_submodularity(const BasicSimilarityKernel<T>& kernel,
                                   std::span<const Index> universe,
                                   const ObjectiveConfig& config, Term term,
                                   const CheckOptions& opt = {}) {
  PropertyReport rep;
  rep.property_name = std::string("submodularity/") + std::string(to_string(term));
  rep.tolerance = opt.tolerance;
  rep.instances_checked = 1;
  const auto table = detail::subset_table(kernel, universe, term, config.lambda);
  const std::size_t n = universe.size();
  const std::size_t full = table.size() - 1;
  for (std::size_t big = 0; big < table.size(); ++big) {
    const std::size_t outside = full & ~big;
    if (outside == 0) continue;
    // Walk every submask of `big`, including 0 and `big` itself.
    std::size_t small = big;
    while (true) {
      if (opt.include_empty || small != 0) {
        for (std::size_t p = 0; p < n; ++p) {
          if (!(outside >> p & 1)) continue;
          const std::size_t bit = std::size_t{1} << p;
          const double gain_small = table[small | bit] - table[small];
          const double gain_big = table[big | bit] - table[big];
          ++rep.comparisons;
          if (!(gain_small >= gain_big - opt.tolerance)) {
            rep.fail({opt.seed, detail::members(small, universe),
                      detail::members(big, universe), universe[p], {gain_small, gain_big}});
          }
        }
      }
      if (small == 0) break;
      small = (small - 1) & big;
    }
  }
  return rep;
}

struct IdentitySides {
  double direct = 0.0;       // det(W_{S+x}) by elimination
  double incremental = 0.0;  // det(W_S) * residual_sq from the incremental state
  double base = 0.0;         // det(W_S)
};

/// Both sides of det(W_{S+x}) = det(W_S) * |q_S(x)|^2. The right side takes
/// its residual from SelectionState with the floor pushed to the smallest
/// normal double.
template <class T>
IdentitySides projection_identity_sides(const BasicSimilarityKernel<T>& kernel,
                                        std::span<const Index> s, Index x) {
  ObjectiveConfig cfg;
  cfg.residual_floor = std::numeric_limits<double>::min();
  SelectionState<T> state(kernel, {}, cfg);
  for (Index i : s) state.commit(i);
  IdentitySides sides;
  std::vector<Index> sx(s.begin(), s.end());
  sx.push_back(x);
  sides.direct = subset_determinant(kernel, sx);
  sides.base = subset_determinant(kernel, s);
  sides.incremental = sides.base * state.marginal_gain(x).residual_sq;
  return sides;
}

// Relative agreement; residuals below 1e-10 of det(W_S) count as zero on
// both sides.
inline bool identity_agrees(const IdentitySides& sides, double rtol) {
  const double a = sides.direct, b = sides.incremental;
  const double scale = std::max(std::abs(a), std::abs(b));
  if (std::abs(a - b) <= rtol * scale) return true;
  return scale <= 1e-10 * std::abs(sides.base);
}

inline constexpr std::size_t kMaxIdentityN = 10;

/// Samples `pairs` random (S, x) over the kernel and checks the projection
/// identity at relative tolerance `rtol`. The first pair always has S empty.
template <class T>
PropertyReport check_projection_identity(const BasicSimilarityKernel<T>& kernel,
                                         std::uint64_t seed, std::size_t pairs = 16,
                                         double rtol = 1e-7) {
  const std::size_t n = kernel.size();
  if (n > kMaxIdentityN) {
    throw ConfigError("check_projection_identity: n exceeds " + std::to_string(kMaxIdentityN));
  }
  PropertyReport rep;
  rep.property_name = "projection_identity";
  rep.tolerance = rtol;
  rep.instances_checked = 1;
  if (n == 0) return rep;
  std::mt19937_64 rng(seed);
  std::vector<Index> pool(n);
  for (Index i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t t = 0; t < pairs; ++t) {
    std::size_t size = 0;
    if (t > 0 && n > 1) size = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    for (std::size_t i = 0; i <= size; ++i) {
      std::swap(pool[i], pool[std::uniform_int_distribution<std::size_t>(i, n - 1)(rng)]);
    }
    const std::vector<Index> s(pool.begin(), pool.begin() + size);
    const Index x = pool[size];
    const auto sides = projection_identity_sides(kernel, s, x);
    ++rep.comparisons;
    if (!identity_agrees(sides, rtol)) {
      rep.fail({seed, s, {}, x, {sides.direct, sides.incremental, sides.base}});
    }
  }
  return rep;
}

/// Seeded instances: unit vectors from normalized Gaussians (clusters == n)
/// or noisy clusters around random unit centers.
inline EmbeddingSet random_instance(std::size_t n, std::size_t d, std::uint64_t seed) {
  return generate_synthetic(n, d, n, 0.0, seed);
}

inline EmbeddingSet clustered_instance(std::size_t n, std::size_t d, std::size_t clusters,
                                       double noise, std::uint64_t seed) {
  return generate_synthetic(n, d, clusters, noise, seed);
}

inline std::vector<Index> iota_indices(std::size_t n, std::size_t first = 0) {
  std::vector<Index> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = first + i;
  return v;
}

}  // namespace dualdiv::oracle
