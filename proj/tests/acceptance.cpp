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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Every tolerance and instance count is fixed
// below.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dualdiv/dualdiv.hpp"

namespace {

using namespace dualdiv;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<Index> iota(std::size_t n, std::size_t first = 0) {
  return oracle::iota_indices(n, first);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Scratch {
 public:
  Scratch() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("dualdiv-acceptance-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

void write_set(const std::filesystem::path& p, const EmbeddingSet& s) {
  std::ofstream out(p, std::ios::binary);
  write_embeddings(out, s, Format::text);
}

// ---------------------------------------------------------------------------
// 1. (1 - 1/e) guarantee on prefiltered monotone submodular instances.

constexpr std::size_t kApproxInstances = 200;
constexpr double kApproxSlack = 1e-9;
constexpr double kPropertyTol = 1e-9;

// Absolute values of seeded vectors: every cosine is nonnegative, so the
// empty set is a valid base for the property prefilter.
EmbeddingSet nonnegative(const EmbeddingSet& in) {
  EmbeddingSet out;
  for (const auto& r : in.records()) {
    auto v = r.vector;
    for (auto& x : v) x = std::abs(x);
    out.add(make_record(r.id, r.label, v));
  }
  return out;
}

Outcome approximation() {
  const double ratio = 1.0 - 1.0 / std::exp(1.0);
  const double lambdas[] = {0.0, 0.05, 0.1};
  std::size_t accepted = 0, rejected = 0, failures = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; accepted < kApproxInstances && seed < 20 * kApproxInstances;
       ++seed) {
    const std::size_t n = 5 + seed % 8;  // 5..12
    const std::size_t d = n + 2 + seed % 3;
    const auto set = nonnegative(seed % 2 == 0
                                     ? oracle::random_instance(n, d, seed)
                                     : oracle::clustered_instance(n, d, 1 + seed % 4, 0.4, seed));
    const auto k = cosine_kernel(set);
    const auto u = iota(n);
    ObjectiveConfig cfg;
    cfg.lambda = lambdas[seed % 3];
    cfg.k1 = 1 + (seed / 3) % 4;
    cfg.k = 1;
    oracle::CheckOptions opt;
    opt.tolerance = kPropertyTol;
    opt.include_empty = true;
    opt.seed = seed;
    if (!oracle::check_monotonicity(k, u, cfg, oracle::Term::combined, opt).passed() ||
        !oracle::check_submodularity(k, u, cfg, oracle::Term::combined, opt).passed()) {
      ++rejected;
      continue;
    }
    ++accepted;
    const auto greedy = retrieve_stage1(k, u, cfg);
    const double fg = oracle::objective(k, u, greedy.selected, cfg.lambda);
    const auto opt_set = oracle::brute_force_optimum(k, u, cfg.k1, cfg);
    if (fg < ratio * opt_set.value - kApproxSlack) ++failures;
    if (opt_set.value > 0) worst = std::min(worst, fg / opt_set.value);
  }
  return {accepted == kApproxInstances && failures == 0,
          std::to_string(accepted) + " instances (" + std::to_string(rejected) +
              " rejected by prefilter), " + std::to_string(failures) +
              " below bound, worst f(S*)/OPT = " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 2. Lazy greedy returns exactly the naive greedy sequence.

constexpr std::size_t kLazyInstances = 500;

EmbeddingSet tie_instance(std::uint64_t seed) {
  // Copies of basis vectors plus exact duplicates of random directions, in a
  // shuffled order: many rounds have several exactly equal best gains.
  std::mt19937_64 rng(seed);
  const std::size_t d = 3 + seed % 5;
  std::vector<std::vector<float>> v;
  const std::size_t copies = 1 + seed % 3;
  for (std::size_t c = 0; c < copies; ++c) {
    for (std::size_t i = 0; i < d; ++i) {
      std::vector<float> e(d, 0.0f);
      e[i] = 1.0f;
      v.push_back(e);
    }
  }
  const auto extra = oracle::random_instance(2, d, seed + 77);
  for (const auto& r : extra.records()) {
    v.push_back(r.vector);
    v.push_back(r.vector);
  }
  std::shuffle(v.begin(), v.end(), rng);
  EmbeddingSet set;
  for (std::size_t i = 0; i < v.size(); ++i) set.add(make_record("t" + std::to_string(i), {}, v[i]));
  return set;
}

Outcome lazy_equals_naive() {
  const double lambdas[] = {0.0, 0.05, 0.1, 0.5, 2.0};
  std::size_t mismatches = 0, ties = 0;
  std::size_t lazy_evals = 0, naive_evals = 0;
  for (std::uint64_t seed = 0; seed < kLazyInstances; ++seed) {
    const bool tie = seed % 5 == 0;
    const auto set = tie ? tie_instance(seed)
                         : oracle::clustered_instance(4 + seed % 60, 4 + seed % 13,
                                                      1 + seed % 6, 0.1 + 0.1 * (seed % 4), seed);
    ties += tie;
    const auto k = cosine_kernel(set);
    const auto u = iota(set.size());
    ObjectiveConfig cfg;
    cfg.lambda = lambdas[seed % 5];
    cfg.k1 = 1 + seed % set.size();
    cfg.k = 1;
    cfg.allow_negative_gain = seed % 2 == 1;
    const auto lazy = retrieve_stage1(k, u, cfg);
    const auto naive = naive_greedy(k, u, cfg);
    lazy_evals += lazy.gain_evaluations;
    naive_evals += naive.gain_evaluations;
    if (lazy.selected != naive.selected) ++mismatches;
  }
  return {mismatches == 0, std::to_string(kLazyInstances) + " instances (" +
                               std::to_string(ties) + " with exact ties), " +
                               std::to_string(mismatches) + " mismatches, gain evaluations " +
                               std::to_string(lazy_evals) + " lazy vs " +
                               std::to_string(naive_evals) + " naive"};
}

// ---------------------------------------------------------------------------
// 3. Incremental state against from-scratch recomputation.

constexpr std::size_t kIncrementalRuns = 100;
constexpr std::size_t kIdentityInstances = 500;
constexpr double kIncrementalRtol = 1e-7;

bool close_rel(double a, double b, double rtol) {
  // Relative to the larger magnitude, with unit scale near zero.
  return std::abs(a - b) <= rtol * std::max({std::abs(a), std::abs(b), 1.0});
}

Outcome incremental() {
  std::size_t commits = 0, bad = 0;
  for (std::uint64_t seed = 0; seed < kIncrementalRuns; ++seed) {
    const std::size_t n = 5 + seed % 36;
    const auto k = cosine_kernel(oracle::random_instance(n, n + 4, seed));
    const auto u = iota(n);
    ObjectiveConfig cfg;
    cfg.lambda = 0.05 * static_cast<double>(seed % 5);
    SelectionState<float> state(k, u, cfg);
    std::mt19937_64 rng(seed);
    auto order = u;
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(1 + seed % n);
    std::vector<Index> s;
    for (Index c : order) {
      state.commit(c);
      s.push_back(c);
      ++commits;
      const double cov = oracle::coverage(k, u, s);
      const double ld = oracle::log_det(k, s);
      bool ok = close_rel(state.coverage(), cov, kIncrementalRtol) &&
                close_rel(state.logdet(), ld, kIncrementalRtol) &&
                close_rel(state.value(), cov + cfg.lambda * ld, kIncrementalRtol);
      for (std::size_t p = 0; p < n && ok; ++p) {
        double best = -std::numeric_limits<double>::infinity();
        for (Index j : s) best = std::max(best, k(p, j));
        ok = state.coverage_cache()[p] == best;
      }
      if (!ok) ++bad;
    }
  }
  std::size_t id_fail = 0, pairs = 0;
  for (std::uint64_t seed = 0; seed < kIdentityInstances; ++seed) {
    const std::size_t n = 2 + seed % 9;
    const auto k = cosine_kernel(oracle::random_instance(n, n + seed % 3, seed));
    const auto rep = oracle::check_projection_identity(k, seed, 16, kIncrementalRtol);
    pairs += rep.comparisons;
    id_fail += rep.failure_count;
  }
  return {bad == 0 && id_fail == 0,
          std::to_string(commits) + " commits over " + std::to_string(kIncrementalRuns) +
              " runs, " + std::to_string(bad) + " mismatches; projection identity " +
              std::to_string(id_fail) + " failures in " + std::to_string(pairs) + " pairs over " +
              std::to_string(kIdentityInstances) + " instances"};
}

// ---------------------------------------------------------------------------
// 4. Exhaustive property suites for the two terms.

constexpr std::size_t kPropertySeeds = 100;

Outcome term_properties() {
  oracle::PropertyReport total;
  std::string names;
  for (std::uint64_t seed = 0; seed < kPropertySeeds; ++seed) {
    const std::size_t n = 3 + seed % 6;  // 3..8
    const auto set = seed % 2 == 0 ? oracle::random_instance(n, n + 2, seed)
                                   : oracle::clustered_instance(n, n + 2, 2, 0.3, seed);
    const auto k = cosine_kernel(set);
    const auto u = iota(n);
    ObjectiveConfig cfg;
    oracle::CheckOptions opt;
    opt.tolerance = kPropertyTol;
    opt.include_empty = false;
    opt.seed = seed;
    total.merge(oracle::check_monotonicity(k, u, cfg, oracle::Term::coverage, opt));
    total.merge(oracle::check_submodularity(k, u, cfg, oracle::Term::coverage, opt));
    total.merge(oracle::check_monotonicity(k, u, cfg, oracle::Term::diversity, opt));
    total.merge(oracle::check_submodularity(k, u, cfg, oracle::Term::diversity, opt));
  }
  return {total.passed(), std::to_string(kPropertySeeds) + " seeds, " +
                              std::to_string(total.comparisons) + " comparisons, " +
                              std::to_string(total.failure_count) + " failures"};
}

// ---------------------------------------------------------------------------
// 5. Modular upper bound on conditional gains.

constexpr std::size_t kModularSeeds = 60;

Outcome modular_bound() {
  std::size_t checks = 0, violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < kModularSeeds; ++seed) {
    const std::size_t n = 4 + seed % 5;  // 4..8
    const auto k = cosine_kernel(oracle::random_instance(n, n + 2, seed));
    const auto u = iota(n);
    const double lambda = 0.05 * static_cast<double>(seed % 3);
    ObjectiveConfig cfg;
    cfg.lambda = lambda;
    const std::size_t full = std::size_t{1} << n;
    for (std::size_t qm = 1; qm < full; ++qm) {
      if (std::popcount(qm) > 3) continue;
      const auto q = oracle::detail::members(qm, u);
      const double fq = oracle::objective(k, u, q, lambda);
      std::vector<Index> rest;
      for (Index i = 0; i < n; ++i) {
        if (!(qm >> i & 1)) rest.push_back(i);
      }
      const auto single = conditional_gains(k, q, rest, u, cfg);
      for (std::size_t tm = 1; tm < (std::size_t{1} << rest.size()); ++tm) {
        if (std::popcount(tm) > 3) continue;
        auto tq = q;
        double bound = 0.0;
        for (std::size_t p = 0; p < rest.size(); ++p) {
          if (tm >> p & 1) {
            tq.push_back(rest[p]);
            bound += single[p];
          }
        }
        const double lhs = oracle::objective(k, u, tq, lambda) - fq;
        ++checks;
        worst = std::max(worst, lhs - bound);
        if (lhs > bound + kPropertyTol) ++violations;
      }
    }
  }
  return {violations == 0, std::to_string(checks) + " (Q, T) pairs over " +
                               std::to_string(kModularSeeds) + " seeds, " +
                               std::to_string(violations) + " violations, max excess " +
                               fmt(worst)};
}

// ---------------------------------------------------------------------------
// 6. Stage 2 returns the best size-k subset of its modular objective.

constexpr std::size_t kStage2Instances = 200;
constexpr double kGainAgreement = 1e-9;

Outcome stage2_optimal() {
  std::size_t mismatches = 0, gain_disagreements = 0;
  std::mt19937_64 rng(2024);
  for (std::uint64_t seed = 0; seed < kStage2Instances; ++seed) {
    const std::size_t n = 4 + seed % 5;  // 4..8
    const auto set = seed % 3 == 0 ? oracle::clustered_instance(n, n + 1, 2, 0.2, seed)
                                   : oracle::random_instance(n, n + 1, seed);
    const auto k = cosine_kernel(set);
    const auto u = iota(n);
    auto perm = u;
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t nq = 1 + seed % 3;
    const std::vector<Index> q(perm.begin(), perm.begin() + nq);
    std::vector<Index> pool(perm.begin() + nq, perm.end());
    std::sort(pool.begin(), pool.end());
    ObjectiveConfig cfg;
    cfg.lambda = 0.05 * static_cast<double>(seed % 4);
    cfg.k = std::min<std::size_t>(1 + seed % 3, pool.size());
    cfg.k1 = pool.size();

    // Singleton gains from scratch.
    const double fq = oracle::objective(k, u, q, cfg.lambda);
    std::vector<double> g(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
      auto with = q;
      with.push_back(pool[i]);
      g[i] = oracle::objective(k, u, with, cfg.lambda) - fq;
    }
    // Exhaustive argmax; among equal sums the lexicographically first mask
    // in lowest-index order wins.
    double best = -std::numeric_limits<double>::infinity();
    std::vector<Index> best_set;
    for (std::size_t m = 0; m < (std::size_t{1} << pool.size()); ++m) {
      if (static_cast<std::size_t>(std::popcount(m)) != cfg.k) continue;
      double sum = 0.0;
      std::vector<Index> s;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (m >> i & 1) {
          sum += g[i];
          s.push_back(pool[i]);
        }
      }
      if (sum > best + kGainAgreement) {
        best = sum;
        best_set = s;
      }
    }
    const auto ranked = rank_stage2(k, pool, q, u, cfg);
    std::vector<Index> got;
    double got_sum = 0.0;
    for (const auto& s : ranked) {
      got.push_back(s.index);
      const auto it = std::find(pool.begin(), pool.end(), s.index);
      const double ref = g[static_cast<std::size_t>(it - pool.begin())];
      if (std::abs(ref - s.gain) > kGainAgreement) ++gain_disagreements;
      got_sum += ref;
    }
    std::sort(got.begin(), got.end());
    // Distinct subsets are accepted only when their sums tie exactly up to
    // the gain agreement tolerance.
    if (got != best_set && std::abs(got_sum - best) > kGainAgreement) ++mismatches;
  }
  return {mismatches == 0 && gain_disagreements == 0,
          std::to_string(kStage2Instances) + " instances, " + std::to_string(mismatches) +
              " non-optimal selections, " + std::to_string(gain_disagreements) +
              " gain disagreements"};
}

// ---------------------------------------------------------------------------
// 7. Diversity spreads the stage-1 selection on clustered data.

constexpr std::size_t kDispersionSeeds = 50;
constexpr std::size_t kDispersionRequired = 45;  // 90%

Outcome dispersion() {
  std::size_t lower = 0;
  double mean_with = 0.0, mean_without = 0.0;
  for (std::uint64_t seed = 0; seed < kDispersionSeeds; ++seed) {
    const auto k = cosine_kernel(generate_synthetic(500, 16, 5, 0.05, seed));
    const auto u = iota(500);
    ObjectiveConfig cfg;
    cfg.k1 = 100;
    cfg.k = 1;
    cfg.lambda = 0.1;
    const auto a = dispersion_stats(k, retrieve_stage1(k, u, cfg).selected);
    cfg.lambda = 0.0;
    const auto b = dispersion_stats(k, retrieve_stage1(k, u, cfg).selected);
    if (a.mean_pairwise_sim < b.mean_pairwise_sim) ++lower;
    mean_with += a.mean_pairwise_sim / kDispersionSeeds;
    mean_without += b.mean_pairwise_sim / kDispersionSeeds;
  }
  return {lower >= kDispersionRequired,
          std::to_string(lower) + "/" + std::to_string(kDispersionSeeds) +
              " seeds lower (need " + std::to_string(kDispersionRequired) +
              "), mean pairwise sim " + fmt(mean_with) + " vs " + fmt(mean_without)};
}

// ---------------------------------------------------------------------------
// 8. Method presets reduce to explicit stage weights.

const char* kReportFiles[] = {"report.json", "report.txt", "stage1_ids.txt", "stage2_ids.txt"};

bool same_artifacts(const std::filesystem::path& a, const std::filesystem::path& b,
                    bool prompts = false) {
  for (auto f : kReportFiles) {
    if (slurp(a / f) != slurp(b / f) || slurp(a / f).empty()) return false;
  }
  return !prompts || slurp(a / "prompts.json") == slurp(b / "prompts.json");
}

Outcome reductions() {
  Scratch dir;
  std::size_t pairs = 0, different = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::string tag = std::to_string(seed);
    write_set(dir / ("c" + tag), generate_synthetic(120, 12, 5, 0.1, seed));
    write_set(dir / ("q" + tag), generate_synthetic(3, 12, 2, 0.1, seed + 100, Role::query, "q"));
    RunConfig base;
    base.corpus_path = dir / ("c" + tag);
    base.query_path = dir / ("q" + tag);
    base.k1 = 20;
    base.lambda = 0.1;
    base.per_query = seed % 2 == 1;
    auto check = [&](RunConfig a, RunConfig b, const std::string& name) {
      a.output_dir = dir / (name + tag + "a");
      b.output_dir = dir / (name + tag + "b");
      run_select(a);
      run_select(b);
      ++pairs;
      if (!same_artifacts(a.output_dir, b.output_dir)) ++different;
    };
    RunConfig a = base, b = base;
    a.lambda_stage1 = 0.0;
    a.lambda_stage2 = 0.0;
    b.method = Method::div_s3;
    check(a, b, "s3");
    a = base;
    a.lambda_stage2 = 0.0;
    b = base;
    b.method = Method::div_star_s3;
    check(a, b, "star_s3");
    a = base;
    a.lambda_stage1 = 0.0;
    b = base;
    b.method = Method::div_s3_star;
    check(a, b, "s3_star");
  }
  return {different == 0, std::to_string(pairs) + " reduction pairs, " +
                              std::to_string(different) + " differ"};
}

// ---------------------------------------------------------------------------
// 9. Golden prompts.

Outcome prompts() {
  const std::filesystem::path fx = DUALDIV_FIXTURE_DIR;
  const std::string task = "Classify the sentiment of the sentence.";
  std::size_t ok = 0;
  ok += assemble_prompt(kDefaultPromptTemplate, task, {}, "c", true) ==
        slurp(fx / "prompt_k0.txt");
  ok += assemble_prompt(kDefaultPromptTemplate, task, {{"a", "b"}}, "c") ==
        slurp(fx / "prompt_k1.txt");
  ok += assemble_prompt(kDefaultPromptTemplate, task,
                        {{"the plot drags", "negative"},
                         {"a warm, funny film", "positive"},
                         {"{query} is not a placeholder here", "neutral"}},
                        "bright and {sharp}") == slurp(fx / "prompt_k3.txt");
  return {ok == 3, std::to_string(ok) + "/3 fixtures (k = 0, 1, 3) byte-identical"};
}

// ---------------------------------------------------------------------------
// 10. Repeated select runs produce identical artifacts.

Outcome determinism() {
  Scratch dir;
  std::size_t runs = 0, different = 0;
  const Method methods[] = {Method::dual_div, Method::div_s3, Method::div_star_s3,
                            Method::div_s3_star, Method::random_similar};
  write_set(dir / "c", generate_synthetic(300, 16, 6, 0.2, 5));
  write_set(dir / "q", generate_synthetic(4, 16, 2, 0.2, 6, Role::query, "q"));
  for (std::size_t m = 0; m < std::size(methods); ++m) {
    RunConfig rc;
    rc.corpus_path = dir / "c";
    rc.query_path = dir / "q";
    rc.method = methods[m];
    rc.k1 = 30;
    rc.k = 4;
    rc.seed = 11;
    rc.per_query = m % 2 == 0;
    rc.emit_prompt = true;
    rc.task_description = "Pick the label.";
    rc.output_dir = dir / ("a" + std::to_string(m));
    run_select(rc);
    const auto first = rc.output_dir;
    rc.output_dir = dir / ("b" + std::to_string(m));
    run_select(rc);
    ++runs;
    if (!same_artifacts(first, rc.output_dir, true)) ++different;
  }
  return {different == 0, std::to_string(runs) + " repeated runs (all methods), " +
                              std::to_string(different) + " differ"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"approximation guarantee", approximation},
      {"lazy greedy equals naive greedy", lazy_equals_naive},
      {"incremental state and projection identity", incremental},
      {"coverage and diversity properties", term_properties},
      {"modular upper bound", modular_bound},
      {"stage 2 optimality", stage2_optimal},
      {"dispersion direction", dispersion},
      {"baseline reductions", reductions},
      {"prompt fidelity", prompts},
      {"select determinism", determinism},
  };
  int failed = 0;
  int id = 0;
  for (const auto& c : criteria) {
    ++id;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s [%d] %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%d criteria passed\n", id - failed, id);
  return failed == 0 ? 0 : 1;
}
