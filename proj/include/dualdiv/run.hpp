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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "dualdiv/embeddings.hpp"
#include "dualdiv/error.hpp"
#include "dualdiv/kernel.hpp"
#include "dualdiv/objective.hpp"
#include "dualdiv/prompt.hpp"
#include "dualdiv/selector.hpp"

namespace dualdiv {

enum class Method { dual_div, div_s3, div_star_s3, div_s3_star, random_similar };
enum class DemoOrder { descending, ascending };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::dual_div: return "dual_div";
    case Method::div_s3: return "div_s3";
    case Method::div_star_s3: return "div_star_s3";
    case Method::div_s3_star: return "div_s3_star";
    case Method::random_similar: return "random_similar";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (auto m : {Method::dual_div, Method::div_s3, Method::div_star_s3, Method::div_s3_star,
                 Method::random_similar}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

inline std::string_view to_string(DemoOrder o) {
  return o == DemoOrder::descending ? "descending" : "ascending";
}

inline DemoOrder parse_demo_order(std::string_view s) {
  if (s == "descending") return DemoOrder::descending;
  if (s == "ascending") return DemoOrder::ascending;
  throw ConfigError("unknown demo order '" + std::string(s) + "'");
}

struct RunConfig {
  std::filesystem::path corpus_path;
  std::filesystem::path query_path;
  Format format = Format::text;
  double lambda = 0.1;
  std::optional<double> lambda_stage1;
  std::optional<double> lambda_stage2;
  std::size_t k1 = 100;
  std::size_t k = 3;
  Method method = Method::dual_div;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "dualdiv-out";
  bool emit_prompt = false;
  std::optional<std::filesystem::path> template_path;
  std::string task_description;
  std::optional<std::filesystem::path> corpus_text_path;
  std::optional<std::filesystem::path> query_text_path;
  bool per_query = false;
  DemoOrder demo_order = DemoOrder::descending;
  double residual_floor = kDefaultResidualFloor;
  bool allow_negative_gain = false;
};

/// Resolves the method into explicit per-stage weights:
///   dual_div       stage1 = stage2 = lambda (overrides apply)
///   div_s3         both 0 (coverage only)
///   div_star_s3    diversity in stage 1 only
///   div_s3_star    diversity in stage 2 only
///   random_similar weights only affect the reported stage-1 objective
inline ObjectiveConfig objective_config(const RunConfig& rc) {
  ObjectiveConfig c;
  c.lambda = rc.lambda;
  c.residual_floor = rc.residual_floor;
  c.k1 = rc.k1;
  c.k = rc.k;
  c.allow_negative_gain = rc.allow_negative_gain;
  const double l1 = rc.lambda_stage1.value_or(rc.lambda);
  const double l2 = rc.lambda_stage2.value_or(rc.lambda);
  switch (rc.method) {
    case Method::dual_div:
    case Method::random_similar:
      c.lambda_stage1 = l1;
      c.lambda_stage2 = l2;
      break;
    case Method::div_s3:
      c.lambda_stage1 = 0.0;
      c.lambda_stage2 = 0.0;
      break;
    case Method::div_star_s3:
      c.lambda_stage1 = l1;
      c.lambda_stage2 = 0.0;
      break;
    case Method::div_s3_star:
      c.lambda_stage1 = 0.0;
      c.lambda_stage2 = l2;
      break;
  }
  c.validate();
  return c;
}

struct PerQuerySelection {
  Index query = 0;
  std::vector<Stage2Step> ranked;
};

struct RunResult {
  SelectionReport report;
  std::vector<PerQuerySelection> per_query;
  std::optional<DispersionStats> dispersion_selected;
  std::optional<DispersionStats> dispersion_coverage_only;
  std::vector<std::string> stage1_ids;
  std::vector<std::string> stage2_ids;
  nlohmann::ordered_json json;
  std::string text;
  nlohmann::ordered_json prompts;  // null unless emit_prompt
};

namespace detail {

inline std::unordered_map<std::string, std::string> load_text_map(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::unordered_map<std::string, std::string> map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path.string() + ": line " + std::to_string(lineno) +
                      ": expected id<TAB>text");
    }
    map[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return map;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

inline nlohmann::ordered_json stats_json(const std::optional<DispersionStats>& s) {
  if (!s) return nullptr;
  return {{"mean_pairwise_sim", s->mean_pairwise_sim},
          {"min_pairwise_sim", s->min_pairwise_sim},
          {"logdet", s->logdet}};
}

inline std::string stats_text(const std::optional<DispersionStats>& s) {
  if (!s) return "n/a (fewer than 2 selected)";
  return "mean=" + detail::format_double(s->mean_pairwise_sim) +
         " min=" + detail::format_double(s->min_pairwise_sim) + " logdet=" + detail::format_double(s->logdet);
}

// Internal consistency of a finished run; violations are bugs, not bad input.
inline void check_report(const SelectionReport& r) {
  const auto& s1 = r.stage1.selected;
  if (s1.size() > r.config.k1) throw InvariantError("stage 1 exceeds k1");
  if (r.stage2.size() > r.config.k || r.stage2.size() > s1.size()) {
    throw InvariantError("stage 2 exceeds its budget");
  }
  for (const auto& step : r.stage2) {
    if (std::find(s1.begin(), s1.end(), step.index) == s1.end()) {
      throw InvariantError("stage 2 picked an element outside stage 1");
    }
  }
  if (s1.size() < r.config.k1 && r.stage1.warnings.empty()) {
    throw InvariantError("stage 1 under budget without a recorded reason");
  }
}

}  // namespace detail

/// Executes one two-stage selection and writes its artifacts into
/// rc.output_dir:
///   report.json     structured report
///   report.txt      the same content for humans
///   stage1_ids.txt  one id per line, selection order
///   stage2_ids.txt  one id per line, rank order
///   prompts.json    rendered prompts (only with emit_prompt)
/// Paths and the method name are deliberately absent from the reports so
/// that equivalent configurations produce identical bytes.
inline RunResult run_select(const RunConfig& rc, bool write_artifacts = true) {
  const ObjectiveConfig cfg = objective_config(rc);
  std::string tmpl(kDefaultPromptTemplate);
  if (rc.template_path) tmpl = detail::read_file(*rc.template_path);
  if (rc.emit_prompt) {
    // Fail on a bad template before any compute.
    assemble_prompt(tmpl, "", {}, "", true);
  }

  const auto corpus = load_embeddings_file(rc.corpus_path, rc.format, Role::corpus);
  const auto queries = load_embeddings_file(rc.query_path, rc.format, Role::query);
  if (corpus.empty()) throw DataError("corpus is empty");
  if (queries.empty()) throw DataError("query set is empty");
  if (corpus.dimension() != queries.dimension()) {
    throw DataError("corpus dimension " + std::to_string(corpus.dimension()) +
                    " differs from query dimension " + std::to_string(queries.dimension()));
  }

  const auto kernel = cosine_kernel(corpus, queries);
  const std::size_t nv = corpus.size(), nq = queries.size();
  std::vector<Index> corpus_idx(nv), query_idx(nq);
  for (Index i = 0; i < nv; ++i) corpus_idx[i] = i;
  for (Index i = 0; i < nq; ++i) query_idx[i] = nv + i;

  RunResult res;
  res.report = rc.method == Method::random_similar
                   ? random_similar(kernel, corpus_idx, query_idx, cfg, rc.seed)
                   : select_two_stage(kernel, corpus_idx, query_idx, cfg);
  detail::check_report(res.report);
  const auto& stage1 = res.report.stage1.selected;

  if (rc.per_query) {
    for (Index q : query_idx) {
      const Index one[] = {q};
      PerQuerySelection pq{q, {}};
      if (rc.method == Method::random_similar) {
        for (Index x : stage1) pq.ranked.push_back({x, kernel(x, q)});
        std::sort(pq.ranked.begin(), pq.ranked.end(), [](const auto& a, const auto& b) {
          return ranks_before(a.gain, a.index, b.gain, b.index);
        });
        pq.ranked.resize(std::min(pq.ranked.size(), cfg.k));
      } else {
        std::vector<Index> universe = corpus_idx;
        universe.push_back(q);
        pq.ranked = rank_stage2(kernel, stage1, one, universe, cfg);
      }
      res.per_query.push_back(std::move(pq));
    }
  }

  if (stage1.size() >= 2) {
    res.dispersion_selected = dispersion_stats(kernel, stage1, cfg.residual_floor);
  }
  ObjectiveConfig coverage_only = cfg;
  coverage_only.lambda_stage1 = 0.0;
  const auto baseline = retrieve_stage1(kernel, corpus_idx, coverage_only);
  if (baseline.selected.size() >= 2) {
    res.dispersion_coverage_only =
        dispersion_stats(kernel, baseline.selected, cfg.residual_floor);
  }

  for (Index i : stage1) res.stage1_ids.push_back(kernel.id(i));
  for (const auto& s : res.report.stage2) res.stage2_ids.push_back(kernel.id(s.index));

  // Structured report.
  using json = nlohmann::ordered_json;
  const auto& r = res.report;
  json j;
  j["schema"] = "dualdiv.report/1";
  j["config"] = {{"lambda_stage1", cfg.stage1_lambda()},
                 {"lambda_stage2", cfg.stage2_lambda()},
                 {"k1", cfg.k1},
                 {"k", cfg.k},
                 {"residual_floor", cfg.residual_floor},
                 {"allow_negative_gain", cfg.allow_negative_gain},
                 {"tie_break", "lowest_index"},
                 {"per_query", rc.per_query},
                 {"demo_order", to_string(rc.demo_order)}};
  j["corpus"] = {{"size", nv}, {"dimension", corpus.dimension()}};
  j["queries"] = {{"size", nq}};
  json s1steps = json::array();
  for (const auto& s : r.stage1.steps) {
    s1steps.push_back({{"id", kernel.id(s.index)},
                       {"index", s.index},
                       {"gain", s.gain},
                       {"coverage_delta", s.coverage_delta},
                       {"diversity_delta", s.diversity_delta},
                       {"objective", s.objective}});
  }
  j["stage1"] = {{"selected", res.stage1_ids},
                 {"steps", s1steps},
                 {"gain_evaluations", r.stage1.gain_evaluations}};
  json s2steps = json::array();
  for (const auto& s : r.stage2) {
    s2steps.push_back({{"id", kernel.id(s.index)}, {"index", s.index}, {"gain", s.gain}});
  }
  j["stage2"] = {{"selected", res.stage2_ids}, {"steps", s2steps}};
  j["objective_trace"] = r.objective_trace;
  j["dispersion"] = {{"selected", detail::stats_json(res.dispersion_selected)},
                     {"coverage_only", detail::stats_json(res.dispersion_coverage_only)}};
  json pq = json::array();
  for (const auto& p : res.per_query) {
    json ids = json::array(), gains = json::array();
    for (const auto& s : p.ranked) {
      ids.push_back(kernel.id(s.index));
      gains.push_back(s.gain);
    }
    pq.push_back({{"query_id", kernel.id(p.query)}, {"selected", ids}, {"gains", gains}});
  }
  j["per_query"] = pq;
  j["warnings"] = r.warnings;
  res.json = j;

  // Human-readable report.
  std::ostringstream t;
  t << "dualdiv selection report\n";
  t << "lambda_stage1 " << detail::format_double(cfg.stage1_lambda()) << "\n";
  t << "lambda_stage2 " << detail::format_double(cfg.stage2_lambda()) << "\n";
  t << "k1 " << cfg.k1 << "  k " << cfg.k << "  residual_floor "
    << detail::format_double(cfg.residual_floor) << "\n";
  t << "corpus " << nv << " x " << corpus.dimension() << "  queries " << nq << "\n\n";
  t << "stage 1 (" << r.stage1.selected.size() << " selected, "
    << r.stage1.gain_evaluations << " gain evaluations)\n";
  for (std::size_t i = 0; i < r.stage1.steps.size(); ++i) {
    const auto& s = r.stage1.steps[i];
    t << "  " << i + 1 << "\t" << kernel.id(s.index) << "\tgain=" << detail::format_double(s.gain)
      << "\tcoverage+=" << detail::format_double(s.coverage_delta)
      << "\tdiversity+=" << detail::format_double(s.diversity_delta)
      << "\tf=" << detail::format_double(s.objective) << "\n";
  }
  t << "\nstage 2 (" << r.stage2.size() << " selected)\n";
  for (std::size_t i = 0; i < r.stage2.size(); ++i) {
    t << "  " << i + 1 << "\t" << kernel.id(r.stage2[i].index)
      << "\tgain=" << detail::format_double(r.stage2[i].gain) << "\n";
  }
  t << "\ndispersion of stage 1 selection: " << detail::stats_text(res.dispersion_selected)
    << "\n";
  t << "dispersion of coverage-only selection: "
    << detail::stats_text(res.dispersion_coverage_only) << "\n";
  for (const auto& p : res.per_query) {
    t << "per-query " << kernel.id(p.query) << ":";
    for (const auto& s : p.ranked) t << " " << kernel.id(s.index);
    t << "\n";
  }
  t << "\nwarnings (" << r.warnings.size() << ")\n";
  for (const auto& w : r.warnings) t << "  " << w << "\n";
  res.text = t.str();

  if (rc.emit_prompt) {
    std::unordered_map<std::string, std::string> corpus_text, query_text;
    if (rc.corpus_text_path) corpus_text = detail::load_text_map(*rc.corpus_text_path);
    if (rc.query_text_path) query_text = detail::load_text_map(*rc.query_text_path);
    auto text_of = [](const auto& map, const std::string& id, bool have_map) {
      if (!have_map) return id;
      auto it = map.find(id);
      if (it == map.end()) throw DataError("no text for id '" + id + "'");
      return it->second;
    };
    json prompts = json::array();
    for (std::size_t qi = 0; qi < nq; ++qi) {
      const auto& ranked = rc.per_query ? res.per_query[qi].ranked : r.stage2;
      std::vector<Stage2Step> order = ranked;
      if (rc.demo_order == DemoOrder::ascending) std::reverse(order.begin(), order.end());
      std::vector<Demonstration> demos;
      json demo_ids = json::array();
      for (const auto& s : order) {
        const auto& rec = corpus[s.index];
        demos.push_back({text_of(corpus_text, rec.id, rc.corpus_text_path.has_value()),
                         rec.label.value_or("")});
        demo_ids.push_back(rec.id);
      }
      const auto& qrec = queries[qi];
      const auto qtext = text_of(query_text, qrec.id, rc.query_text_path.has_value());
      prompts.push_back({{"query_id", qrec.id},
                         {"demo_ids", demo_ids},
                         {"prompt", assemble_prompt(tmpl, rc.task_description, demos, qtext)}});
    }
    res.prompts = json{{"prompts", prompts}};
  }

  if (write_artifacts) {
    std::filesystem::create_directories(rc.output_dir);
    detail::write_file(rc.output_dir / "report.json", res.json.dump(2) + "\n");
    detail::write_file(rc.output_dir / "report.txt", res.text);
    std::string ids1, ids2;
    for (const auto& id : res.stage1_ids) ids1 += id + "\n";
    for (const auto& id : res.stage2_ids) ids2 += id + "\n";
    detail::write_file(rc.output_dir / "stage1_ids.txt", ids1);
    detail::write_file(rc.output_dir / "stage2_ids.txt", ids2);
    if (rc.emit_prompt) {
      detail::write_file(rc.output_dir / "prompts.json", res.prompts.dump(2) + "\n");
    }
  }
  return res;
}

struct GridCell {
  Method method = Method::dual_div;
  double lambda = 0.0;
  std::filesystem::path output_dir;
};

/// Runs every (method, lambda) pair of the grid, concurrently, each into its
/// own subdirectory `<method>_lambda-<value>` of base.output_dir.
inline std::vector<GridCell> run_grid(const RunConfig& base, const std::vector<Method>& methods,
                                      const std::vector<double>& lambdas) {
  std::vector<GridCell> cells;
  for (auto m : methods) {
    for (double l : lambdas) {
      cells.push_back({m, l,
                       base.output_dir / (std::string(to_string(m)) + "_lambda-" +
                                          detail::format_double(l))});
    }
  }
  for (const auto& c : cells) {
    RunConfig rc = base;
    rc.method = c.method;
    rc.lambda = c.lambda;
    objective_config(rc);  // reject the whole grid before running any cell
  }
  std::vector<std::future<void>> jobs;
  for (const auto& c : cells) {
    RunConfig rc = base;
    rc.method = c.method;
    rc.lambda = c.lambda;
    rc.output_dir = c.output_dir;
    jobs.push_back(std::async(std::launch::async, [rc] { run_select(rc); }));
  }
  for (auto& j : jobs) j.get();
  return cells;
}

}  // namespace dualdiv
