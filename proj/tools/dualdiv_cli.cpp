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

// Command-line front end: select, grid, oracle, probe-lambda, gen-synth,
// permute. Exit codes: 0 success, 1 usage/config error, 2 data error,
// 3 internal invariant violation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dualdiv/dualdiv.hpp"

namespace {

using dualdiv::Index;

struct RunOptions {
  std::string format = "text";
  std::string method = "dual_div";
  std::string demo_order = "descending";
  std::string corpus, queries, output_dir = "dualdiv-out";
  std::string template_path, corpus_text, query_text;
  dualdiv::RunConfig rc;
};

void add_run_options(CLI::App* app, RunOptions& o, bool grid) {
  app->add_option("--config", "key = value file; command-line flags override it");
  app->add_option("--corpus", o.corpus, "corpus embeddings")->required();
  app->add_option("--queries", o.queries, "query embeddings")->required();
  app->add_option("--format", o.format, "text or binary")->capture_default_str();
  if (!grid) {
    app->add_option("--lambda", o.rc.lambda, "diversity weight")->capture_default_str();
    app->add_option("--method", o.method,
                    "dual_div, div_s3, div_star_s3, div_s3_star or random_similar")
        ->capture_default_str();
  }
  app->add_option("--lambda-stage1", o.rc.lambda_stage1, "stage-1 weight override");
  app->add_option("--lambda-stage2", o.rc.lambda_stage2, "stage-2 weight override");
  app->add_option("--k1", o.rc.k1, "stage-1 budget")->capture_default_str();
  app->add_option("--k", o.rc.k, "number of demonstrations")->capture_default_str();
  app->add_option("--seed", o.rc.seed, "seed for random_similar")->capture_default_str();
  app->add_option("--output-dir", o.output_dir, "artifact directory")->capture_default_str();
  app->add_flag("--emit-prompt", o.rc.emit_prompt, "render prompts.json");
  app->add_option("--template", o.template_path, "prompt template file");
  app->add_option("--task", o.rc.task_description, "task description for the prompt");
  app->add_option("--corpus-text", o.corpus_text, "id<TAB>text file for corpus inputs");
  app->add_option("--query-text", o.query_text, "id<TAB>text file for query inputs");
  app->add_flag("--per-query", o.rc.per_query, "rank demonstrations separately per query");
  app->add_option("--demo-order", o.demo_order, "descending or ascending gain order")
      ->capture_default_str();
  app->add_option("--residual-floor", o.rc.residual_floor, "floor for squared residuals")
      ->capture_default_str();
  app->add_flag("--allow-negative-gain", o.rc.allow_negative_gain,
                "keep selecting after the best gain turns negative");
}

dualdiv::RunConfig finish(RunOptions& o) {
  auto rc = o.rc;
  rc.corpus_path = o.corpus;
  rc.query_path = o.queries;
  rc.format = dualdiv::parse_format(o.format);
  rc.method = dualdiv::parse_method(o.method);
  rc.demo_order = dualdiv::parse_demo_order(o.demo_order);
  rc.output_dir = o.output_dir;
  if (!o.template_path.empty()) rc.template_path = o.template_path;
  if (!o.corpus_text.empty()) rc.corpus_text_path = o.corpus_text;
  if (!o.query_text.empty()) rc.query_text_path = o.query_text;
  return rc;
}

template <class T>
std::vector<T> split_list(const std::string& s, T (*parse)(std::string_view)) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse(item));
  }
  return out;
}

double parse_double(std::string_view s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(s), &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw dualdiv::ConfigError("bad number '" + std::string(s) + "'");
  }
}

// Expands `--config FILE` into `--key=value` arguments placed before the
// remaining flags, so explicit flags (parsed later, last one wins) override.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    std::size_t consumed = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      consumed = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      consumed = 1;
    } else {
      continue;
    }
    std::ifstream in(path);
    if (!in) throw dualdiv::ConfigError("cannot open config file '" + path + "'");
    std::vector<std::string> expanded;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      if (trim(line).empty()) continue;
      if (eq == std::string::npos) {
        throw dualdiv::ConfigError(path + ":" + std::to_string(lineno) +
                                   ": expected key = value");
      }
      std::string key = trim(line.substr(0, eq));
      for (auto& c : key) {
        if (c == '_') c = '-';
      }
      expanded.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
    }
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
               args.begin() + static_cast<std::ptrdiff_t>(i + consumed));
    // Right after the subcommand name (args[0]).
    args.insert(args.begin() + 1, expanded.begin(), expanded.end());
    break;
  }
  return args;
}

int run_oracle(std::size_t instances, std::uint64_t seed, std::size_t max_n, double lambda,
               std::size_t clusters, double noise, bool include_empty,
               const std::string& output_dir, bool strict) {
  using namespace dualdiv;
  using oracle::Term;
  if (max_n < 3 || max_n > oracle::kMaxExhaustive) {
    throw ConfigError("--n must lie in [3, " + std::to_string(oracle::kMaxExhaustive) + "]");
  }
  ObjectiveConfig cfg;
  cfg.lambda = lambda;
  std::vector<oracle::PropertyReport> reports;
  auto slot = [&](const std::string& name, double tol) -> oracle::PropertyReport& {
    for (auto& r : reports) {
      if (r.property_name == name) return r;
    }
    auto& r = reports.emplace_back();
    r.property_name = name;
    r.tolerance = tol;
    return r;
  };
  for (std::size_t t = 0; t < instances; ++t) {
    const std::uint64_t s = seed + t;
    const std::size_t n = 3 + s % (max_n - 2);
    const auto set = clusters == 0 ? oracle::random_instance(n, n + 2, s)
                                   : oracle::clustered_instance(n, n + 2, std::min(clusters, n),
                                                                noise, s);
    const auto kernel = cosine_kernel(set);
    const auto universe = oracle::iota_indices(n);
    oracle::CheckOptions opt;
    opt.seed = s;
    opt.include_empty = include_empty;
    for (auto term : {Term::coverage, Term::diversity, Term::combined}) {
      auto m = oracle::check_monotonicity(kernel, universe, cfg, term, opt);
      slot(m.property_name, opt.tolerance).merge(m);
      auto sm = oracle::check_submodularity(kernel, universe, cfg, term, opt);
      slot(sm.property_name, opt.tolerance).merge(sm);
    }
    if (n <= oracle::kMaxIdentityN) {
      auto id = oracle::check_projection_identity(kernel, s);
      slot(id.property_name, id.tolerance).merge(id);
    }
  }
  std::string text;
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  bool all = true;
  for (const auto& r : reports) {
    text += oracle::to_text(r);
    j.push_back(oracle::to_json(r));
    all = all && r.passed();
  }
  std::cout << text;
  if (!output_dir.empty()) {
    std::filesystem::create_directories(output_dir);
    std::ofstream(std::filesystem::path(output_dir) / "oracle_report.txt") << text;
    std::ofstream(std::filesystem::path(output_dir) / "oracle_report.json") << j.dump(2) << "\n";
  }
  return strict && !all ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dualdiv: two-stage diversity-aware demonstration selection"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  RunOptions sel;
  auto* select = app.add_subcommand("select", "run two-stage selection");
  add_run_options(select, sel, false);

  RunOptions grid_opts;
  std::string grid_methods = "dual_div,div_s3,div_star_s3,div_s3_star";
  std::string grid_lambdas = "0,0.05,0.1";
  auto* grid = app.add_subcommand("grid", "run a method x lambda grid concurrently");
  add_run_options(grid, grid_opts, true);
  grid->add_option("--methods", grid_methods, "comma-separated methods")->capture_default_str();
  grid->add_option("--lambdas", grid_lambdas, "comma-separated lambdas")->capture_default_str();

  std::size_t o_instances = 100, o_n = 8, o_clusters = 0;
  std::uint64_t o_seed = 1;
  double o_lambda = 0.1, o_noise = 0.1;
  bool o_include_empty = false, o_strict = false;
  std::string o_out;
  auto* orc = app.add_subcommand("oracle", "run the exhaustive property suites");
  orc->add_option("--instances", o_instances, "number of seeded instances")->capture_default_str();
  orc->add_option("--seed", o_seed, "first seed")->capture_default_str();
  orc->add_option("--n", o_n, "largest instance size (3..12)")->capture_default_str();
  orc->add_option("--lambda", o_lambda, "weight for the combined checks")->capture_default_str();
  orc->add_option("--clusters", o_clusters, "0 = isotropic unit vectors")->capture_default_str();
  orc->add_option("--noise", o_noise, "cluster noise")->capture_default_str();
  orc->add_flag("--include-empty", o_include_empty, "also use the empty set as a base set");
  orc->add_option("--output-dir", o_out, "write oracle_report.{txt,json} here");
  orc->add_flag("--strict", o_strict, "exit 3 if any property fails");

  std::string p_corpus, p_format = "text";
  double p_lambda = 0.1;
  std::size_t p_trials = 1000;
  std::uint64_t p_seed = 0;
  auto* probe = app.add_subcommand("probe-lambda", "estimate the largest monotone lambda");
  probe->add_option("--corpus", p_corpus, "corpus embeddings")->required();
  probe->add_option("--format", p_format, "text or binary")->capture_default_str();
  probe->add_option("--lambda", p_lambda, "lambda to test for violations")->capture_default_str();
  probe->add_option("--trials", p_trials, "random (S, x) samples")->capture_default_str();
  probe->add_option("--seed", p_seed, "sampling seed")->capture_default_str();

  std::size_t g_n = 500, g_d = 16, g_clusters = 5;
  double g_noise = 0.1;
  std::uint64_t g_seed = 0;
  std::string g_format = "text", g_out, g_prefix = "x";
  auto* gen = app.add_subcommand("gen-synth", "write a clustered synthetic corpus");
  gen->add_option("--n", g_n)->capture_default_str();
  gen->add_option("--d", g_d)->capture_default_str();
  gen->add_option("--clusters", g_clusters)->capture_default_str();
  gen->add_option("--noise", g_noise, "per-coordinate noise std")->capture_default_str();
  gen->add_option("--seed", g_seed)->capture_default_str();
  gen->add_option("--format", g_format, "text or binary")->capture_default_str();
  gen->add_option("--id-prefix", g_prefix)->capture_default_str();
  gen->add_option("--out", g_out, "output file")->required();

  std::vector<std::string> perm_items;
  std::size_t perm_limit = dualdiv::kDefaultPermutationLimit;
  auto* permute = app.add_subcommand("permute", "list every ordering of the given demos");
  permute->add_option("demos", perm_items, "demonstration ids")->required();
  permute->add_option("--limit", perm_limit, "refuse above this many orderings")
      ->capture_default_str();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);

    if (*select) {
      const auto res = dualdiv::run_select(finish(sel));
      std::cout << res.text;
    } else if (*grid) {
      auto base = finish(grid_opts);
      const auto cells = dualdiv::run_grid(
          base, split_list<dualdiv::Method>(grid_methods, dualdiv::parse_method),
          split_list<double>(grid_lambdas, parse_double));
      for (const auto& c : cells) std::cout << c.output_dir.string() << "\n";
    } else if (*orc) {
      return run_oracle(o_instances, o_seed, o_n, o_lambda, o_clusters, o_noise,
                        o_include_empty, o_out, o_strict);
    } else if (*probe) {
      const auto corpus =
          dualdiv::load_embeddings_file(p_corpus, dualdiv::parse_format(p_format));
      if (corpus.empty()) throw dualdiv::DataError("corpus is empty");
      const auto kernel = dualdiv::cosine_kernel(corpus);
      dualdiv::ObjectiveConfig cfg;
      cfg.lambda = p_lambda;
      const auto universe = dualdiv::oracle::iota_indices(corpus.size());
      const auto r = dualdiv::lambda_bound_probe(kernel, universe, cfg, p_trials, p_seed);
      nlohmann::ordered_json j;
      j["lambda"] = p_lambda;
      j["trials"] = r.sampled;
      j["skipped"] = r.skipped;
      if (std::isinf(r.max_valid_lambda_estimate)) {
        j["max_valid_lambda_estimate"] = "inf";
      } else {
        j["max_valid_lambda_estimate"] = r.max_valid_lambda_estimate;
      }
      j["violation_count"] = r.violations.size();
      auto& arr = j["violations"] = nlohmann::ordered_json::array();
      for (std::size_t i = 0; i < r.violations.size() && i < 20; ++i) {
        const auto& v = r.violations[i];
        std::vector<std::string> ids;
        for (Index s : v.selected) ids.push_back(kernel.id(s));
        arr.push_back({{"set", ids},
                       {"candidate", kernel.id(v.candidate)},
                       {"coverage_delta", v.coverage_delta},
                       {"diversity_drop", v.diversity_drop},
                       {"gain", v.gain}});
      }
      std::cout << j.dump(2) << "\n";
    } else if (*gen) {
      const auto set = dualdiv::generate_synthetic(g_n, g_d, g_clusters, g_noise, g_seed,
                                                   dualdiv::Role::corpus, g_prefix);
      std::ofstream out(g_out, std::ios::binary | std::ios::trunc);
      if (!out) throw dualdiv::DataError("cannot write '" + g_out + "'");
      dualdiv::write_embeddings(out, set, dualdiv::parse_format(g_format));
    } else if (*permute) {
      for (const auto& p : dualdiv::enumerate_permutations(perm_items, perm_limit)) {
        for (std::size_t i = 0; i < p.size(); ++i) std::cout << (i ? "\t" : "") << p[i];
        std::cout << "\n";
      }
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const dualdiv::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dualdiv::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const dualdiv::InvariantError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
