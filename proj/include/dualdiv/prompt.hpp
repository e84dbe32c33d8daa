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
#include <array>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dualdiv/error.hpp"

namespace dualdiv {

struct Demonstration {
  std::string input;
  std::string label;
};

// Instruction-style ICL template. `{examples}` expands to one
// "#Input: ...\n#Response: ...\n" block per demonstration.
inline constexpr std::string_view kDefaultPromptTemplate =
    "### Instruction:\n"
    "{task_description}\n"
    "\n"
    "### Examples:\n"
    "{examples}"
    "\n"
    "### Input:\n"
    "{query}\n"
    "\n"
    "### Response:\n";

inline constexpr std::array<std::string_view, 3> kPromptPlaceholders = {
    "task_description", "examples", "query"};

/// Fills the template. Payload text is inserted verbatim and never scanned
/// for placeholders; braces that do not name a placeholder stay literal.
inline std::string assemble_prompt(std::string_view tmpl, std::string_view task_description,
                                   const std::vector<Demonstration>& demos,
                                   std::string_view query, bool allow_zero_shot = false) {
  for (auto name : kPromptPlaceholders) {
    const std::string token = "{" + std::string(name) + "}";
    if (tmpl.find(token) == std::string_view::npos) {
      throw ConfigError("prompt template is missing the {" + std::string(name) +
                        "} placeholder");
    }
  }
  if (demos.empty() && !allow_zero_shot) {
    throw ConfigError("assemble_prompt: no demonstrations (zero-shot not enabled)");
  }
  std::string examples;
  for (const auto& d : demos) {
    examples += "#Input: ";
    examples += d.input;
    examples += "\n#Response: ";
    examples += d.label;
    examples += '\n';
  }
  std::string out;
  out.reserve(tmpl.size() + task_description.size() + examples.size() + query.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find('}', open);
    const auto name = close == std::string_view::npos
                          ? std::string_view{}
                          : tmpl.substr(open + 1, close - open - 1);
    if (name == "task_description") {
      out.append(task_description);
    } else if (name == "examples") {
      out.append(examples);
    } else if (name == "query") {
      out.append(query);
    } else {
      out.push_back('{');
      pos = open + 1;
      continue;
    }
    pos = close + 1;
  }
  return out;
}

inline constexpr std::size_t kDefaultPermutationLimit = 720;

/// Every ordering of `items` in lexicographic order of positions. Refuses when
/// |items|! exceeds `limit`.
template <class T>
std::vector<std::vector<T>> enumerate_permutations(const std::vector<T>& items,
                                                   std::size_t limit = kDefaultPermutationLimit) {
  std::size_t count = 1;
  for (std::size_t i = 2; i <= items.size(); ++i) {
    count *= i;
    if (count > limit) {
      throw ConfigError("permute: " + std::to_string(items.size()) +
                        "! orderings exceed the limit of " + std::to_string(limit));
    }
  }
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<T>> out;
  out.reserve(count);
  do {
    auto& perm = out.emplace_back();
    perm.reserve(items.size());
    for (auto i : order) perm.push_back(items[i]);
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

}  // namespace dualdiv
