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

#include <gtest/gtest.h>

#include <set>

#include "dualdiv/prompt.hpp"
#include "test_support.hpp"

namespace dualdiv {
namespace {

const std::string kTask = "Classify the sentiment of the sentence.";

std::string fixture(const std::string& name) {
  return testing::slurp(std::filesystem::path(DUALDIV_FIXTURE_DIR) / name);
}

TEST(AssemblePrompt, ZeroDemos) {
  EXPECT_EQ(assemble_prompt(kDefaultPromptTemplate, kTask, {}, "c", true),
            fixture("prompt_k0.txt"));
  EXPECT_THROW(assemble_prompt(kDefaultPromptTemplate, kTask, {}, "c"), ConfigError);
}

TEST(AssemblePrompt, OneDemoGolden) {
  EXPECT_EQ(assemble_prompt(kDefaultPromptTemplate, kTask, {{"a", "b"}}, "c"),
            fixture("prompt_k1.txt"));
}

TEST(AssemblePrompt, ThreeDemosKeepOrderAndBraces) {
  const std::vector<Demonstration> demos{{"the plot drags", "negative"},
                                         {"a warm, funny film", "positive"},
                                         {"{query} is not a placeholder here", "neutral"}};
  const auto out = assemble_prompt(kDefaultPromptTemplate, kTask, demos, "bright and {sharp}");
  EXPECT_EQ(out, fixture("prompt_k3.txt"));
  EXPECT_LT(out.find("the plot drags"), out.find("a warm, funny film"));
}

TEST(AssemblePrompt, MissingPlaceholderIsNamed) {
  try {
    assemble_prompt("{task_description}\n{query}\n", kTask, {{"a", "b"}}, "c");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("{examples}"), std::string::npos);
  }
}

TEST(AssemblePrompt, CustomTemplateKeepsUnknownBraces) {
  const auto out =
      assemble_prompt("{x} {task_description}|{examples}|{query} {", "T", {{"i", "l"}}, "q");
  EXPECT_EQ(out, "{x} T|#Input: i\n#Response: l\n|q {");
}

TEST(Permutations, Counts) {
  const std::vector<std::string> three{"a", "b", "c"};
  const auto perms = enumerate_permutations(three);
  ASSERT_EQ(perms.size(), 6u);
  EXPECT_EQ(perms.front(), three);
  EXPECT_EQ(perms.back(), (std::vector<std::string>{"c", "b", "a"}));
  EXPECT_EQ(std::set(perms.begin(), perms.end()).size(), 6u);
  EXPECT_EQ(enumerate_permutations(std::vector<int>{7}).size(), 1u);
  EXPECT_EQ(enumerate_permutations(std::vector<int>{}).size(), 1u);
}

TEST(Permutations, LimitRefuses) {
  EXPECT_THROW(enumerate_permutations(std::vector<int>{1, 2, 3, 4}, 10), ConfigError);
  EXPECT_EQ(enumerate_permutations(std::vector<int>{1, 2, 3, 4}, 24).size(), 24u);
}

// Duplicate items are still distinct positions.
TEST(Permutations, DuplicatesKeepAllOrderings) {
  EXPECT_EQ(enumerate_permutations(std::vector<int>{1, 1, 2}).size(), 6u);
}

}  // namespace
}  // namespace dualdiv
