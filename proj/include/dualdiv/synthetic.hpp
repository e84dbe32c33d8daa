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

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dualdiv/embeddings.hpp"
#include "dualdiv/error.hpp"

namespace dualdiv {

// Clustered Gaussian corpus: `clusters` unit centers, point i belongs to
// cluster i % clusters and is its center plus N(0, noise^2) per coordinate.
// The cluster number is written to the label field ("c<k>").
inline EmbeddingSet generate_synthetic(std::size_t n, std::size_t d, std::size_t clusters,
                                       double noise, std::uint64_t seed,
                                       Role role = Role::corpus,
                                       const std::string& id_prefix = "x") {
  if (clusters < 1 || n < clusters) {
    throw ConfigError("gen-synth: need n >= clusters >= 1");
  }
  if (d < 2) throw ConfigError("gen-synth: need d >= 2");
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw ConfigError("gen-synth: noise must be finite and nonnegative");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::vector<double>> centers(clusters, std::vector<double>(d));
  for (auto& c : centers) {
    double sq = 0.0;
    do {
      sq = 0.0;
      for (auto& v : c) {
        v = gauss(rng);
        sq += v * v;
      }
    } while (sq == 0.0);
    const double norm = std::sqrt(sq);
    for (auto& v : c) v /= norm;
  }

  const std::size_t width = std::to_string(n - 1).size();
  EmbeddingSet set(role);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cluster = i % clusters;
    std::vector<float> v(d);
    for (std::size_t t = 0; t < d; ++t) {
      double x = centers[cluster][t];
      if (noise > 0.0) x += noise * gauss(rng);
      v[t] = static_cast<float>(x);
    }
    std::string num = std::to_string(i);
    num.insert(0, width - num.size(), '0');
    set.add(make_record(id_prefix + num, "c" + std::to_string(cluster), std::move(v)));
  }
  return set;
}

}  // namespace dualdiv
