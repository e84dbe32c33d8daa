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

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace dualdiv::detail {

// Lower-triangular Cholesky factor grown one row at a time. Rows are packed,
// row i occupies [i*(i+1)/2, (i+1)*(i+2)/2).
class GrowingCholesky {
 public:
  std::size_t size() const { return n_; }

  double at(std::size_t i, std::size_t j) const {
    assert(j <= i && i < n_);
    return packed_[i * (i + 1) / 2 + j];
  }

  double diag(std::size_t i) const { return at(i, i); }

  // Forward substitution L z = b.
  void forward_solve(std::span<const double> b, std::span<double> z) const {
    assert(b.size() == n_ && z.size() == n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double* row = packed_.data() + i * (i + 1) / 2;
      double acc = b[i];
      for (std::size_t j = 0; j < i; ++j) acc -= row[j] * z[j];
      z[i] = acc / row[i];
    }
  }

  void append(std::span<const double> coefficients, double diagonal) {
    assert(coefficients.size() == n_);
    packed_.insert(packed_.end(), coefficients.begin(), coefficients.end());
    packed_.push_back(diagonal);
    ++n_;
  }

 private:
  std::vector<double> packed_;
  std::size_t n_ = 0;
};

// Squared residual of a new unit vector after projecting out the span of the
// vectors already factored: self_similarity - |L^{-1} cross|^2. `z` receives
// L^{-1} cross.
inline double projection_residual(const GrowingCholesky& chol,
                                  std::span<const double> cross,
                                  double self_similarity, std::span<double> z) {
  chol.forward_solve(cross, z);
  double sq = 0.0;
  for (double v : z) sq += v * v;
  return self_similarity - sq;
}

inline double floored(double residual_sq, double floor) {
  return residual_sq < floor ? floor : residual_sq;
}

// log det of the principal submatrix picked by `subset`, factored in subset
// order with every squared residual floored. `entry(i, j)` reads the kernel.
template <class Entry>
double floored_log_det(Entry&& entry, std::span<const std::size_t> subset,
                       double floor) {
  GrowingCholesky chol;
  std::vector<double> cross, z;
  double logdet = 0.0;
  for (std::size_t a = 0; a < subset.size(); ++a) {
    cross.resize(a);
    z.resize(a);
    for (std::size_t b = 0; b < a; ++b) cross[b] = entry(subset[b], subset[a]);
    const double res = floored(
        projection_residual(chol, cross, entry(subset[a], subset[a]), z), floor);
    logdet += std::log(res);
    chol.append(z, std::sqrt(res));
  }
  return logdet;
}

}  // namespace dualdiv::detail
