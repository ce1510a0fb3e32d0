// Copyright 2026 The ldistill Authors
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

// Shared test oracles.

#ifndef LDISTILL_TESTS_TEST_UTIL_HPP_
#define LDISTILL_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "ldistill/rng.hpp"
#include "ldistill/tensor.hpp"

namespace ldistill::testing {

inline Tensor RandomTensor(Shape shape, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<float> v(static_cast<size_t>(NumElements(shape)));
  for (float& x : v) x = static_cast<float>(rng.Normal(0.0, scale));
  return Tensor::FromData(std::move(shape), std::move(v));
}

// Central differences of a scalar function, evaluated in double around the
// float values of `x`.
inline std::vector<double> NumericGrad(const std::function<double(const Tensor&)>& f,
                                       const Tensor& x, double h = 1e-3) {
  std::vector<double> g(static_cast<size_t>(x.numel()));
  for (int64_t i = 0; i < x.numel(); ++i) {
    Tensor plus = x.clone(), minus = x.clone();
    plus.data()[i] += static_cast<float>(h);
    minus.data()[i] -= static_cast<float>(h);
    const double step = double(plus.data()[i]) - double(minus.data()[i]);
    g[i] = (f(plus) - f(minus)) / step;
  }
  return g;
}

// ||a - b|| / max(||b||, floor).
inline double RelError(std::span<const float> a, const std::vector<double>& b,
                       double floor = 1e-6) {
  double num = 0, den = 0;
  for (size_t i = 0; i < b.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), floor);
}

// Fresh path under the system temp directory; the file is not created.
inline std::string TempPath(const std::string& name) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() / "ldistill_tests";
  std::filesystem::create_directories(dir);
  return (dir / (std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + name))
      .string();
}

}  // namespace ldistill::testing

#endif  // LDISTILL_TESTS_TEST_UTIL_HPP_
