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

#ifndef LDISTILL_RNG_HPP_
#define LDISTILL_RNG_HPP_

#include <cstdint>
#include <random>
#include <vector>

namespace ldistill {

// Seeded generator used everywhere randomness enters the pipeline. All
// draws go through this type so that a seed fully determines a run.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(Mix(seed)), seed_(seed) {}

  uint64_t seed() const { return seed_; }

  // Independent stream keyed by (seed, stream).
  Rng Derive(uint64_t stream) const { return Rng(Mix(seed_ ^ Mix(stream + 1))); }

  double Uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  double Normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  // Inclusive on both ends.
  int64_t UniformInt(int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(engine_);
  }
  bool Bernoulli(double p) { return Uniform() < p; }

  std::vector<int64_t> Permutation(int64_t n);
  // `count` distinct draws from [0, n) when count <= n, otherwise a full
  // permutation followed by draws with replacement.
  std::vector<int64_t> Sample(int64_t n, int64_t count);

  std::mt19937_64& engine() { return engine_; }

  static uint64_t Mix(uint64_t x);

 private:
  std::mt19937_64 engine_;
  uint64_t seed_;
};

}  // namespace ldistill

#endif  // LDISTILL_RNG_HPP_
