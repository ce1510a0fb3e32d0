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

#include "ldistill/rng.hpp"

#include <numeric>

namespace ldistill {

uint64_t Rng::Mix(uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<int64_t> Rng::Permutation(int64_t n) {
  std::vector<int64_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  // Fisher-Yates with our own index draws; std::shuffle is not portable
  // across standard libraries.
  for (int64_t i = n - 1; i > 0; --i) {
    const int64_t j = UniformInt(0, i);
    std::swap(p[i], p[j]);
  }
  return p;
}

std::vector<int64_t> Rng::Sample(int64_t n, int64_t count) {
  std::vector<int64_t> out = Permutation(n);
  if (count <= n) {
    out.resize(count);
    return out;
  }
  while (static_cast<int64_t>(out.size()) < count) {
    out.push_back(UniformInt(0, n - 1));
  }
  return out;
}

}  // namespace ldistill
