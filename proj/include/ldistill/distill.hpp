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

#ifndef LDISTILL_DISTILL_HPP_
#define LDISTILL_DISTILL_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldistill/data_model.hpp"
#include "ldistill/networks.hpp"
#include "ldistill/rng.hpp"

namespace ldistill {

struct TraceRecord {
  int64_t iteration = 0;
  int outer = 0;
  double loss = 0.0;
};

struct LossTrace {
  std::string algorithm;
  std::vector<TraceRecord> records;

  std::vector<double> Losses() const;
  std::string ToJsonLines() const;
  static LossTrace FromJsonLines(const std::string& text);
};

struct DistillResult {
  SyntheticLatentSet syn;
  LossTrace trace;
  float eta_model = 0.0f;  // final learnable student lr (MTT only)
  // Set when the run stopped early; `syn` then holds the last finite state.
  std::optional<std::string> abort_reason;
};

// Fresh randomly initialized network per call.
using NetFactory = std::function<ConvNet(uint64_t seed)>;

NetFactory MakeNetFactory(const ConvNetSpec& spec,
                          const std::string& scheme = "fan_in_uniform");

// Classifier over the cache's latent grid with depth from the latent
// schedule unless `depth` is positive.
ConvNetSpec LatentNetSpec(const LatentDataset& real, int width, int depth,
                          const std::string& arch = "convnet");

// Throws kInit when some class has no real items.
void RequireAllClasses(const LatentDataset& real, const SyntheticLatentSet& syn);

// Synthetic-latent optimizer: SGD with momentum on a single tensor.
class LatentSgd {
 public:
  LatentSgd(float lr, float momentum) : lr_(lr), momentum_(momentum) {}
  void Step(Tensor& x, const Tensor& grad);

 private:
  float lr_, momentum_;
  std::vector<float> velocity_;
};

bool AllFinite(std::span<const float> values);

std::vector<int64_t> SampleRows(const std::vector<int64_t>& pool, int64_t count,
                                Rng& rng);

}  // namespace ldistill

#endif  // LDISTILL_DISTILL_HPP_
