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

#ifndef LDISTILL_EVALUATE_HPP_
#define LDISTILL_EVALUATE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ldistill/codec.hpp"
#include "ldistill/data_model.hpp"
#include "ldistill/networks.hpp"

namespace ldistill {

struct EvalProtocol {
  int runs = 5;
  int epochs = 300;
  float lr = 0.01f;  // cosine-decayed to 0 over training
  float momentum = 0.9f;
  float weight_decay = 5e-4f;
  int batch = 64;
  std::string arch = "convnet";
  int width = 128;
  int depth = 0;  // 0 = depth_for_resolution
  std::vector<std::string> augment = {"color", "crop",   "flip",
                                      "scale", "rotate", "cutmix"};
  double cutmix_prob = 0.5;
  uint64_t seed_base = 0;

  void Validate() const;
};

struct EvalReport {
  std::string label;
  std::string space = "pixel";
  int depth = 0;
  std::vector<double> accuracies;  // top-1, in [0, 1]
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  double wall_seconds = 0.0;
  EvalProtocol protocol;

  // Recomputes mean and std from `accuracies`.
  void Finalize();
  std::string ToJsonLine() const;
  static EvalReport FromJsonLine(const std::string& line);
};

// One training run; returns test accuracy.
double TrainAndTest(const Tensor& train_x, const std::vector<int>& train_y,
                    const Tensor& test_x, const std::vector<int>& test_y,
                    int num_classes, const ConvNetSpec& spec,
                    const EvalProtocol& proto, bool augment, uint64_t seed);

EvalReport EvaluateImages(const RealImageDataset& train,
                          const RealImageDataset& test,
                          const EvalProtocol& proto, const std::string& label);

// Decodes once, then trains proto.runs fresh pixel-space classifiers.
EvalReport EvaluateSynthetic(const SyntheticLatentSet& syn,
                             const LatentCodec& codec,
                             const ResamplePolicy& policy,
                             const RealImageDataset& test,
                             const EvalProtocol& proto);

EvalReport FullSetBaseline(const RealImageDataset& train,
                           const RealImageDataset& test,
                           const EvalProtocol& proto);
// Latents are standardized with the training cache's channel statistics and
// classified at the latent depth. Pixel-space augmentations do not apply.
EvalReport FullSetBaseline(const LatentDataset& train,
                           const LatentDataset& test,
                           const EvalProtocol& proto);

Tensor StandardizeLatents(const Tensor& latents, const std::vector<float>& mean,
                          const std::vector<float>& std);

}  // namespace ldistill

#endif  // LDISTILL_EVALUATE_HPP_
