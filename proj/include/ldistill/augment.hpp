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

#ifndef LDISTILL_AUGMENT_HPP_
#define LDISTILL_AUGMENT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ldistill/rng.hpp"
#include "ldistill/tensor.hpp"

namespace ldistill {

enum class AugKind { kColor, kCrop, kFlip, kScale, kRotate, kCutMix };

// Pixel-space augmentation for evaluation-time training. One geometric or
// color transform is drawn per batch from `transforms`; CutMix, when
// listed, is applied on top with probability `cutmix_prob`.
struct AugmentPolicy {
  std::vector<AugKind> transforms;
  bool cutmix = false;
  double cutmix_prob = 0.5;

  // Throws kConfig on an unknown name.
  static AugmentPolicy Parse(const std::vector<std::string>& names);
  static AugmentPolicy Default();
  bool empty() const { return transforms.empty() && !cutmix; }
  std::vector<std::string> Names() const;
};

AugKind ParseAugKind(const std::string& name);
const char* AugKindName(AugKind kind);

struct AugmentedBatch {
  Tensor images;
  Tensor targets;  // (n, K) label distributions
};

AugmentedBatch DsaPixel(const Tensor& images, const std::vector<int>& labels,
                        int num_classes, const AugmentPolicy& policy, Rng& rng);

// Process-wide number of DsaPixel calls; lets callers assert that a code
// path never augments.
int64_t DsaPixelCalls();

Tensor OneHot(const std::vector<int>& labels, int num_classes);

// Mirrors item i horizontally where mask[i] is set.
Tensor FlipHorizontal(const Tensor& images, const std::vector<bool>& mask);

struct CutBox {
  int y0 = 0, x0 = 0, height = 0, width = 0;
};

// Area fraction of the image left unpatched.
double CutMixLambda(const CutBox& box, int height, int width);
CutBox SampleCutBox(int height, int width, Rng& rng);
// Pastes box from images[perm[i]] into item i and mixes targets as
// lambda * t_i + (1 - lambda) * t_perm[i].
AugmentedBatch CutMix(const Tensor& images, const Tensor& targets,
                      const std::vector<int64_t>& perm, const CutBox& box);

// Per-item affine warp with bilinear sampling and zero fill. `theta` holds
// six row-major coefficients per item mapping normalized output coords to
// input coords.
Tensor AffineWarp(const Tensor& images, const std::vector<float>& theta);

Tensor ColorJitter(const Tensor& images, Rng& rng);
Tensor RandomCrop(const Tensor& images, Rng& rng);
Tensor RandomScale(const Tensor& images, Rng& rng);
Tensor RandomRotate(const Tensor& images, Rng& rng);
Tensor RandomFlip(const Tensor& images, Rng& rng);

}  // namespace ldistill

#endif  // LDISTILL_AUGMENT_HPP_
