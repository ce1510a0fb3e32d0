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

// Datasets, latent caches, the distilled variable, and the storage budget.

#ifndef LDISTILL_DATA_MODEL_HPP_
#define LDISTILL_DATA_MODEL_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ldistill/tensor.hpp"

namespace ldistill {

// Images in normalized units, (count, channels, H, W).
struct RealImageDataset {
  Tensor images;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<std::string> class_names;

  int64_t count() const { return static_cast<int64_t>(labels.size()); }
  int channels() const { return static_cast<int>(images.dim(1)); }
  int height() const { return static_cast<int>(images.dim(2)); }
  int width() const { return static_cast<int>(images.dim(3)); }

  // Item indices per class, in dataset order.
  std::vector<std::vector<int64_t>> ClassIndex() const;
  // Throws kShape / kDomain when an invariant is broken.
  void Validate() const;
};

struct LatentDataset {
  Tensor latents;  // (count, c_lat, h, w)
  std::vector<int> labels;
  int num_classes = 0;
  int codec_factor = 1;   // spatial factor of the codec itself
  int pre_upsample = 1;   // resize applied to images before encoding
  int c_lat = 0;
  uint64_t codec_fingerprint = 0;
  std::vector<float> channel_mean;
  std::vector<float> channel_std;

  int64_t count() const { return static_cast<int64_t>(labels.size()); }
  int effective_factor() const { return codec_factor / pre_upsample; }
  int height() const { return static_cast<int>(latents.dim(2)); }
  int width() const { return static_cast<int>(latents.dim(3)); }

  std::vector<std::vector<int64_t>> ClassIndex() const;
  void Validate() const;
  // Content hash of latents and labels; identifies L_T for expert buffers.
  uint64_t ContentFingerprint() const;
  // Fills channel_mean / channel_std from the latents.
  void ComputeChannelStats();
};

struct BudgetSpec {
  int ipc = 1;
  int factor = 1;  // effective spatial factor
  int c_lat = 3;
  int img_channels = 3;
  int lpc = 1;

  static BudgetSpec Make(int ipc, int factor, int c_lat);
};

struct SyntheticLatentSet {
  Tensor latents;  // (K * lpc, c_lat, h, w); the only optimized variable
  std::vector<int> labels;
  int num_classes = 0;
  BudgetSpec budget;
  uint64_t seed = 0;
  std::string algorithm = "init";
  int64_t iterations = 0;

  // Carried over from the source cache so the set can be decoded.
  int codec_factor = 1;
  int pre_upsample = 1;
  uint64_t codec_fingerprint = 0;
  std::vector<float> channel_mean;
  std::vector<float> channel_std;

  int64_t count() const { return static_cast<int64_t>(labels.size()); }
  std::vector<std::vector<int64_t>> ClassIndex() const;
  void Validate() const;
};

// floor(ipc * 3 * f^2 / c_lat).
int ComputeLpc(int ipc, int factor, int c_lat);

// Shape of the latent code of a (channels, H, W) image.
std::array<int64_t, 3> LatentShape(const std::array<int64_t, 3>& image_shape,
                                   int factor, int c_lat);
// c_lat / (3 f^2): latent parameters per image parameter.
double LatentParameterRatio(int factor, int c_lat);

// Copies LPC real latents per class (seeded) into a new synthetic set.
SyntheticLatentSet InitSynthetic(const LatentDataset& real,
                                 const BudgetSpec& budget, uint64_t seed);

// FNV-1a over raw bytes.
uint64_t Fnv1a64(const void* data, size_t size, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t HashFloats(std::span<const float> values, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t HashLabels(std::span<const int> labels);

}  // namespace ldistill

#endif  // LDISTILL_DATA_MODEL_HPP_
