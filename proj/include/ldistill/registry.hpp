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

#ifndef LDISTILL_REGISTRY_HPP_
#define LDISTILL_REGISTRY_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldistill/data_model.hpp"

namespace ldistill {

enum class SourceKind { kBuiltinToy, kImageFolder };

struct DatasetRegistryEntry {
  std::string name;
  SourceKind source = SourceKind::kBuiltinToy;
  std::vector<std::string> class_names;
  std::vector<int> class_indices;  // source-dataset class ids, when known
  int resolution = 32;
  std::vector<std::string> splits = {"train", "test"};

  // Throws kConfig when the class list is empty or has duplicates.
  void Validate() const;
};

const std::vector<DatasetRegistryEntry>& Registry();
const DatasetRegistryEntry& FindDataset(const std::string& name);

// One decoded image, interleaved HWC floats in [0, 1].
struct RawImage {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> pixels;
};

struct ChannelStats {
  std::vector<float> mean;
  std::vector<float> std;
};

struct PreprocessResult {
  RealImageDataset data;
  ChannelStats stats;
  std::vector<int64_t> skipped;  // indices of undecodable inputs
};

// Normalizes with `stats` (computed from the inputs when absent), resizes the
// shorter side to `resolution`, then center crops to resolution x resolution.
PreprocessResult Preprocess(const std::vector<RawImage>& raw,
                            const std::vector<int>& labels, int num_classes,
                            int resolution,
                            const std::optional<ChannelStats>& stats = {});

ChannelStats ComputeRawStats(const std::vector<RawImage>& raw);

// Separable triangle-filter resize of one CHW image, antialiased when
// shrinking.
std::vector<float> ResizeTriangle(std::span<const float> chw, int channels,
                                  int height, int width, int out_height,
                                  int out_width);

struct DeskConfig {
  int train_per_class = 300;
  int test_per_class = 100;
  int resolution = 32;
  uint64_t seed = 7;
};

struct DatasetSplits {
  RealImageDataset train;
  RealImageDataset test;
  ChannelStats stats;
};

// Procedural 10-class set of textured blobs on cluttered backgrounds.
DatasetSplits MakeDeskDataset(const DeskConfig& config);

// Image-folder layout: <root>/<split>/<class>/<file>, where <class> is the
// class name (spaces may be written as '_') or its source index.
DatasetSplits LoadImageFolder(const DatasetRegistryEntry& entry,
                              const std::string& root, int resolution);

DatasetSplits LoadDataset(const std::string& name, const std::string& root,
                          int resolution, uint64_t seed);

// Reads binary PPM (P6) files; other formats need OpenCV support.
RawImage ReadImageFile(const std::string& path);

}  // namespace ldistill

#endif  // LDISTILL_REGISTRY_HPP_
