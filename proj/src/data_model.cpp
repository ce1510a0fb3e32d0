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

#include "ldistill/data_model.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

#include "ldistill/error.hpp"
#include "ldistill/rng.hpp"

namespace ldistill {

namespace {

std::vector<std::vector<int64_t>> BuildClassIndex(const std::vector<int>& labels,
                                                  int num_classes) {
  std::vector<std::vector<int64_t>> index(std::max(num_classes, 0));
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0 && labels[i] < num_classes) {
      index[labels[i]].push_back(static_cast<int64_t>(i));
    }
  }
  return index;
}

void ValidateLabels(const std::vector<int>& labels, int num_classes,
                    bool every_class_present, const char* what) {
  Require(num_classes > 0, ErrorCode::kDomain,
          std::string(what) + ": number of classes must be positive");
  std::vector<int64_t> counts(num_classes, 0);
  for (int y : labels) {
    Require(y >= 0 && y < num_classes, ErrorCode::kDomain,
            std::string(what) + ": label " + std::to_string(y) +
                " outside [0, " + std::to_string(num_classes) + ")");
    ++counts[y];
  }
  if (every_class_present) {
    for (int c = 0; c < num_classes; ++c) {
      Require(counts[c] > 0, ErrorCode::kDomain,
              std::string(what) + ": class " + std::to_string(c) + " is empty");
    }
  }
}

}  // namespace

std::vector<std::vector<int64_t>> RealImageDataset::ClassIndex() const {
  return BuildClassIndex(labels, num_classes);
}

void RealImageDataset::Validate() const {
  Require(images.defined() && images.rank() == 4, ErrorCode::kShape,
          "image dataset must be (count, channels, H, W)");
  Require(images.dim(0) == count(), ErrorCode::kShape,
          "image count does not match label count");
  ValidateLabels(labels, num_classes, true, "image dataset");
}

std::vector<std::vector<int64_t>> LatentDataset::ClassIndex() const {
  return BuildClassIndex(labels, num_classes);
}

void LatentDataset::Validate() const {
  Require(latents.defined() && latents.rank() == 4, ErrorCode::kShape,
          "latent dataset must be (count, c_lat, h, w)");
  Require(latents.dim(0) == count(), ErrorCode::kShape,
          "latent count does not match label count");
  Require(latents.dim(1) == c_lat, ErrorCode::kShape,
          "latent channels do not match c_lat");
  Require(codec_factor >= 1 && pre_upsample >= 1 &&
              codec_factor % pre_upsample == 0,
          ErrorCode::kDomain, "codec factor must be a multiple of pre_upsample");
  // The identity codec (factor 1) is the only uncompressed codec allowed.
  Require(codec_factor == 1 || c_lat < 3 * codec_factor * codec_factor,
          ErrorCode::kDomain, "latent channels must satisfy c_lat < 3 f^2");
  Require(codec_fingerprint != 0, ErrorCode::kFingerprint,
          "latent dataset has no codec fingerprint");
  ValidateLabels(labels, num_classes, false, "latent dataset");
}

uint64_t LatentDataset::ContentFingerprint() const {
  uint64_t h = HashFloats(latents.data());
  h = Fnv1a64(labels.data(), labels.size() * sizeof(int), h);
  return Fnv1a64(&codec_fingerprint, sizeof(codec_fingerprint), h);
}

void LatentDataset::ComputeChannelStats() {
  const int64_t n = latents.dim(0);
  const int64_t c = latents.dim(1);
  const int64_t s = latents.dim(2) * latents.dim(3);
  channel_mean.assign(c, 0.0f);
  channel_std.assign(c, 1.0f);
  if (n == 0) return;
  const float* x = latents.data().data();
  for (int64_t ch = 0; ch < c; ++ch) {
    double sum = 0.0, sq = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const float* p = x + (i * c + ch) * s;
      for (int64_t j = 0; j < s; ++j) {
        sum += p[j];
        sq += static_cast<double>(p[j]) * p[j];
      }
    }
    const double m = sum / static_cast<double>(n * s);
    const double var = std::max(0.0, sq / static_cast<double>(n * s) - m * m);
    channel_mean[ch] = static_cast<float>(m);
    channel_std[ch] = static_cast<float>(var > 0.0 ? std::sqrt(var) : 1.0);
  }
}

BudgetSpec BudgetSpec::Make(int ipc, int factor, int c_lat) {
  BudgetSpec b;
  b.ipc = ipc;
  b.factor = factor;
  b.c_lat = c_lat;
  b.img_channels = 3;
  b.lpc = ComputeLpc(ipc, factor, c_lat);
  Require(b.lpc >= ipc, ErrorCode::kDomain,
          "budget: c_lat " + std::to_string(c_lat) +
              " gives fewer latents than images per class");
  return b;
}

std::vector<std::vector<int64_t>> SyntheticLatentSet::ClassIndex() const {
  return BuildClassIndex(labels, num_classes);
}

void SyntheticLatentSet::Validate() const {
  Require(latents.defined() && latents.rank() == 4, ErrorCode::kShape,
          "synthetic set must be (count, c_lat, h, w)");
  Require(latents.dim(0) == count(), ErrorCode::kShape,
          "synthetic count does not match label count");
  ValidateLabels(labels, num_classes, true, "synthetic set");
  for (const auto& members : ClassIndex()) {
    Require(static_cast<int>(members.size()) == budget.lpc, ErrorCode::kShape,
            "synthetic set must hold exactly LPC latents per class");
  }
}

int ComputeLpc(int ipc, int factor, int c_lat) {
  if (ipc <= 0 || factor <= 0 || c_lat <= 0) {
    Fail(ErrorCode::kDomain, "compute_lpc: arguments must be positive (ipc=" +
                                 std::to_string(ipc) + ", f=" +
                                 std::to_string(factor) + ", c_lat=" +
                                 std::to_string(c_lat) + ")");
  }
  const int64_t numerator = int64_t{ipc} * 3 * factor * factor;
  return static_cast<int>(numerator / c_lat);
}

std::array<int64_t, 3> LatentShape(const std::array<int64_t, 3>& image_shape,
                                   int factor, int c_lat) {
  Require(factor > 0 && c_lat > 0, ErrorCode::kDomain,
          "latent_shape: factor and channels must be positive");
  static const char* kAxis[] = {"channels", "height", "width"};
  for (int axis = 1; axis < 3; ++axis) {
    if (image_shape[axis] % factor != 0) {
      Fail(ErrorCode::kShape, std::string("latent_shape: ") + kAxis[axis] +
                                  " " + std::to_string(image_shape[axis]) +
                                  " is not divisible by factor " +
                                  std::to_string(factor));
    }
  }
  return {c_lat, image_shape[1] / factor, image_shape[2] / factor};
}

double LatentParameterRatio(int factor, int c_lat) {
  return static_cast<double>(c_lat) / (3.0 * factor * factor);
}

SyntheticLatentSet InitSynthetic(const LatentDataset& real,
                                 const BudgetSpec& budget, uint64_t seed) {
  Require(budget.lpc > 0, ErrorCode::kInit, "init_synthetic: LPC must be positive");
  const auto classes = real.ClassIndex();
  for (int c = 0; c < real.num_classes; ++c) {
    if (classes[c].empty()) {
      Fail(ErrorCode::kInit, "init_synthetic: class " + std::to_string(c) +
                                 " has no real latents");
    }
  }
  const int64_t item = real.latents.numel() / std::max<int64_t>(1, real.count());
  Shape shape = real.latents.shape();
  shape[0] = int64_t{real.num_classes} * budget.lpc;

  Rng rng(seed);
  std::vector<float> values;
  values.reserve(NumElements(shape));
  std::vector<int> labels;
  labels.reserve(shape[0]);
  const float* src = real.latents.data().data();
  for (int c = 0; c < real.num_classes; ++c) {
    const auto& members = classes[c];
    const int64_t n = static_cast<int64_t>(members.size());
    if (n < budget.lpc) {
      spdlog::warn(
          "init_synthetic: class {} has {} latents < LPC {}; sampling with "
          "replacement",
          c, n, budget.lpc);
    }
    for (int64_t pick : rng.Sample(n, budget.lpc)) {
      const float* p = src + members[pick] * item;
      values.insert(values.end(), p, p + item);
      labels.push_back(c);
    }
  }

  SyntheticLatentSet syn;
  syn.latents = Tensor::FromData(std::move(shape), std::move(values));
  syn.labels = std::move(labels);
  syn.num_classes = real.num_classes;
  syn.budget = budget;
  syn.seed = seed;
  syn.codec_factor = real.codec_factor;
  syn.pre_upsample = real.pre_upsample;
  syn.codec_fingerprint = real.codec_fingerprint;
  syn.channel_mean = real.channel_mean;
  syn.channel_std = real.channel_std;
  return syn;
}

uint64_t Fnv1a64(const void* data, size_t size, uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t HashFloats(std::span<const float> values, uint64_t seed) {
  return Fnv1a64(values.data(), values.size_bytes(), seed);
}

uint64_t HashLabels(std::span<const int> labels) {
  return Fnv1a64(labels.data(), labels.size_bytes());
}

}  // namespace ldistill
