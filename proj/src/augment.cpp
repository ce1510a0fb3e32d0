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

#include "ldistill/augment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

#include "ldistill/error.hpp"

namespace ldistill {

namespace {

constexpr double kCropRatio = 0.125;
constexpr double kScaleRatio = 1.2;
constexpr double kRotateDegrees = 15.0;

struct Dims {
  int64_t n, c, h, w;
  explicit Dims(const Tensor& t) {
    Require(t.rank() == 4, ErrorCode::kShape,
            "augment: expected NCHW images, got " + ShapeToString(t.shape()));
    n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
  }
};

}  // namespace

AugKind ParseAugKind(const std::string& name) {
  if (name == "color") return AugKind::kColor;
  if (name == "crop") return AugKind::kCrop;
  if (name == "flip") return AugKind::kFlip;
  if (name == "scale") return AugKind::kScale;
  if (name == "rotate") return AugKind::kRotate;
  if (name == "cutmix") return AugKind::kCutMix;
  Fail(ErrorCode::kConfig, "unknown augmentation '" + name +
                               "' (expected color, crop, flip, scale, rotate "
                               "or cutmix)");
}

const char* AugKindName(AugKind kind) {
  switch (kind) {
    case AugKind::kColor: return "color";
    case AugKind::kCrop: return "crop";
    case AugKind::kFlip: return "flip";
    case AugKind::kScale: return "scale";
    case AugKind::kRotate: return "rotate";
    case AugKind::kCutMix: return "cutmix";
  }
  return "?";
}

AugmentPolicy AugmentPolicy::Parse(const std::vector<std::string>& names) {
  AugmentPolicy p;
  for (const auto& n : names) {
    const AugKind k = ParseAugKind(n);
    if (k == AugKind::kCutMix) {
      p.cutmix = true;
    } else if (std::find(p.transforms.begin(), p.transforms.end(), k) ==
               p.transforms.end()) {
      p.transforms.push_back(k);
    }
  }
  return p;
}

AugmentPolicy AugmentPolicy::Default() {
  return Parse({"color", "crop", "flip", "scale", "rotate", "cutmix"});
}

std::vector<std::string> AugmentPolicy::Names() const {
  std::vector<std::string> out;
  for (AugKind k : transforms) out.emplace_back(AugKindName(k));
  if (cutmix) out.emplace_back("cutmix");
  return out;
}

Tensor OneHot(const std::vector<int>& labels, int num_classes) {
  const int64_t n = static_cast<int64_t>(labels.size());
  std::vector<float> v(static_cast<size_t>(n * num_classes), 0.0f);
  for (int64_t i = 0; i < n; ++i) {
    Require(labels[i] >= 0 && labels[i] < num_classes, ErrorCode::kDomain,
            "one_hot: label out of range");
    v[i * num_classes + labels[i]] = 1.0f;
  }
  return Tensor::FromData({n, num_classes}, std::move(v));
}

Tensor FlipHorizontal(const Tensor& images, const std::vector<bool>& mask) {
  const Dims d(images);
  Require(static_cast<int64_t>(mask.size()) == d.n, ErrorCode::kShape,
          "flip: mask size does not match the batch");
  Tensor out = images.clone();
  auto dst = out.data();
  const auto src = images.data();
  for (int64_t i = 0; i < d.n; ++i) {
    if (!mask[i]) continue;
    for (int64_t r = 0; r < d.c * d.h; ++r) {
      const int64_t base = (i * d.c * d.h + r) * d.w;
      for (int64_t x = 0; x < d.w; ++x) dst[base + x] = src[base + d.w - 1 - x];
    }
  }
  return out;
}

double CutMixLambda(const CutBox& box, int height, int width) {
  return 1.0 - static_cast<double>(box.height) * box.width /
                   (static_cast<double>(height) * width);
}

CutBox SampleCutBox(int height, int width, Rng& rng) {
  const double lam = rng.Uniform();  // Beta(1, 1)
  const double cut = std::sqrt(1.0 - lam);
  const int ch = static_cast<int>(height * cut), cw = static_cast<int>(width * cut);
  const int cy = static_cast<int>(rng.UniformInt(0, height - 1));
  const int cx = static_cast<int>(rng.UniformInt(0, width - 1));
  const int y0 = std::clamp(cy - ch / 2, 0, height);
  const int y1 = std::clamp(cy + ch / 2, 0, height);
  const int x0 = std::clamp(cx - cw / 2, 0, width);
  const int x1 = std::clamp(cx + cw / 2, 0, width);
  return {y0, x0, y1 - y0, x1 - x0};
}

AugmentedBatch CutMix(const Tensor& images, const Tensor& targets,
                      const std::vector<int64_t>& perm, const CutBox& box) {
  const Dims d(images);
  Require(static_cast<int64_t>(perm.size()) == d.n && targets.dim(0) == d.n,
          ErrorCode::kShape, "cutmix: permutation/target size mismatch");
  Require(box.y0 >= 0 && box.x0 >= 0 && box.y0 + box.height <= d.h &&
              box.x0 + box.width <= d.w,
          ErrorCode::kDomain, "cutmix: box outside the image");
  AugmentedBatch out{images.clone(), targets.clone()};
  auto dst = out.images.data();
  const auto src = images.data();
  for (int64_t i = 0; i < d.n; ++i) {
    for (int64_t c = 0; c < d.c; ++c) {
      for (int y = box.y0; y < box.y0 + box.height; ++y) {
        const int64_t row_dst = ((i * d.c + c) * d.h + y) * d.w;
        const int64_t row_src = ((perm[i] * d.c + c) * d.h + y) * d.w;
        std::copy_n(src.begin() + row_src + box.x0, box.width,
                    dst.begin() + row_dst + box.x0);
      }
    }
  }
  const float lam = static_cast<float>(CutMixLambda(box, d.h, d.w));
  const int64_t k = targets.dim(1);
  auto t = out.targets.data();
  const auto t0 = targets.data();
  for (int64_t i = 0; i < d.n; ++i) {
    for (int64_t j = 0; j < k; ++j) {
      t[i * k + j] = lam * t0[i * k + j] + (1.0f - lam) * t0[perm[i] * k + j];
    }
  }
  return out;
}

Tensor AffineWarp(const Tensor& images, const std::vector<float>& theta) {
  const Dims d(images);
  Require(static_cast<int64_t>(theta.size()) == 6 * d.n, ErrorCode::kShape,
          "affine warp: need six coefficients per item");
  std::vector<float> out(static_cast<size_t>(images.numel()), 0.0f);
  const auto src = images.data();
  for (int64_t i = 0; i < d.n; ++i) {
    const float* t = theta.data() + 6 * i;
    for (int64_t y = 0; y < d.h; ++y) {
      const float yn = (2.0f * y + 1.0f) / d.h - 1.0f;
      for (int64_t x = 0; x < d.w; ++x) {
        const float xn = (2.0f * x + 1.0f) / d.w - 1.0f;
        const float xs = t[0] * xn + t[1] * yn + t[2];
        const float ys = t[3] * xn + t[4] * yn + t[5];
        const float px = ((xs + 1.0f) * d.w - 1.0f) * 0.5f;
        const float py = ((ys + 1.0f) * d.h - 1.0f) * 0.5f;
        const int64_t x0 = static_cast<int64_t>(std::floor(px));
        const int64_t y0 = static_cast<int64_t>(std::floor(py));
        const float fx = px - x0, fy = py - y0;
        for (int64_t c = 0; c < d.c; ++c) {
          const float* plane = src.data() + (i * d.c + c) * d.h * d.w;
          auto at = [&](int64_t yy, int64_t xx) {
            return (yy < 0 || yy >= d.h || xx < 0 || xx >= d.w)
                       ? 0.0f
                       : plane[yy * d.w + xx];
          };
          out[((i * d.c + c) * d.h + y) * d.w + x] =
              (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
              fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
        }
      }
    }
  }
  return Tensor::FromData(images.shape(), std::move(out));
}

Tensor ColorJitter(const Tensor& images, Rng& rng) {
  const Dims d(images);
  Tensor out = images.clone();
  auto x = out.data();
  const int64_t plane = d.h * d.w;
  for (int64_t i = 0; i < d.n; ++i) {
    float* img = x.data() + i * d.c * plane;
    const float brightness = static_cast<float>(rng.Uniform() - 0.5);
    const float saturation = static_cast<float>(rng.Uniform() * 2.0);
    const float contrast = static_cast<float>(rng.Uniform() + 0.5);
    for (int64_t j = 0; j < d.c * plane; ++j) img[j] += brightness;
    for (int64_t p = 0; p < plane; ++p) {
      float m = 0.0f;
      for (int64_t c = 0; c < d.c; ++c) m += img[c * plane + p];
      m /= static_cast<float>(d.c);
      for (int64_t c = 0; c < d.c; ++c) {
        img[c * plane + p] = (img[c * plane + p] - m) * saturation + m;
      }
    }
    double mean = 0.0;
    for (int64_t j = 0; j < d.c * plane; ++j) mean += img[j];
    const float m = static_cast<float>(mean / static_cast<double>(d.c * plane));
    for (int64_t j = 0; j < d.c * plane; ++j) img[j] = (img[j] - m) * contrast + m;
  }
  return out;
}

Tensor RandomCrop(const Tensor& images, Rng& rng) {
  const Dims d(images);
  std::vector<float> out(static_cast<size_t>(images.numel()), 0.0f);
  const auto src = images.data();
  const int64_t sh = static_cast<int64_t>(d.h * kCropRatio + 0.5);
  const int64_t sw = static_cast<int64_t>(d.w * kCropRatio + 0.5);
  for (int64_t i = 0; i < d.n; ++i) {
    const int64_t dy = rng.UniformInt(-sh, sh), dx = rng.UniformInt(-sw, sw);
    for (int64_t c = 0; c < d.c; ++c) {
      const int64_t base = (i * d.c + c) * d.h * d.w;
      for (int64_t y = 0; y < d.h; ++y) {
        const int64_t yy = y + dy;
        if (yy < 0 || yy >= d.h) continue;
        for (int64_t x = 0; x < d.w; ++x) {
          const int64_t xx = x + dx;
          if (xx >= 0 && xx < d.w) out[base + y * d.w + x] = src[base + yy * d.w + xx];
        }
      }
    }
  }
  return Tensor::FromData(images.shape(), std::move(out));
}

Tensor RandomScale(const Tensor& images, Rng& rng) {
  const Dims d(images);
  std::vector<float> theta;
  for (int64_t i = 0; i < d.n; ++i) {
    const double lo = 1.0 / kScaleRatio;
    const float sx = static_cast<float>(rng.Uniform(lo, kScaleRatio));
    const float sy = static_cast<float>(rng.Uniform(lo, kScaleRatio));
    theta.insert(theta.end(), {sx, 0.0f, 0.0f, 0.0f, sy, 0.0f});
  }
  return AffineWarp(images, theta);
}

Tensor RandomRotate(const Tensor& images, Rng& rng) {
  const Dims d(images);
  std::vector<float> theta;
  for (int64_t i = 0; i < d.n; ++i) {
    const double a = rng.Uniform(-kRotateDegrees, kRotateDegrees) *
                     std::numbers::pi / 180.0;
    const float c = static_cast<float>(std::cos(a));
    const float s = static_cast<float>(std::sin(a));
    theta.insert(theta.end(), {c, s, 0.0f, -s, c, 0.0f});
  }
  return AffineWarp(images, theta);
}

Tensor RandomFlip(const Tensor& images, Rng& rng) {
  const Dims d(images);
  std::vector<bool> mask(static_cast<size_t>(d.n));
  for (int64_t i = 0; i < d.n; ++i) mask[i] = rng.Bernoulli(0.5);
  return FlipHorizontal(images, mask);
}

namespace {
std::atomic<int64_t> dsa_calls{0};
}  // namespace

int64_t DsaPixelCalls() { return dsa_calls.load(); }

AugmentedBatch DsaPixel(const Tensor& images, const std::vector<int>& labels,
                        int num_classes, const AugmentPolicy& policy, Rng& rng) {
  dsa_calls.fetch_add(1);
  const Dims d(images);
  Require(static_cast<int64_t>(labels.size()) == d.n, ErrorCode::kShape,
          "augment: label count does not match the batch");
  AugmentedBatch out{images, OneHot(labels, num_classes)};
  if (!policy.transforms.empty()) {
    const auto pick = rng.UniformInt(0, static_cast<int64_t>(policy.transforms.size()) - 1);
    switch (policy.transforms[pick]) {
      case AugKind::kColor: out.images = ColorJitter(images, rng); break;
      case AugKind::kCrop: out.images = RandomCrop(images, rng); break;
      case AugKind::kFlip: out.images = RandomFlip(images, rng); break;
      case AugKind::kScale: out.images = RandomScale(images, rng); break;
      case AugKind::kRotate: out.images = RandomRotate(images, rng); break;
      case AugKind::kCutMix: break;
    }
  }
  if (policy.cutmix && d.n > 1 && rng.Bernoulli(policy.cutmix_prob)) {
    const CutBox box = SampleCutBox(static_cast<int>(d.h), static_cast<int>(d.w), rng);
    out = CutMix(out.images, out.targets, rng.Permutation(d.n), box);
  }
  return out;
}

}  // namespace ldistill
