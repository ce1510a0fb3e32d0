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

#ifndef LDISTILL_CODEC_HPP_
#define LDISTILL_CODEC_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ldistill/data_model.hpp"
#include "ldistill/tensor.hpp"

namespace ldistill {

// Images are resized by `pre_upsample` before encoding and by
// 1/post_downsample after decoding.
struct ResamplePolicy {
  int pre_upsample = 1;
  int post_downsample = 1;

  static ResamplePolicy Symmetric(int factor) { return {factor, factor}; }
  // Throws kDomain unless the two factors agree, are powers of two and
  // divide the codec factor.
  void Validate(int codec_factor) const;
  int EffectiveFactor(int codec_factor) const;
};

class LatentCodec {
 public:
  virtual ~LatentCodec() = default;

  virtual std::string name() const = 0;
  virtual int factor() const = 0;
  virtual int c_lat() const = 0;
  virtual int image_channels() const { return 3; }
  virtual int native_resolution() const = 0;
  virtual uint64_t fingerprint() const = 0;
  // Held-out round-trip MSE recorded at training time, 0 when unknown.
  virtual double validation_mse() const { return 0.0; }

  // (n, 3, H, W) -> (n, c_lat, H/f, W/f). Items are processed one at a
  // time, so results do not depend on how callers batch them.
  virtual Tensor Encode(const Tensor& images) const = 0;
  // (n, c_lat, h, w) -> (n, 3, h*f, w*f).
  virtual Tensor Decode(const Tensor& latents) const = 0;

  virtual void Save(const std::string& path) const = 0;
};

class IdentityCodec final : public LatentCodec {
 public:
  explicit IdentityCodec(int channels = 3) : channels_(channels) {}

  std::string name() const override { return "identity"; }
  int factor() const override { return 1; }
  int c_lat() const override { return channels_; }
  int image_channels() const override { return channels_; }
  int native_resolution() const override { return 0; }
  uint64_t fingerprint() const override;
  Tensor Encode(const Tensor& images) const override;
  Tensor Decode(const Tensor& latents) const override;
  void Save(const std::string& path) const override;

 private:
  int channels_;
};

struct ConvCodecSpec {
  int factor = 8;  // 2, 4 or 8; one stride-2 stage per factor of two
  int c_lat = 4;
  int base_width = 8;
  int max_width = 32;
  int native_resolution = 0;

  int levels() const;
  int WidthAt(int level) const;
  void Validate() const;
};

class ConvCodec final : public LatentCodec {
 public:
  ConvCodec(ConvCodecSpec spec, std::vector<Tensor> params, double val_mse);

  static ConvCodec Random(const ConvCodecSpec& spec, uint64_t seed);
  static ConvCodec Load(const std::string& path);

  std::string name() const override { return "conv"; }
  int factor() const override { return spec_.factor; }
  int c_lat() const override { return spec_.c_lat; }
  int native_resolution() const override { return spec_.native_resolution; }
  uint64_t fingerprint() const override { return fingerprint_; }
  double validation_mse() const override { return val_mse_; }
  Tensor Encode(const Tensor& images) const override;
  Tensor Decode(const Tensor& latents) const override;
  void Save(const std::string& path) const override;

  const ConvCodecSpec& spec() const { return spec_; }
  std::vector<Tensor>& params() { return params_; }
  // Differentiable batched passes used during training.
  Tensor EncodeBatch(const Tensor& images) const;
  Tensor DecodeBatch(const Tensor& latents) const;
  void set_validation_mse(double mse) { val_mse_ = mse; }
  void Refingerprint();

 private:
  ConvCodecSpec spec_;
  std::vector<Tensor> params_;
  double val_mse_ = 0.0;
  uint64_t fingerprint_ = 0;
};

struct ToyCodecConfig {
  int epochs = 8;
  int batch = 32;
  float lr = 2e-3f;
  double val_fraction = 0.1;
  int base_width = 8;
  int max_width = 32;
  int pre_upsample = 1;
  int64_t max_train_items = 0;  // 0 = use the whole training split
  uint64_t seed = 0;
};

// Trains on the round trip down(decode(encode(up(x)))) against x with an MSE
// loss and records the held-out MSE of the same round trip.
ConvCodec TrainToyCodec(const RealImageDataset& real, int factor, int c_lat,
                        const ToyCodecConfig& config);

// "identity" or a path to a codec file.
std::unique_ptr<LatentCodec> LoadCodec(const std::string& name_or_path);

LatentDataset EncodeDataset(const RealImageDataset& real,
                            const LatentCodec& codec,
                            const ResamplePolicy& policy, int64_t batch = 64);
// Appends `more` to `cache`; both must come from the same codec and policy.
void AppendLatents(LatentDataset& cache, const LatentDataset& more);

Tensor DecodeLatents(const Tensor& latents, const LatentCodec& codec,
                     const ResamplePolicy& policy);
RealImageDataset DecodeSet(const SyntheticLatentSet& syn,
                           const LatentCodec& codec,
                           const ResamplePolicy& policy);

// Bilinear x2 with half-pixel centers and edge clamping.
Tensor ResizeUp2Bilinear(const Tensor& images);
// Mean of each 2x2 block.
Tensor DownsampleArea2(const Tensor& images);
Tensor ResampleUp(const Tensor& images, int factor);
Tensor ResampleDown(const Tensor& images, int factor);

// Row-major n x n Euclidean distances between flattened items.
std::vector<double> DistanceMatrix(const Tensor& items,
                                   const std::vector<int64_t>& rows);
double UpperTriangleCorrelation(const std::vector<double>& a,
                                const std::vector<double>& b, int64_t n);
double DistributionFidelity(const RealImageDataset& real,
                            const LatentDataset& lat, int64_t n, uint64_t seed);

}  // namespace ldistill

#endif  // LDISTILL_CODEC_HPP_
