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

// Classifier and embedding networks used in distillation (on latents) and
// evaluation (on pixels).

#ifndef LDISTILL_NETWORKS_HPP_
#define LDISTILL_NETWORKS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ldistill/tensor.hpp"

namespace ldistill {

struct ConvNetSpec {
  int depth = 3;
  int in_channels = 3;
  int num_classes = 10;
  int input_height = 32;
  int input_width = 32;
  int width = 128;  // channels per block
  // "convnet" is the default. "resnet", "vgg" and "alexnet" are small
  // analogs of the named families for cross-architecture evaluation.
  std::string arch = "convnet";

  void Validate() const;
  // Spatial size after all pooling stages.
  int FeatureHeight() const { return input_height >> depth; }
  int FeatureWidth() const { return input_width >> depth; }
  int64_t FeatureSize() const;

  friend bool operator==(const ConvNetSpec&, const ConvNetSpec&) = default;
};

struct InitDistribution {
  std::string scheme = "fan_in_uniform";  // or "kaiming_normal"
  uint64_t seed = 0;
};

enum class FeatureSpace { kPixel, kLatent };

// Parameters in fixed order. For each block: conv weight (out, in, k, k),
// conv bias, norm scale, norm offset; then head weight (K, features) and
// head bias. Flattening concatenates them row-major in this order.
std::vector<Shape> ParamShapes(const ConvNetSpec& spec);
int64_t ParamCount(const ConvNetSpec& spec);
uint64_t SpecDigest(const ConvNetSpec& spec);

// Stateless forward passes over an explicit parameter list.
Tensor ForwardWith(const ConvNetSpec& spec, std::span<const Tensor> params,
                   const Tensor& x);
// Flattened final feature map (input of the linear head).
Tensor EmbedWith(const ConvNetSpec& spec, std::span<const Tensor> params,
                 const Tensor& x);

class ConvNet {
 public:
  ConvNet(ConvNetSpec spec, std::vector<Tensor> params);

  const ConvNetSpec& spec() const { return spec_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::vector<Tensor>& params() { return params_; }
  int64_t ParamCount() const;

  Tensor Forward(const Tensor& x) const { return ForwardWith(spec_, params_, x); }
  Tensor Embed(const Tensor& x) const { return EmbedWith(spec_, params_, x); }
  void SetRequiresGrad(bool value);

 private:
  ConvNetSpec spec_;
  std::vector<Tensor> params_;
};

ConvNet BuildConvNet(const ConvNetSpec& spec, const InitDistribution& init);

std::vector<float> FlattenParams(std::span<const Tensor> params);
// Leaf tensors (no history) holding a copy of `flat`.
std::vector<Tensor> UnflattenParams(std::span<const float> flat,
                                    const ConvNetSpec& spec);
// Differentiable slices of a 1-D parameter tensor.
std::vector<Tensor> SliceParams(const Tensor& flat, const ConvNetSpec& spec);

// round(log2(res)) - 2 in pixel space; minus log2(effective_factor) in
// latent space. `resolution` is always the pixel resolution.
int DepthForResolution(int resolution, FeatureSpace space, int effective_factor);

// Predicted class per row, computed in batches without history.
std::vector<int> Predict(const ConvNet& net, const Tensor& inputs,
                         int64_t batch = 256);
double Accuracy(const ConvNet& net, const Tensor& inputs,
                const std::vector<int>& labels, int64_t batch = 256);

}  // namespace ldistill

#endif  // LDISTILL_NETWORKS_HPP_
