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

#include "ldistill/networks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ldistill/data_model.hpp"
#include "ldistill/error.hpp"
#include "ldistill/ops.hpp"
#include "ldistill/rng.hpp"

namespace ldistill {

namespace {

enum class Kind { kConvWeight, kBias, kNormScale, kNormOffset, kHeadWeight };

struct Slot {
  Shape shape;
  Kind kind;
  int64_t fan_in;
};

void AddConv(std::vector<Slot>& slots, int out, int in, int k, bool norm) {
  const int64_t fan_in = int64_t{in} * k * k;
  slots.push_back({{out, in, k, k}, Kind::kConvWeight, fan_in});
  slots.push_back({{out}, Kind::kBias, fan_in});
  if (norm) {
    slots.push_back({{out}, Kind::kNormScale, 0});
    slots.push_back({{out}, Kind::kNormOffset, 0});
  }
}

std::vector<Slot> Layout(const ConvNetSpec& spec) {
  spec.Validate();
  std::vector<Slot> slots;
  const int w = spec.width;
  if (spec.arch == "convnet") {
    int in = spec.in_channels;
    for (int d = 0; d < spec.depth; ++d, in = w) AddConv(slots, w, in, 3, true);
  } else if (spec.arch == "resnet") {
    AddConv(slots, w, spec.in_channels, 3, true);
    for (int d = 0; d < spec.depth; ++d) {
      AddConv(slots, w, w, 3, true);
      AddConv(slots, w, w, 3, true);
    }
  } else if (spec.arch == "vgg") {
    int in = spec.in_channels;
    for (int d = 0; d < spec.depth; ++d, in = w) {
      AddConv(slots, w, in, 3, true);
      AddConv(slots, w, w, 3, true);
    }
  } else {  // alexnet
    int in = spec.in_channels;
    for (int d = 0; d < spec.depth; ++d, in = w) {
      AddConv(slots, w, in, d == 0 ? 5 : 3, false);
    }
  }
  const int64_t features = spec.FeatureSize();
  slots.push_back({{spec.num_classes, features}, Kind::kHeadWeight, features});
  slots.push_back({{spec.num_classes}, Kind::kBias, features});
  return slots;
}

class Cursor {
 public:
  explicit Cursor(std::span<const Tensor> params) : params_(params) {}
  const Tensor& Next() {
    Require(index_ < params_.size(), ErrorCode::kShape,
            "network received too few parameters");
    return params_[index_++];
  }
  size_t used() const { return index_; }

 private:
  std::span<const Tensor> params_;
  size_t index_ = 0;
};

Tensor ConvUnit(const Tensor& x, Cursor& c, bool norm) {
  const Tensor& w = c.Next();
  const Tensor& b = c.Next();
  const int k = static_cast<int>(w.dim(2));
  Tensor y = ops::BiasAdd(ops::Conv2d(x, w, 1, k / 2), b);
  if (norm) {
    const Tensor& scale = c.Next();
    const Tensor& offset = c.Next();
    y = ops::InstanceNorm(y, scale, offset);
  }
  return y;
}

Tensor Features(const ConvNetSpec& spec, Cursor& c, const Tensor& x) {
  Require(x.rank() == 4 && x.dim(1) == spec.in_channels &&
              x.dim(2) == spec.input_height && x.dim(3) == spec.input_width,
          ErrorCode::kShape,
          "network input " + ShapeToString(x.shape()) + " does not match spec");
  Tensor h = x;
  if (spec.arch == "convnet") {
    for (int d = 0; d < spec.depth; ++d) {
      h = ops::AvgPool2(ops::Relu(ConvUnit(h, c, true)));
    }
  } else if (spec.arch == "resnet") {
    h = ops::Relu(ConvUnit(h, c, true));
    for (int d = 0; d < spec.depth; ++d) {
      Tensor r = ops::Relu(ConvUnit(h, c, true));
      r = ConvUnit(r, c, true);
      h = ops::AvgPool2(ops::Relu(ops::Add(h, r)));
    }
  } else if (spec.arch == "vgg") {
    for (int d = 0; d < spec.depth; ++d) {
      h = ops::Relu(ConvUnit(h, c, true));
      h = ops::AvgPool2(ops::Relu(ConvUnit(h, c, true)));
    }
  } else {
    for (int d = 0; d < spec.depth; ++d) {
      h = ops::AvgPool2(ops::Relu(ConvUnit(h, c, false)));
    }
  }
  return ops::Reshape(h, {x.dim(0), spec.FeatureSize()});
}

}  // namespace

void ConvNetSpec::Validate() const {
  Require(arch == "convnet" || arch == "resnet" || arch == "vgg" ||
              arch == "alexnet",
          ErrorCode::kConfig, "unknown network architecture '" + arch + "'");
  Require(depth >= 1, ErrorCode::kDomain, "network depth must be >= 1");
  Require(in_channels >= 1 && num_classes >= 1 && width >= 1,
          ErrorCode::kDomain, "network channels and classes must be positive");
  const int64_t need = int64_t{1} << depth;
  if (input_height < need || input_width < need ||
      input_height % need != 0 || input_width % need != 0) {
    Fail(ErrorCode::kShape,
         "input " + std::to_string(input_height) + "x" +
             std::to_string(input_width) + " too small or not divisible for depth " +
             std::to_string(depth) + " (needs multiples of " +
             std::to_string(need) + ")");
  }
}

int64_t ConvNetSpec::FeatureSize() const {
  return int64_t{width} * FeatureHeight() * FeatureWidth();
}

std::vector<Shape> ParamShapes(const ConvNetSpec& spec) {
  std::vector<Shape> shapes;
  for (const Slot& s : Layout(spec)) shapes.push_back(s.shape);
  return shapes;
}

int64_t ParamCount(const ConvNetSpec& spec) {
  int64_t n = 0;
  for (const Shape& s : ParamShapes(spec)) n += NumElements(s);
  return n;
}

uint64_t SpecDigest(const ConvNetSpec& spec) {
  const int32_t fields[] = {spec.depth,       spec.in_channels,
                            spec.num_classes, spec.input_height,
                            spec.input_width, spec.width};
  const uint64_t h = Fnv1a64(fields, sizeof(fields));
  return Fnv1a64(spec.arch.data(), spec.arch.size(), h);
}

Tensor EmbedWith(const ConvNetSpec& spec, std::span<const Tensor> params,
                 const Tensor& x) {
  Cursor c(params);
  return Features(spec, c, x);
}

Tensor ForwardWith(const ConvNetSpec& spec, std::span<const Tensor> params,
                   const Tensor& x) {
  Cursor c(params);
  Tensor features = Features(spec, c, x);
  const Tensor& w = c.Next();
  const Tensor& b = c.Next();
  Require(c.used() == params.size(), ErrorCode::kShape,
          "network received too many parameters");
  return ops::BiasAdd(ops::MatMul(features, w, false, true), b);
}

ConvNet::ConvNet(ConvNetSpec spec, std::vector<Tensor> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  const auto shapes = ParamShapes(spec_);
  Require(shapes.size() == params_.size(), ErrorCode::kShape,
          "parameter list does not match the network spec");
  for (size_t i = 0; i < shapes.size(); ++i) {
    Require(shapes[i] == params_[i].shape(), ErrorCode::kShape,
            "parameter " + std::to_string(i) + " has shape " +
                ShapeToString(params_[i].shape()) + ", expected " +
                ShapeToString(shapes[i]));
  }
}

int64_t ConvNet::ParamCount() const {
  int64_t n = 0;
  for (const Tensor& p : params_) n += p.numel();
  return n;
}

void ConvNet::SetRequiresGrad(bool value) {
  for (Tensor& p : params_) p.set_requires_grad(value);
}

ConvNet BuildConvNet(const ConvNetSpec& spec, const InitDistribution& init) {
  Require(init.scheme == "fan_in_uniform" || init.scheme == "kaiming_normal",
          ErrorCode::kConfig, "unknown init scheme '" + init.scheme + "'");
  Rng rng(init.seed);
  std::vector<Tensor> params;
  for (const Slot& s : Layout(spec)) {
    std::vector<float> v(NumElements(s.shape));
    switch (s.kind) {
      case Kind::kConvWeight:
      case Kind::kHeadWeight:
      case Kind::kBias: {
        const double fan = static_cast<double>(std::max<int64_t>(1, s.fan_in));
        if (init.scheme == "kaiming_normal" && s.kind != Kind::kBias) {
          const double stddev = std::sqrt(2.0 / fan);
          for (float& x : v) x = static_cast<float>(rng.Normal(0.0, stddev));
        } else if (init.scheme == "kaiming_normal") {
          std::fill(v.begin(), v.end(), 0.0f);
        } else {
          const double bound = 1.0 / std::sqrt(fan);
          for (float& x : v) x = static_cast<float>(rng.Uniform(-bound, bound));
        }
        break;
      }
      case Kind::kNormScale:
        std::fill(v.begin(), v.end(), 1.0f);
        break;
      case Kind::kNormOffset:
        std::fill(v.begin(), v.end(), 0.0f);
        break;
    }
    params.push_back(Tensor::FromData(s.shape, std::move(v)));
  }
  ConvNet net(spec, std::move(params));
  net.SetRequiresGrad(true);
  return net;
}

std::vector<float> FlattenParams(std::span<const Tensor> params) {
  std::vector<float> flat;
  for (const Tensor& p : params) {
    const auto d = p.data();
    flat.insert(flat.end(), d.begin(), d.end());
  }
  return flat;
}

std::vector<Tensor> UnflattenParams(std::span<const float> flat,
                                    const ConvNetSpec& spec) {
  const auto shapes = ParamShapes(spec);
  int64_t total = 0;
  for (const Shape& s : shapes) total += NumElements(s);
  Require(static_cast<int64_t>(flat.size()) == total, ErrorCode::kShape,
          "unflatten: vector has " + std::to_string(flat.size()) +
              " values, spec needs " + std::to_string(total));
  std::vector<Tensor> params;
  int64_t offset = 0;
  for (const Shape& s : shapes) {
    const int64_t n = NumElements(s);
    params.push_back(Tensor::FromData(
        s, std::vector<float>(flat.begin() + offset, flat.begin() + offset + n)));
    offset += n;
  }
  return params;
}

std::vector<Tensor> SliceParams(const Tensor& flat, const ConvNetSpec& spec) {
  const auto shapes = ParamShapes(spec);
  std::vector<Tensor> params;
  int64_t offset = 0;
  for (const Shape& s : shapes) {
    params.push_back(ops::Slice(flat, offset, s));
    offset += NumElements(s);
  }
  Require(offset == flat.numel(), ErrorCode::kShape,
          "flat parameter vector does not match the network spec");
  return params;
}

int DepthForResolution(int resolution, FeatureSpace space,
                       int effective_factor) {
  Require(resolution >= 2, ErrorCode::kDomain,
          "depth_for_resolution: resolution must be >= 2");
  const int pixel_depth =
      static_cast<int>(std::lround(std::log2(static_cast<double>(resolution)))) - 2;
  int depth = pixel_depth;
  int side = resolution;
  if (space == FeatureSpace::kLatent) {
    Require(effective_factor >= 1 &&
                (effective_factor & (effective_factor - 1)) == 0,
            ErrorCode::kDomain,
            "depth_for_resolution: effective factor must be a power of two");
    depth -= static_cast<int>(std::lround(std::log2(effective_factor)));
    side = resolution / effective_factor;
  }
  if (depth < 1 || side < (1 << depth)) {
    Fail(ErrorCode::kDomain, "depth_for_resolution: resolution " +
                                 std::to_string(resolution) +
                                 " is too small for a ConvNet in this space");
  }
  return depth;
}

std::vector<int> Predict(const ConvNet& net, const Tensor& inputs,
                         int64_t batch) {
  NoGradGuard no_grad;
  const int64_t n = inputs.dim(0);
  std::vector<int> out;
  out.reserve(n);
  for (int64_t start = 0; start < n; start += batch) {
    const int64_t end = std::min(n, start + batch);
    std::vector<int64_t> rows(end - start);
    std::iota(rows.begin(), rows.end(), start);
    Tensor logits = net.Forward(ops::IndexSelect(inputs, rows));
    const int64_t k = logits.dim(1);
    const float* z = logits.data().data();
    for (int64_t i = 0; i < end - start; ++i) {
      out.push_back(static_cast<int>(
          std::max_element(z + i * k, z + (i + 1) * k) - (z + i * k)));
    }
  }
  return out;
}

double Accuracy(const ConvNet& net, const Tensor& inputs,
                const std::vector<int>& labels, int64_t batch) {
  Require(!labels.empty(), ErrorCode::kDomain, "accuracy on an empty set");
  const auto pred = Predict(net, inputs, batch);
  int64_t hit = 0;
  for (size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace ldistill
