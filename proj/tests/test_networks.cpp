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

#include <doctest.h>

#include <cmath>

#include "ldistill/error.hpp"
#include "ldistill/networks.hpp"
#include "ldistill/ops.hpp"
#include "test_util.hpp"

using namespace ldistill;

TEST_SUITE("networks") {
  TEST_CASE("depth schedule") {
    CHECK(DepthForResolution(256, FeatureSpace::kPixel, 1) == 6);
    CHECK(DepthForResolution(256, FeatureSpace::kLatent, 4) == 4);
    CHECK(DepthForResolution(512, FeatureSpace::kLatent, 8) == 4);
    CHECK(DepthForResolution(32, FeatureSpace::kPixel, 1) == 3);
    CHECK(DepthForResolution(32, FeatureSpace::kLatent, 4) == 1);
    CHECK_THROWS_AS(DepthForResolution(4, FeatureSpace::kLatent, 8), Error);
  }

  TEST_CASE("feature map and logits shapes") {
    ConvNetSpec spec;
    spec.depth = 3;
    spec.width = 128;
    CHECK(spec.FeatureSize() == 128 * 4 * 4);
    spec.width = 16;
    const ConvNet net = BuildConvNet(spec, {"fan_in_uniform", 1});
    const Tensor x = testing::RandomTensor({5, 3, 32, 32}, 2);
    CHECK(net.Forward(x).shape() == Shape{5, 10});
    CHECK(net.Embed(x).shape() == Shape{5, 16 * 4 * 4});
    ConvNetSpec latent = spec;
    latent.in_channels = 4;
    latent.input_height = latent.input_width = 8;
    latent.depth = 1;
    CHECK(BuildConvNet(latent, {"fan_in_uniform", 1}).Forward(
              testing::RandomTensor({2, 4, 8, 8}, 3)).shape() == Shape{2, 10});
    ConvNetSpec too_deep = spec;
    too_deep.depth = 6;
    CHECK_THROWS_AS(too_deep.Validate(), Error);
  }

  TEST_CASE("alternative architectures produce logits") {
    for (const char* arch : {"resnet", "vgg", "alexnet"}) {
      ConvNetSpec spec;
      spec.width = 8;
      spec.arch = arch;
      const ConvNet net = BuildConvNet(spec, {"kaiming_normal", 4});
      CHECK(net.Forward(testing::RandomTensor({2, 3, 32, 32}, 5)).shape() == Shape{2, 10});
      CHECK(net.ParamCount() == ParamCount(spec));
    }
  }

  TEST_CASE("initialization is seeded") {
    ConvNetSpec spec;
    spec.width = 8;
    const auto a = FlattenParams(BuildConvNet(spec, {"fan_in_uniform", 7}).params());
    const auto b = FlattenParams(BuildConvNet(spec, {"fan_in_uniform", 7}).params());
    const auto c = FlattenParams(BuildConvNet(spec, {"fan_in_uniform", 8}).params());
    CHECK(a == b);
    CHECK(a != c);
    CHECK(static_cast<int64_t>(a.size()) == ParamCount(spec));
  }

  TEST_CASE("flatten and unflatten are inverse") {
    ConvNetSpec spec;
    spec.width = 8;
    const ConvNet net = BuildConvNet(spec, {"fan_in_uniform", 9});
    const auto flat = FlattenParams(net.params());
    const auto back = FlattenParams(UnflattenParams(flat, spec));
    CHECK(flat == back);
    std::vector<float> probe = flat;
    probe[123] += 1e-3f;
    const auto again = FlattenParams(UnflattenParams(probe, spec));
    int diffs = 0;
    for (size_t i = 0; i < flat.size(); ++i) diffs += again[i] != flat[i];
    CHECK(diffs == 1);
    std::vector<float> short_flat(flat.begin(), flat.end() - 1);
    CHECK_THROWS_AS(UnflattenParams(short_flat, spec), Error);
  }

  TEST_CASE("forward over sliced flat parameters matches the module") {
    ConvNetSpec spec;
    spec.width = 8;
    spec.depth = 2;
    spec.input_height = spec.input_width = 16;
    const ConvNet net = BuildConvNet(spec, {"fan_in_uniform", 10});
    const Tensor flat = Tensor::FromData({ParamCount(spec)}, FlattenParams(net.params()));
    const Tensor x = testing::RandomTensor({3, 3, 16, 16}, 11);
    const Tensor a = net.Forward(x);
    const Tensor b = ForwardWith(spec, SliceParams(flat, spec), x);
    for (int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
  }

  TEST_CASE("instance norm output has zero per-instance channel mean") {
    const Tensor x = testing::RandomTensor({3, 4, 6, 6}, 12, 3.0);
    const Tensor y = ops::InstanceNorm(x, Tensor::Full({4}, 1.0f), Tensor::Zeros({4}));
    for (int n = 0; n < 3; ++n) {
      for (int c = 0; c < 4; ++c) {
        double m = 0;
        for (int i = 0; i < 36; ++i) m += y.data()[(n * 4 + c) * 36 + i];
        CHECK(std::abs(m / 36) < 1e-4);
      }
    }
  }

  TEST_CASE("spec digest separates specs") {
    ConvNetSpec a, b;
    b.width = 64;
    CHECK(SpecDigest(a) != SpecDigest(b));
    CHECK(SpecDigest(a) == SpecDigest(ConvNetSpec{}));
  }
}
