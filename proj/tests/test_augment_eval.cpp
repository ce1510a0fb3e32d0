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

#include "ldistill/augment.hpp"
#include "ldistill/codec.hpp"
#include "ldistill/distill_dc.hpp"
#include "ldistill/distill_dm.hpp"
#include "ldistill/distill_mtt.hpp"
#include "ldistill/error.hpp"
#include "ldistill/evaluate.hpp"
#include "ldistill/registry.hpp"
#include "oracles.hpp"

using namespace ldistill;
using namespace ldistill::testing;

namespace {

const DatasetSplits& TinyDesk() {
  static const DatasetSplits d = MakeDeskDataset({8, 4, 32, 5});
  return d;
}

// Two classes of flat colors (red vs blue) with mild noise.
RealImageDataset ColorBlobs(int per_class, uint64_t seed) {
  Rng rng(seed);
  const int hw = 8;
  RealImageDataset d;
  std::vector<float> v;
  for (int i = 0; i < per_class * 2; ++i) {
    const int c = i % 2;
    for (int ch = 0; ch < 3; ++ch) {
      const float base = (ch == 0 && c == 0) || (ch == 2 && c == 1) ? 1.0f : -1.0f;
      for (int p = 0; p < hw * hw; ++p) v.push_back(base + float(rng.Normal(0, 0.2)));
    }
    d.labels.push_back(c);
  }
  d.images = Tensor::FromData({int64_t{per_class} * 2, 3, hw, hw}, std::move(v));
  d.num_classes = 2;
  return d;
}

LatentDataset AsLatents(const RealImageDataset& d) {
  return EncodeDataset(d, IdentityCodec(), ResamplePolicy{});
}

EvalProtocol Quick(int runs, int epochs) {
  EvalProtocol p;
  p.runs = runs;
  p.epochs = epochs;
  p.width = 8;
  p.batch = 16;
  p.seed_base = 3;
  return p;
}

bool SameData(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (int64_t i = 0; i < a.numel(); ++i) {
    if (a.data()[i] != b.data()[i]) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("augment_eval") {
  TEST_CASE("empty policy is the identity") {
    const Tensor x = RandomTensor({4, 3, 8, 8}, 1);
    Rng rng(2);
    const auto out = DsaPixel(x, {0, 1, 2, 1}, 3, AugmentPolicy{}, rng);
    CHECK(SameData(out.images, x));
    CHECK(SameData(out.targets, OneHot({0, 1, 2, 1}, 3)));
    CHECK(AugmentPolicy::Parse({}).empty());
  }

  TEST_CASE("flip is an involution") {
    const Tensor x = RandomTensor({3, 3, 5, 6}, 4);
    const std::vector<bool> mask{true, false, true};
    const Tensor once = FlipHorizontal(x, mask);
    CHECK(!SameData(once, x));
    CHECK(SameData(FlipHorizontal(once, mask), x));
    CHECK(once.data()[5] == x.data()[0]);
  }

  TEST_CASE("cutmix weights follow the unpatched area") {
    const CutBox quarter{0, 0, 16, 16};
    CHECK(CutMixLambda(quarter, 32, 32) == doctest::Approx(0.75).epsilon(1e-12));
    const Tensor x = RandomTensor({2, 3, 32, 32}, 5);
    const auto out = CutMix(x, OneHot({0, 1}, 2), {1, 0}, quarter);
    CHECK(out.targets.data()[0] == doctest::Approx(0.75));
    CHECK(out.targets.data()[1] == doctest::Approx(0.25));
    CHECK(out.images.data()[0] == x.data()[3 * 32 * 32]);  // inside the box
    CHECK(out.images.data()[20 * 32 + 20] == x.data()[20 * 32 + 20]);
    Rng rng(6);
    for (int t = 0; t < 200; ++t) {
      const CutBox b = SampleCutBox(32, 32, rng);
      CHECK(b.y0 + b.height <= 32);
      CHECK(b.x0 + b.width <= 32);
      const double lam = CutMixLambda(b, 32, 32);
      CHECK(lam >= 0.0);
      CHECK(lam <= 1.0);
    }
    CHECK_THROWS_AS(CutMix(x, OneHot({0, 1}, 2), {1, 0}, CutBox{20, 20, 16, 16}), Error);
  }

  TEST_CASE("every transform preserves shape and label mass") {
    const Tensor x = RandomTensor({6, 3, 16, 16}, 7);
    const std::vector<int> y{0, 1, 2, 0, 1, 2};
    for (const char* name : {"color", "crop", "flip", "scale", "rotate", "cutmix"}) {
      CAPTURE(name);
      const AugmentPolicy p = AugmentPolicy::Parse({name});
      Rng rng(8);
      for (int t = 0; t < 5; ++t) {
        const auto out = DsaPixel(x, y, 3, p, rng);
        CHECK(out.images.shape() == x.shape());
        for (int64_t i = 0; i < 6; ++i) {
          double s = 0;
          for (int k = 0; k < 3; ++k) s += out.targets.data()[i * 3 + k];
          CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
        }
      }
    }
  }

  TEST_CASE("policy parsing") {
    const AugmentPolicy p = AugmentPolicy::Default();
    CHECK(p.transforms.size() == 5);
    CHECK(p.cutmix);
    CHECK(AugmentPolicy::Parse(p.Names()).Names() == p.Names());
    try {
      AugmentPolicy::Parse({"cutout"});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfig);
    }
  }

  TEST_CASE("report statistics and serialization") {
    EvalReport r;
    r.label = "x";
    r.accuracies = {0.5, 0.7, 0.9};
    r.Finalize();
    CHECK(r.mean == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(r.std == doctest::Approx(std::sqrt(0.08 / 3.0)).epsilon(1e-15));
    const EvalReport back = EvalReport::FromJsonLine(r.ToJsonLine());
    CHECK(back.accuracies == r.accuracies);
    CHECK(back.mean == r.mean);
    CHECK(back.std == r.std);
    CHECK(back.label == "x");
    CHECK_THROWS_AS(EvalReport::FromJsonLine("{"), Error);
    EvalProtocol bad;
    bad.runs = 0;
    CHECK_THROWS_AS(bad.Validate(), Error);
    bad.runs = 1;
    bad.lr = 0.0f;
    CHECK_THROWS_AS(bad.Validate(), Error);
  }

  TEST_CASE("synthetic evaluation: five runs, repeatable, set untouched") {
    const auto& desk = TinyDesk();
    const LatentDataset lat = AsLatents(desk.train);
    const SyntheticLatentSet syn = InitSynthetic(lat, BudgetSpec::Make(1, 1, 3), 4);
    const uint64_t before = HashFloats(syn.latents.data());
    const IdentityCodec codec;
    const EvalReport a = EvaluateSynthetic(syn, codec, {}, desk.test, Quick(5, 2));
    const EvalReport b = EvaluateSynthetic(syn, codec, {}, desk.test, Quick(5, 2));
    CHECK(a.accuracies.size() == 5);
    CHECK(a.accuracies == b.accuracies);
    CHECK(HashFloats(syn.latents.data()) == before);
    EvalReport copy = a;
    copy.Finalize();
    CHECK(copy.mean == a.mean);
    CHECK(copy.std == a.std);
    CHECK_THROWS_AS(EvaluateSynthetic(syn, codec, {}, RealImageDataset{Tensor::Zeros({0, 3, 32, 32}), {}, 10, {}},
                                      Quick(1, 1)),
                    Error);
  }

  TEST_CASE("full real set as the synthetic set is near perfect on separable data") {
    const RealImageDataset train = ColorBlobs(20, 1), test = ColorBlobs(20, 2);
    const SyntheticLatentSet syn = InitSynthetic(AsLatents(train), BudgetSpec::Make(20, 1, 3), 1);
    EvalProtocol p = Quick(1, 10);
    p.depth = 1;
    CHECK(EvaluateSynthetic(syn, IdentityCodec(), {}, test, p).mean > 0.95);
  }

  TEST_CASE("full-set baselines: single class and latent depth") {
    RealImageDataset one = ColorBlobs(6, 3);
    for (int& l : one.labels) l = 0;
    one.num_classes = 1;
    EvalProtocol p = Quick(1, 1);
    p.depth = 1;
    CHECK(FullSetBaseline(one, one, p).mean == 1.0);

    const auto& desk = TinyDesk();
    const ConvCodec codec = ConvCodec::Random({8, 4, 8, 16, 0}, 2);
    const ResamplePolicy pol = ResamplePolicy::Symmetric(2);
    const LatentDataset lt = EncodeDataset(desk.train, codec, pol);
    const LatentDataset lv = EncodeDataset(desk.test, codec, pol);
    const EvalProtocol q = Quick(1, 1);
    const EvalReport pixel = FullSetBaseline(desk.train, desk.test, q);
    const EvalReport latent = FullSetBaseline(lt, lv, q);
    CHECK(pixel.depth == 3);
    CHECK(latent.depth == 1);
    CHECK(latent.space == "latent");
  }

  TEST_CASE("distillation loops never augment") {
    const LatentDataset real = Blobs(2, 12, 4, 4, 1.5, 3);
    const SyntheticLatentSet syn = InitSynthetic(real, BudgetSpec::Make(1, 4, 4), 5);
    const ConvNetSpec spec = LatentNetSpec(real, 8, 1);
    const int64_t before = DsaPixelCalls();
    DCConfig dc;
    dc.iterations = 2;
    dc.outer_loop = 2;
    dc.inner_loop = 2;
    DistillDc(real, syn, dc, MakeNetFactory(spec));
    DMConfig dm;
    dm.iterations = 2;
    DistillDm(real, syn, dm, MakeNetFactory(spec));
    ExpertTrainConfig ec;
    ec.batch_size = 8;
    const TrajectoryBuffer buf = BufferTrajectories(real, spec, 1, 3, ec);
    MTTConfig mtt;
    mtt.iterations = 2;
    mtt.max_start = 1;
    mtt.student_steps = 2;
    DistillMtt(real, syn, buf, mtt);
    CHECK(DsaPixelCalls() == before);
    const auto& desk = TinyDesk();
    EvaluateSynthetic(InitSynthetic(AsLatents(desk.train), BudgetSpec::Make(1, 1, 3), 1),
                      IdentityCodec(), {}, desk.test, Quick(1, 1));
    CHECK(DsaPixelCalls() > before);
  }
}
