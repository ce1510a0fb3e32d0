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

#include "ldistill/evaluate.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "ldistill/augment.hpp"
#include "ldistill/error.hpp"
#include "ldistill/ops.hpp"
#include "ldistill/optim.hpp"
#include "ldistill/rng.hpp"

namespace ldistill {

namespace {

using Clock = std::chrono::steady_clock;

ConvNetSpec ClassifierSpec(const EvalProtocol& proto, int in_channels,
                           int num_classes, int height, int width, int depth) {
  ConvNetSpec spec;
  spec.depth = depth;
  spec.in_channels = in_channels;
  spec.num_classes = num_classes;
  spec.input_height = height;
  spec.input_width = width;
  spec.width = proto.width;
  spec.arch = proto.arch;
  spec.Validate();
  return spec;
}

EvalReport RunAll(const Tensor& train_x, const std::vector<int>& train_y,
                  const Tensor& test_x, const std::vector<int>& test_y,
                  int num_classes, const ConvNetSpec& spec,
                  const EvalProtocol& proto, bool augment,
                  const std::string& label, const std::string& space) {
  proto.Validate();
  Require(!test_y.empty(), ErrorCode::kInvalidArgument,
          "evaluate: empty test set");
  Require(!train_y.empty(), ErrorCode::kInvalidArgument,
          "evaluate: empty training set");
  const auto start = Clock::now();
  EvalReport report;
  report.label = label;
  report.space = space;
  report.depth = spec.depth;
  report.protocol = proto;
  for (int r = 0; r < proto.runs; ++r) {
    report.accuracies.push_back(TrainAndTest(train_x, train_y, test_x, test_y,
                                             num_classes, spec, proto, augment,
                                             proto.seed_base + r));
  }
  report.Finalize();
  report.wall_seconds =
      std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

}  // namespace

void EvalProtocol::Validate() const {
  Require(runs >= 1, ErrorCode::kConfig, "eval: runs must be >= 1");
  Require(epochs >= 0, ErrorCode::kConfig, "eval: epochs must be >= 0");
  Require(lr > 0.0f, ErrorCode::kConfig, "eval: lr must be positive");
  Require(batch >= 1, ErrorCode::kConfig, "eval: batch must be positive");
  Require(width >= 1 && depth >= 0, ErrorCode::kConfig,
          "eval: invalid network width/depth");
  Require(cutmix_prob >= 0.0 && cutmix_prob <= 1.0, ErrorCode::kConfig,
          "eval: cutmix_prob must be in [0, 1]");
  AugmentPolicy::Parse(augment);
}

void EvalReport::Finalize() {
  mean = 0.0;
  std = 0.0;
  if (accuracies.empty()) return;
  for (double a : accuracies) mean += a;
  mean /= static_cast<double>(accuracies.size());
  for (double a : accuracies) std += (a - mean) * (a - mean);
  std = std::sqrt(std / static_cast<double>(accuracies.size()));
}

std::string EvalReport::ToJsonLine() const {
  nlohmann::json j;
  j["type"] = "eval_report";
  j["label"] = label;
  j["space"] = space;
  j["depth"] = depth;
  j["accuracies"] = accuracies;
  j["mean"] = mean;
  j["std"] = std;
  j["wall_seconds"] = wall_seconds;
  j["protocol"] = {{"runs", protocol.runs},
                   {"epochs", protocol.epochs},
                   {"lr", protocol.lr},
                   {"momentum", protocol.momentum},
                   {"weight_decay", protocol.weight_decay},
                   {"batch", protocol.batch},
                   {"arch", protocol.arch},
                   {"width", protocol.width},
                   {"depth", protocol.depth},
                   {"augment", protocol.augment},
                   {"cutmix_prob", protocol.cutmix_prob},
                   {"seed_base", protocol.seed_base}};
  return j.dump();
}

EvalReport EvalReport::FromJsonLine(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    EvalReport r;
    r.label = j.value("label", "");
    r.space = j.value("space", "pixel");
    r.depth = j.value("depth", 0);
    r.accuracies = j.at("accuracies").get<std::vector<double>>();
    r.mean = j.at("mean").get<double>();
    r.std = j.at("std").get<double>();
    r.wall_seconds = j.value("wall_seconds", 0.0);
    if (j.contains("protocol")) {
      const auto& p = j["protocol"];
      r.protocol.runs = p.value("runs", r.protocol.runs);
      r.protocol.epochs = p.value("epochs", r.protocol.epochs);
      r.protocol.lr = p.value("lr", r.protocol.lr);
      r.protocol.momentum = p.value("momentum", r.protocol.momentum);
      r.protocol.weight_decay = p.value("weight_decay", r.protocol.weight_decay);
      r.protocol.batch = p.value("batch", r.protocol.batch);
      r.protocol.arch = p.value("arch", r.protocol.arch);
      r.protocol.width = p.value("width", r.protocol.width);
      r.protocol.depth = p.value("depth", r.protocol.depth);
      r.protocol.augment = p.value("augment", r.protocol.augment);
      r.protocol.cutmix_prob = p.value("cutmix_prob", r.protocol.cutmix_prob);
      r.protocol.seed_base = p.value("seed_base", r.protocol.seed_base);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("eval report: ") + e.what());
  }
}

double TrainAndTest(const Tensor& train_x, const std::vector<int>& train_y,
                    const Tensor& test_x, const std::vector<int>& test_y,
                    int num_classes, const ConvNetSpec& spec,
                    const EvalProtocol& proto, bool augment, uint64_t seed) {
  const Rng root(seed);
  ConvNet net = BuildConvNet(spec, {"fan_in_uniform", root.Derive(0).seed()});
  net.SetRequiresGrad(true);
  Rng rng = root.Derive(1);
  AugmentPolicy policy;
  if (augment) {
    policy = AugmentPolicy::Parse(proto.augment);
    policy.cutmix_prob = proto.cutmix_prob;
  }
  Sgd sgd(proto.lr, proto.momentum, proto.weight_decay);
  const int64_t n = static_cast<int64_t>(train_y.size());
  const int64_t batch = std::min<int64_t>(proto.batch, n);
  const int64_t steps_per_epoch = (n + batch - 1) / batch;
  const double total = static_cast<double>(proto.epochs * steps_per_epoch);
  int64_t step = 0;
  for (int epoch = 0; epoch < proto.epochs; ++epoch) {
    const auto perm = rng.Permutation(n);
    for (int64_t s = 0; s < n; s += batch) {
      const int64_t end = std::min(n, s + batch);
      std::vector<int64_t> rows(perm.begin() + s, perm.begin() + end);
      std::vector<int> y;
      for (int64_t r : rows) y.push_back(train_y[r]);
      AugmentedBatch b{ops::IndexSelect(train_x, rows), OneHot(y, num_classes)};
      if (!policy.empty()) b = DsaPixel(b.images, y, num_classes, policy, rng);
      sgd.set_lr(static_cast<float>(
          0.5 * proto.lr * (1.0 + std::cos(std::numbers::pi * step / total))));
      const Tensor loss = ops::SoftCrossEntropy(net.Forward(b.images), b.targets);
      Require(std::isfinite(loss.item()), ErrorCode::kNumeric,
              "evaluate: training loss is not finite");
      sgd.Step(net.params(), Grad(loss, net.params()));
      ++step;
    }
  }
  return Accuracy(net, test_x, test_y);
}

EvalReport EvaluateImages(const RealImageDataset& train,
                          const RealImageDataset& test,
                          const EvalProtocol& proto, const std::string& label) {
  train.Validate();
  Require(test.count() > 0, ErrorCode::kInvalidArgument,
          "evaluate: empty test set");
  Require(train.channels() == test.channels() &&
              train.height() == test.height() && train.width() == test.width(),
          ErrorCode::kShape, "evaluate: train and test image shapes differ");
  const int depth = proto.depth > 0 ? proto.depth
                                    : DepthForResolution(train.height(),
                                                         FeatureSpace::kPixel, 1);
  const ConvNetSpec spec = ClassifierSpec(proto, train.channels(),
                                          train.num_classes, train.height(),
                                          train.width(), depth);
  return RunAll(train.images, train.labels, test.images, test.labels,
                train.num_classes, spec, proto, true, label, "pixel");
}

EvalReport EvaluateSynthetic(const SyntheticLatentSet& syn,
                             const LatentCodec& codec,
                             const ResamplePolicy& policy,
                             const RealImageDataset& test,
                             const EvalProtocol& proto) {
  const RealImageDataset decoded = DecodeSet(syn, codec, policy);
  return EvaluateImages(decoded, test, proto, syn.algorithm);
}

EvalReport FullSetBaseline(const RealImageDataset& train,
                           const RealImageDataset& test,
                           const EvalProtocol& proto) {
  return EvaluateImages(train, test, proto, "full-pixel");
}

Tensor StandardizeLatents(const Tensor& latents, const std::vector<float>& mean,
                          const std::vector<float>& std) {
  const int64_t c = latents.dim(1);
  Require(static_cast<int64_t>(mean.size()) == c &&
              static_cast<int64_t>(std.size()) == c,
          ErrorCode::kShape, "standardize: channel statistics size mismatch");
  Tensor out = latents.clone();
  auto x = out.data();
  const int64_t plane = latents.dim(2) * latents.dim(3);
  for (int64_t i = 0; i < latents.dim(0); ++i) {
    for (int64_t ch = 0; ch < c; ++ch) {
      float* p = x.data() + (i * c + ch) * plane;
      const float s = std[ch] > 0.0f ? std[ch] : 1.0f;
      for (int64_t j = 0; j < plane; ++j) p[j] = (p[j] - mean[ch]) / s;
    }
  }
  return out;
}

EvalReport FullSetBaseline(const LatentDataset& train,
                           const LatentDataset& test,
                           const EvalProtocol& proto) {
  train.Validate();
  Require(test.count() > 0, ErrorCode::kInvalidArgument,
          "evaluate: empty test set");
  Require(train.codec_fingerprint == test.codec_fingerprint, ErrorCode::kFingerprint,
          "evaluate: train and test latents come from different codecs");
  const int eff = train.effective_factor();
  const int resolution = train.height() * eff;
  const int depth = proto.depth > 0
                        ? proto.depth
                        : DepthForResolution(resolution, FeatureSpace::kLatent, eff);
  const ConvNetSpec spec = ClassifierSpec(proto, train.c_lat, train.num_classes,
                                          train.height(), train.width(), depth);
  return RunAll(StandardizeLatents(train.latents, train.channel_mean,
                                   train.channel_std),
                train.labels,
                StandardizeLatents(test.latents, train.channel_mean,
                                   train.channel_std),
                test.labels, train.num_classes, spec, proto, false,
                "full-latent", "latent");
}

}  // namespace ldistill
