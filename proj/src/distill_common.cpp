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

#include "ldistill/distill.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "ldistill/error.hpp"

namespace ldistill {

std::vector<double> LossTrace::Losses() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.loss);
  return out;
}

std::string LossTrace::ToJsonLines() const {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j = {{"type", "trace"},
                        {"algorithm", algorithm},
                        {"iteration", r.iteration},
                        {"outer", r.outer},
                        {"loss", std::isfinite(r.loss) ? nlohmann::json(r.loss)
                                                       : nlohmann::json()}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

LossTrace LossTrace::FromJsonLines(const std::string& text) {
  LossTrace trace;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.value("type", "") != "trace") continue;
      trace.algorithm = j.value("algorithm", trace.algorithm);
      TraceRecord r;
      r.iteration = j.at("iteration").get<int64_t>();
      r.outer = j.value("outer", 0);
      r.loss = j.at("loss").is_null() ? std::nan("") : j.at("loss").get<double>();
      trace.records.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorCode::kFormat, std::string("loss trace: ") + e.what());
    }
  }
  return trace;
}

NetFactory MakeNetFactory(const ConvNetSpec& spec, const std::string& scheme) {
  spec.Validate();
  return [spec, scheme](uint64_t seed) {
    return BuildConvNet(spec, InitDistribution{scheme, seed});
  };
}

ConvNetSpec LatentNetSpec(const LatentDataset& real, int width, int depth,
                          const std::string& arch) {
  const int eff = real.effective_factor();
  ConvNetSpec spec;
  spec.in_channels = real.c_lat;
  spec.num_classes = real.num_classes;
  spec.input_height = real.height();
  spec.input_width = real.width();
  spec.width = width;
  spec.arch = arch;
  spec.depth = depth > 0 ? depth
                         : DepthForResolution(real.height() * eff,
                                              eff == 1 ? FeatureSpace::kPixel
                                                       : FeatureSpace::kLatent,
                                              eff);
  spec.Validate();
  return spec;
}

void RequireAllClasses(const LatentDataset& real, const SyntheticLatentSet& syn) {
  Require(real.num_classes == syn.num_classes, ErrorCode::kShape,
          "distill: real and synthetic class counts differ");
  Require(real.latents.dim(1) == syn.latents.dim(1) &&
              real.latents.dim(2) == syn.latents.dim(2) &&
              real.latents.dim(3) == syn.latents.dim(3),
          ErrorCode::kShape, "distill: real and synthetic latent shapes differ");
  const auto index = real.ClassIndex();
  for (int c = 0; c < real.num_classes; ++c) {
    Require(!index[c].empty(), ErrorCode::kInit,
            "distill: class " + std::to_string(c) + " has no real items");
  }
}

void LatentSgd::Step(Tensor& x, const Tensor& grad) {
  auto p = x.data();
  const auto g = grad.data();
  Require(p.size() == g.size(), ErrorCode::kInternal,
          "latent optimizer: gradient size mismatch");
  if (velocity_.empty()) velocity_.assign(p.size(), 0.0f);
  for (size_t i = 0; i < p.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + g[i];
    p[i] -= lr_ * velocity_[i];
  }
}

bool AllFinite(std::span<const float> values) {
  for (float v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::vector<int64_t> SampleRows(const std::vector<int64_t>& pool, int64_t count,
                                Rng& rng) {
  Require(!pool.empty(), ErrorCode::kInit, "cannot sample from an empty pool");
  const auto picks = rng.Sample(static_cast<int64_t>(pool.size()), count);
  std::vector<int64_t> rows;
  rows.reserve(picks.size());
  for (int64_t p : picks) rows.push_back(pool[p]);
  return rows;
}

}  // namespace ldistill
