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

#include "ldistill/distill_dm.hpp"

#include <cmath>

#include "ldistill/error.hpp"
#include "ldistill/ops.hpp"
#include "ldistill/rng.hpp"

namespace ldistill {

namespace {

Tensor BatchMean(const Tensor& e) {
  const int64_t n = e.dim(0);
  const int64_t d = e.numel() / n;
  return ops::Scale(ops::SumOuterInner(e, n, d, 1, {d}),
                    1.0f / static_cast<float>(n));
}

}  // namespace

void DMConfig::Validate() const {
  Require(iterations >= 0 && batch_size >= 1, ErrorCode::kConfig,
          "dm: counts must be positive");
  Require(eta_base > 0.0f, ErrorCode::kConfig, "dm: eta_base must be positive");
  Require(momentum >= 0.0f && momentum < 1.0f, ErrorCode::kConfig,
          "dm: momentum must be in [0, 1)");
}

Tensor MmdClassLoss(const Tensor& real_batch, const Tensor& syn_batch,
                    const EmbedFn& embed) {
  Require(real_batch.defined() && real_batch.dim(0) > 0, ErrorCode::kInvalidArgument,
          "mmd_class_loss: empty real batch");
  Require(syn_batch.defined() && syn_batch.dim(0) > 0, ErrorCode::kInvalidArgument,
          "mmd_class_loss: empty synthetic batch");
  Tensor mean_real;
  {
    NoGradGuard no_grad;
    mean_real = BatchMean(embed(real_batch.detach()));
  }
  const Tensor mean_syn = BatchMean(embed(syn_batch));
  Require(mean_real.shape() == mean_syn.shape(), ErrorCode::kShape,
          "mmd_class_loss: embedding sizes differ");
  return ops::SquaredNorm(ops::Sub(mean_real, mean_syn));
}

DistillResult DistillDm(const LatentDataset& real, SyntheticLatentSet syn,
                        const DMConfig& cfg, const NetFactory& factory,
                        const DmHooks& hooks) {
  cfg.Validate();
  syn.Validate();
  RequireAllClasses(real, syn);
  DistillResult result;
  result.trace.algorithm = "dm";
  const auto real_index = real.ClassIndex();
  const auto syn_index = syn.ClassIndex();
  const Rng root(cfg.seed);
  Rng rng = root.Derive(1);
  LatentSgd opt(cfg.SyntheticLr(syn.budget.lpc), cfg.momentum);
  Tensor latents = syn.latents.clone();
  latents.set_requires_grad(true);

  for (int64_t it = 0; it < cfg.iterations; ++it) {
    const uint64_t net_seed = root.Derive(1000 + static_cast<uint64_t>(it)).seed();
    const ConvNet net = factory(net_seed);
    const EmbedFn embed = [&net](const Tensor& x) { return net.Embed(x); };
    std::vector<float> grad(static_cast<size_t>(latents.numel()), 0.0f);
    double total = 0.0;
    for (int c = 0; c < real.num_classes; ++c) {
      const auto rows = SampleRows(real_index[c], cfg.batch_size, rng);
      const Tensor loss =
          MmdClassLoss(ops::IndexSelect(real.latents, rows),
                       ops::IndexSelect(latents, syn_index[c]), embed);
      total += loss.item();
      const Tensor g = Grad(loss, {latents})[0];
      const auto gv = g.data();
      for (size_t i = 0; i < grad.size(); ++i) grad[i] += gv[i];
    }
    result.trace.records.push_back({it, 0, total});
    if (!std::isfinite(total) || !AllFinite(grad)) {
      result.abort_reason =
          "dm: loss became non-finite at iteration " + std::to_string(it);
      syn.latents = latents.detach().clone();
      syn.iterations = it;
      result.syn = std::move(syn);
      return result;
    }
    opt.Step(latents, Tensor::FromData(latents.shape(), std::move(grad)));
    if (hooks.on_iteration) hooks.on_iteration(it, net_seed, net);
  }
  syn.latents = latents.detach().clone();
  syn.algorithm = "dm";
  syn.iterations = cfg.iterations;
  result.syn = std::move(syn);
  return result;
}

}  // namespace ldistill
