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

#include "ldistill/distill_dc.hpp"

#include <cmath>

#include "ldistill/error.hpp"
#include "ldistill/ops.hpp"
#include "ldistill/optim.hpp"
#include "ldistill/rng.hpp"

namespace ldistill {

namespace {

// Rows are output units. Rank-1 parameters (biases, norm scales) are not
// matched and contribute 0.
Tensor CosineLayer(const Tensor& gs, const Tensor& gr) {
  if (gs.rank() < 2) return Tensor::Zeros({});
  const int64_t rows = gs.dim(0);
  const int64_t cols = gs.numel() / rows;
  // Real-side norms are constants; rows where either side vanishes are
  // masked out and contribute 0.
  const auto r = gr.data();
  const auto s = gs.data();
  std::vector<float> inv_nr(rows), pad(rows), valid(rows);
  for (int64_t i = 0; i < rows; ++i) {
    double nr = 0.0, ns = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      nr += static_cast<double>(r[i * cols + j]) * r[i * cols + j];
      ns += static_cast<double>(s[i * cols + j]) * s[i * cols + j];
    }
    const bool ok = nr > 0.0 && ns > 0.0;
    valid[i] = ok ? 1.0f : 0.0f;
    inv_nr[i] = ok ? static_cast<float>(1.0 / std::sqrt(nr)) : 0.0f;
    pad[i] = ns > 0.0 ? 0.0f : 1.0f;
  }
  const Tensor s2 = ops::Reshape(gs, {rows, cols});
  const Tensor r2 = ops::Reshape(gr.detach(), {rows, cols});
  const Tensor dot = ops::SumOuterInner(ops::Mul(s2, r2), 1, rows, cols, {rows});
  const Tensor ns2 =
      ops::SumOuterInner(ops::Mul(s2, s2), 1, rows, cols, {rows});
  const Tensor inv_ns =
      ops::Pow(ops::Add(ns2, Tensor::FromData({rows}, pad)), -0.5f);
  const Tensor cos = ops::Mul(ops::Mul(dot, inv_ns),
                              Tensor::FromData({rows}, inv_nr));
  double count = 0.0;
  for (float v : valid) count += v;
  return ops::AddScalar(ops::Neg(ops::Sum(cos)), static_cast<float>(count));
}

}  // namespace

MatchLoss ParseMatchLoss(const std::string& name) {
  if (name == "mse") return MatchLoss::kMse;
  if (name == "cosine") return MatchLoss::kCosine;
  Fail(ErrorCode::kConfig, "unknown match loss '" + name + "' (mse|cosine)");
}

void DCConfig::Validate() const {
  Require(iterations >= 0 && outer_loop >= 1 && inner_loop >= 0 &&
              batch_size >= 1,
          ErrorCode::kConfig, "dc: counts must be positive");
  Require(eta_base > 0.0f && eta_model > 0.0f, ErrorCode::kConfig,
          "dc: learning rates must be positive");
  Require(momentum >= 0.0f && momentum < 1.0f, ErrorCode::kConfig,
          "dc: momentum must be in [0, 1)");
}

Tensor GradientMatchLoss(const std::vector<Tensor>& grads_syn,
                         const std::vector<Tensor>& grads_real, MatchLoss kind) {
  Require(grads_syn.size() == grads_real.size() && !grads_syn.empty(),
          ErrorCode::kShape, "gradient_match_loss: layer lists differ");
  Tensor total;
  for (size_t l = 0; l < grads_syn.size(); ++l) {
    Require(grads_syn[l].shape() == grads_real[l].shape(), ErrorCode::kShape,
            "gradient_match_loss: layer " + std::to_string(l) +
                " shapes differ");
    const Tensor term =
        kind == MatchLoss::kMse
            ? ops::SquaredNorm(ops::Sub(grads_syn[l], grads_real[l].detach()))
            : CosineLayer(grads_syn[l], grads_real[l]);
    total = total.defined() ? ops::Add(total, term) : term;
  }
  return total;
}

DistillResult DistillDc(const LatentDataset& real, SyntheticLatentSet syn,
                        const DCConfig& cfg, const NetFactory& factory,
                        const DcHooks& hooks) {
  cfg.Validate();
  syn.Validate();
  RequireAllClasses(real, syn);
  DistillResult result;
  result.trace.algorithm = "dc";
  const auto real_index = real.ClassIndex();
  const auto syn_index = syn.ClassIndex();
  std::vector<int64_t> all_real(static_cast<size_t>(real.count()));
  for (int64_t i = 0; i < real.count(); ++i) all_real[i] = i;

  const Rng root(cfg.seed);
  Rng rng = root.Derive(1);
  LatentSgd opt(cfg.SyntheticLr(syn.budget.lpc), cfg.momentum);
  Tensor latents = syn.latents.clone();
  latents.set_requires_grad(true);

  for (int64_t it = 0; it < cfg.iterations; ++it) {
    ConvNet net = factory(root.Derive(1000 + static_cast<uint64_t>(it)).seed());
    net.SetRequiresGrad(true);
    Sgd model_opt(cfg.eta_model);
    for (int ol = 0; ol < cfg.outer_loop; ++ol) {
      std::vector<float> grad(static_cast<size_t>(latents.numel()), 0.0f);
      double total = 0.0;
      for (int c = 0; c < real.num_classes; ++c) {
        const auto rows = SampleRows(real_index[c], cfg.batch_size, rng);
        std::vector<Tensor> g_real;
        {
          const Tensor x = ops::IndexSelect(real.latents, rows);
          const Tensor loss = ops::CrossEntropy(
              net.Forward(x), std::vector<int>(rows.size(), c));
          g_real = Grad(loss, net.params());
        }
        const Tensor xs = ops::IndexSelect(latents, syn_index[c]);
        const Tensor loss_s = ops::CrossEntropy(
            net.Forward(xs), std::vector<int>(syn_index[c].size(), c));
        const auto g_syn = Grad(loss_s, net.params(), true);
        const Tensor d = GradientMatchLoss(g_syn, g_real, cfg.match_loss);
        total += d.item();
        const Tensor g = Grad(d, {latents})[0];
        const auto gv = g.data();
        for (size_t i = 0; i < grad.size(); ++i) grad[i] += gv[i];
      }
      result.trace.records.push_back({it, ol, total});
      if (!std::isfinite(total) || !AllFinite(grad)) {
        result.abort_reason = "dc: matching loss became non-finite at iteration " +
                              std::to_string(it) + ", outer loop " +
                              std::to_string(ol);
        syn.latents = latents.detach().clone();
        syn.iterations = it;
        result.syn = std::move(syn);
        return result;
      }
      opt.Step(latents, Tensor::FromData(latents.shape(), std::move(grad)));
      if (hooks.on_update) {
        syn.latents = latents.detach();
        hooks.on_update(it, ol, syn);
      }
      if (ol == cfg.outer_loop - 1 && !cfg.train_after_last_outer) break;
      for (int step = 0; step < cfg.inner_loop; ++step) {
        const auto rows = SampleRows(all_real, cfg.batch_size, rng);
        if (hooks.on_inner_batch) hooks.on_inner_batch(real.latents, rows);
        std::vector<int> y;
        y.reserve(rows.size());
        for (int64_t r : rows) y.push_back(real.labels[r]);
        const Tensor loss =
            ops::CrossEntropy(net.Forward(ops::IndexSelect(real.latents, rows)), y);
        model_opt.Step(net.params(), Grad(loss, net.params()));
      }
    }
  }
  syn.latents = latents.detach().clone();
  syn.algorithm = "dc";
  syn.iterations = cfg.iterations;
  result.syn = std::move(syn);
  return result;
}

}  // namespace ldistill
