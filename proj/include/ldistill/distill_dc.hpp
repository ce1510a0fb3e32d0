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

#ifndef LDISTILL_DISTILL_DC_HPP_
#define LDISTILL_DISTILL_DC_HPP_

#include <functional>
#include <string>
#include <vector>

#include "ldistill/distill.hpp"

namespace ldistill {

enum class MatchLoss { kMse, kCosine };

MatchLoss ParseMatchLoss(const std::string& name);

struct DCConfig {
  int iterations = 1000;
  int outer_loop = 10;
  int inner_loop = 50;
  float eta_base = 0.05f;   // per latent code; scaled by LPC
  float eta_model = 0.01f;
  int batch_size = 64;
  MatchLoss match_loss = MatchLoss::kMse;
  float momentum = 0.5f;
  uint64_t seed = 0;
  // The network of the last outer loop is discarded, so its inner
  // training is skipped by default.
  bool train_after_last_outer = false;

  void Validate() const;
  float SyntheticLr(int lpc) const { return eta_base * static_cast<float>(lpc); }
};

// Sum over layers of ||g_s - g_r||^2 (mse) or of per-output-row
// (1 - cos(g_s, g_r)) over parameters of rank >= 2 (cosine). Differentiable
// in `grads_syn`.
Tensor GradientMatchLoss(const std::vector<Tensor>& grads_syn,
                         const std::vector<Tensor>& grads_real, MatchLoss kind);

struct DcHooks {
  // Called for every inner-loop model batch with the tensor the rows index.
  std::function<void(const Tensor& source, const std::vector<int64_t>& rows)>
      on_inner_batch;
  // Called after every synthetic update.
  std::function<void(int64_t iteration, int outer, const SyntheticLatentSet&)>
      on_update;
};

DistillResult DistillDc(const LatentDataset& real, SyntheticLatentSet syn,
                        const DCConfig& cfg, const NetFactory& factory,
                        const DcHooks& hooks = {});

}  // namespace ldistill

#endif  // LDISTILL_DISTILL_DC_HPP_
