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

#ifndef LDISTILL_DISTILL_DM_HPP_
#define LDISTILL_DISTILL_DM_HPP_

#include <functional>

#include "ldistill/distill.hpp"

namespace ldistill {

struct DMConfig {
  int iterations = 1000;
  float eta_base = 0.5f;  // per latent code; scaled by LPC
  int batch_size = 64;
  float momentum = 0.5f;
  uint64_t seed = 0;

  void Validate() const;
  float SyntheticLr(int lpc) const { return eta_base * static_cast<float>(lpc); }
};

using EmbedFn = std::function<Tensor(const Tensor&)>;

// ||mean(embed(real)) - mean(embed(syn))||^2, differentiable in `syn_batch`.
Tensor MmdClassLoss(const Tensor& real_batch, const Tensor& syn_batch,
                    const EmbedFn& embed);

struct DmHooks {
  // Called at the end of every iteration with the embedding network and the
  // seed it was built from.
  std::function<void(int64_t iteration, uint64_t net_seed, const ConvNet& net)>
      on_iteration;
};

DistillResult DistillDm(const LatentDataset& real, SyntheticLatentSet syn,
                        const DMConfig& cfg, const NetFactory& factory,
                        const DmHooks& hooks = {});

}  // namespace ldistill

#endif  // LDISTILL_DISTILL_DM_HPP_
