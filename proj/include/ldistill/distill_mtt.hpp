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

#ifndef LDISTILL_DISTILL_MTT_HPP_
#define LDISTILL_DISTILL_MTT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ldistill/distill.hpp"

namespace ldistill {

struct TrajectoryBuffer {
  ConvNetSpec spec;
  uint64_t dataset_fingerprint = 0;
  int epochs = 0;  // snapshots per expert = epochs + 1
  int64_t param_count = 0;
  std::vector<std::vector<float>> experts;

  int num_experts() const { return static_cast<int>(experts.size()); }
  std::span<const float> Snapshot(int expert, int epoch) const;
  void Validate() const;
};

struct ExpertTrainConfig {
  float lr = 0.01f;
  float momentum = 0.0f;
  float weight_decay = 0.0f;
  int batch_size = 256;
  uint64_t seed = 0;
};

// Trains `num_experts` independently initialized networks on the latents
// and snapshots their parameters at initialization and after every epoch.
// Diverged experts are dropped and counted in `skipped`.
TrajectoryBuffer BufferTrajectories(const LatentDataset& real,
                                    const ConvNetSpec& spec, int num_experts,
                                    int epochs, const ExpertTrainConfig& cfg,
                                    int* skipped = nullptr);

void WriteTrajectoryBuffer(const std::string& path, const TrajectoryBuffer& buf);
// Throws kFingerprint when `expected_fingerprint` is nonzero and differs
// from the stored dataset fingerprint.
TrajectoryBuffer ReadTrajectoryBuffer(const std::string& path,
                                      uint64_t expected_fingerprint = 0);

// ||student - target||^2 / ||start - target||^2. Throws kDegenerate when
// start equals target.
Tensor TrajectoryMatchLoss(const Tensor& student, const Tensor& start,
                           const Tensor& target);

struct MTTConfig {
  int iterations = 5000;
  int max_start = 5;      // T+
  int expert_epochs = 1;  // M
  int student_steps = 40; // N
  float eta_base = 50.0f;  // per latent code; scaled by LPC
  float eta_model_init = 0.01f;
  float lr_lr = 1e-6f;
  int batch_size = 64;
  float momentum = 0.5f;
  uint64_t seed = 0;
  int64_t memory_limit_bytes = int64_t{3} << 30;

  void Validate() const;
  float SyntheticLr(int lpc) const { return eta_base * static_cast<float>(lpc); }
};

inline constexpr float kMinStudentLr = 1e-8f;

struct MttHooks {
  std::function<void(int64_t iteration, int start_epoch, float eta)> on_iteration;
};

DistillResult DistillMtt(const LatentDataset& real, SyntheticLatentSet syn,
                         const TrajectoryBuffer& buffer, const MTTConfig& cfg,
                         const MttHooks& hooks = {});

}  // namespace ldistill

#endif  // LDISTILL_DISTILL_MTT_HPP_
