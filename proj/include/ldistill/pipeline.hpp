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

// End-to-end stages shared by the C API and the command line: configuration
// mapping, distillation dispatch, buffering, evaluation, and benchmarking.

#ifndef LDISTILL_PIPELINE_HPP_
#define LDISTILL_PIPELINE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ldistill/bench.hpp"
#include "ldistill/codec.hpp"
#include "ldistill/config.hpp"
#include "ldistill/distill.hpp"
#include "ldistill/distill_dc.hpp"
#include "ldistill/distill_dm.hpp"
#include "ldistill/distill_mtt.hpp"
#include "ldistill/evaluate.hpp"
#include "ldistill/registry.hpp"

namespace ldistill {

// Section readers. Missing keys keep the struct defaults.
DCConfig DcConfigFrom(const Config& config, uint64_t seed);
DMConfig DmConfigFrom(const Config& config, uint64_t seed);
MTTConfig MttConfigFrom(const Config& config, uint64_t seed);
EvalProtocol EvalProtocolFrom(const Config& config, uint64_t seed);
ToyCodecConfig CodecConfigFrom(const Config& config, uint64_t seed);
ExpertTrainConfig ExpertConfigFrom(const Config& config, uint64_t seed);
DeskConfig DeskConfigFrom(const Config& config, uint64_t seed);

// Distillation network over the cache: net.width / net.depth / net.arch.
ConvNetSpec DistillNetSpec(const LatentDataset& real, const Config& config);

// "desk10" is generated; other registry names load from `root`.
DatasetSplits LoadSplits(const std::string& name, const std::string& root,
                         int resolution, const Config& config, uint64_t seed);

// Returns the codec at `path`, training and saving a toy codec there first
// when the file does not exist and `train_if_missing` is set. "identity"
// always resolves to the identity codec.
std::unique_ptr<LatentCodec> ObtainCodec(const std::string& name_or_path,
                                         const RealImageDataset& train, int factor,
                                         int c_lat, const Config& config,
                                         uint64_t seed, bool train_if_missing);

// Initializes the synthetic set and runs `algo` (dc, dm, mtt). `factor` is
// the effective factor the caller expects; a mismatch with the cache is a
// kConfig error. MTT requires `buffer`.
DistillResult RunDistill(const LatentDataset& real, const std::string& algo,
                         int ipc, int factor, const Config& config, uint64_t seed,
                         const TrajectoryBuffer* buffer = nullptr);

TrajectoryBuffer RunBuffer(const LatentDataset& real, const Config& config,
                           uint64_t seed, int* skipped = nullptr);

struct BenchOutcome {
  std::vector<ResourceReport> phases;
  std::vector<BenchComparison> comparisons;  // build, distill
  uint64_t pixel_file_bytes = 0;
  uint64_t latent_file_bytes = 0;

  std::string ToJsonLines() const;
};

// Matched pixel and latent runs of the build and DC distill phases. Files
// are written into `work_dir`.
BenchOutcome RunBench(const RealImageDataset& train, const LatentCodec& codec,
                      const ResamplePolicy& policy, int ipc, const Config& config,
                      uint64_t seed, const std::string& work_dir);

}  // namespace ldistill

#endif  // LDISTILL_PIPELINE_HPP_
