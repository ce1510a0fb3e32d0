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

#include "ldistill/pipeline.hpp"

#include <filesystem>

#include <spdlog/spdlog.h>

#include "ldistill/error.hpp"
#include "ldistill/io.hpp"

namespace ldistill {

namespace {

template <typename T>
void Set(const Config& config, const std::string& key, T& field) {
  field = config.Get<T>(key, field);
}

uint64_t DcDigest(const DCConfig& cfg, int ipc) {
  const std::string text = fmt::format(
      "dc/{}/{}/{}/{}/{}/{}/{}/{}/{}/{}", cfg.iterations, cfg.outer_loop,
      cfg.inner_loop, cfg.eta_base, cfg.eta_model, cfg.batch_size,
      static_cast<int>(cfg.match_loss), cfg.momentum, cfg.seed, ipc);
  return Fnv1a64(text.data(), text.size());
}

SyntheticLatentSet InitFor(const LatentDataset& real, int ipc, uint64_t seed) {
  const BudgetSpec budget =
      BudgetSpec::Make(ipc, real.effective_factor(), real.c_lat);
  SyntheticLatentSet syn = InitSynthetic(real, budget, Rng(seed).Derive(7).seed());
  syn.seed = seed;
  return syn;
}

}  // namespace

DCConfig DcConfigFrom(const Config& config, uint64_t seed) {
  DCConfig c;
  Set(config, "dc.iterations", c.iterations);
  Set(config, "dc.outer_loop", c.outer_loop);
  Set(config, "dc.inner_loop", c.inner_loop);
  Set(config, "dc.eta_base", c.eta_base);
  Set(config, "dc.eta_model", c.eta_model);
  Set(config, "dc.batch", c.batch_size);
  Set(config, "dc.momentum", c.momentum);
  Set(config, "dc.train_after_last_outer", c.train_after_last_outer);
  c.match_loss = ParseMatchLoss(config.Get<std::string>("dc.match_loss", "mse"));
  c.seed = seed;
  c.Validate();
  return c;
}

DMConfig DmConfigFrom(const Config& config, uint64_t seed) {
  DMConfig c;
  Set(config, "dm.iterations", c.iterations);
  Set(config, "dm.eta_base", c.eta_base);
  Set(config, "dm.batch", c.batch_size);
  Set(config, "dm.momentum", c.momentum);
  c.seed = seed;
  c.Validate();
  return c;
}

MTTConfig MttConfigFrom(const Config& config, uint64_t seed) {
  MTTConfig c;
  Set(config, "mtt.iterations", c.iterations);
  Set(config, "mtt.max_start", c.max_start);
  Set(config, "mtt.expert_epochs", c.expert_epochs);
  Set(config, "mtt.student_steps", c.student_steps);
  Set(config, "mtt.eta_base", c.eta_base);
  Set(config, "mtt.eta_model_init", c.eta_model_init);
  Set(config, "mtt.lr_lr", c.lr_lr);
  Set(config, "mtt.batch", c.batch_size);
  Set(config, "mtt.momentum", c.momentum);
  Set(config, "mtt.memory_limit_bytes", c.memory_limit_bytes);
  c.seed = seed;
  c.Validate();
  return c;
}

EvalProtocol EvalProtocolFrom(const Config& config, uint64_t seed) {
  EvalProtocol p;
  Set(config, "eval.runs", p.runs);
  Set(config, "eval.epochs", p.epochs);
  Set(config, "eval.lr", p.lr);
  Set(config, "eval.momentum", p.momentum);
  Set(config, "eval.weight_decay", p.weight_decay);
  Set(config, "eval.batch", p.batch);
  Set(config, "eval.arch", p.arch);
  Set(config, "eval.width", p.width);
  Set(config, "eval.depth", p.depth);
  Set(config, "eval.augment", p.augment);
  Set(config, "eval.cutmix_prob", p.cutmix_prob);
  p.seed_base = seed;
  p.Validate();
  return p;
}

ToyCodecConfig CodecConfigFrom(const Config& config, uint64_t seed) {
  ToyCodecConfig c;
  Set(config, "codec.epochs", c.epochs);
  Set(config, "codec.batch", c.batch);
  Set(config, "codec.lr", c.lr);
  Set(config, "codec.val_fraction", c.val_fraction);
  Set(config, "codec.base_width", c.base_width);
  Set(config, "codec.max_width", c.max_width);
  Set(config, "codec.pre_upsample", c.pre_upsample);
  Set(config, "codec.max_train_items", c.max_train_items);
  c.seed = seed;
  return c;
}

ExpertTrainConfig ExpertConfigFrom(const Config& config, uint64_t seed) {
  ExpertTrainConfig c;
  Set(config, "buffer.lr", c.lr);
  Set(config, "buffer.momentum", c.momentum);
  Set(config, "buffer.weight_decay", c.weight_decay);
  Set(config, "buffer.batch", c.batch_size);
  c.seed = seed;
  return c;
}

DeskConfig DeskConfigFrom(const Config& config, uint64_t seed) {
  DeskConfig d;
  Set(config, "desk.train_per_class", d.train_per_class);
  Set(config, "desk.test_per_class", d.test_per_class);
  Set(config, "desk.resolution", d.resolution);
  d.seed = config.Get<uint64_t>("desk.seed", seed);
  return d;
}

ConvNetSpec DistillNetSpec(const LatentDataset& real, const Config& config) {
  return LatentNetSpec(real, config.Get<int>("net.width", 128),
                       config.Get<int>("net.depth", 0),
                       config.Get<std::string>("net.arch", "convnet"));
}

DatasetSplits LoadSplits(const std::string& name, const std::string& root,
                         int resolution, const Config& config, uint64_t seed) {
  const auto& entry = FindDataset(name);
  if (entry.source == SourceKind::kBuiltinToy) {
    DeskConfig desk = DeskConfigFrom(config, seed);
    if (resolution > 0) desk.resolution = resolution;
    return MakeDeskDataset(desk);
  }
  return LoadDataset(name, root, resolution, seed);
}

std::unique_ptr<LatentCodec> ObtainCodec(const std::string& name_or_path,
                                         const RealImageDataset& train, int factor,
                                         int c_lat, const Config& config,
                                         uint64_t seed, bool train_if_missing) {
  if (name_or_path == "identity" || std::filesystem::exists(name_or_path) ||
      !train_if_missing) {
    return LoadCodec(name_or_path);
  }
  spdlog::info("training toy codec (f={}, c_lat={}) into {}", factor, c_lat,
               name_or_path);
  ConvCodec codec = TrainToyCodec(train, factor, c_lat, CodecConfigFrom(config, seed));
  codec.Save(name_or_path);
  return std::make_unique<ConvCodec>(std::move(codec));
}

DistillResult RunDistill(const LatentDataset& real, const std::string& algo,
                         int ipc, int factor, const Config& config, uint64_t seed,
                         const TrajectoryBuffer* buffer) {
  real.Validate();
  Require(ipc >= 1, ErrorCode::kConfig, "distill: ipc must be at least 1");
  Require(factor == real.effective_factor(), ErrorCode::kConfig,
          "distill: --factor " + std::to_string(factor) +
              " does not match the cache (effective factor " +
              std::to_string(real.effective_factor()) + ")");
  SyntheticLatentSet syn = InitFor(real, ipc, seed);
  if (algo == "dc") {
    return DistillDc(real, std::move(syn), DcConfigFrom(config, seed),
                     MakeNetFactory(DistillNetSpec(real, config)));
  }
  if (algo == "dm") {
    return DistillDm(real, std::move(syn), DmConfigFrom(config, seed),
                     MakeNetFactory(DistillNetSpec(real, config)));
  }
  if (algo == "mtt") {
    Require(buffer != nullptr, ErrorCode::kConfig,
            "distill: --algo mtt needs a trajectory buffer (--buffer)");
    return DistillMtt(real, std::move(syn), *buffer, MttConfigFrom(config, seed));
  }
  Fail(ErrorCode::kConfig, "distill: unknown algorithm '" + algo + "' (dc, dm, mtt)");
}

TrajectoryBuffer RunBuffer(const LatentDataset& real, const Config& config,
                           uint64_t seed, int* skipped) {
  // Enough snapshots for every start epoch plus two epochs of headroom.
  const MTTConfig mtt = MttConfigFrom(config, seed);
  const int epochs = mtt.max_start + mtt.expert_epochs + 2;
  return BufferTrajectories(real, DistillNetSpec(real, config),
                            config.Get<int>("buffer.experts", 10),
                            config.Get<int>("buffer.epochs", epochs),
                            ExpertConfigFrom(config, seed), skipped);
}

std::string BenchOutcome::ToJsonLines() const {
  std::string out;
  for (const auto& p : phases) out += p.ToJsonLine() + "\n";
  for (const auto& c : comparisons) out += c.ToJsonLine() + "\n";
  out += fmt::format(
      "{{\"type\":\"bench_files\",\"pixel_file_bytes\":{},\"latent_file_bytes\":{}}}\n",
      pixel_file_bytes, latent_file_bytes);
  return out;
}

BenchOutcome RunBench(const RealImageDataset& train, const LatentCodec& codec,
                      const ResamplePolicy& policy, int ipc, const Config& config,
                      uint64_t seed, const std::string& work_dir) {
  std::filesystem::create_directories(work_dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(work_dir) / name).string();
  };
  DCConfig dc = DcConfigFrom(config, seed);
  dc.iterations = config.Get<int>("bench.iterations", 10);
  dc.Validate();
  const uint64_t digest = DcDigest(dc, ipc);
  const uint64_t build_digest = Fnv1a64(&ipc, sizeof(ipc), train.count());

  BenchOutcome out;
  LatentDataset pixel_cache, latent_cache;
  const IdentityCodec identity(train.channels());
  out.phases.push_back(MeasurePhase("build/pixel", train.count(), build_digest, [&] {
    pixel_cache = EncodeDataset(train, identity, ResamplePolicy::Symmetric(1));
    WritePixelDataset(path("pixels.lddc"), train);
  }));
  out.phases.push_back(MeasurePhase("build/latent", train.count(), build_digest, [&] {
    latent_cache = EncodeDataset(train, codec, policy);
    WriteLatentCache(path("latents.lddc"), latent_cache);
  }));
  out.comparisons.push_back(BenchCompare(out.phases[0], out.phases[1]));

  const auto distill = [&](const LatentDataset& real) {
    SyntheticLatentSet syn = InitFor(real, ipc, seed);
    const auto result =
        DistillDc(real, std::move(syn), dc, MakeNetFactory(DistillNetSpec(real, config)));
    if (result.abort_reason) Fail(ErrorCode::kNumeric, *result.abort_reason);
  };
  out.phases.push_back(MeasurePhase("distill_dc/pixel", dc.iterations, digest, [&] {
    Require(pixel_cache.count() > 0, ErrorCode::kInternal, "pixel build failed");
    distill(pixel_cache);
  }));
  out.phases.push_back(MeasurePhase("distill_dc/latent", dc.iterations, digest, [&] {
    Require(latent_cache.count() > 0, ErrorCode::kInternal, "latent build failed");
    distill(latent_cache);
  }));
  out.comparisons.push_back(BenchCompare(out.phases[2], out.phases[3]));
  if (std::filesystem::exists(path("pixels.lddc"))) {
    out.pixel_file_bytes = FileSize(path("pixels.lddc"));
  }
  if (std::filesystem::exists(path("latents.lddc"))) {
    out.latent_file_bytes = FileSize(path("latents.lddc"));
  }
  return out;
}

}  // namespace ldistill
