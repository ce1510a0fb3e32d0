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

#include "ldistill/distill_mtt.hpp"

#include <cmath>
#include <cstring>

#include <spdlog/spdlog.h>

#include "ldistill/error.hpp"
#include "ldistill/io.hpp"
#include "ldistill/ops.hpp"
#include "ldistill/optim.hpp"
#include "ldistill/rng.hpp"

namespace ldistill {

namespace {

constexpr char kBufferMagic[4] = {'L', 'D', 'T', 'B'};

Tensor FlatTensor(std::span<const float> values) {
  return Tensor::FromData({static_cast<int64_t>(values.size())},
                          std::vector<float>(values.begin(), values.end()));
}

}  // namespace

std::span<const float> TrajectoryBuffer::Snapshot(int expert, int epoch) const {
  Require(expert >= 0 && expert < num_experts() && epoch >= 0 && epoch <= epochs,
          ErrorCode::kInvalidArgument,
          "trajectory buffer: snapshot (" + std::to_string(expert) + ", " +
              std::to_string(epoch) + ") out of range");
  return std::span<const float>(experts[expert])
      .subspan(static_cast<size_t>(epoch * param_count),
               static_cast<size_t>(param_count));
}

void TrajectoryBuffer::Validate() const {
  spec.Validate();
  Require(param_count == ParamCount(spec), ErrorCode::kShape,
          "trajectory buffer: parameter count does not match the network");
  Require(epochs >= 1, ErrorCode::kShape, "trajectory buffer: no epochs");
  for (const auto& e : experts) {
    Require(static_cast<int64_t>(e.size()) == (epochs + 1) * param_count,
            ErrorCode::kShape, "trajectory buffer: ragged expert trajectory");
  }
}

TrajectoryBuffer BufferTrajectories(const LatentDataset& real,
                                    const ConvNetSpec& spec, int num_experts,
                                    int epochs, const ExpertTrainConfig& cfg,
                                    int* skipped) {
  real.Validate();
  spec.Validate();
  Require(num_experts >= 1 && epochs >= 1, ErrorCode::kConfig,
          "buffer: need at least one expert and one epoch");
  Require(cfg.lr > 0.0f && cfg.batch_size >= 1, ErrorCode::kConfig,
          "buffer: invalid expert training config");
  Require(spec.in_channels == real.c_lat && spec.input_height == real.height() &&
              spec.input_width == real.width() &&
              spec.num_classes == real.num_classes,
          ErrorCode::kShape, "buffer: network spec does not match the latents");
  TrajectoryBuffer buf;
  buf.spec = spec;
  buf.dataset_fingerprint = real.ContentFingerprint();
  buf.epochs = epochs;
  buf.param_count = ParamCount(spec);
  int dropped = 0;
  const Rng root(cfg.seed);
  const int64_t n = real.count();
  for (int e = 0; e < num_experts; ++e) {
    const Rng expert_rng = root.Derive(static_cast<uint64_t>(e));
    ConvNet net = BuildConvNet(spec, {"fan_in_uniform", expert_rng.Derive(0).seed()});
    net.SetRequiresGrad(true);
    Rng rng = expert_rng.Derive(1);
    Sgd sgd(cfg.lr, cfg.momentum, cfg.weight_decay);
    std::vector<float> traj = FlattenParams(net.params());
    traj.reserve(static_cast<size_t>((epochs + 1) * buf.param_count));
    bool diverged = false;
    for (int epoch = 0; epoch < epochs && !diverged; ++epoch) {
      const auto perm = rng.Permutation(n);
      for (int64_t s = 0; s < n; s += cfg.batch_size) {
        std::vector<int64_t> rows(perm.begin() + s,
                                  perm.begin() + std::min(n, s + cfg.batch_size));
        std::vector<int> y;
        for (int64_t r : rows) y.push_back(real.labels[r]);
        const Tensor loss =
            ops::CrossEntropy(net.Forward(ops::IndexSelect(real.latents, rows)), y);
        if (!std::isfinite(loss.item())) {
          diverged = true;
          break;
        }
        sgd.Step(net.params(), Grad(loss, net.params()));
      }
      const auto snap = FlattenParams(net.params());
      diverged = diverged || !AllFinite(snap);
      traj.insert(traj.end(), snap.begin(), snap.end());
    }
    if (diverged) {
      spdlog::warn("buffer: expert {} diverged and was skipped", e);
      ++dropped;
      continue;
    }
    buf.experts.push_back(std::move(traj));
  }
  if (skipped) *skipped = dropped;
  Require(!buf.experts.empty(), ErrorCode::kNumeric,
          "buffer: every expert diverged");
  return buf;
}

void WriteTrajectoryBuffer(const std::string& path, const TrajectoryBuffer& buf) {
  buf.Validate();
  BinaryWriter w(path);
  w.Bytes(kBufferMagic, 4);
  w.U32(kBufferVersion);
  w.U64(SpecDigest(buf.spec));
  w.U32(buf.spec.depth);
  w.U32(buf.spec.in_channels);
  w.U32(buf.spec.num_classes);
  w.U32(buf.spec.input_height);
  w.U32(buf.spec.input_width);
  w.U32(buf.spec.width);
  w.String(buf.spec.arch);
  w.U64(buf.dataset_fingerprint);
  w.U32(static_cast<uint32_t>(buf.num_experts()));
  w.U32(static_cast<uint32_t>(buf.epochs));
  w.U64(static_cast<uint64_t>(buf.param_count));
  for (const auto& e : buf.experts) w.Floats(e);
  w.Close();
}

TrajectoryBuffer ReadTrajectoryBuffer(const std::string& path,
                                      uint64_t expected_fingerprint) {
  BinaryReader r(path);
  char magic[4];
  r.Bytes(magic, 4);
  Require(std::memcmp(magic, kBufferMagic, 4) == 0, ErrorCode::kFormat,
          path + ": not a trajectory buffer");
  Require(r.U32() == kBufferVersion, ErrorCode::kFormat,
          path + ": unsupported buffer version");
  TrajectoryBuffer buf;
  const uint64_t digest = r.U64();
  buf.spec.depth = static_cast<int>(r.U32());
  buf.spec.in_channels = static_cast<int>(r.U32());
  buf.spec.num_classes = static_cast<int>(r.U32());
  buf.spec.input_height = static_cast<int>(r.U32());
  buf.spec.input_width = static_cast<int>(r.U32());
  buf.spec.width = static_cast<int>(r.U32());
  buf.spec.arch = r.String(64);
  Require(SpecDigest(buf.spec) == digest, ErrorCode::kFormat,
          path + ": network spec digest mismatch");
  buf.dataset_fingerprint = r.U64();
  if (expected_fingerprint != 0 && buf.dataset_fingerprint != expected_fingerprint) {
    Fail(ErrorCode::kFingerprint,
         path + ": buffer was recorded on a different latent cache; rerun "
                "the buffer command on the current cache");
  }
  const uint32_t num_experts = r.U32();
  buf.epochs = static_cast<int>(r.U32());
  buf.param_count = static_cast<int64_t>(r.U64());
  buf.spec.Validate();
  Require(buf.param_count == ParamCount(buf.spec), ErrorCode::kFormat,
          path + ": parameter count does not match the network");
  const uint64_t per = static_cast<uint64_t>(buf.epochs + 1) * buf.param_count;
  Require(r.Remaining() == per * num_experts * 4, ErrorCode::kFormat,
          path + ": snapshot block size does not match the header");
  for (uint32_t e = 0; e < num_experts; ++e) buf.experts.push_back(r.Floats(per));
  buf.Validate();
  return buf;
}

Tensor TrajectoryMatchLoss(const Tensor& student, const Tensor& start,
                           const Tensor& target) {
  Require(student.numel() == start.numel() && start.numel() == target.numel(),
          ErrorCode::kShape, "trajectory_match_loss: vector lengths differ");
  const Tensor target_c = target.detach();
  const Tensor denom = ops::SquaredNorm(ops::Sub(start.detach(), target_c));
  if (!(denom.item() > 0.0f)) {
    Fail(ErrorCode::kDegenerate,
         "trajectory_match_loss: start and target parameters coincide");
  }
  return ops::Div(ops::SquaredNorm(ops::Sub(student, target_c)), denom);
}

void MTTConfig::Validate() const {
  Require(iterations >= 0 && max_start >= 0 && expert_epochs >= 1 &&
              student_steps >= 0 && batch_size >= 1,
          ErrorCode::kConfig, "mtt: invalid counts");
  Require(eta_base > 0.0f && eta_model_init > 0.0f && lr_lr > 0.0f,
          ErrorCode::kConfig, "mtt: learning rates must be positive");
  Require(momentum >= 0.0f && momentum < 1.0f, ErrorCode::kConfig,
          "mtt: momentum must be in [0, 1)");
  Require(memory_limit_bytes > 0, ErrorCode::kConfig,
          "mtt: memory limit must be positive");
}

DistillResult DistillMtt(const LatentDataset& real, SyntheticLatentSet syn,
                         const TrajectoryBuffer& buffer, const MTTConfig& cfg,
                         const MttHooks& hooks) {
  cfg.Validate();
  syn.Validate();
  buffer.Validate();
  RequireAllClasses(real, syn);
  const ConvNetSpec& spec = buffer.spec;
  Require(spec.in_channels == syn.latents.dim(1) &&
              spec.input_height == syn.latents.dim(2) &&
              spec.input_width == syn.latents.dim(3) &&
              spec.num_classes == syn.num_classes,
          ErrorCode::kShape, "mtt: buffer network does not match the latents");
  Require(buffer.dataset_fingerprint == real.ContentFingerprint(),
          ErrorCode::kFingerprint,
          "mtt: buffer was recorded on a different latent cache");
  Require(cfg.max_start + cfg.expert_epochs <= buffer.epochs, ErrorCode::kConfig,
          "mtt: max_start + expert_epochs exceeds the buffered epochs (" +
              std::to_string(buffer.epochs) + ")");

  DistillResult result;
  result.trace.algorithm = "mtt";
  const Rng root(cfg.seed);
  Rng rng = root.Derive(1);
  LatentSgd syn_opt(cfg.SyntheticLr(syn.budget.lpc), cfg.momentum);
  LatentSgd eta_opt(cfg.lr_lr, cfg.momentum);
  Tensor latents = syn.latents.clone();
  latents.set_requires_grad(true);
  Tensor eta = Tensor::FromData({1}, {cfg.eta_model_init});
  eta.set_requires_grad(true);
  const int64_t count = syn.count();
  const int64_t batch = std::min<int64_t>(cfg.batch_size, count);

  auto abort = [&](std::string reason, int64_t it) {
    result.abort_reason = std::move(reason);
    syn.latents = latents.detach().clone();
    syn.iterations = it;
    result.eta_model = eta.item();
    result.syn = std::move(syn);
    return result;
  };

  for (int64_t it = 0; it < cfg.iterations; ++it) {
    const int start_epoch = static_cast<int>(rng.UniformInt(0, cfg.max_start));
    const int expert =
        static_cast<int>(rng.UniformInt(0, buffer.num_experts() - 1));
    const Tensor start = FlatTensor(buffer.Snapshot(expert, start_epoch));
    const Tensor target =
        FlatTensor(buffer.Snapshot(expert, start_epoch + cfg.expert_epochs));
    Tensor theta = start.clone();
    theta.set_requires_grad(true);
    for (int step = 0; step < cfg.student_steps; ++step) {
      const auto rows = rng.Sample(count, batch);
      std::vector<int> y;
      y.reserve(rows.size());
      for (int64_t r : rows) y.push_back(syn.labels[r]);
      const Tensor logits =
          ForwardWith(spec, SliceParams(theta, spec), ops::IndexSelect(latents, rows));
      const Tensor g = Grad(ops::CrossEntropy(logits, y), {theta}, true)[0];
      theta = ops::Sub(theta, ops::ScalarMul(g, eta));
      if (LiveTensorBytes() > cfg.memory_limit_bytes) {
        return abort("mtt: unrolled student exceeded the memory limit (" +
                         std::to_string(cfg.memory_limit_bytes >> 20) +
                         " MiB) at step " + std::to_string(step + 1) +
                         "; reduce student_steps or batch_size",
                     it);
      }
    }
    Tensor loss;
    try {
      loss = TrajectoryMatchLoss(theta, start, target);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerate) throw;
      spdlog::warn("mtt: iteration {} skipped: {}", it, e.what());
      continue;
    }
    const double value = loss.item();
    result.trace.records.push_back({it, 0, value});
    const auto grads = Grad(loss, {latents, eta});
    if (!std::isfinite(value) || !AllFinite(grads[0].data()) ||
        !AllFinite(grads[1].data())) {
      return abort("mtt: loss became non-finite at iteration " + std::to_string(it),
                   it);
    }
    syn_opt.Step(latents, grads[0]);
    eta_opt.Step(eta, grads[1]);
    if (eta.data()[0] < kMinStudentLr) {
      spdlog::warn("mtt: student lr {} clamped to {}", eta.data()[0], kMinStudentLr);
      eta.data()[0] = kMinStudentLr;
    }
    if (hooks.on_iteration) hooks.on_iteration(it, start_epoch, eta.item());
  }
  syn.latents = latents.detach().clone();
  syn.algorithm = "mtt";
  syn.iterations = cfg.iterations;
  result.eta_model = eta.item();
  result.syn = std::move(syn);
  return result;
}

}  // namespace ldistill
