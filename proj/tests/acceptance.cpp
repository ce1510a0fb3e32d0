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

// Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.
//
//   ldistill_acceptance --work-dir DIR [--config FILE] [--only 1,4,7]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ldistill/codec.hpp"
#include "ldistill/config.hpp"
#include "ldistill/data_model.hpp"
#include "ldistill/error.hpp"
#include "ldistill/evaluate.hpp"
#include "ldistill/io.hpp"
#include "ldistill/pipeline.hpp"
#include "ldistill/registry.hpp"
#include "oracles.hpp"

namespace ldistill::acceptance {
namespace {

using Clock = std::chrono::steady_clock;
using testing::RandomTensor;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Returns `base` with `patch` merged over it.
Config Patched(const Config& base, const nlohmann::json& patch) {
  nlohmann::json merged = base.root();
  merged.merge_patch(patch);
  return Config::FromString(merged.dump());
}

// Shared state built on first use. The codec and latent caches persist in
// the work directory between invocations.
class Desk {
 public:
  Desk(std::string work_dir, Config config)
      : work_dir_(std::move(work_dir)), config_(std::move(config)) {
    std::filesystem::create_directories(work_dir_);
  }

  const Config& config() const { return config_; }
  uint64_t seed() const { return config_.Get<uint64_t>("seed", 0); }
  std::string Path(const std::string& name) const {
    return (std::filesystem::path(work_dir_) / name).string();
  }

  const DatasetSplits& splits() {
    if (!splits_) splits_ = MakeDeskDataset(DeskConfigFrom(config_, 7));
    return *splits_;
  }

  ResamplePolicy policy() const {
    return ResamplePolicy::Symmetric(config_.Get<int>("codec.pre_upsample", 2));
  }

  const LatentCodec& codec() {
    if (!codec_) {
      const auto start = Clock::now();
      const bool cached = std::filesystem::exists(Path("codec.ldck"));
      codec_ = ObtainCodec(Path("codec.ldck"), splits().train,
                           config_.Get<int>("codec.factor", 8),
                           config_.Get<int>("codec.c_lat", 4), config_, seed(), true);
      std::printf("  codec %s in %.1fs\n", cached ? "loaded" : "trained", Seconds(start));
      std::fflush(stdout);
    }
    return *codec_;
  }

  const LatentDataset& latent_train() {
    if (!latent_train_) latent_train_ = Cache("latents_train.lddc", splits().train);
    return *latent_train_;
  }
  const LatentDataset& latent_test() {
    if (!latent_test_) latent_test_ = Cache("latents_test.lddc", splits().test);
    return *latent_test_;
  }

  EvalProtocol protocol() const { return EvalProtocolFrom(config_, seed()); }

 private:
  LatentDataset Cache(const std::string& name, const RealImageDataset& data) {
    const LatentCodec& c = codec();
    const std::string path = Path(name);
    if (std::filesystem::exists(path)) {
      try {
        return ReadLatentCache(path, c.fingerprint());
      } catch (const Error&) {
        // Stale cache from another codec; rebuild below.
      }
    }
    LatentDataset out = EncodeDataset(data, c, policy());
    WriteLatentCache(path, out);
    return out;
  }

  std::string work_dir_;
  Config config_;
  std::optional<DatasetSplits> splits_;
  std::unique_ptr<LatentCodec> codec_;
  std::optional<LatentDataset> latent_train_, latent_test_;
};

// 1. Budget arithmetic.
Outcome BudgetArithmetic(Desk&) {
  const int a = ComputeLpc(1, 4, 4), b = ComputeLpc(1, 8, 4), c = ComputeLpc(10, 4, 4);
  // 3 * f^2 * ipc / c_lat, by hand.
  const bool pass = a == 12 && b == 48 && c == 120;
  return {pass, fmt::format("lpc(1,4,4)={} lpc(1,8,4)={} lpc(10,4,4)={}", a, b, c)};
}

// 2. Analytic loss values, single precision.
Outcome AnalyticLosses(Desk&) {
  constexpr double kTol = 1e-6;
  const std::vector<Tensor> g = {RandomTensor({3, 2, 3, 3}, 1), RandomTensor({3}, 2),
                                 RandomTensor({5, 4}, 3)};
  const double gm_mse = GradientMatchLoss(g, g, MatchLoss::kMse).item();
  const double gm_cos = GradientMatchLoss(g, g, MatchLoss::kCosine).item();

  const Tensor batch = RandomTensor({6, 2, 4, 4}, 4);
  const testing::SmoothNet net{2, 4, 3, 5};
  const std::vector<Tensor> params = net.Slices(RandomTensor({net.Count()}, 5, 0.3));
  const double mmd =
      MmdClassLoss(batch, batch, [&](const Tensor& x) { return net.Embed(params, x); }).item();

  const Tensor start = RandomTensor({40}, 6), target = RandomTensor({40}, 7);
  std::vector<float> mid(40);
  for (int i = 0; i < 40; ++i) {
    mid[i] = 0.5f * (start.data()[i] + target.data()[i]);
  }
  const Tensor midpoint = Tensor::FromData({40}, mid);
  const double tm_start = TrajectoryMatchLoss(start, start, target).item();
  const double tm_target = TrajectoryMatchLoss(target, start, target).item();
  const double tm_mid = TrajectoryMatchLoss(midpoint, start, target).item();

  const double worst = std::max({std::abs(gm_mse), std::abs(gm_cos), std::abs(mmd),
                                 std::abs(tm_start - 1.0), std::abs(tm_target),
                                 std::abs(tm_mid - 0.25)});
  return {worst <= kTol,
          fmt::format("gm(g,g)={:.2e}/{:.2e} mmd={:.2e} tm={:.7f},{:.2e},{:.7f} worst={:.2e}",
                      gm_mse, gm_cos, mmd, tm_start, tm_target, tm_mid, worst)};
}

// 3. Finite differences against analytic gradients on toy networks.
Outcome GradientCorrectness(Desk&) {
  const auto start = Clock::now();
  double worst = 0.0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    worst = std::max({worst, testing::DcGradientError(seed, MatchLoss::kMse),
                      testing::DcGradientError(seed, MatchLoss::kCosine),
                      testing::DmGradientError(seed), testing::MttGradientError(seed)});
  }
  // Unrolled steps on a quadratic have a closed-form meta-gradient.
  const testing::QuadraticUnroll q;
  for (float x0 : {-0.4f, 0.3f, 1.2f}) {
    Tensor x = Tensor::FromData({1}, {x0});
    x.set_requires_grad(true);
    const double analytic = Grad(q.Loss(x), {x})[0].item();
    const double exact = q.Exact(x0);
    worst = std::max(worst, std::abs(analytic - exact) / std::max(1e-12, std::abs(exact)));
  }
  const double secs = Seconds(start);
  return {worst < 1e-3 && secs < 60.0,
          fmt::format("max relative error {:.2e} (< 1e-3), {:.1f}s (< 60s)", worst, secs)};
}

// Pearson correlation of pairwise distances, computed in double from scratch.
double IndependentFidelity(const Tensor& images, const Tensor& latents,
                           const std::vector<int64_t>& rows) {
  const auto dists = [&](const Tensor& t) {
    const int64_t item = t.numel() / t.dim(0);
    const auto v = t.data();
    std::vector<double> out;
    for (size_t i = 0; i < rows.size(); ++i) {
      for (size_t j = i + 1; j < rows.size(); ++j) {
        double s = 0.0;
        for (int64_t k = 0; k < item; ++k) {
          const double d = double(v[rows[i] * item + k]) - double(v[rows[j] * item + k]);
          s += d * d;
        }
        out.push_back(std::sqrt(s));
      }
    }
    return out;
  };
  const std::vector<double> a = dists(images), b = dists(latents);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// 4. Distance-structure fidelity of the trained codec.
Outcome Fidelity(Desk& desk) {
  const RealImageDataset& train = desk.splits().train;
  const LatentDataset& lat = desk.latent_train();
  const auto start = Clock::now();
  const std::vector<int64_t> rows = Rng(desk.seed()).Derive(4).Sample(train.count(), 20);
  const double trained = IndependentFidelity(train.images, lat.latents, rows);
  const double library = DistributionFidelity(train, lat, 20, desk.seed());

  const IdentityCodec identity(train.channels());
  const LatentDataset same = EncodeDataset(train, identity, ResamplePolicy::Symmetric(1));
  const double ident = IndependentFidelity(train.images, same.latents, rows);
  const double secs = Seconds(start);
  return {trained >= 0.7 && ident == 1.0 && secs < 300.0,
          fmt::format("trained codec r={:.4f} (library {:.4f}, >= 0.7), identity r={:.17g}, "
                      "{:.1f}s",
                      trained, library, ident, secs)};
}

// 5. LatentDC matching loss falls over the first 300 iterations.
Outcome DcConvergence(Desk& desk) {
  const LatentDataset& real = desk.latent_train();
  const Config cfg = Patched(desk.config(), {{"dc", {{"iterations", 300}}}});
  const auto start = Clock::now();
  const DistillResult out = RunDistill(real, "dc", 1, real.effective_factor(), cfg, desk.seed());
  const double secs = Seconds(start);
  if (out.abort_reason) return {false, "aborted: " + *out.abort_reason};

  // Per-iteration loss: mean over that iteration's outer-loop records.
  std::vector<double> sum(300, 0.0), n(300, 0.0);
  for (const auto& r : out.trace.records) {
    sum[r.iteration] += r.loss;
    n[r.iteration] += 1.0;
  }
  std::vector<double> early, late;
  for (int it = 0; it < 300; ++it) {
    const double loss = sum[it] / n[it];
    if (it < 100) early.push_back(loss);
    if (it >= 200) late.push_back(loss);
  }
  const double m0 = Median(early), m2 = Median(late);
  return {m2 < m0 && secs < 900.0,
          fmt::format("median loss it[0,100)={:.5g} it[200,300)={:.5g}, {:.0f}s (< 900s)", m0,
                      m2, secs)};
}

// 6. Each algorithm beats its undistilled initialization by 2 points.
struct EvalCache {
  std::optional<EvalReport> init;
  std::vector<EvalReport> reports;
};

Outcome BeatsInit(Desk& desk, EvalCache& cache) {
  const LatentDataset& real = desk.latent_train();
  const RealImageDataset& test = desk.splits().test;
  const LatentCodec& codec = desk.codec();
  const EvalProtocol proto = desk.protocol();
  const int factor = real.effective_factor();

  auto start = Clock::now();
  const Config init_cfg = Patched(desk.config(), {{"dm", {{"iterations", 0}}}});
  const SyntheticLatentSet init =
      RunDistill(real, "dm", 1, factor, init_cfg, desk.seed()).syn;
  cache.init = EvaluateSynthetic(init, codec, desk.policy(), test, proto);
  const double init_secs = Seconds(start);
  std::printf("  init: lpc %d, mean %.4f std %.4f (%.0fs)\n", init.budget.lpc,
              cache.init->mean, cache.init->std, init_secs);
  std::fflush(stdout);

  bool pass = true;
  std::string detail = fmt::format("init {:.2f}%", 100.0 * cache.init->mean);
  for (const std::string algo : {"dc", "dm", "mtt"}) {
    start = Clock::now();
    std::optional<TrajectoryBuffer> buffer;
    if (algo == "mtt") buffer = RunBuffer(real, desk.config(), desk.seed());
    const DistillResult out = RunDistill(real, algo, 1, factor, desk.config(), desk.seed(),
                                         buffer ? &*buffer : nullptr);
    const double distill_secs = Seconds(start);
    if (out.abort_reason) {
      pass = false;
      detail += fmt::format(", {} aborted: {}", algo, *out.abort_reason);
      continue;
    }
    EvalReport report = EvaluateSynthetic(out.syn, codec, desk.policy(), test, proto);
    report.label = algo;
    const double secs = Seconds(start);
    const double gain = 100.0 * (report.mean - cache.init->mean);
    std::printf("  %s: mean %.4f std %.4f gain %+.2f pts (distill %.0fs, total %.0fs)\n",
                algo.c_str(), report.mean, report.std, gain, distill_secs, secs);
    std::fflush(stdout);
    pass = pass && gain >= 2.0 && secs + init_secs <= 3600.0;
    detail += fmt::format(", {} {:.2f}% ({:+.2f} pts, {:.0f}s)", algo, 100.0 * report.mean,
                          gain, secs + init_secs);
    cache.reports.push_back(report);
  }
  return {pass, detail};
}

// 7. Latent full-set classifier within 5 points of the pixel one.
Outcome FullSetParity(Desk& desk) {
  const LatentDataset& train = desk.latent_train();
  const LatentDataset& test = desk.latent_test();
  EvalProtocol proto = desk.protocol();
  proto.runs = desk.config().Get<int>("parity.runs", 1);
  proto.epochs = desk.config().Get<int>("parity.epochs", 30);
  proto.augment.clear();
  const auto start = Clock::now();
  const EvalReport pixel = FullSetBaseline(desk.splits().train, desk.splits().test, proto);
  const EvalReport latent = FullSetBaseline(train, test, proto);
  const double secs = Seconds(start);
  const double gap = 100.0 * (pixel.mean - latent.mean);
  return {gap <= 5.0 && secs < 1800.0,
          fmt::format("pixel depth {} {:.2f}%, latent depth {} {:.2f}%, gap {:.2f} pts "
                      "(<= 5), {:.0f}s",
                      pixel.depth, 100.0 * pixel.mean, latent.depth, 100.0 * latent.mean, gap,
                      secs)};
}

// 8. Matched-iteration speed and file-size comparison.
Outcome SpeedSpace(Desk& desk) {
  const BenchOutcome bench =
      RunBench(desk.splits().train, desk.codec(), desk.policy(), 1, desk.config(), desk.seed(),
               desk.Path("bench"));
  const BenchComparison& dc = bench.comparisons.at(1);
  const bool pass = dc.complete && dc.per_iteration_ratio < 1.0 &&
                    bench.latent_file_bytes < bench.pixel_file_bytes;
  return {pass, fmt::format("per-iteration ratio {:.3f} (< 1; 0.7 target {}), "
                            "latent file {} B vs pixel {} B",
                            dc.per_iteration_ratio,
                            dc.per_iteration_ratio <= 0.7 ? "met" : "missed",
                            bench.latent_file_bytes, bench.pixel_file_bytes)};
}

bool SameBytes(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  const std::string sa{std::istreambuf_iterator<char>(fa), {}};
  const std::string sb{std::istreambuf_iterator<char>(fb), {}};
  return !sa.empty() && sa == sb;
}

// 9. Same seed and config, same synthetic file.
Outcome Determinism(Desk& desk) {
  const LatentDataset& real = desk.latent_train();
  const int iters = desk.config().Get<int>("determinism.iterations", 5);
  const Config cfg = Patched(desk.config(), {{"dc", {{"iterations", iters}}},
                                             {"dm", {{"iterations", iters}}},
                                             {"mtt", {{"iterations", iters}}},
                                             {"buffer", {{"experts", 2}}}});
  const TrajectoryBuffer buffer = RunBuffer(real, cfg, desk.seed());
  bool pass = true;
  std::string detail;
  for (const std::string algo : {"dc", "dm", "mtt"}) {
    std::vector<std::string> paths;
    for (int rep = 0; rep < 2; ++rep) {
      const DistillResult out =
          RunDistill(real, algo, 1, real.effective_factor(), cfg, desk.seed(), &buffer);
      paths.push_back(desk.Path(fmt::format("determinism_{}_{}.ldsy", algo, rep)));
      WriteSyntheticSet(paths.back(), out.syn);
    }
    const bool same = SameBytes(paths[0], paths[1]);
    pass = pass && same;
    detail += fmt::format("{}{} {:016x} {}", detail.empty() ? "" : ", ", algo,
                          FileHash(paths[0]), same ? "identical" : "DIFFERENT");
  }
  return {pass, detail};
}

// 10. Five runs, five accuracies, arithmetic mean.
Outcome ProtocolShape(Desk& desk, const EvalCache& cache) {
  std::vector<EvalReport> reports = cache.reports;
  if (reports.empty()) {
    EvalProtocol proto = desk.protocol();
    proto.epochs = 2;
    const LatentDataset& real = desk.latent_train();
    const Config cfg = Patched(desk.config(), {{"dm", {{"iterations", 0}}}});
    const SyntheticLatentSet syn =
        RunDistill(real, "dm", 1, real.effective_factor(), cfg, desk.seed()).syn;
    reports.push_back(
        EvaluateSynthetic(syn, desk.codec(), desk.policy(), desk.splits().test, proto));
  }
  bool pass = true;
  std::string detail;
  for (const EvalReport& r : reports) {
    // Left-to-right sum, as a reader would compute it.
    double sum = 0.0;
    for (double a : r.accuracies) sum += a;
    const double mean = sum / static_cast<double>(r.accuracies.size());
    const EvalReport back = EvalReport::FromJsonLine(r.ToJsonLine());
    const bool ok = r.accuracies.size() == 5 && std::abs(r.mean - mean) <= 1e-12 &&
                    back.accuracies.size() == 5 && std::abs(back.mean - mean) <= 1e-12;
    pass = pass && ok;
    detail += fmt::format("{}{}: {} runs mean {:.6f}", detail.empty() ? "" : ", ",
                          r.label.empty() ? "eval" : r.label, r.accuracies.size(), r.mean);
  }
  return {pass, detail};
}

}  // namespace
}  // namespace ldistill::acceptance

int main(int argc, char** argv) {
  using namespace ldistill;
  using namespace ldistill::acceptance;

  CLI::App app{"ldistill desk-scale acceptance"};
  std::string work_dir = "acceptance_work";
  std::string config_path = LDISTILL_ACCEPTANCE_CONFIG;
  std::vector<int> only;
  app.add_option("--work-dir", work_dir, "Directory for the codec, caches and outputs");
  app.add_option("--config", config_path, "Acceptance configuration (JSON)");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  Desk desk(work_dir, Config::FromFile(config_path));
  EvalCache cache;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, [&] { return BudgetArithmetic(desk); }},
      {2, [&] { return AnalyticLosses(desk); }},
      {3, [&] { return GradientCorrectness(desk); }},
      {4, [&] { return Fidelity(desk); }},
      {5, [&] { return DcConvergence(desk); }},
      {6, [&] { return BeatsInit(desk, cache); }},
      {7, [&] { return FullSetParity(desk); }},
      {8, [&] { return SpeedSpace(desk); }},
      {9, [&] { return Determinism(desk); }},
      {10, [&] { return ProtocolShape(desk, cache); }},
  };
  const std::set<int> selected(only.begin(), only.end());

  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!selected.empty() && selected.count(id) == 0) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %d: %s  %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), Seconds(start));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
