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


#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "ldistill/bench.hpp"
#include "ldistill/config.hpp"
#include "ldistill/error.hpp"
#include "ldistill/pipeline.hpp"
#include "ldistill/registry.hpp"
#include "ldistill/report.hpp"
#include "oracles.hpp"

using namespace ldistill;
using namespace ldistill::testing;

namespace {

RawImage Gradient(int h, int w, float offset) {
  RawImage img{h, w, 3, {}};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.pixels.push_back(offset + 0.5f * x / float(w));
      img.pixels.push_back(0.3f + 0.4f * y / float(h));
      img.pixels.push_back(0.8f - offset);
    }
  }
  return img;
}

ResourceReport Phase(const std::string& name, double seconds, int64_t iterations,
                     uint64_t digest = 1) {
  ResourceReport r;
  r.phase = name;
  r.wall_seconds = seconds;
  r.peak_rss_bytes = 1000;
  r.iterations = iterations;
  r.config_digest = digest;
  return r;
}

Config Toy() {
  return Config::FromString(R"({
    "net": {"width": 8, "depth": 1},
    "dc": {"iterations": 2, "outer_loop": 2, "inner_loop": 1, "batch": 8},
    "dm": {"iterations": 3, "batch": 8},
    "mtt": {"iterations": 2, "max_start": 1, "expert_epochs": 1, "student_steps": 2},
    "buffer": {"experts": 2, "batch": 8}
  })");
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("dataset registry") {
    std::set<std::string> names;
    for (const auto& e : Registry()) {
      CHECK_NOTHROW(e.Validate());
      CHECK(names.insert(e.name).second);
    }
    const auto& desk = FindDataset("desk10");
    CHECK(desk.class_names.size() == 10);
    CHECK(desk.source == SourceKind::kBuiltinToy);
    const auto& bird = FindDataset("bird");
    CHECK(bird.source == SourceKind::kImageFolder);
    REQUIRE(bird.class_names.size() == 10);
    CHECK(bird.class_names[0] == "peacock");
    CHECK(bird.class_indices[0] == 84);
    CHECK(bird.class_names[1] == "flamingo");
    CHECK(bird.class_indices[1] == 130);
    CHECK_THROWS_AS(FindDataset("nope"), Error);
    DatasetRegistryEntry dup = desk;
    dup.class_names[1] = dup.class_names[0];
    CHECK_THROWS_AS(dup.Validate(), Error);
    dup.class_names.clear();
    CHECK_THROWS_AS(dup.Validate(), Error);
    CHECK_THROWS_AS(LoadDataset("bird", "/nonexistent", 32, 0), Error);
  }

  TEST_CASE("preprocess geometry, identity crop, normalization, corrupt input") {
    const auto wide = Preprocess({Gradient(480, 640, 0.1f)}, {0}, 1, 256);
    CHECK(wide.data.images.shape() == Shape{1, 3, 256, 256});

    const ChannelStats unit{{0, 0, 0}, {1, 1, 1}};
    const RawImage sq = Gradient(32, 32, 0.2f);
    const auto same = Preprocess({sq}, {0}, 1, 32, unit);
    const auto px = same.data.images.data();
    for (int y = 0; y < 32; y += 7) {
      for (int x = 0; x < 32; x += 5) {
        for (int c = 0; c < 3; ++c) {
          CHECK(px[(c * 32 + y) * 32 + x] == doctest::Approx(sq.pixels[(y * 32 + x) * 3 + c]).epsilon(1e-6));
        }
      }
    }

    std::vector<RawImage> raw{Gradient(16, 16, 0.0f), Gradient(16, 16, 0.3f), RawImage{}};
    raw.push_back(Gradient(16, 16, 0.15f));
    const auto norm = Preprocess(raw, {0, 1, 0, 1}, 2, 16);
    CHECK(norm.skipped == std::vector<int64_t>{2});
    CHECK(norm.data.count() == 3);
    CHECK(norm.data.labels == std::vector<int>{0, 1, 1});
    const auto v = norm.data.images.data();
    for (int c = 0; c < 3; ++c) {
      double s = 0;
      for (int64_t i = 0; i < 3; ++i) {
        for (int p = 0; p < 256; ++p) s += v[(i * 3 + c) * 256 + p];
      }
      CHECK(std::abs(s / (3 * 256)) < 1e-4);
    }
    CHECK_THROWS_AS(Preprocess({RawImage{}}, {0}, 1, 16), Error);
  }

  TEST_CASE("desk dataset is normalized and deterministic") {
    const DatasetSplits a = MakeDeskDataset({10, 2, 32, 4});
    const DatasetSplits b = MakeDeskDataset({10, 2, 32, 4});
    CHECK(a.train.images.shape() == Shape{100, 3, 32, 32});
    CHECK(a.test.count() == 20);
    CHECK(HashFloats(a.train.images.data()) == HashFloats(b.train.images.data()));
    const auto v = a.train.images.data();
    for (int c = 0; c < 3; ++c) {
      double s = 0;
      for (int64_t i = 0; i < 100; ++i) {
        for (int p = 0; p < 1024; ++p) s += v[(i * 3 + c) * 1024 + p];
      }
      CHECK(std::abs(s / (100 * 1024)) < 1e-3);
    }
  }

  TEST_CASE("config lookup and precedence") {
    const Config c = Config::FromString(R"({
      // comments are allowed
      "dc": {"iterations": 7, "match_loss": "cosine"},
      "eval": {"runs": 3}
    })");
    CHECK(c.Has("dc.iterations"));
    CHECK(!c.Has("dc.missing"));
    CHECK(c.Get<int>("dc.iterations", 1) == 7);
    CHECK(c.Get<int>("dm.iterations", 1000) == 1000);
    CHECK(Resolve<int>(std::optional<int>(9), c, "dc.iterations", 1) == 9);
    CHECK(Resolve<int>(std::nullopt, c, "dc.iterations", 1) == 7);
    CHECK(Resolve<int>(std::nullopt, c, "dc.other", 1) == 1);
    CHECK_THROWS_AS(c.Get<int>("dc.match_loss", 0), Error);
    CHECK_THROWS_AS(Config::FromString("[1, 2]"), Error);
    CHECK_THROWS_AS(Config::FromString("{"), Error);
    CHECK_THROWS_AS(Config::FromFile("/nonexistent/config.json"), Error);

    const DCConfig dc = DcConfigFrom(c, 5);
    CHECK(dc.iterations == 7);
    CHECK(dc.match_loss == MatchLoss::kCosine);
    CHECK(dc.outer_loop == 10);
    CHECK(dc.seed == 5);
    CHECK(EvalProtocolFrom(c, 0).runs == 3);
    const MTTConfig mtt = MttConfigFrom(Config{}, 0);
    CHECK(mtt.iterations == 5000);
    CHECK(mtt.max_start == 5);
    CHECK(mtt.student_steps == 40);
    CHECK(mtt.eta_base == 50.0f);
    CHECK(DmConfigFrom(Config{}, 0).eta_base == 0.5f);

    ::setenv("LDISTILL_CACHE_DIR", "/tmp/ldistill-cache", 1);
    CHECK(CacheDir() == "/tmp/ldistill-cache");
    ::unsetenv("LDISTILL_CACHE_DIR");
    CHECK(CacheDir() == ".");
  }

  TEST_CASE("distill dispatch") {
    const LatentDataset real = Blobs(2, 20, 4, 4, 1.5, 3);
    const Config cfg = Toy();
    for (const char* algo : {"dc", "dm"}) {
      const auto out = RunDistill(real, algo, 1, 4, cfg, 1);
      CHECK(out.syn.count() == 24);
      CHECK(out.syn.budget.lpc == 12);
      CHECK(out.syn.algorithm == algo);
    }
    int skipped = -1;
    const TrajectoryBuffer buf = RunBuffer(real, cfg, 1, &skipped);
    CHECK(skipped == 0);
    CHECK(buf.num_experts() == 2);
    CHECK(buf.epochs == 1 + 1 + 2);
    CHECK(RunDistill(real, "mtt", 1, 4, cfg, 1, &buf).syn.algorithm == "mtt");
    CHECK_THROWS_AS(RunDistill(real, "mtt", 1, 4, cfg, 1), Error);
    CHECK_THROWS_AS(RunDistill(real, "dc", 1, 2, cfg, 1), Error);
    CHECK_THROWS_AS(RunDistill(real, "kip", 1, 4, cfg, 1), Error);
    const auto a = RunDistill(real, "dm", 2, 4, cfg, 8);
    const auto b = RunDistill(real, "dm", 2, 4, cfg, 8);
    CHECK(HashFloats(a.syn.latents.data()) == HashFloats(b.syn.latents.data()));
    CHECK(a.syn.count() == 48);
  }

  TEST_CASE("bench comparison") {
    const ResourceReport p = Phase("distill_dc/pixel", 2.0, 10);
    const BenchComparison self = BenchCompare(p, p);
    CHECK(self.time_ratio == doctest::Approx(1.0));
    CHECK(self.per_iteration_ratio == doctest::Approx(1.0));
    CHECK(self.memory_ratio == doctest::Approx(1.0));
    const BenchComparison half = BenchCompare(p, Phase("distill_dc/latent", 1.0, 10));
    CHECK(half.per_iteration_ratio == doctest::Approx(0.5));
    CHECK_THROWS_AS(BenchCompare(p, Phase("x", 1.0, 11)), Error);
    CHECK_THROWS_AS(BenchCompare(p, Phase("x", 1.0, 10, 2)), Error);
    const BenchComparison back = BenchComparison::FromJsonLine(half.ToJsonLine());
    CHECK(back.per_iteration_ratio == half.per_iteration_ratio);
    CHECK(back.latent.phase == "distill_dc/latent");

    const ResourceReport ok = MeasurePhase("ok", 3, 9, [] {
      std::vector<char> block(8 << 20, 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(120));
      CHECK(block[100] == 1);
    });
    CHECK(ok.complete);
    CHECK(ok.wall_seconds >= 0.1);
    CHECK(ok.peak_rss_bytes > 0);
    CHECK(ok.PerIteration() == doctest::Approx(ok.wall_seconds / 3));
    const ResourceReport bad = MeasurePhase("bad", 1, 9, [] { Fail(ErrorCode::kIo, "boom"); });
    CHECK(!bad.complete);
    CHECK(bad.error.find("boom") != std::string::npos);
    CHECK(!BenchCompare(ok, [&] { auto r = bad; r.iterations = 3; return r; }()).complete);
    CHECK(CurrentRssBytes() > 0);
  }

  TEST_CASE("report rendering") {
    LossTrace t;
    t.algorithm = "dm";
    t.records = {{0, 0, 3.0}, {1, 0, 2.0}, {2, 0, std::nan("")}, {3, 0, 1.0}};
    EvalReport e;
    e.label = "dm ipc1";
    e.accuracies = {0.4, 0.5};
    e.Finalize();
    const ResourceReport p = Phase("distill_dc/pixel", 2.0, 10);
    const ResourceReport l = Phase("distill_dc/latent", 1.0, 10);
    const std::string jsonl = t.ToJsonLines() + e.ToJsonLine() + "\n" + p.ToJsonLine() +
                              "\n" + BenchCompare(p, l).ToJsonLine() +
                              "\n{\"type\":\"other\"}\n\n";
    const RecordSet rs = ParseRecords(jsonl);
    REQUIRE(rs.traces.size() == 1);
    CHECK(rs.traces[0].records.size() == 4);
    CHECK(rs.evals.size() == 1);
    CHECK(rs.resources.size() == 1);
    CHECK(rs.comparisons.size() == 1);
    CHECK(rs.skipped_lines == 1);
    CHECK_THROWS_AS(ParseRecords("not json\n"), Error);

    const std::string md = MarkdownSummary(rs);
    CHECK(md.find("dm ipc1") != std::string::npos);
    CHECK(md.find("distill_dc") != std::string::npos);
    const std::string svg = TraceSvg(rs.traces[0]);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);

    const std::string in = TempPath("records.jsonl"), out = TempPath("report");
    { std::ofstream(in) << jsonl; }
    const auto written = WriteReport(ReadRecordFiles({in}), out);
    CHECK(written.size() == 2);
    for (const auto& w : written) CHECK(std::filesystem::exists(w));
    CHECK(std::filesystem::exists(out + "/trace_dm.svg"));
    std::filesystem::remove_all(out);
    std::filesystem::remove(in);
  }
}
