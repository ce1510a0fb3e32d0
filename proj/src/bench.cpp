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

#include "ldistill/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ldistill/error.hpp"
#include "ldistill/tensor.hpp"

namespace ldistill {

namespace {

using nlohmann::json;

json ReportJson(const ResourceReport& r) {
  return {{"type", "resource"},
          {"phase", r.phase},
          {"wall_seconds", r.wall_seconds},
          {"peak_rss_bytes", r.peak_rss_bytes},
          {"peak_accel_bytes", r.peak_accel_bytes},
          {"peak_tensor_bytes", r.peak_tensor_bytes},
          {"iterations", r.iterations},
          {"config_digest", r.config_digest},
          {"complete", r.complete},
          {"error", r.error}};
}

ResourceReport ReportFromJson(const json& j) {
  ResourceReport r;
  r.phase = j.at("phase").get<std::string>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.peak_rss_bytes = j.at("peak_rss_bytes").get<int64_t>();
  r.peak_accel_bytes = j.value("peak_accel_bytes", int64_t{-1});
  r.peak_tensor_bytes = j.value("peak_tensor_bytes", int64_t{0});
  r.iterations = j.at("iterations").get<int64_t>();
  r.config_digest = j.at("config_digest").get<uint64_t>();
  r.complete = j.value("complete", true);
  r.error = j.value("error", std::string());
  return r;
}

double SafeRatio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

double ResourceReport::PerIteration() const {
  return iterations > 0 ? wall_seconds / static_cast<double>(iterations)
                        : wall_seconds;
}

std::string ResourceReport::ToJsonLine() const { return ReportJson(*this).dump(); }

ResourceReport ResourceReport::FromJsonLine(const std::string& line) {
  try {
    return ReportFromJson(json::parse(line));
  } catch (const json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("resource report: ") + e.what());
  }
}

int64_t CurrentRssBytes() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmRSS:", 0) == 0) {
      std::istringstream fields(line.substr(6));
      int64_t kb = 0;
      fields >> kb;
      return kb * 1024;
    }
  }
  return 0;
}

PeakRssPoller::PeakRssPoller(int period_ms) {
  peak_ = CurrentRssBytes();
  thread_ = std::thread([this, period_ms] {
    while (running_.load()) {
      const int64_t now = CurrentRssBytes();
      int64_t prev = peak_.load();
      while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(period_ms));
    }
  });
}

PeakRssPoller::~PeakRssPoller() { Stop(); }

int64_t PeakRssPoller::Stop() {
  if (running_.exchange(false) && thread_.joinable()) thread_.join();
  return std::max(peak_.load(), CurrentRssBytes());
}

ResourceReport MeasurePhase(const std::string& phase, int64_t iterations,
                            uint64_t config_digest,
                            const std::function<void()>& body) {
  ResourceReport report;
  report.phase = phase;
  report.iterations = iterations;
  report.config_digest = config_digest;
  const int64_t tensor_base = LiveTensorBytes();
  ResetPeakTensorBytes();
  PeakRssPoller poller;
  const auto start = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const std::exception& e) {
    report.complete = false;
    report.error = e.what();
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.peak_rss_bytes = poller.Stop();
  report.peak_tensor_bytes = std::max<int64_t>(0, PeakTensorBytes() - tensor_base);
  return report;
}

std::string BenchComparison::ToJsonLine() const {
  return json{{"type", "bench_compare"},
              {"pixel", ReportJson(pixel)},
              {"latent", ReportJson(latent)},
              {"time_ratio", time_ratio},
              {"per_iteration_ratio", per_iteration_ratio},
              {"memory_ratio", memory_ratio},
              {"complete", complete}}
      .dump();
}

BenchComparison BenchComparison::FromJsonLine(const std::string& line) {
  try {
    const json j = json::parse(line);
    BenchComparison c;
    c.pixel = ReportFromJson(j.at("pixel"));
    c.latent = ReportFromJson(j.at("latent"));
    c.time_ratio = j.at("time_ratio").get<double>();
    c.per_iteration_ratio = j.at("per_iteration_ratio").get<double>();
    c.memory_ratio = j.at("memory_ratio").get<double>();
    c.complete = j.value("complete", true);
    return c;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("bench comparison: ") + e.what());
  }
}

BenchComparison BenchCompare(const ResourceReport& pixel,
                             const ResourceReport& latent) {
  Require(pixel.iterations == latent.iterations, ErrorCode::kConfig,
          "bench: phases ran different iteration counts (" +
              std::to_string(pixel.iterations) + " vs " +
              std::to_string(latent.iterations) + ")");
  Require(pixel.config_digest == latent.config_digest, ErrorCode::kConfig,
          "bench: phases ran different configurations");
  Require(pixel.wall_seconds >= 0.0 && latent.wall_seconds >= 0.0,
          ErrorCode::kInvalidArgument, "bench: negative wall time");
  BenchComparison c;
  c.pixel = pixel;
  c.latent = latent;
  c.time_ratio = SafeRatio(latent.wall_seconds, pixel.wall_seconds);
  c.per_iteration_ratio = SafeRatio(latent.PerIteration(), pixel.PerIteration());
  c.memory_ratio = SafeRatio(static_cast<double>(latent.peak_rss_bytes),
                             static_cast<double>(pixel.peak_rss_bytes));
  c.complete = pixel.complete && latent.complete;
  return c;
}

}  // namespace ldistill
