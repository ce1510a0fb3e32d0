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

// Phase timing, peak memory sampling, and matched pixel/latent comparison.

#ifndef LDISTILL_BENCH_HPP_
#define LDISTILL_BENCH_HPP_

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>

namespace ldistill {

struct ResourceReport {
  std::string phase;
  double wall_seconds = 0.0;
  int64_t peak_rss_bytes = 0;
  int64_t peak_accel_bytes = -1;  // -1: no accelerator
  int64_t peak_tensor_bytes = 0;
  int64_t iterations = 0;
  uint64_t config_digest = 0;
  bool complete = true;
  std::string error;

  double PerIteration() const;
  std::string ToJsonLine() const;
  static ResourceReport FromJsonLine(const std::string& line);
};

// Resident set size of this process from /proc; 0 when unavailable.
int64_t CurrentRssBytes();

// Samples RSS every `period_ms` on a background thread and keeps the max.
class PeakRssPoller {
 public:
  explicit PeakRssPoller(int period_ms = 50);
  ~PeakRssPoller();
  PeakRssPoller(const PeakRssPoller&) = delete;
  PeakRssPoller& operator=(const PeakRssPoller&) = delete;

  // Stops sampling and returns the peak.
  int64_t Stop();

 private:
  std::atomic<bool> running_{true};
  std::atomic<int64_t> peak_{0};
  std::thread thread_;
};

// Runs `body` under a poller. Exceptions mark the report incomplete.
ResourceReport MeasurePhase(const std::string& phase, int64_t iterations,
                            uint64_t config_digest,
                            const std::function<void()>& body);

struct BenchComparison {
  ResourceReport pixel;
  ResourceReport latent;
  double time_ratio = 0.0;           // latent / pixel wall time
  double per_iteration_ratio = 0.0;  // latent / pixel per-iteration time
  double memory_ratio = 0.0;         // latent / pixel peak RSS
  bool complete = true;

  std::string ToJsonLine() const;
  static BenchComparison FromJsonLine(const std::string& line);
};

// Throws kConfig when iteration counts or config digests differ.
BenchComparison BenchCompare(const ResourceReport& pixel,
                             const ResourceReport& latent);

}  // namespace ldistill

#endif  // LDISTILL_BENCH_HPP_
