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

// Renders JSONL run records into markdown tables and SVG loss plots.

#ifndef LDISTILL_REPORT_HPP_
#define LDISTILL_REPORT_HPP_

#include <string>
#include <vector>

#include "ldistill/bench.hpp"
#include "ldistill/distill.hpp"
#include "ldistill/evaluate.hpp"

namespace ldistill {

struct RecordSet {
  std::vector<LossTrace> traces;  // one per algorithm, in first-seen order
  std::vector<EvalReport> evals;
  std::vector<ResourceReport> resources;
  std::vector<BenchComparison> comparisons;
  int skipped_lines = 0;  // lines with an unknown type
};

// Lines of unknown type are counted, malformed lines are kFormat errors.
RecordSet ParseRecords(const std::string& jsonl);
RecordSet ReadRecordFiles(const std::vector<std::string>& paths);

std::string MarkdownSummary(const RecordSet& records);
// Loss against iteration; non-finite losses are dropped.
std::string TraceSvg(const LossTrace& trace, int width = 640, int height = 360);

// Writes summary.md and trace_<algorithm>.svg into `out_dir`; returns the
// written paths.
std::vector<std::string> WriteReport(const RecordSet& records,
                                     const std::string& out_dir);

}  // namespace ldistill

#endif  // LDISTILL_REPORT_HPP_
