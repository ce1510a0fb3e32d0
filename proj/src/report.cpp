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

#include "ldistill/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "ldistill/error.hpp"

namespace ldistill {

namespace {

double Median(std::vector<double> v) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<double> Finite(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v) {
    if (std::isfinite(x)) out.push_back(x);
  }
  return out;
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorCode::kIo, "report: cannot open " + path);
  std::stringstream text;
  text << in.rdbuf();
  return text.str();
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  Require(out.good(), ErrorCode::kIo, "report: cannot write " + path);
}

}  // namespace

RecordSet ParseRecords(const std::string& jsonl) {
  RecordSet set;
  std::istringstream in(jsonl);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorCode::kFormat,
           fmt::format("report: line {} is not JSON: {}", line_no, e.what()));
    }
    const std::string type = j.value("type", "");
    if (type == "trace") {
      const LossTrace one = LossTrace::FromJsonLines(line);
      auto it = std::find_if(set.traces.begin(), set.traces.end(),
                             [&](const LossTrace& t) { return t.algorithm == one.algorithm; });
      if (it == set.traces.end()) {
        set.traces.push_back(one);
      } else {
        it->records.insert(it->records.end(), one.records.begin(), one.records.end());
      }
    } else if (type == "eval_report") {
      set.evals.push_back(EvalReport::FromJsonLine(line));
    } else if (type == "resource") {
      set.resources.push_back(ResourceReport::FromJsonLine(line));
    } else if (type == "bench_compare") {
      set.comparisons.push_back(BenchComparison::FromJsonLine(line));
    } else {
      ++set.skipped_lines;
    }
  }
  return set;
}

RecordSet ReadRecordFiles(const std::vector<std::string>& paths) {
  RecordSet all;
  for (const auto& path : paths) {
    RecordSet one = ParseRecords(ReadText(path));
    for (auto& t : one.traces) {
      auto it = std::find_if(all.traces.begin(), all.traces.end(),
                             [&](const LossTrace& x) { return x.algorithm == t.algorithm; });
      if (it == all.traces.end()) {
        all.traces.push_back(std::move(t));
      } else {
        it->records.insert(it->records.end(), t.records.begin(), t.records.end());
      }
    }
    all.evals.insert(all.evals.end(), one.evals.begin(), one.evals.end());
    all.resources.insert(all.resources.end(), one.resources.begin(), one.resources.end());
    all.comparisons.insert(all.comparisons.end(), one.comparisons.begin(),
                           one.comparisons.end());
    all.skipped_lines += one.skipped_lines;
  }
  return all;
}

std::string MarkdownSummary(const RecordSet& records) {
  std::string md = "# ldistill report\n";
  if (!records.evals.empty()) {
    md += "\n## Evaluation\n\n| label | space | depth | runs | mean acc (%) | std |\n"
          "|---|---|---|---|---|---|\n";
    for (const auto& e : records.evals) {
      md += fmt::format("| {} | {} | {} | {} | {:.2f} | {:.2f} |\n", e.label, e.space,
                        e.depth, e.accuracies.size(), 100.0 * e.mean, 100.0 * e.std);
    }
  }
  if (!records.traces.empty()) {
    md += "\n## Loss traces\n\n| algorithm | records | first | last | median |\n"
          "|---|---|---|---|---|\n";
    for (const auto& t : records.traces) {
      const auto losses = Finite(t.Losses());
      md += fmt::format("| {} | {} | {:.6g} | {:.6g} | {:.6g} |\n", t.algorithm,
                        t.records.size(), losses.empty() ? NAN : losses.front(),
                        losses.empty() ? NAN : losses.back(), Median(losses));
    }
  }
  if (!records.resources.empty()) {
    md += "\n## Resources\n\n| phase | wall (s) | per iter (s) | peak RSS (MiB) | complete |\n"
          "|---|---|---|---|---|\n";
    for (const auto& r : records.resources) {
      md += fmt::format("| {} | {:.3f} | {:.4f} | {:.1f} | {} |\n", r.phase,
                        r.wall_seconds, r.PerIteration(),
                        static_cast<double>(r.peak_rss_bytes) / (1 << 20),
                        r.complete ? "yes" : "no");
    }
  }
  if (!records.comparisons.empty()) {
    md += "\n## Pixel vs latent\n\n| phases | time ratio | per-iter ratio | memory ratio |"
          " complete |\n|---|---|---|---|---|\n";
    for (const auto& c : records.comparisons) {
      md += fmt::format("| {} / {} | {:.3f} | {:.3f} | {:.3f} | {} |\n", c.latent.phase,
                        c.pixel.phase, c.time_ratio, c.per_iteration_ratio,
                        c.memory_ratio, c.complete ? "yes" : "no");
    }
  }
  return md;
}

std::string TraceSvg(const LossTrace& trace, int width, int height) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : trace.records) {
    if (std::isfinite(r.loss)) {
      pts.emplace_back(static_cast<double>(r.iteration) + r.outer * 1e-3, r.loss);
    }
  }
  const double margin = 48.0;
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{3} matching "
      "loss</text>\n",
      width, height, margin, trace.algorithm);
  svg += fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n"
      "<line x1=\"{0}\" y1=\"{3}\" x2=\"{0}\" y2=\"{1}\" stroke=\"black\"/>\n",
      margin, height - margin, width - margin / 2, margin / 2);
  if (!pts.empty()) {
    double x0 = pts.front().first, x1 = x0, y0 = pts.front().second, y1 = y0;
    for (const auto& [x, y] : pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
    const double sx = (width - 1.5 * margin) / std::max(x1 - x0, 1e-12);
    const double sy = (height - 1.5 * margin) / std::max(y1 - y0, 1e-12);
    svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : pts) {
      svg += fmt::format("{:.1f},{:.1f} ", margin + (x - x0) * sx,
                         height - margin - (y - y0) * sy);
    }
    svg += "\"/>\n";
    svg += fmt::format(
        "<text x=\"{0}\" y=\"{1}\" font-family=\"sans-serif\" font-size=\"11\">{2:.4g}</text>\n"
        "<text x=\"{0}\" y=\"{3}\" font-family=\"sans-serif\" font-size=\"11\">{4:.4g}</text>\n"
        "<text x=\"{5}\" y=\"{6}\" font-family=\"sans-serif\" font-size=\"11\">iteration {7:.0f}</text>\n",
        4, margin / 2 + 4, y1, height - margin, y0, width - 3 * margin, height - margin / 3, x1);
  }
  svg += "</svg>\n";
  return svg;
}

std::vector<std::string> WriteReport(const RecordSet& records,
                                     const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  Require(!ec, ErrorCode::kIo, "report: cannot create " + out_dir);
  std::vector<std::string> written;
  const std::string summary = (std::filesystem::path(out_dir) / "summary.md").string();
  WriteText(summary, MarkdownSummary(records));
  written.push_back(summary);
  for (const auto& t : records.traces) {
    const std::string path =
        (std::filesystem::path(out_dir) / ("trace_" + t.algorithm + ".svg")).string();
    WriteText(path, TraceSvg(t));
    written.push_back(path);
  }
  return written;
}

}  // namespace ldistill
