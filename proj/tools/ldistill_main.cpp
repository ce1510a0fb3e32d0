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

// ldistill command line. Talks to the library only through the C API.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ldistill/ldistill.h"

namespace {

class CliError : public std::runtime_error {
 public:
  CliError(int status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

void Check(ldst_status status) {
  if (status != LDST_OK) throw CliError(status, ldst_last_error());
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
template <typename T, void (*Free)(T*)>
using Handle = std::unique_ptr<T, Deleter<T, Free>>;

using ConfigH = Handle<ldst_config, ldst_config_free>;
using DatasetH = Handle<ldst_dataset, ldst_dataset_free>;
using CodecH = Handle<ldst_codec, ldst_codec_free>;
using LatentsH = Handle<ldst_latents, ldst_latents_free>;
using BufferH = Handle<ldst_buffer, ldst_buffer_free>;
using SyntheticH = Handle<ldst_synthetic, ldst_synthetic_free>;

std::string Take(char* s) {
  std::string out = s != nullptr ? s : "";
  ldst_string_free(s);
  return out;
}

void WriteFile(const std::string& path, const std::string& text, bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  out << text;
  if (!out) throw CliError(LDST_IO, "cannot write " + path);
}

// File arguments resolve under $LDISTILL_CACHE_DIR when they are relative.
const CLI::Validator kCachePath(
    [](std::string& path) {
      if (path == "identity") return std::string();
      char* raw = nullptr;
      Check(ldst_cache_path(path.c_str(), &raw));
      path = Take(raw);
      return std::string();
    },
    "", "cache path");

// Shared --seed / --config plus per-flag overrides applied on top of the file.
struct Common {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> overrides;

  void Attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed, "Random seed (overrides config key 'seed')");
  }
  template <typename T>
  void Override(const std::string& key, const std::optional<T>& flag) {
    if (flag) {
      std::ostringstream v;
      if constexpr (std::is_same_v<T, std::string>) {
        v << '"' << *flag << '"';
      } else {
        v << *flag;
      }
      overrides.emplace_back(key, v.str());
    }
  }
  ConfigH Load() const {
    ldst_config* raw = nullptr;
    Check(ldst_config_create(config_path.empty() ? nullptr : config_path.c_str(), &raw));
    ConfigH cfg(raw);
    for (const auto& [k, v] : overrides) Check(ldst_config_set(cfg.get(), k.c_str(), v.c_str()));
    return cfg;
  }
};

std::optional<std::string> ConfigValue(const ldst_config* cfg, const std::string& key) {
  char* raw = nullptr;
  Check(ldst_config_get(cfg, key.c_str(), &raw));
  if (raw == nullptr) return std::nullopt;
  return Take(raw);
}

int64_t ConfigInt(const ldst_config* cfg, const std::string& key, int64_t fallback) {
  const auto v = ConfigValue(cfg, key);
  if (!v) return fallback;
  try {
    return std::stoll(*v);
  } catch (const std::exception&) {
    throw CliError(LDST_CONFIG, "config key '" + key + "' must be an integer");
  }
}

std::string ConfigString(const ldst_config* cfg, const std::string& key,
                         const std::string& fallback) {
  const auto v = ConfigValue(cfg, key);
  if (!v) return fallback;
  if (v->size() < 2 || v->front() != '"') {
    throw CliError(LDST_CONFIG, "config key '" + key + "' must be a string");
  }
  return v->substr(1, v->size() - 2);
}

uint64_t SeedOf(const Common& common, const ldst_config* cfg) {
  if (common.seed) return *common.seed;
  return static_cast<uint64_t>(ConfigInt(cfg, "seed", 0));
}

struct DatasetFlags {
  std::optional<std::string> name;
  std::string root;
  int resolution = 0;

  void Attach(CLI::App* cmd) {
    cmd->add_option("--dataset", name, "Registry name (default desk10)");
    cmd->add_option("--data-root", root, "Image folder root for ImageNet subsets");
    cmd->add_option("--resolution", resolution, "Target resolution (0 = dataset default)");
  }
  DatasetH Load(const ldst_config* cfg, uint64_t seed) const {
    const std::string n = name ? *name : ConfigString(cfg, "dataset", "desk10");
    ldst_dataset* raw = nullptr;
    Check(ldst_dataset_load(n.c_str(), root.c_str(), resolution, cfg, seed, &raw));
    return DatasetH(raw);
  }
};

struct CodecFlags {
  std::string codec = "identity";
  bool train = false;
  std::optional<int> factor, c_lat, pre_upsample;

  void Attach(CLI::App* cmd) {
    cmd->add_option("--codec", codec, "'identity' or a codec file")->transform(kCachePath);
    cmd->add_flag("--train-codec", train, "Train a toy codec into --codec if missing");
    cmd->add_option("--factor", factor, "Effective spatial factor (default 4)");
    cmd->add_option("--c-lat", c_lat, "Latent channels of a trained codec (default 4)");
    cmd->add_option("--pre-upsample", pre_upsample, "Resize before encoding (default 2)");
  }
  bool identity() const { return codec == "identity"; }
  int Pre(const ldst_config* cfg) const {
    if (identity()) return 1;
    return pre_upsample ? *pre_upsample
                        : static_cast<int>(ConfigInt(cfg, "codec.pre_upsample", 2));
  }
  CodecH Load(const ldst_dataset* ds, const ldst_config* cfg, uint64_t seed) const {
    const int eff = factor ? *factor : static_cast<int>(ConfigInt(cfg, "codec.factor", 4));
    const int cl = c_lat ? *c_lat : static_cast<int>(ConfigInt(cfg, "codec.c_lat", 4));
    ldst_codec* raw = nullptr;
    Check(ldst_codec_obtain(codec.c_str(), ds, eff * Pre(cfg), cl, cfg, seed,
                            train ? 1 : 0, &raw));
    return CodecH(raw);
  }
};

int RunBuildLatents(const Common& common, const DatasetFlags& data,
                    const CodecFlags& codec, const std::string& split,
                    const std::string& out, const std::string& pixel_out) {
  const ConfigH cfg = common.Load();
  const uint64_t seed = SeedOf(common, cfg.get());
  const DatasetH ds = data.Load(cfg.get(), seed);
  const CodecH c = codec.Load(ds.get(), cfg.get(), seed);
  ldst_latents* raw = nullptr;
  Check(ldst_latents_encode(ds.get(), split.c_str(), c.get(), codec.Pre(cfg.get()), &raw));
  const LatentsH lat(raw);
  Check(ldst_latents_write(lat.get(), out.c_str()));
  if (!pixel_out.empty()) Check(ldst_dataset_write_pixels(ds.get(), split.c_str(), pixel_out.c_str()));
  int64_t count = 0;
  int c_lat = 0, eff = 0;
  Check(ldst_latents_info(lat.get(), &count, &c_lat, &eff, nullptr));
  std::printf("wrote %s: %lld latents, c_lat %d, effective factor %d\n", out.c_str(),
              static_cast<long long>(count), c_lat, eff);
  return 0;
}

int RunBuffer(const Common& common, const std::string& cache, const std::string& out) {
  const ConfigH cfg = common.Load();
  ldst_latents* raw = nullptr;
  Check(ldst_latents_read(cache.c_str(), 0, &raw));
  const LatentsH lat(raw);
  int skipped = 0;
  ldst_buffer* braw = nullptr;
  Check(ldst_buffer_record(lat.get(), cfg.get(), SeedOf(common, cfg.get()), &skipped, &braw));
  const BufferH buf(braw);
  Check(ldst_buffer_write(buf.get(), out.c_str()));
  std::printf("wrote %s (%d diverged experts skipped)\n", out.c_str(), skipped);
  return 0;
}

int RunDistill(const Common& common, const std::string& cache, const std::string& algo_flag,
               std::optional<int> ipc_flag, std::optional<int> factor_flag,
               const std::string& buffer_path, const std::string& out,
               const std::string& trace) {
  const ConfigH cfg = common.Load();
  const std::string algo = algo_flag.empty() ? ConfigString(cfg.get(), "distill.algo", "dc")
                                             : algo_flag;
  const int ipc = ipc_flag ? *ipc_flag : static_cast<int>(ConfigInt(cfg.get(), "distill.ipc", 1));
  ldst_latents* raw = nullptr;
  Check(ldst_latents_read(cache.c_str(), 0, &raw));
  const LatentsH lat(raw);
  int eff = 0;
  Check(ldst_latents_info(lat.get(), nullptr, nullptr, &eff, nullptr));
  const int factor =
      factor_flag ? *factor_flag : static_cast<int>(ConfigInt(cfg.get(), "distill.factor", eff));
  BufferH buf;
  if (!buffer_path.empty()) {
    ldst_buffer* braw = nullptr;
    Check(ldst_buffer_read(buffer_path.c_str(), lat.get(), &braw));
    buf.reset(braw);
  }
  ldst_synthetic* sraw = nullptr;
  char* trace_raw = nullptr;
  Check(ldst_distill(lat.get(), algo.c_str(), ipc, factor, cfg.get(),
                     SeedOf(common, cfg.get()), buf.get(), &sraw, &trace_raw));
  const SyntheticH syn(sraw);
  const std::string trace_text = Take(trace_raw);
  Check(ldst_synthetic_write(syn.get(), out.c_str()));
  WriteFile(trace.empty() ? out + ".trace.jsonl" : trace, trace_text, false);
  int64_t count = 0;
  int lpc = 0, k = 0;
  Check(ldst_synthetic_info(syn.get(), &count, &lpc, &k));
  std::printf("wrote %s: %d classes x %d latents (%lld total)\n", out.c_str(), k, lpc,
              static_cast<long long>(count));
  return 0;
}

int RunEval(Common common, const DatasetFlags& data, const std::string& syn_path,
            const std::string& codec_path, std::optional<int> runs,
            std::optional<int> epochs, const std::string& out) {
  common.Override("eval.runs", runs);
  common.Override("eval.epochs", epochs);
  const ConfigH cfg = common.Load();
  const uint64_t seed = SeedOf(common, cfg.get());
  ldst_synthetic* sraw = nullptr;
  Check(ldst_synthetic_read(syn_path.c_str(), &sraw));
  const SyntheticH syn(sraw);
  const DatasetH ds = data.Load(cfg.get(), seed);
  ldst_codec* craw = nullptr;
  Check(ldst_codec_obtain(codec_path.c_str(), nullptr, 0, 0, cfg.get(), seed, 0, &craw));
  const CodecH codec(craw);
  char* report = nullptr;
  Check(ldst_evaluate(syn.get(), codec.get(), ds.get(), cfg.get(), seed, &report));
  const std::string line = Take(report);
  WriteFile(out, line + "\n", true);
  std::printf("%s\n", line.c_str());
  return 0;
}

int RunBench(Common common, const DatasetFlags& data, const CodecFlags& codec,
             std::optional<int> ipc, std::optional<int> iterations,
             const std::string& work_dir, const std::string& out) {
  common.Override("bench.iterations", iterations);
  const ConfigH cfg = common.Load();
  const uint64_t seed = SeedOf(common, cfg.get());
  const DatasetH ds = data.Load(cfg.get(), seed);
  const CodecH c = codec.Load(ds.get(), cfg.get(), seed);
  const int budget = ipc ? *ipc : static_cast<int>(ConfigInt(cfg.get(), "distill.ipc", 1));
  char* report = nullptr;
  Check(ldst_bench(ds.get(), c.get(), codec.Pre(cfg.get()), budget, cfg.get(), seed,
                   work_dir.c_str(), &report));
  const std::string text = Take(report);
  WriteFile(out, text, false);
  std::fputs(text.c_str(), stdout);
  return 0;
}

int RunReport(const Common& common, const std::vector<std::string>& inputs,
              const std::string& out_dir) {
  common.Load();
  std::vector<const char*> paths;
  for (const auto& p : inputs) paths.push_back(p.c_str());
  char* written = nullptr;
  Check(ldst_report(paths.data(), paths.size(), out_dir.c_str(), &written));
  std::fputs(Take(written).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ldistill: dataset distillation in pixel and latent space"};
  app.set_version_flag("--version", ldst_version());
  app.require_subcommand(0, 1);

  Common build_common, buffer_common, distill_common, eval_common, bench_common,
      report_common;

  auto* build = app.add_subcommand("build-latents", "Encode a dataset split into a latent cache");
  DatasetFlags build_data;
  CodecFlags build_codec;
  std::string build_split = "train", build_out, build_pixels;
  build_common.Attach(build);
  build_data.Attach(build);
  build_codec.Attach(build);
  build->add_option("--split", build_split, "train or test")->check(CLI::IsMember({"train", "test"}));
  build->add_option("--out", build_out, "Latent cache file")->required()->transform(kCachePath);
  build->add_option("--pixel-out", build_pixels, "Also write the pixel split here")
      ->transform(kCachePath);

  auto* buffer = app.add_subcommand("buffer", "Record expert trajectories on a latent cache");
  std::string buffer_cache, buffer_out;
  std::optional<int> buffer_experts, buffer_epochs;
  buffer_common.Attach(buffer);
  buffer->add_option("--cache", buffer_cache, "Latent cache file")->required()->transform(kCachePath);
  buffer->add_option("--out", buffer_out, "Trajectory buffer file")->required()->transform(kCachePath);
  buffer->add_option("--experts", buffer_experts, "Number of experts (default 10)");
  buffer->add_option("--epochs", buffer_epochs, "Epochs per expert (default T+ + M + 2)");

  auto* distill = app.add_subcommand("distill", "Distill a synthetic latent set");
  std::string distill_cache, distill_algo, distill_buffer, distill_out, distill_trace;
  std::optional<int> distill_ipc, distill_factor, distill_iterations;
  distill_common.Attach(distill);
  distill->add_option("--cache", distill_cache, "Latent cache file")->required()->transform(kCachePath);
  distill->add_option("--algo", distill_algo, "dc, dm or mtt")
      ->check(CLI::IsMember({"dc", "dm", "mtt"}));
  distill->add_option("--ipc", distill_ipc, "Images per class budget");
  distill->add_option("--factor", distill_factor, "Expected effective factor of the cache");
  distill->add_option("--iterations", distill_iterations, "Override <algo>.iterations");
  distill->add_option("--buffer", distill_buffer, "Trajectory buffer (mtt)")->transform(kCachePath);
  distill->add_option("--out", distill_out, "Synthetic set file")->required()->transform(kCachePath);
  distill->add_option("--trace", distill_trace, "Loss trace JSONL (default <out>.trace.jsonl)")
      ->transform(kCachePath);

  auto* eval = app.add_subcommand("eval", "Evaluate a synthetic set on the test split");
  DatasetFlags eval_data;
  std::string eval_syn, eval_codec = "identity", eval_out;
  std::optional<int> eval_runs, eval_epochs;
  eval_common.Attach(eval);
  eval_data.Attach(eval);
  eval->add_option("--syn", eval_syn, "Synthetic set file")->required()->transform(kCachePath);
  eval->add_option("--codec", eval_codec, "Codec that produced the latents")->transform(kCachePath);
  eval->add_option("--runs", eval_runs, "Evaluation runs (default 5)");
  eval->add_option("--epochs", eval_epochs, "Training epochs per run");
  eval->add_option("--out", eval_out, "EvalReport JSONL (appended)")->required();

  auto* bench = app.add_subcommand("bench", "Matched pixel vs latent timing and memory");
  DatasetFlags bench_data;
  CodecFlags bench_codec;
  std::optional<int> bench_ipc, bench_iterations;
  std::string bench_dir = "bench_work", bench_out;
  bench_common.Attach(bench);
  bench_data.Attach(bench);
  bench_codec.Attach(bench);
  bench->add_option("--ipc", bench_ipc, "Images per class budget");
  bench->add_option("--iterations", bench_iterations, "DC iterations per phase (default 10)");
  bench->add_option("--work-dir", bench_dir, "Directory for the phase files")->transform(kCachePath);
  bench->add_option("--out", bench_out, "ResourceReport JSONL")->required();

  auto* report = app.add_subcommand("report", "Render JSONL records to tables and plots");
  std::vector<std::string> report_inputs;
  std::string report_dir;
  report_common.Attach(report);
  report->add_option("--inputs", report_inputs, "JSONL record files")->required();
  report->add_option("--out-dir", report_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 2;
  }

  try {
    if (build->parsed()) {
      return RunBuildLatents(build_common, build_data, build_codec, build_split, build_out,
                             build_pixels);
    }
    if (buffer->parsed()) {
      buffer_common.Override("buffer.experts", buffer_experts);
      buffer_common.Override("buffer.epochs", buffer_epochs);
      return RunBuffer(buffer_common, buffer_cache, buffer_out);
    }
    if (distill->parsed()) {
      if (distill_iterations) {
        const std::string algo = distill_algo.empty() ? "dc" : distill_algo;
        distill_common.Override(algo + ".iterations", distill_iterations);
      }
      return RunDistill(distill_common, distill_cache, distill_algo, distill_ipc,
                        distill_factor, distill_buffer, distill_out, distill_trace);
    }
    if (eval->parsed()) {
      return RunEval(eval_common, eval_data, eval_syn, eval_codec, eval_runs, eval_epochs,
                     eval_out);
    }
    if (bench->parsed()) {
      return RunBench(bench_common, bench_data, bench_codec, bench_ipc, bench_iterations,
                      bench_dir, bench_out);
    }
    return RunReport(report_common, report_inputs, report_dir);
  } catch (const CliError& e) {
    std::cerr << "error (" << ldst_status_name(e.status()) << "): " << e.what() << "\n";
    return 1;
  }
}
