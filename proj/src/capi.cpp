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

#include "ldistill/ldistill.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "ldistill/config.hpp"
#include "ldistill/data_model.hpp"
#include "ldistill/error.hpp"
#include "ldistill/io.hpp"
#include "ldistill/pipeline.hpp"
#include "ldistill/report.hpp"

using namespace ldistill;

struct ldst_config {
  Config config;
};
struct ldst_dataset {
  DatasetSplits splits;
};
struct ldst_codec {
  std::unique_ptr<LatentCodec> codec;
};
struct ldst_latents {
  LatentDataset data;
};
struct ldst_buffer {
  TrajectoryBuffer buffer;
};
struct ldst_synthetic {
  SyntheticLatentSet syn;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
ldst_status Guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return LDST_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<ldst_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LDST_RESOURCE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LDST_INTERNAL;
  }
}

void NotNull(const void* p, const char* what) {
  Require(p != nullptr, ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

const Config& ConfigOf(const ldst_config* cfg) {
  static const Config empty;
  return cfg != nullptr ? cfg->config : empty;
}

const RealImageDataset& Split(const ldst_dataset* ds, const char* split) {
  NotNull(ds, "dataset");
  const std::string name = split != nullptr ? split : "train";
  if (name == "train") return ds->splits.train;
  if (name == "test") return ds->splits.test;
  Fail(ErrorCode::kInvalidArgument, "unknown split '" + name + "' (train, test)");
}

}  // namespace

extern "C" {

const char* ldst_version(void) { return "0.1.0"; }

const char* ldst_last_error(void) { return g_last_error.c_str(); }

const char* ldst_status_name(int status) {
  if (status == LDST_OK) return "ok";
  return ErrorCodeName(static_cast<ErrorCode>(status));
}

void ldst_string_free(char* s) { std::free(s); }

ldst_status ldst_cache_path(const char* path, char** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = Dup(CachePath(path));
  });
}

ldst_status ldst_compute_lpc(int ipc, int factor, int c_lat, int* out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = ComputeLpc(ipc, factor, c_lat);
  });
}

ldst_status ldst_config_create(const char* path, ldst_config** out) {
  return Guard([&] {
    NotNull(out, "out");
    auto cfg = std::make_unique<ldst_config>();
    if (path != nullptr && *path != '\0') cfg->config = Config::FromFile(path);
    *out = cfg.release();
  });
}

ldst_status ldst_config_set(ldst_config* cfg, const char* key, const char* json_value) {
  return Guard([&] {
    NotNull(cfg, "config");
    NotNull(key, "key");
    NotNull(json_value, "value");
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(json_value);
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorCode::kConfig, std::string("config value for ") + key + ": " + e.what());
    }
    nlohmann::json root = cfg->config.root();
    nlohmann::json::json_pointer ptr;
    std::string k = key;
    size_t begin = 0;
    while (true) {
      const size_t dot = k.find('.', begin);
      ptr /= k.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
      if (dot == std::string::npos) break;
      begin = dot + 1;
    }
    root[ptr] = std::move(value);
    cfg->config = Config::FromString(root.dump());
  });
}

ldst_status ldst_config_get(const ldst_config* cfg, const char* key,
                            char** json_value) {
  return Guard([&] {
    NotNull(cfg, "config");
    NotNull(key, "key");
    NotNull(json_value, "json_value");
    const nlohmann::json* node = cfg->config.Find(key);
    *json_value = node != nullptr ? Dup(node->dump()) : nullptr;
  });
}

void ldst_config_free(ldst_config* cfg) { delete cfg; }

ldst_status ldst_dataset_load(const char* name, const char* root, int resolution,
                              const ldst_config* cfg, uint64_t seed,
                              ldst_dataset** out) {
  return Guard([&] {
    NotNull(name, "name");
    NotNull(out, "out");
    auto ds = std::make_unique<ldst_dataset>();
    ds->splits = LoadSplits(name, root != nullptr ? root : "", resolution,
                            ConfigOf(cfg), seed);
    *out = ds.release();
  });
}

ldst_status ldst_dataset_count(const ldst_dataset* ds, const char* split,
                               int64_t* out) {
  return Guard([&] {
    NotNull(out, "out");
    *out = Split(ds, split).count();
  });
}

ldst_status ldst_dataset_write_pixels(const ldst_dataset* ds, const char* split,
                                      const char* path) {
  return Guard([&] {
    NotNull(path, "path");
    WritePixelDataset(path, Split(ds, split));
  });
}

void ldst_dataset_free(ldst_dataset* ds) { delete ds; }

ldst_status ldst_codec_obtain(const char* name_or_path, const ldst_dataset* ds,
                              int factor, int c_lat, const ldst_config* cfg,
                              uint64_t seed, int train_if_missing, ldst_codec** out) {
  return Guard([&] {
    NotNull(name_or_path, "codec");
    NotNull(out, "out");
    static const RealImageDataset kNone;
    const RealImageDataset& train = ds != nullptr ? ds->splits.train : kNone;
    Require(!train_if_missing || ds != nullptr, ErrorCode::kInvalidArgument,
            "training a codec needs a dataset");
    auto c = std::make_unique<ldst_codec>();
    c->codec = ObtainCodec(name_or_path, train, factor, c_lat, ConfigOf(cfg), seed,
                           train_if_missing != 0);
    *out = c.release();
  });
}

ldst_status ldst_codec_fingerprint(const ldst_codec* codec, uint64_t* out) {
  return Guard([&] {
    NotNull(codec, "codec");
    NotNull(out, "out");
    *out = codec->codec->fingerprint();
  });
}

void ldst_codec_free(ldst_codec* codec) { delete codec; }

ldst_status ldst_latents_encode(const ldst_dataset* ds, const char* split,
                                const ldst_codec* codec, int pre_upsample,
                                ldst_latents** out) {
  return Guard([&] {
    NotNull(codec, "codec");
    NotNull(out, "out");
    auto lat = std::make_unique<ldst_latents>();
    lat->data = EncodeDataset(Split(ds, split), *codec->codec,
                              ResamplePolicy::Symmetric(pre_upsample));
    *out = lat.release();
  });
}

ldst_status ldst_latents_write(const ldst_latents* lat, const char* path) {
  return Guard([&] {
    NotNull(lat, "latents");
    NotNull(path, "path");
    WriteLatentCache(path, lat->data);
  });
}

ldst_status ldst_latents_read(const char* path, uint64_t expected_fingerprint,
                              ldst_latents** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    auto lat = std::make_unique<ldst_latents>();
    lat->data = ReadLatentCache(path, expected_fingerprint);
    *out = lat.release();
  });
}

ldst_status ldst_latents_info(const ldst_latents* lat, int64_t* count, int* c_lat,
                              int* effective_factor, uint64_t* codec_fingerprint) {
  return Guard([&] {
    NotNull(lat, "latents");
    if (count) *count = lat->data.count();
    if (c_lat) *c_lat = lat->data.c_lat;
    if (effective_factor) *effective_factor = lat->data.effective_factor();
    if (codec_fingerprint) *codec_fingerprint = lat->data.codec_fingerprint;
  });
}

void ldst_latents_free(ldst_latents* lat) { delete lat; }

ldst_status ldst_buffer_record(const ldst_latents* lat, const ldst_config* cfg,
                               uint64_t seed, int* skipped, ldst_buffer** out) {
  return Guard([&] {
    NotNull(lat, "latents");
    NotNull(out, "out");
    auto buf = std::make_unique<ldst_buffer>();
    buf->buffer = RunBuffer(lat->data, ConfigOf(cfg), seed, skipped);
    *out = buf.release();
  });
}

ldst_status ldst_buffer_write(const ldst_buffer* buf, const char* path) {
  return Guard([&] {
    NotNull(buf, "buffer");
    NotNull(path, "path");
    WriteTrajectoryBuffer(path, buf->buffer);
  });
}

ldst_status ldst_buffer_read(const char* path, const ldst_latents* lat,
                             ldst_buffer** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    auto buf = std::make_unique<ldst_buffer>();
    buf->buffer =
        ReadTrajectoryBuffer(path, lat != nullptr ? lat->data.ContentFingerprint() : 0);
    *out = buf.release();
  });
}

void ldst_buffer_free(ldst_buffer* buf) { delete buf; }

ldst_status ldst_distill(const ldst_latents* lat, const char* algo, int ipc,
                         int factor, const ldst_config* cfg, uint64_t seed,
                         const ldst_buffer* buf, ldst_synthetic** out,
                         char** trace_jsonl) {
  return Guard([&] {
    NotNull(lat, "latents");
    NotNull(algo, "algo");
    NotNull(out, "out");
    DistillResult result = RunDistill(lat->data, algo, ipc, factor, ConfigOf(cfg), seed,
                                      buf != nullptr ? &buf->buffer : nullptr);
    if (trace_jsonl) *trace_jsonl = Dup(result.trace.ToJsonLines());
    if (result.abort_reason) {
      if (trace_jsonl) {
        std::free(*trace_jsonl);
        *trace_jsonl = nullptr;
      }
      Fail(ErrorCode::kNumeric, *result.abort_reason);
    }
    auto syn = std::make_unique<ldst_synthetic>();
    syn->syn = std::move(result.syn);
    *out = syn.release();
  });
}

ldst_status ldst_synthetic_write(const ldst_synthetic* syn, const char* path) {
  return Guard([&] {
    NotNull(syn, "synthetic set");
    NotNull(path, "path");
    WriteSyntheticSet(path, syn->syn);
  });
}

ldst_status ldst_synthetic_read(const char* path, ldst_synthetic** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    auto syn = std::make_unique<ldst_synthetic>();
    syn->syn = ReadSyntheticSet(path);
    *out = syn.release();
  });
}

ldst_status ldst_synthetic_info(const ldst_synthetic* syn, int64_t* count, int* lpc,
                                int* num_classes) {
  return Guard([&] {
    NotNull(syn, "synthetic set");
    if (count) *count = syn->syn.count();
    if (lpc) *lpc = syn->syn.budget.lpc;
    if (num_classes) *num_classes = syn->syn.num_classes;
  });
}

void ldst_synthetic_free(ldst_synthetic* syn) { delete syn; }

ldst_status ldst_evaluate(const ldst_synthetic* syn, const ldst_codec* codec,
                          const ldst_dataset* ds, const ldst_config* cfg,
                          uint64_t seed, char** report_json) {
  return Guard([&] {
    NotNull(syn, "synthetic set");
    NotNull(codec, "codec");
    NotNull(report_json, "report_json");
    const EvalReport report = EvaluateSynthetic(
        syn->syn, *codec->codec, ResamplePolicy::Symmetric(syn->syn.pre_upsample),
        Split(ds, "test"), EvalProtocolFrom(ConfigOf(cfg), seed));
    *report_json = Dup(report.ToJsonLine());
  });
}

ldst_status ldst_bench(const ldst_dataset* ds, const ldst_codec* codec,
                       int pre_upsample, int ipc, const ldst_config* cfg,
                       uint64_t seed, const char* work_dir, char** report_jsonl) {
  return Guard([&] {
    NotNull(codec, "codec");
    NotNull(work_dir, "work_dir");
    NotNull(report_jsonl, "report_jsonl");
    const BenchOutcome outcome =
        RunBench(Split(ds, "train"), *codec->codec,
                 ResamplePolicy::Symmetric(pre_upsample), ipc, ConfigOf(cfg), seed,
                 work_dir);
    *report_jsonl = Dup(outcome.ToJsonLines());
  });
}

ldst_status ldst_report(const char* const* inputs, size_t num_inputs,
                        const char* out_dir, char** written) {
  return Guard([&] {
    NotNull(out_dir, "out_dir");
    Require(inputs != nullptr && num_inputs > 0, ErrorCode::kInvalidArgument,
            "report: no input files");
    std::vector<std::string> paths;
    for (size_t i = 0; i < num_inputs; ++i) {
      NotNull(inputs[i], "input path");
      paths.emplace_back(inputs[i]);
    }
    const auto files = WriteReport(ReadRecordFiles(paths), out_dir);
    if (written) {
      std::string list;
      for (const auto& f : files) list += f + "\n";
      *written = Dup(list);
    }
  });
}

ldst_status ldst_file_hash(const char* path, uint64_t* out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = FileHash(path);
  });
}

}  // extern "C"
