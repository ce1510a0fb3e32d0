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


// Exercises the shared library through its C interface and the command line
// end to end.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ldistill/ldistill.h"

namespace fs = std::filesystem;

namespace {

std::string Take(char* s) {
  std::string out = s != nullptr ? s : "";
  ldst_string_free(s);
  return out;
}

// Runs the CLI with `args`, returning its exit code; output goes to `log`.
int Cli(const std::string& args, const std::string& log = "/dev/null") {
  const std::string cmd = std::string(LDISTILL_CLI_PATH) + " " + args + " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

uint64_t Hash(const std::string& path) {
  uint64_t h = 0;
  REQUIRE(ldst_file_hash(path.c_str(), &h) == LDST_OK);
  return h;
}

// Small desk split, tiny networks, one-epoch codec.
const char* kConfig = R"({
  "desk": {"train_per_class": 24, "test_per_class": 4},
  "codec": {"epochs": 1, "max_width": 8, "max_train_items": 120},
  "net": {"width": 8},
  "dc": {"iterations": 2, "outer_loop": 2, "inner_loop": 2, "batch": 8},
  "dm": {"iterations": 4, "batch": 8},
  "mtt": {"iterations": 3, "max_start": 1, "expert_epochs": 1, "student_steps": 2, "batch": 8},
  "buffer": {"experts": 2, "batch": 16},
  "eval": {"epochs": 1, "width": 8, "batch": 32},
  "bench": {"iterations": 1}
})";

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("ldistill_capi_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    std::ofstream(dir / "config.json") << kConfig;
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("status codes, version and budget arithmetic") {
  CHECK(std::strlen(ldst_version()) > 0);
  CHECK(std::string(ldst_status_name(LDST_OK)) == "ok");
  CHECK(std::string(ldst_status_name(LDST_FINGERPRINT)) == "fingerprint");
  int lpc = 0;
  CHECK(ldst_compute_lpc(1, 4, 4, &lpc) == LDST_OK);
  CHECK(lpc == 12);
  CHECK(ldst_compute_lpc(10, 4, 4, &lpc) == LDST_OK);
  CHECK(lpc == 120);
  CHECK(ldst_compute_lpc(1, 8, 4, &lpc) == LDST_OK);
  CHECK(lpc == 48);
  CHECK(ldst_compute_lpc(0, 4, 4, &lpc) == LDST_DOMAIN);
  CHECK(std::strlen(ldst_last_error()) > 0);
  CHECK(ldst_compute_lpc(1, 4, 4, nullptr) == LDST_INVALID_ARGUMENT);
}

TEST_CASE("config handles") {
  ldst_config* cfg = nullptr;
  REQUIRE(ldst_config_create(nullptr, &cfg) == LDST_OK);
  CHECK(ldst_config_set(cfg, "dc.iterations", "12") == LDST_OK);
  CHECK(ldst_config_set(cfg, "dc.match_loss", "\"cosine\"") == LDST_OK);
  char* v = nullptr;
  REQUIRE(ldst_config_get(cfg, "dc.iterations", &v) == LDST_OK);
  CHECK(Take(v) == "12");
  REQUIRE(ldst_config_get(cfg, "dc.match_loss", &v) == LDST_OK);
  CHECK(Take(v) == "\"cosine\"");
  REQUIRE(ldst_config_get(cfg, "dm.iterations", &v) == LDST_OK);
  CHECK(v == nullptr);
  CHECK(ldst_config_set(cfg, "dc.iterations", "{oops") == LDST_CONFIG);
  ldst_config_free(cfg);
  CHECK(ldst_config_create("/nonexistent/cfg.json", &cfg) != LDST_OK);
}

TEST_CASE("errors cross the boundary as codes") {
  ldst_latents* lat = nullptr;
  CHECK(ldst_latents_read("/nonexistent/cache.lddc", 0, &lat) == LDST_IO);
  CHECK(std::string(ldst_last_error()).find("/nonexistent/cache.lddc") != std::string::npos);
  CHECK(lat == nullptr);
  ldst_dataset* ds = nullptr;
  CHECK(ldst_dataset_load("nope", "", 0, nullptr, 0, &ds) == LDST_CONFIG);
  CHECK(ldst_distill(nullptr, "dc", 1, 4, nullptr, 0, nullptr, nullptr, nullptr) ==
        LDST_INVALID_ARGUMENT);
}

TEST_CASE("command line end to end") {
  const Workspace ws;
  const std::string cfg = "--config " + ws / "config.json";
  const std::string codec = ws / "codec.ldck";
  const std::string cache = ws / "train.lddc", test_cache = ws / "test.lddc";

  CHECK(Cli("") == 2);
  CHECK(Cli("distill --bogus") != 0);
  CHECK(Cli("build-latents " + cfg + " --codec " + codec + " --train-codec --factor 4 --pre-upsample 2 --out " +
            cache) == 0);
  REQUIRE(fs::exists(codec));
  CHECK(Cli("build-latents " + cfg + " --codec " + codec + " --split test --pre-upsample 2 --out " +
            test_cache) == 0);

  ldst_latents* lat = nullptr;
  REQUIRE(ldst_latents_read(cache.c_str(), 0, &lat) == LDST_OK);
  int64_t count = 0;
  int c_lat = 0, eff = 0;
  REQUIRE(ldst_latents_info(lat, &count, &c_lat, &eff, nullptr) == LDST_OK);
  CHECK(count == 240);
  CHECK(c_lat == 4);
  CHECK(eff == 4);
  ldst_latents_free(lat);

  // DM at IPC 1 on a c_lat=4, f=4 cache: 12 latents per class.
  const std::string syn = ws / "dm.lddc";
  REQUIRE(Cli("distill " + cfg + " --cache " + cache + " --algo dm --ipc 1 --factor 4 --seed 3 --out " +
              syn) == 0);
  ldst_synthetic* s = nullptr;
  REQUIRE(ldst_synthetic_read(syn.c_str(), &s) == LDST_OK);
  int lpc = 0, k = 0;
  REQUIRE(ldst_synthetic_info(s, &count, &lpc, &k) == LDST_OK);
  CHECK(lpc == 12);
  CHECK(k == 10);
  CHECK(count == 120);
  ldst_synthetic_free(s);
  CHECK(fs::exists(syn + ".trace.jsonl"));

  // Same seed and config: bitwise-identical file.
  const uint64_t first = Hash(syn);
  REQUIRE(Cli("distill " + cfg + " --cache " + cache + " --algo dm --ipc 1 --factor 4 --seed 3 --out " +
              syn) == 0);
  CHECK(Hash(syn) == first);
  REQUIRE(Cli("distill " + cfg + " --cache " + cache + " --algo dm --ipc 1 --factor 4 --seed 4 --out " +
              ws / "dm4.lddc") == 0);
  CHECK(Hash(ws / "dm4.lddc") != first);
  // Flag beats config.
  REQUIRE(Cli("distill " + cfg + " --cache " + cache + " --algo dc --iterations 1 --out " + ws / "dc.lddc") == 0);
  CHECK(ReadText(ws / "dc.lddc.trace.jsonl").find("\"iteration\":1") == std::string::npos);
  CHECK(Cli("distill " + cfg + " --cache " + cache + " --algo dm --factor 2 --out " + ws / "x.lddc") == 1);

  const std::string evals = ws / "eval.jsonl";
  REQUIRE(Cli("eval " + cfg + " --syn " + syn + " --codec " + codec + " --runs 5 --out " + evals) == 0);
  const auto report = nlohmann::json::parse(ReadText(evals));
  CHECK(report["type"] == "eval_report");
  CHECK(report["accuracies"].size() == 5);

  // MTT with a buffer from the same cache; a foreign buffer is refused.
  const std::string buf = ws / "experts.ldtb", other = ws / "other.ldtb";
  REQUIRE(Cli("buffer " + cfg + " --cache " + cache + " --out " + buf) == 0);
  REQUIRE(Cli("buffer " + cfg + " --cache " + test_cache + " --out " + other) == 0);
  CHECK(Cli("distill " + cfg + " --cache " + cache + " --algo mtt --buffer " + buf + " --out " +
            ws / "mtt.lddc") == 0);
  const std::string log = ws / "mtt_err.log";
  CHECK(Cli("distill " + cfg + " --cache " + cache + " --algo mtt --buffer " + other + " --out " +
                ws / "mtt2.lddc",
            log) == 1);
  CHECK(ReadText(log).find("rerun the buffer command") != std::string::npos);
  CHECK(Cli("distill " + cfg + " --cache " + test_cache + " --algo mtt --out " + ws / "mtt3.lddc") == 1);

  const std::string bench = ws / "bench.jsonl";
  REQUIRE(Cli("bench " + cfg + " --codec " + codec + " --work-dir " + ws / "bench" + " --out " + bench) == 0);
  CHECK(ReadText(bench).find("\"bench_compare\"") != std::string::npos);

  REQUIRE(Cli("report --inputs " + syn + ".trace.jsonl " + evals + " " + bench + " --out-dir " +
              ws / "report") == 0);
  CHECK(fs::exists(ws / "report/summary.md"));
  CHECK(fs::exists(ws / "report/trace_dm.svg"));

  // Relative cache paths land under $LDISTILL_CACHE_DIR.
  const std::string cache_dir = ws / "cache_dir";
  const std::string env_cmd = "LDISTILL_CACHE_DIR=" + cache_dir + " " + LDISTILL_CLI_PATH +
                              " distill " + cfg + " --cache " + cache +
                              " --algo dm --out rel.lddc >/dev/null 2>&1";
  CHECK(std::system(env_cmd.c_str()) == 0);
  CHECK(fs::exists(cache_dir + "/rel.lddc"));
  CHECK(fs::exists(cache_dir + "/rel.lddc.trace.jsonl"));
}

TEST_CASE("cache directory resolution") {
  char* out = nullptr;
  ::unsetenv("LDISTILL_CACHE_DIR");
  REQUIRE(ldst_cache_path("a/b.lddc", &out) == LDST_OK);
  CHECK(Take(out) == "a/b.lddc");
  const fs::path dir = fs::temp_directory_path() / ("ldistill_cache_" + std::to_string(::getpid()));
  ::setenv("LDISTILL_CACHE_DIR", dir.c_str(), 1);
  REQUIRE(ldst_cache_path("b.lddc", &out) == LDST_OK);
  CHECK(Take(out) == (dir / "b.lddc").string());
  CHECK(fs::is_directory(dir));
  REQUIRE(ldst_cache_path("/abs/c.lddc", &out) == LDST_OK);
  CHECK(Take(out) == "/abs/c.lddc");
  CHECK(ldst_cache_path(nullptr, &out) != LDST_OK);
  ::unsetenv("LDISTILL_CACHE_DIR");
  fs::remove_all(dir);
}
