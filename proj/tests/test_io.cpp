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

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ldistill/distill.hpp"
#include "ldistill/error.hpp"
#include "ldistill/io.hpp"
#include "oracles.hpp"

using namespace ldistill;
using namespace ldistill::testing;

namespace {

std::vector<unsigned char> Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void Spit(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

// Byte offset of the 64-bit item count in an LDDC header.
constexpr size_t kCountOffset = 36;

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("latent cache round trip is bitwise") {
    LatentDataset d = Blobs(3, 5, 4, 8, 1.0, 2);
    d.pre_upsample = 2;
    const std::string path = TempPath("cache.lddc");
    WriteLatentCache(path, d);
    const LatentDataset back = ReadLatentCache(path, d.codec_fingerprint);
    CHECK(back.labels == d.labels);
    CHECK(back.latents.shape() == d.latents.shape());
    CHECK(std::memcmp(back.latents.data().data(), d.latents.data().data(),
                      d.latents.numel() * sizeof(float)) == 0);
    CHECK(back.codec_factor == 4);
    CHECK(back.pre_upsample == 2);
    CHECK(back.effective_factor() == 2);
    CHECK(back.codec_fingerprint == d.codec_fingerprint);
    CHECK(back.channel_mean == d.channel_mean);
    CHECK(back.channel_std == d.channel_std);
    CHECK(PeekCacheKind(path) == CacheKind::kLatent);
    // Little-endian header fields.
    const auto bytes = Slurp(path);
    CHECK(std::memcmp(bytes.data(), "LDDC", 4) == 0);
    CHECK(bytes[4] == kCacheVersion);
    CHECK(bytes[5] == 0);
    CHECK(bytes[kCountOffset] == 15);
    std::filesystem::remove(path);
  }

  TEST_CASE("latent cache rejects corrupt or foreign files") {
    const LatentDataset d = Blobs(2, 3, 2, 4, 1.0, 3);
    const std::string path = TempPath("cache.lddc");
    WriteLatentCache(path, d);
    auto bytes = Slurp(path);

    try {
      ReadLatentCache(path, d.codec_fingerprint + 1);
      FAIL("expected a fingerprint error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kFingerprint);
      CHECK(std::string(e.what()).find("rebuild it with build-latents") != std::string::npos);
    }
    CHECK(CodeOf([&] { ReadSyntheticSet(path); }) == ErrorCode::kFormat);

    auto more = bytes;
    more[kCountOffset] += 1;
    Spit(path, more);
    CHECK(CodeOf([&] { ReadLatentCache(path); }) == ErrorCode::kFormat);

    auto magic = bytes;
    magic[0] = 'X';
    Spit(path, magic);
    CHECK(CodeOf([&] { ReadLatentCache(path); }) == ErrorCode::kFormat);

    auto cut = bytes;
    cut.resize(20);
    Spit(path, cut);
    CHECK(CodeOf([&] { ReadLatentCache(path); }) == ErrorCode::kFormat);

    std::filesystem::remove(path);
    CHECK(CodeOf([&] { ReadLatentCache(path); }) == ErrorCode::kIo);
  }

  TEST_CASE("synthetic set round trip") {
    const LatentDataset d = Blobs(2, 20, 4, 4, 1.0, 4);
    SyntheticLatentSet syn = InitSynthetic(d, BudgetSpec::Make(1, 4, 4), 9);
    syn.algorithm = "dm";
    syn.iterations = 17;
    const std::string path = TempPath("syn.lddc");
    WriteSyntheticSet(path, syn);
    const SyntheticLatentSet back = ReadSyntheticSet(path);
    CHECK(HashFloats(back.latents.data()) == HashFloats(syn.latents.data()));
    CHECK(back.labels == syn.labels);
    CHECK(back.budget.lpc == 12);
    CHECK(back.budget.ipc == 1);
    CHECK(back.budget.factor == 4);
    CHECK(back.seed == 9);
    CHECK(back.algorithm == "dm");
    CHECK(back.iterations == 17);
    CHECK(back.codec_fingerprint == d.codec_fingerprint);
    CHECK(back.channel_mean == syn.channel_mean);
    CHECK(PeekCacheKind(path) == CacheKind::kSynthetic);
    const uint64_t h = FileHash(path);
    WriteSyntheticSet(path, back);
    CHECK(FileHash(path) == h);
    std::filesystem::remove(path);
  }

  TEST_CASE("pixel dataset round trip") {
    RealImageDataset d;
    d.images = RandomTensor({6, 3, 4, 4}, 5);
    d.labels = {0, 1, 2, 0, 1, 2};
    d.num_classes = 3;
    const std::string path = TempPath("pix.lddc");
    WritePixelDataset(path, d);
    const RealImageDataset back = ReadPixelDataset(path);
    CHECK(back.labels == d.labels);
    CHECK(HashFloats(back.images.data()) == HashFloats(d.images.data()));
    CHECK(FileSize(path) == Slurp(path).size());
    CHECK(CodeOf([&] { ReadLatentCache(path); }) == ErrorCode::kFormat);
    std::filesystem::remove(path);
  }

  TEST_CASE("loss trace records round trip") {
    LossTrace t;
    t.algorithm = "dc";
    t.records = {{0, 0, 1.5}, {0, 1, 1.25}, {1, 0, std::nan("")}};
    const LossTrace back = LossTrace::FromJsonLines(t.ToJsonLines());
    CHECK(back.algorithm == "dc");
    REQUIRE(back.records.size() == 3);
    CHECK(back.records[1].outer == 1);
    CHECK(back.records[1].loss == 1.25);
    CHECK(std::isnan(back.records[2].loss));
    CHECK(CodeOf([] { LossTrace::FromJsonLines("{\"type\":\"trace\"}\n"); }) ==
          ErrorCode::kFormat);
  }
}
