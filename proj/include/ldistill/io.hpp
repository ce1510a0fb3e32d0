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

// Little-endian binary streams and the on-disk containers: latent caches,
// synthetic sets, pixel datasets, and expert trajectory buffers.

#ifndef LDISTILL_IO_HPP_
#define LDISTILL_IO_HPP_

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ldistill/data_model.hpp"

namespace ldistill {

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);
  void U32(uint32_t v);
  void U64(uint64_t v);
  void I32(int32_t v) { U32(static_cast<uint32_t>(v)); }
  void F32(float v);
  void F64(double v);
  void Bytes(const void* data, size_t size);
  void String(const std::string& s);
  void Floats(std::span<const float> values);
  void Ints(std::span<const int> values);
  // Flushes and reports write errors.
  void Close();

 private:
  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);
  uint32_t U32();
  uint64_t U64();
  int32_t I32() { return static_cast<int32_t>(U32()); }
  float F32();
  double F64();
  void Bytes(void* data, size_t size);
  std::string String(size_t max_size = 1 << 20);
  std::vector<float> Floats(size_t count);
  std::vector<int> Ints(size_t count);
  // Bytes left until end of file.
  uint64_t Remaining();
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
};

// Container kinds sharing the "LDDC" layout.
enum class CacheKind : uint32_t { kLatent = 0, kSynthetic = 1, kPixel = 2 };

inline constexpr uint32_t kCacheVersion = 1;
inline constexpr uint32_t kBufferVersion = 1;

void WriteLatentCache(const std::string& path, const LatentDataset& data);
// `expected_fingerprint` (non-zero) is checked against the header.
LatentDataset ReadLatentCache(const std::string& path,
                              uint64_t expected_fingerprint = 0);

void WriteSyntheticSet(const std::string& path, const SyntheticLatentSet& syn);
SyntheticLatentSet ReadSyntheticSet(const std::string& path);

void WritePixelDataset(const std::string& path, const RealImageDataset& data);
RealImageDataset ReadPixelDataset(const std::string& path);

// Reads only the kind field of an LDDC file.
CacheKind PeekCacheKind(const std::string& path);

uint64_t FileSize(const std::string& path);
uint64_t FileHash(const std::string& path);

}  // namespace ldistill

#endif  // LDISTILL_IO_HPP_
