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

#include "ldistill/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>

#include "ldistill/error.hpp"

namespace ldistill {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace {

constexpr char kCacheMagic[4] = {'L', 'D', 'D', 'C'};

struct CacheHeader {
  CacheKind kind = CacheKind::kLatent;
  uint32_t codec_factor = 1;
  uint32_t pre_upsample = 1;
  uint32_t channels = 0;
  uint32_t height = 0;
  uint32_t width = 0;
  uint32_t num_classes = 0;
  uint64_t count = 0;
  uint64_t fingerprint = 0;
  std::vector<float> mean;
  std::vector<float> std;
};

void WriteHeader(BinaryWriter& w, const CacheHeader& h) {
  w.Bytes(kCacheMagic, 4);
  w.U32(kCacheVersion);
  w.U32(static_cast<uint32_t>(h.kind));
  w.U32(h.codec_factor);
  w.U32(h.pre_upsample);
  w.U32(h.channels);
  w.U32(h.height);
  w.U32(h.width);
  w.U32(h.num_classes);
  w.U64(h.count);
  w.U64(h.fingerprint);
  std::vector<float> mean = h.mean, std = h.std;
  mean.resize(h.channels, 0.0f);
  std.resize(h.channels, 1.0f);
  w.Floats(mean);
  w.Floats(std);
}

CacheHeader ReadHeader(BinaryReader& r) {
  char magic[4];
  r.Bytes(magic, 4);
  if (std::memcmp(magic, kCacheMagic, 4) != 0) {
    Fail(ErrorCode::kFormat, r.path() + ": not an LDDC cache file");
  }
  const uint32_t version = r.U32();
  if (version != kCacheVersion) {
    Fail(ErrorCode::kFormat, r.path() + ": unsupported cache version " +
                                 std::to_string(version));
  }
  CacheHeader h;
  const uint32_t kind = r.U32();
  if (kind > 2) Fail(ErrorCode::kFormat, r.path() + ": unknown cache kind");
  h.kind = static_cast<CacheKind>(kind);
  h.codec_factor = r.U32();
  h.pre_upsample = r.U32();
  h.channels = r.U32();
  h.height = r.U32();
  h.width = r.U32();
  h.num_classes = r.U32();
  h.count = r.U64();
  h.fingerprint = r.U64();
  if (h.channels == 0 || h.channels > 4096 || h.height == 0 || h.width == 0) {
    Fail(ErrorCode::kFormat, r.path() + ": corrupt cache header");
  }
  h.mean = r.Floats(h.channels);
  h.std = r.Floats(h.channels);
  return h;
}

void CheckPayload(BinaryReader& r, const CacheHeader& h) {
  const uint64_t item = uint64_t{h.channels} * h.height * h.width;
  const uint64_t expected = h.count * 4 + h.count * item * 4;
  if (r.Remaining() != expected) {
    Fail(ErrorCode::kFormat,
         r.path() + ": declared count " + std::to_string(h.count) +
             " does not match the label and data blocks");
  }
}

Tensor ReadData(BinaryReader& r, const CacheHeader& h) {
  const uint64_t item = uint64_t{h.channels} * h.height * h.width;
  return Tensor::FromData({static_cast<int64_t>(h.count), h.channels, h.height,
                           h.width},
                          r.Floats(h.count * item));
}

std::vector<int> ReadLabels(BinaryReader& r, const CacheHeader& h) {
  std::vector<int> labels = r.Ints(h.count);
  for (int y : labels) {
    if (y < 0 || static_cast<uint32_t>(y) >= h.num_classes) {
      Fail(ErrorCode::kFormat, r.path() + ": label out of range");
    }
  }
  return labels;
}

CacheHeader ExpectKind(BinaryReader& r, CacheKind kind, const char* what) {
  CacheHeader h = ReadHeader(r);
  if (h.kind != kind) {
    Fail(ErrorCode::kFormat, r.path() + ": expected a " + what + " file");
  }
  return h;
}

}  // namespace

BinaryWriter::BinaryWriter(const std::string& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) Fail(ErrorCode::kIo, "cannot open " + path + " for writing");
}

void BinaryWriter::U32(uint32_t v) { Bytes(&v, sizeof v); }
void BinaryWriter::U64(uint64_t v) { Bytes(&v, sizeof v); }
void BinaryWriter::F32(float v) { Bytes(&v, sizeof v); }
void BinaryWriter::F64(double v) { Bytes(&v, sizeof v); }

void BinaryWriter::Bytes(const void* data, size_t size) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out_) Fail(ErrorCode::kIo, "write failed: " + path_);
}

void BinaryWriter::String(const std::string& s) {
  U32(static_cast<uint32_t>(s.size()));
  Bytes(s.data(), s.size());
}

void BinaryWriter::Floats(std::span<const float> values) {
  Bytes(values.data(), values.size_bytes());
}

void BinaryWriter::Ints(std::span<const int> values) {
  static_assert(sizeof(int) == 4);
  Bytes(values.data(), values.size_bytes());
}

void BinaryWriter::Close() {
  out_.flush();
  if (!out_) Fail(ErrorCode::kIo, "flush failed: " + path_);
  out_.close();
}

BinaryReader::BinaryReader(const std::string& path)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) Fail(ErrorCode::kIo, "cannot open " + path);
}

uint32_t BinaryReader::U32() {
  uint32_t v;
  Bytes(&v, sizeof v);
  return v;
}

uint64_t BinaryReader::U64() {
  uint64_t v;
  Bytes(&v, sizeof v);
  return v;
}

float BinaryReader::F32() {
  float v;
  Bytes(&v, sizeof v);
  return v;
}

double BinaryReader::F64() {
  double v;
  Bytes(&v, sizeof v);
  return v;
}

void BinaryReader::Bytes(void* data, size_t size) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (static_cast<size_t>(in_.gcount()) != size) {
    Fail(ErrorCode::kFormat, path_ + ": unexpected end of file");
  }
}

std::string BinaryReader::String(size_t max_size) {
  const uint32_t n = U32();
  if (n > max_size) Fail(ErrorCode::kFormat, path_ + ": string too long");
  std::string s(n, '\0');
  Bytes(s.data(), n);
  return s;
}

std::vector<float> BinaryReader::Floats(size_t count) {
  if (count * 4 > Remaining()) {
    Fail(ErrorCode::kFormat, path_ + ": truncated float block");
  }
  std::vector<float> v(count);
  Bytes(v.data(), count * sizeof(float));
  return v;
}

std::vector<int> BinaryReader::Ints(size_t count) {
  if (count * 4 > Remaining()) {
    Fail(ErrorCode::kFormat, path_ + ": truncated integer block");
  }
  std::vector<int> v(count);
  Bytes(v.data(), count * sizeof(int));
  return v;
}

uint64_t BinaryReader::Remaining() {
  const auto here = in_.tellg();
  in_.seekg(0, std::ios::end);
  const auto end = in_.tellg();
  in_.seekg(here);
  return static_cast<uint64_t>(end - here);
}

void WriteLatentCache(const std::string& path, const LatentDataset& data) {
  data.Validate();
  CacheHeader h;
  h.kind = CacheKind::kLatent;
  h.codec_factor = data.codec_factor;
  h.pre_upsample = data.pre_upsample;
  h.channels = data.c_lat;
  h.height = data.height();
  h.width = data.width();
  h.num_classes = data.num_classes;
  h.count = data.count();
  h.fingerprint = data.codec_fingerprint;
  h.mean = data.channel_mean;
  h.std = data.channel_std;
  BinaryWriter w(path);
  WriteHeader(w, h);
  w.Ints(data.labels);
  w.Floats(data.latents.data());
  w.Close();
}

LatentDataset ReadLatentCache(const std::string& path,
                              uint64_t expected_fingerprint) {
  BinaryReader r(path);
  CacheHeader h = ExpectKind(r, CacheKind::kLatent, "latent cache");
  if (expected_fingerprint != 0 && h.fingerprint != expected_fingerprint) {
    Fail(ErrorCode::kFingerprint,
         path + ": cache was built with a different codec; rebuild it with "
                "build-latents using the current codec");
  }
  CheckPayload(r, h);
  LatentDataset d;
  d.labels = ReadLabels(r, h);
  d.latents = ReadData(r, h);
  d.num_classes = static_cast<int>(h.num_classes);
  d.codec_factor = static_cast<int>(h.codec_factor);
  d.pre_upsample = static_cast<int>(h.pre_upsample);
  d.c_lat = static_cast<int>(h.channels);
  d.codec_fingerprint = h.fingerprint;
  d.channel_mean = h.mean;
  d.channel_std = h.std;
  d.Validate();
  return d;
}

void WriteSyntheticSet(const std::string& path, const SyntheticLatentSet& syn) {
  syn.Validate();
  CacheHeader h;
  h.kind = CacheKind::kSynthetic;
  h.codec_factor = syn.codec_factor;
  h.pre_upsample = syn.pre_upsample;
  h.channels = static_cast<uint32_t>(syn.latents.dim(1));
  h.height = static_cast<uint32_t>(syn.latents.dim(2));
  h.width = static_cast<uint32_t>(syn.latents.dim(3));
  h.num_classes = syn.num_classes;
  h.count = syn.count();
  h.fingerprint = syn.codec_fingerprint;
  h.mean = syn.channel_mean;
  h.std = syn.channel_std;
  BinaryWriter w(path);
  WriteHeader(w, h);
  w.U32(syn.budget.ipc);
  w.U32(syn.budget.factor);
  w.U32(syn.budget.c_lat);
  w.U32(syn.budget.img_channels);
  w.U32(syn.budget.lpc);
  w.U64(syn.seed);
  w.String(syn.algorithm);
  w.U64(static_cast<uint64_t>(syn.iterations));
  w.Ints(syn.labels);
  w.Floats(syn.latents.data());
  w.Close();
}

SyntheticLatentSet ReadSyntheticSet(const std::string& path) {
  BinaryReader r(path);
  CacheHeader h = ExpectKind(r, CacheKind::kSynthetic, "synthetic set");
  SyntheticLatentSet syn;
  syn.budget.ipc = static_cast<int>(r.U32());
  syn.budget.factor = static_cast<int>(r.U32());
  syn.budget.c_lat = static_cast<int>(r.U32());
  syn.budget.img_channels = static_cast<int>(r.U32());
  syn.budget.lpc = static_cast<int>(r.U32());
  syn.seed = r.U64();
  syn.algorithm = r.String(256);
  syn.iterations = static_cast<int64_t>(r.U64());
  CheckPayload(r, h);
  syn.labels = ReadLabels(r, h);
  syn.latents = ReadData(r, h);
  syn.num_classes = static_cast<int>(h.num_classes);
  syn.codec_factor = static_cast<int>(h.codec_factor);
  syn.pre_upsample = static_cast<int>(h.pre_upsample);
  syn.codec_fingerprint = h.fingerprint;
  syn.channel_mean = h.mean;
  syn.channel_std = h.std;
  syn.Validate();
  return syn;
}

void WritePixelDataset(const std::string& path, const RealImageDataset& data) {
  data.Validate();
  CacheHeader h;
  h.kind = CacheKind::kPixel;
  h.channels = data.channels();
  h.height = data.height();
  h.width = data.width();
  h.num_classes = data.num_classes;
  h.count = data.count();
  BinaryWriter w(path);
  WriteHeader(w, h);
  w.Ints(data.labels);
  w.Floats(data.images.data());
  w.Close();
}

RealImageDataset ReadPixelDataset(const std::string& path) {
  BinaryReader r(path);
  CacheHeader h = ExpectKind(r, CacheKind::kPixel, "pixel dataset");
  CheckPayload(r, h);
  RealImageDataset d;
  d.labels = ReadLabels(r, h);
  d.images = ReadData(r, h);
  d.num_classes = static_cast<int>(h.num_classes);
  d.Validate();
  return d;
}

CacheKind PeekCacheKind(const std::string& path) {
  BinaryReader r(path);
  return ReadHeader(r).kind;
}

uint64_t FileSize(const std::string& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) Fail(ErrorCode::kIo, "cannot stat " + path + ": " + ec.message());
  return static_cast<uint64_t>(size);
}

uint64_t FileHash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path);
  std::vector<char> buf(1 << 16);
  uint64_t h = 0xcbf29ce484222325ULL;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = Fnv1a64(buf.data(), static_cast<size_t>(in.gcount()), h);
  }
  return h;
}

}  // namespace ldistill
