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

#include "ldistill/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include <spdlog/spdlog.h>

#include "ldistill/error.hpp"
#include "ldistill/io.hpp"
#include "ldistill/ops.hpp"
#include "ldistill/optim.hpp"
#include "ldistill/rng.hpp"

namespace ldistill {

namespace {

constexpr char kCodecMagic[4] = {'L', 'D', 'C', 'K'};
constexpr uint32_t kCodecVersion = 1;

bool IsPowerOfTwo(int v) { return v > 0 && std::has_single_bit(static_cast<unsigned>(v)); }

int Log2(int v) { return std::countr_zero(static_cast<unsigned>(v)); }

// Conv weight/bias shapes in the order the forward passes consume them.
std::vector<Shape> CodecShapes(const ConvCodecSpec& spec) {
  std::vector<Shape> shapes;
  auto conv = [&](int64_t out, int64_t in) {
    shapes.push_back({out, in, 3, 3});
    shapes.push_back({out});
  };
  const int levels = spec.levels();
  conv(spec.WidthAt(0), 3);
  for (int l = 1; l <= levels; ++l) conv(spec.WidthAt(l), spec.WidthAt(l - 1));
  conv(spec.c_lat, spec.WidthAt(levels));
  conv(spec.WidthAt(levels), spec.c_lat);
  for (int l = levels; l >= 1; --l) conv(spec.WidthAt(l - 1), spec.WidthAt(l));
  conv(3, spec.WidthAt(0));
  return shapes;
}

size_t EncoderParamCount(const ConvCodecSpec& spec) {
  return 2 * static_cast<size_t>(spec.levels() + 2);
}

Tensor ConvBias(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  return ops::BiasAdd(ops::Conv2d(x, w, stride, 1), b);
}

Tensor Item(const Tensor& batch, int64_t i) {
  const int64_t per = batch.numel() / batch.dim(0);
  Shape shape = batch.shape();
  shape[0] = 1;
  auto src = batch.data().subspan(static_cast<size_t>(i * per),
                                  static_cast<size_t>(per));
  return Tensor::FromData(shape, std::vector<float>(src.begin(), src.end()));
}

Tensor Gather(const Tensor& batch, std::span<const int64_t> rows) {
  const int64_t per = batch.numel() / batch.dim(0);
  Shape shape = batch.shape();
  shape[0] = static_cast<int64_t>(rows.size());
  std::vector<float> out(static_cast<size_t>(shape[0] * per));
  const auto src = batch.data();
  for (size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(src.begin() + rows[r] * per, per, out.begin() + r * per);
  }
  return Tensor::FromData(shape, std::move(out));
}

// Runs `fn` on each item separately and stacks the outputs.
template <typename Fn>
Tensor PerItem(const Tensor& batch, Fn fn) {
  NoGradGuard no_grad;
  const int64_t n = batch.dim(0);
  std::vector<float> out;
  Shape shape;
  for (int64_t i = 0; i < n; ++i) {
    Tensor y = fn(Item(batch, i));
    if (i == 0) {
      shape = y.shape();
      shape[0] = n;
      out.reserve(static_cast<size_t>(y.numel() * n));
    }
    out.insert(out.end(), y.data().begin(), y.data().end());
  }
  if (n == 0) Fail(ErrorCode::kShape, "codec: empty batch");
  return Tensor::FromData(shape, std::move(out));
}

double MeanSquaredError(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return a.empty() ? 0.0 : acc / static_cast<double>(a.size());
}

}  // namespace

void ResamplePolicy::Validate(int codec_factor) const {
  Require(pre_upsample == post_downsample, ErrorCode::kDomain,
          "resample policy: pre_upsample (" + std::to_string(pre_upsample) +
              ") must equal post_downsample (" +
              std::to_string(post_downsample) + ")");
  Require(IsPowerOfTwo(pre_upsample), ErrorCode::kDomain,
          "resample policy: factors must be powers of two");
  Require(codec_factor >= pre_upsample && codec_factor % pre_upsample == 0,
          ErrorCode::kDomain,
          "resample policy: codec factor " + std::to_string(codec_factor) +
              " is not a multiple of pre_upsample " +
              std::to_string(pre_upsample));
}

int ResamplePolicy::EffectiveFactor(int codec_factor) const {
  Validate(codec_factor);
  return codec_factor / pre_upsample;
}

uint64_t IdentityCodec::fingerprint() const {
  const std::string tag = "identity/" + std::to_string(channels_);
  return Fnv1a64(tag.data(), tag.size());
}

Tensor IdentityCodec::Encode(const Tensor& images) const {
  Require(images.rank() == 4 && images.dim(1) == channels_, ErrorCode::kShape,
          "identity codec: expected " + std::to_string(channels_) +
              "-channel images, got " + ShapeToString(images.shape()));
  return images.clone();
}

Tensor IdentityCodec::Decode(const Tensor& latents) const {
  Require(latents.rank() == 4 && latents.dim(1) == channels_, ErrorCode::kShape,
          "identity codec: expected " + std::to_string(channels_) +
              "-channel latents, got " + ShapeToString(latents.shape()));
  return latents.clone();
}

void IdentityCodec::Save(const std::string&) const {
  Fail(ErrorCode::kInvalidArgument,
       "the identity codec is built in; refer to it by the name \"identity\"");
}

int ConvCodecSpec::levels() const { return Log2(factor); }

int ConvCodecSpec::WidthAt(int level) const {
  return std::min(max_width, base_width << level);
}

void ConvCodecSpec::Validate() const {
  Require(factor == 2 || factor == 4 || factor == 8, ErrorCode::kDomain,
          "toy codec: factor must be 2, 4 or 8, got " + std::to_string(factor));
  Require(c_lat >= 1, ErrorCode::kDomain, "toy codec: c_lat must be positive");
  Require(c_lat < 3 * factor * factor, ErrorCode::kDomain,
          "toy codec: c_lat " + std::to_string(c_lat) + " >= 3*f^2 = " +
              std::to_string(3 * factor * factor) + " gives no compression");
  Require(base_width >= 1 && max_width >= base_width, ErrorCode::kDomain,
          "toy codec: invalid widths");
}

ConvCodec::ConvCodec(ConvCodecSpec spec, std::vector<Tensor> params,
                     double val_mse)
    : spec_(spec), params_(std::move(params)), val_mse_(val_mse) {
  spec_.Validate();
  const auto shapes = CodecShapes(spec_);
  Require(shapes.size() == params_.size(), ErrorCode::kShape,
          "toy codec: parameter count mismatch");
  for (size_t i = 0; i < shapes.size(); ++i) {
    Require(params_[i].shape() == shapes[i], ErrorCode::kShape,
            "toy codec: parameter " + std::to_string(i) + " has shape " +
                ShapeToString(params_[i].shape()) + ", expected " +
                ShapeToString(shapes[i]));
  }
  Refingerprint();
}

ConvCodec ConvCodec::Random(const ConvCodecSpec& spec, uint64_t seed) {
  spec.Validate();
  Rng rng(seed);
  std::vector<Tensor> params;
  for (const Shape& shape : CodecShapes(spec)) {
    std::vector<float> v(static_cast<size_t>(NumElements(shape)));
    if (shape.size() == 4) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(shape[1] * 9));
      for (float& x : v) x = static_cast<float>(rng.Uniform(-bound, bound));
    }
    params.push_back(Tensor::FromData(shape, std::move(v)));
  }
  return ConvCodec(spec, std::move(params), 0.0);
}

void ConvCodec::Refingerprint() {
  uint64_t h = Fnv1a64(kCodecMagic, 4);
  const int32_t fields[] = {spec_.factor, spec_.c_lat, spec_.base_width,
                            spec_.max_width};
  h = Fnv1a64(fields, sizeof fields, h);
  for (const Tensor& p : params_) h = HashFloats(p.data(), h);
  fingerprint_ = h == 0 ? 1 : h;
}

Tensor ConvCodec::EncodeBatch(const Tensor& images) const {
  Require(images.rank() == 4 && images.dim(1) == 3, ErrorCode::kShape,
          "toy codec: expected (n, 3, H, W) images, got " +
              ShapeToString(images.shape()));
  Require(images.dim(2) % spec_.factor == 0 && images.dim(3) % spec_.factor == 0,
          ErrorCode::kShape,
          "toy codec: image size " + std::to_string(images.dim(2)) + "x" +
              std::to_string(images.dim(3)) + " not divisible by f=" +
              std::to_string(spec_.factor));
  const int levels = spec_.levels();
  size_t k = 0;
  Tensor h = ops::Relu(ConvBias(images, params_[k], params_[k + 1], 1));
  k += 2;
  for (int l = 1; l <= levels; ++l, k += 2) {
    h = ops::Relu(ConvBias(h, params_[k], params_[k + 1], 2));
  }
  return ConvBias(h, params_[k], params_[k + 1], 1);
}

Tensor ConvCodec::DecodeBatch(const Tensor& latents) const {
  Require(latents.rank() == 4 && latents.dim(1) == spec_.c_lat,
          ErrorCode::kShape,
          "toy codec: expected latents with " + std::to_string(spec_.c_lat) +
              " channels, got " + ShapeToString(latents.shape()));
  const int levels = spec_.levels();
  size_t k = EncoderParamCount(spec_);
  Tensor h = ops::Relu(ConvBias(latents, params_[k], params_[k + 1], 1));
  k += 2;
  for (int l = levels; l >= 1; --l, k += 2) {
    h = ops::Relu(ConvBias(ops::Upsample2(h), params_[k], params_[k + 1], 1));
  }
  return ConvBias(h, params_[k], params_[k + 1], 1);
}

Tensor ConvCodec::Encode(const Tensor& images) const {
  return PerItem(images, [this](const Tensor& x) { return EncodeBatch(x); });
}

Tensor ConvCodec::Decode(const Tensor& latents) const {
  return PerItem(latents, [this](const Tensor& z) { return DecodeBatch(z); });
}

void ConvCodec::Save(const std::string& path) const {
  BinaryWriter w(path);
  w.Bytes(kCodecMagic, 4);
  w.U32(kCodecVersion);
  w.U32(spec_.factor);
  w.U32(spec_.c_lat);
  w.U32(spec_.base_width);
  w.U32(spec_.max_width);
  w.U32(spec_.native_resolution);
  w.F64(val_mse_);
  w.U64(fingerprint_);
  uint64_t total = 0;
  for (const Tensor& p : params_) total += p.numel();
  w.U64(total);
  for (const Tensor& p : params_) w.Floats(p.data());
  w.Close();
}

ConvCodec ConvCodec::Load(const std::string& path) {
  BinaryReader r(path);
  char magic[4];
  r.Bytes(magic, 4);
  Require(std::memcmp(magic, kCodecMagic, 4) == 0, ErrorCode::kFormat,
          path + ": not a codec file");
  Require(r.U32() == kCodecVersion, ErrorCode::kFormat,
          path + ": unsupported codec version");
  ConvCodecSpec spec;
  spec.factor = static_cast<int>(r.U32());
  spec.c_lat = static_cast<int>(r.U32());
  spec.base_width = static_cast<int>(r.U32());
  spec.max_width = static_cast<int>(r.U32());
  spec.native_resolution = static_cast<int>(r.U32());
  const double val_mse = r.F64();
  const uint64_t stored_fingerprint = r.U64();
  const uint64_t total = r.U64();
  spec.Validate();
  const auto shapes = CodecShapes(spec);
  uint64_t expected = 0;
  for (const Shape& s : shapes) expected += NumElements(s);
  Require(total == expected && r.Remaining() == total * 4, ErrorCode::kFormat,
          path + ": parameter block size does not match the header");
  std::vector<Tensor> params;
  for (const Shape& s : shapes) {
    params.push_back(Tensor::FromData(s, r.Floats(NumElements(s))));
  }
  ConvCodec codec(spec, std::move(params), val_mse);
  Require(codec.fingerprint() == stored_fingerprint, ErrorCode::kFingerprint,
          path + ": stored fingerprint does not match the weights");
  return codec;
}

ConvCodec TrainToyCodec(const RealImageDataset& real, int factor, int c_lat,
                        const ToyCodecConfig& config) {
  real.Validate();
  ConvCodecSpec spec;
  spec.factor = factor;
  spec.c_lat = c_lat;
  spec.base_width = config.base_width;
  spec.max_width = config.max_width;
  spec.native_resolution = real.height() * config.pre_upsample;
  spec.Validate();
  const ResamplePolicy policy = ResamplePolicy::Symmetric(config.pre_upsample);
  policy.Validate(factor);
  Require(config.epochs >= 0 && config.batch >= 1 && config.lr > 0.0f,
          ErrorCode::kConfig, "toy codec: invalid training config");
  Require(config.val_fraction > 0.0 && config.val_fraction < 1.0,
          ErrorCode::kConfig, "toy codec: val_fraction must be in (0, 1)");

  Rng rng(config.seed);
  const int64_t count = real.count();
  const auto order = rng.Permutation(count);
  const int64_t n_val = std::max<int64_t>(
      1, static_cast<int64_t>(std::llround(config.val_fraction * count)));
  Require(n_val < count, ErrorCode::kConfig,
          "toy codec: not enough items for a train/val split");
  std::vector<int64_t> val(order.begin(), order.begin() + n_val);
  std::vector<int64_t> train(order.begin() + n_val, order.end());
  if (config.max_train_items > 0 &&
      static_cast<int64_t>(train.size()) > config.max_train_items) {
    train.resize(static_cast<size_t>(config.max_train_items));
  }

  ConvCodec codec = ConvCodec::Random(spec, rng.Derive(1).seed());
  for (Tensor& p : codec.params()) p.set_requires_grad(true);
  Adam adam(config.lr);
  Rng shuffle = rng.Derive(2);
  double last_finite = std::numeric_limits<double>::quiet_NaN();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto perm = shuffle.Permutation(static_cast<int64_t>(train.size()));
    double epoch_loss = 0.0;
    int64_t batches = 0;
    for (size_t start = 0; start < perm.size(); start += config.batch) {
      const size_t end = std::min(perm.size(), start + config.batch);
      std::vector<int64_t> rows;
      for (size_t i = start; i < end; ++i) rows.push_back(train[perm[i]]);
      const Tensor x = Gather(real.images, rows);
      const Tensor up = ResampleUp(x, policy.pre_upsample);
      Tensor y = codec.DecodeBatch(codec.EncodeBatch(up));
      for (int s = 1; s < policy.post_downsample; s *= 2) y = ops::AvgPool2(y);
      const Tensor loss = ops::Mean(ops::Pow(ops::Sub(y, x), 2.0f));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        Fail(ErrorCode::kNumeric,
             "toy codec training diverged at epoch " + std::to_string(epoch) +
                 "; last finite loss " + std::to_string(last_finite));
      }
      last_finite = value;
      epoch_loss += value;
      ++batches;
      adam.Step(codec.params(), Grad(loss, codec.params()));
    }
    spdlog::debug("toy codec epoch {} train mse {:.5f}", epoch,
                  batches ? epoch_loss / batches : 0.0);
  }
  for (Tensor& p : codec.params()) p = p.detach();
  codec.Refingerprint();

  const Tensor xv = Gather(real.images, val);
  const Tensor rv = DecodeLatents(codec.Encode(ResampleUp(xv, policy.pre_upsample)),
                                  codec, policy);
  codec.set_validation_mse(MeanSquaredError(rv.data(), xv.data()));
  return codec;
}

std::unique_ptr<LatentCodec> LoadCodec(const std::string& name_or_path) {
  if (name_or_path == "identity") return std::make_unique<IdentityCodec>(3);
  return std::make_unique<ConvCodec>(ConvCodec::Load(name_or_path));
}

LatentDataset EncodeDataset(const RealImageDataset& real,
                            const LatentCodec& codec,
                            const ResamplePolicy& policy, int64_t batch) {
  real.Validate();
  policy.Validate(codec.factor());
  Require(batch >= 1, ErrorCode::kInvalidArgument,
          "encode_dataset: batch must be positive");
  const int eff = policy.EffectiveFactor(codec.factor());
  Require(real.height() % eff == 0 && real.width() % eff == 0,
          ErrorCode::kShape,
          "encode_dataset: image size " + std::to_string(real.height()) + "x" +
              std::to_string(real.width()) +
              " not divisible by effective factor " + std::to_string(eff));
  const int64_t n = real.count();
  std::vector<float> out;
  Shape shape;
  for (int64_t start = 0; start < n; start += batch) {
    std::vector<int64_t> rows;
    for (int64_t i = start; i < std::min(n, start + batch); ++i) rows.push_back(i);
    const Tensor z =
        codec.Encode(ResampleUp(Gather(real.images, rows), policy.pre_upsample));
    if (start == 0) {
      shape = z.shape();
      out.reserve(static_cast<size_t>(z.numel() / z.dim(0) * n));
    }
    out.insert(out.end(), z.data().begin(), z.data().end());
  }
  shape[0] = n;
  LatentDataset lat;
  lat.latents = Tensor::FromData(shape, std::move(out));
  lat.labels = real.labels;
  lat.num_classes = real.num_classes;
  lat.codec_factor = codec.factor();
  lat.pre_upsample = policy.pre_upsample;
  lat.c_lat = codec.c_lat();
  lat.codec_fingerprint = codec.fingerprint();
  lat.ComputeChannelStats();
  lat.Validate();
  return lat;
}

void AppendLatents(LatentDataset& cache, const LatentDataset& more) {
  if (cache.codec_fingerprint != more.codec_fingerprint) {
    Fail(ErrorCode::kFingerprint,
         "cannot append latents from a different codec; rebuild the cache "
         "with build-latents");
  }
  Require(cache.pre_upsample == more.pre_upsample &&
              cache.codec_factor == more.codec_factor &&
              cache.num_classes == more.num_classes,
          ErrorCode::kFingerprint, "cannot append latents: metadata differs");
  Shape a = cache.latents.shape(), b = more.latents.shape();
  Require(std::equal(a.begin() + 1, a.end(), b.begin() + 1, b.end()),
          ErrorCode::kShape, "cannot append latents: item shapes differ");
  std::vector<float> data(cache.latents.data().begin(), cache.latents.data().end());
  data.insert(data.end(), more.latents.data().begin(), more.latents.data().end());
  a[0] += b[0];
  cache.latents = Tensor::FromData(a, std::move(data));
  cache.labels.insert(cache.labels.end(), more.labels.begin(), more.labels.end());
  cache.ComputeChannelStats();
}

Tensor DecodeLatents(const Tensor& latents, const LatentCodec& codec,
                     const ResamplePolicy& policy) {
  policy.Validate(codec.factor());
  Require(latents.rank() == 4 && latents.dim(1) == codec.c_lat(),
          ErrorCode::kShape,
          "decode: latent shape " + ShapeToString(latents.shape()) +
              " does not match a codec with c_lat=" +
              std::to_string(codec.c_lat()));
  return ResampleDown(codec.Decode(latents), policy.post_downsample);
}

RealImageDataset DecodeSet(const SyntheticLatentSet& syn,
                           const LatentCodec& codec,
                           const ResamplePolicy& policy) {
  syn.Validate();
  if (syn.codec_fingerprint != 0 && syn.codec_fingerprint != codec.fingerprint()) {
    Fail(ErrorCode::kFingerprint,
         "decode: synthetic set was distilled with a different codec");
  }
  RealImageDataset out;
  out.images = DecodeLatents(syn.latents, codec, policy);
  out.labels = syn.labels;
  out.num_classes = syn.num_classes;
  return out;
}

Tensor ResizeUp2Bilinear(const Tensor& images) {
  Require(images.rank() == 4, ErrorCode::kShape, "resize: expected NCHW");
  const int64_t planes = images.dim(0) * images.dim(1);
  const int64_t h = images.dim(2), w = images.dim(3);
  const int64_t oh = 2 * h, ow = 2 * w;
  // Source taps and weights for one output coordinate.
  auto taps = [](int64_t o, int64_t size, int64_t& i0, int64_t& i1, float& w0) {
    const int64_t k = o / 2;
    if (o % 2 == 0) {
      i0 = std::max<int64_t>(k - 1, 0);
      i1 = k;
      w0 = 0.25f;
    } else {
      i0 = k;
      i1 = std::min<int64_t>(k + 1, size - 1);
      w0 = 0.75f;
    }
  };
  std::vector<float> rows(static_cast<size_t>(planes * oh * w));
  std::vector<float> out(static_cast<size_t>(planes * oh * ow));
  const auto src = images.data();
  for (int64_t p = 0; p < planes; ++p) {
    const float* in = src.data() + p * h * w;
    float* mid = rows.data() + p * oh * w;
    for (int64_t y = 0; y < oh; ++y) {
      int64_t i0, i1;
      float w0;
      taps(y, h, i0, i1, w0);
      for (int64_t x = 0; x < w; ++x) {
        mid[y * w + x] = w0 * in[i0 * w + x] + (1.0f - w0) * in[i1 * w + x];
      }
    }
    float* dst = out.data() + p * oh * ow;
    for (int64_t x = 0; x < ow; ++x) {
      int64_t j0, j1;
      float w0;
      taps(x, w, j0, j1, w0);
      for (int64_t y = 0; y < oh; ++y) {
        dst[y * ow + x] = w0 * mid[y * w + j0] + (1.0f - w0) * mid[y * w + j1];
      }
    }
  }
  return Tensor::FromData({images.dim(0), images.dim(1), oh, ow}, std::move(out));
}

Tensor DownsampleArea2(const Tensor& images) {
  NoGradGuard no_grad;
  return ops::AvgPool2(images.detach());
}

Tensor ResampleUp(const Tensor& images, int factor) {
  Require(IsPowerOfTwo(factor), ErrorCode::kDomain,
          "resample factor must be a power of two");
  Tensor x = images;
  for (int s = 1; s < factor; s *= 2) x = ResizeUp2Bilinear(x);
  return factor == 1 ? images.detach() : x;
}

Tensor ResampleDown(const Tensor& images, int factor) {
  Require(IsPowerOfTwo(factor), ErrorCode::kDomain,
          "resample factor must be a power of two");
  Tensor x = images.detach();
  for (int s = 1; s < factor; s *= 2) x = DownsampleArea2(x);
  return x;
}

std::vector<double> DistanceMatrix(const Tensor& items,
                                   const std::vector<int64_t>& rows) {
  const int64_t n = static_cast<int64_t>(rows.size());
  const int64_t per = items.numel() / items.dim(0);
  const auto data = items.data();
  std::vector<double> d(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = i + 1; j < n; ++j) {
      const float* a = data.data() + rows[i] * per;
      const float* b = data.data() + rows[j] * per;
      double acc = 0.0;
      for (int64_t k = 0; k < per; ++k) {
        const double diff = static_cast<double>(a[k]) - b[k];
        acc += diff * diff;
      }
      d[i * n + j] = d[j * n + i] = std::sqrt(acc);
    }
  }
  return d;
}

double UpperTriangleCorrelation(const std::vector<double>& a,
                                const std::vector<double>& b, int64_t n) {
  Require(n >= 3, ErrorCode::kInvalidArgument,
          "distribution_fidelity: n must be at least 3");
  Require(a.size() == static_cast<size_t>(n * n) && a.size() == b.size(),
          ErrorCode::kShape, "distribution_fidelity: matrix size mismatch");
  std::vector<double> x, y;
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = i + 1; j < n; ++j) {
      x.push_back(a[i * n + j]);
      y.push_back(b[i * n + j]);
    }
  }
  const double m = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    Fail(ErrorCode::kDegenerate,
         "distribution_fidelity: distances are constant, correlation is "
         "undefined");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double DistributionFidelity(const RealImageDataset& real,
                            const LatentDataset& lat, int64_t n, uint64_t seed) {
  Require(n >= 3, ErrorCode::kInvalidArgument,
          "distribution_fidelity: n must be at least 3");
  Require(real.count() == lat.count(), ErrorCode::kShape,
          "distribution_fidelity: image and latent sets differ in size");
  Require(n <= real.count(), ErrorCode::kInvalidArgument,
          "distribution_fidelity: n exceeds the dataset size");
  Rng rng(seed);
  const auto rows = rng.Sample(real.count(), n);
  return UpperTriangleCorrelation(DistanceMatrix(real.images, rows),
                                  DistanceMatrix(lat.latents, rows), n);
}

}  // namespace ldistill
