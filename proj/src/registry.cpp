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

#include "ldistill/registry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include <spdlog/spdlog.h>

#ifdef LDISTILL_HAVE_OPENCV
#include <opencv2/imgcodecs.hpp>
#endif

#include "ldistill/error.hpp"
#include "ldistill/rng.hpp"

namespace ldistill {

namespace fs = std::filesystem;

namespace {

DatasetRegistryEntry Subset(std::string name,
                            std::vector<std::pair<std::string, int>> classes) {
  DatasetRegistryEntry e;
  e.name = std::move(name);
  e.source = SourceKind::kImageFolder;
  e.resolution = 256;
  e.splits = {"train", "val"};
  for (auto& [label, index] : classes) {
    e.class_names.push_back(std::move(label));
    e.class_indices.push_back(index);
  }
  return e;
}

std::vector<DatasetRegistryEntry> BuildRegistry() {
  std::vector<DatasetRegistryEntry> r;
  DatasetRegistryEntry desk;
  desk.name = "desk10";
  desk.source = SourceKind::kBuiltinToy;
  desk.class_names = {"warm-disk", "warm-square", "warm-ring", "warm-cross",
                      "warm-bars", "cool-disk", "cool-square", "cool-ring",
                      "cool-cross", "cool-bars"};
  desk.resolution = 32;
  r.push_back(desk);
  r.push_back(Subset("bird", {{"peacock", 84}, {"flamingo", 130},
                              {"macaw", 88}, {"pelican", 144},
                              {"king penguin", 145}, {"bald eagle", 22},
                              {"toucan", 96}, {"ostrich", 9},
                              {"black swan", 100},
                              {"sulphur-crested cockatoo", 89}}));
  r.push_back(Subset("fruit", {{"pineapple", 953}, {"banana", 954},
                               {"strawberry", 949}, {"orange", 950},
                               {"lemon", 951}, {"pomegranate", 957},
                               {"fig", 952}, {"bell pepper", 945},
                               {"cucumber", 943}, {"granny smith", 948}}));
  r.push_back(Subset("woof", {{"australian terrier", 193},
                              {"border terrier", 182}, {"samoyed", 258},
                              {"beagle", 162}, {"shih-tzu", 155},
                              {"english foxhound", 167},
                              {"rhodesian ridgeback", 159}, {"dingo", 273},
                              {"golden retriever", 207},
                              {"old english sheepdog", 229}}));
  r.push_back(Subset("cat", {{"tabby", 281}, {"tiger cat", 282},
                             {"persian cat", 283}, {"siamese cat", 284},
                             {"egyptian cat", 285}, {"lion", 291},
                             {"tiger", 292}, {"jaguar", 290},
                             {"snow leopard", 289}, {"lynx", 287}}));
  r.push_back(Subset("nette", {{"tench", 0}, {"english springer", 217},
                               {"cassette player", 482}, {"chain saw", 491},
                               {"church", 497}, {"french horn", 566},
                               {"garbage truck", 569}, {"gas pump", 571},
                               {"golf ball", 574}, {"parachute", 701}}));
  for (const auto& e : r) e.Validate();
  return r;
}

std::string NormalizeName(std::string s) {
  for (char& ch : s) {
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ch == '_' || ch == '-') ch = ' ';
  }
  return s;
}

void HsvToRgb(double h, double s, double v, float rgb[3]) {
  h = h - std::floor(h);
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  double r, g, b;
  switch (static_cast<int>(i) % 6) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  rgb[0] = static_cast<float>(r);
  rgb[1] = static_cast<float>(g);
  rgb[2] = static_cast<float>(b);
}

struct Blob {
  int shape;
  double cx, cy, radius, angle;
  float color[3];
  double freq, orient, phase, contrast;
};

// Ten classes: five silhouettes in a warm or a cool color family.
Blob ClassBlob(int c, int size, Rng& rng) {
  Blob b;
  const double s = size / 32.0;
  b.shape = c % 5;
  b.cx = rng.Uniform(11, 21) * s;
  b.cy = rng.Uniform(11, 21) * s;
  b.radius = rng.Uniform(9, 12) * s;
  b.angle = rng.Uniform(0, 2 * std::numbers::pi);
  const double hue = c < 5 ? rng.Uniform(-0.04, 0.14) : rng.Uniform(0.46, 0.66);
  HsvToRgb(hue, rng.Uniform(0.5, 1.0), rng.Uniform(0.55, 1.0), b.color);
  b.freq = rng.Uniform(0.06, 0.12) / s;
  b.orient = rng.Uniform(0, std::numbers::pi);
  b.phase = rng.Uniform(0, 2 * std::numbers::pi);
  b.contrast = rng.Uniform(0.0, 0.15);
  return b;
}

// Silhouette membership in blob-local coordinates scaled by the radius.
bool Inside(int shape, double u, double v) {
  const double r = std::sqrt(u * u + v * v);
  switch (shape) {
    case 0: return r < 1.0;
    case 1: return std::max(std::abs(u), std::abs(v)) < 0.82;
    case 2: return r < 1.0 && r > 0.55;
    case 3:
      return (std::abs(u) < 0.33 && std::abs(v) < 1.0) ||
             (std::abs(v) < 0.33 && std::abs(u) < 1.0);
    default:
      return std::abs(u) < 0.95 &&
             (std::abs(v - 0.5) < 0.22 || std::abs(v + 0.5) < 0.22);
  }
}

void Paint(std::vector<float>& chw, int size, const Blob& b) {
  const int64_t plane = int64_t{size} * size;
  const double ca = std::cos(b.angle), sa = std::sin(b.angle);
  const double co = std::cos(b.orient), so = std::sin(b.orient);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      // 2x2 supersampled coverage
      int hits = 0;
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          const double dx = x + 0.25 + 0.5 * sx - b.cx;
          const double dy = y + 0.25 + 0.5 * sy - b.cy;
          hits += Inside(b.shape, (ca * dx + sa * dy) / b.radius,
                         (-sa * dx + ca * dy) / b.radius);
        }
      }
      if (hits == 0) continue;
      const double alpha = hits / 4.0;
      const double wave = std::sin(2 * std::numbers::pi * b.freq *
                                       (co * x + so * y) + b.phase);
      const double shade = 1.0 + b.contrast * wave;
      for (int ch = 0; ch < 3; ++ch) {
        float& p = chw[ch * plane + y * size + x];
        p = static_cast<float>((1 - alpha) * p + alpha * b.color[ch] * shade);
      }
    }
  }
}

std::vector<float> DeskImage(int c, int size, Rng& rng) {
  const int64_t plane = int64_t{size} * size;
  std::vector<float> img(static_cast<size_t>(3 * plane));
  // Background: random color, tilted illumination and slow waves.
  float bg[3];
  HsvToRgb(rng.Uniform(), rng.Uniform(0.0, 0.6), rng.Uniform(0.2, 0.8), bg);
  const double gx = rng.Uniform(-0.5, 0.5), gy = rng.Uniform(-0.5, 0.5);
  double wf[3][4];
  for (auto& w : wf) {
    w[0] = rng.Uniform(0.02, 0.08);
    w[1] = rng.Uniform(0, 2 * std::numbers::pi);
    w[2] = rng.Uniform(0, 2 * std::numbers::pi);
    w[3] = rng.Uniform(0.0, 0.15);
  }
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double nx = x / double(size) - 0.5, ny = y / double(size) - 0.5;
      double light = 1.0 + gx * nx + gy * ny;
      for (int ch = 0; ch < 3; ++ch) {
        const auto& w = wf[ch];
        const double wave =
            w[3] * std::sin(2 * std::numbers::pi * w[0] *
                                (std::cos(w[1]) * x + std::sin(w[1]) * y) +
                            w[2]);
        img[ch * plane + y * size + x] =
            static_cast<float>(bg[ch] * light + wave);
      }
    }
  }
  if (rng.Bernoulli(0.5)) {
    // Plain disk or square of an unrelated color.
    Blob clutter = ClassBlob(static_cast<int>(rng.UniformInt(0, 1)), size, rng);
    HsvToRgb(rng.Uniform(), rng.Uniform(0.0, 0.5), rng.Uniform(0.2, 0.9), clutter.color);
    clutter.radius *= 0.35;
    clutter.cx = rng.Uniform(0, size);
    clutter.cy = rng.Uniform(0, size);
    Paint(img, size, clutter);
  }
  Paint(img, size, ClassBlob(c, size, rng));
  for (float& p : img) {
    p = std::clamp(p + static_cast<float>(rng.Normal(0.0, 0.04)), 0.0f, 1.0f);
  }
  return img;
}

RealImageDataset NormalizeImages(std::vector<float> chw, std::vector<int> labels,
                                 int num_classes, int size,
                                 const ChannelStats& stats) {
  const int64_t plane = int64_t{size} * size;
  const int64_t n = static_cast<int64_t>(labels.size());
  for (int64_t i = 0; i < n; ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      float* p = chw.data() + (i * 3 + ch) * plane;
      for (int64_t j = 0; j < plane; ++j) {
        p[j] = (p[j] - stats.mean[ch]) / stats.std[ch];
      }
    }
  }
  RealImageDataset d;
  d.images = Tensor::FromData({n, 3, size, size}, std::move(chw));
  d.labels = std::move(labels);
  d.num_classes = num_classes;
  return d;
}

ChannelStats PlanarStats(const std::vector<float>& chw, int64_t n,
                         int64_t plane) {
  ChannelStats s;
  for (int ch = 0; ch < 3; ++ch) {
    double sum = 0, sq = 0;
    for (int64_t i = 0; i < n; ++i) {
      const float* p = chw.data() + (i * 3 + ch) * plane;
      for (int64_t j = 0; j < plane; ++j) {
        sum += p[j];
        sq += double(p[j]) * p[j];
      }
    }
    const double m = sum / double(n * plane);
    const double var = std::max(sq / double(n * plane) - m * m, 1e-12);
    s.mean.push_back(static_cast<float>(m));
    s.std.push_back(static_cast<float>(std::sqrt(var)));
  }
  return s;
}

#ifndef LDISTILL_HAVE_OPENCV
RawImage ReadPpm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  if (magic != "P6" || w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    Fail(ErrorCode::kFormat, path + ": unsupported image (binary PPM only)");
  }
  std::vector<unsigned char> buf(static_cast<size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    Fail(ErrorCode::kFormat, path + ": truncated image");
  }
  RawImage img{h, w, 3, {}};
  img.pixels.reserve(buf.size());
  for (unsigned char b : buf) img.pixels.push_back(b / float(maxval));
  return img;
}
#endif

}  // namespace

void DatasetRegistryEntry::Validate() const {
  Require(!class_names.empty(), ErrorCode::kConfig,
          "dataset " + name + ": class list is empty");
  std::set<std::string> seen;
  for (const auto& c : class_names) {
    Require(seen.insert(NormalizeName(c)).second, ErrorCode::kConfig,
            "dataset " + name + ": duplicate class " + c);
  }
  Require(class_indices.empty() || class_indices.size() == class_names.size(),
          ErrorCode::kConfig, "dataset " + name + ": index list size mismatch");
  std::set<int> ids(class_indices.begin(), class_indices.end());
  Require(ids.size() == class_indices.size(), ErrorCode::kConfig,
          "dataset " + name + ": duplicate class index");
}

const std::vector<DatasetRegistryEntry>& Registry() {
  static const std::vector<DatasetRegistryEntry> registry = BuildRegistry();
  return registry;
}

const DatasetRegistryEntry& FindDataset(const std::string& name) {
  const std::string key = NormalizeName(name);
  for (const auto& e : Registry()) {
    if (NormalizeName(e.name) == key) return e;
  }
  Fail(ErrorCode::kConfig, "unknown dataset '" + name + "'");
}

ChannelStats ComputeRawStats(const std::vector<RawImage>& raw) {
  ChannelStats s;
  double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
  int64_t n = 0;
  for (const RawImage& img : raw) {
    if (img.channels != 3 ||
        img.pixels.size() != size_t(img.height) * img.width * 3) {
      continue;
    }
    for (size_t i = 0; i < img.pixels.size(); ++i) {
      sum[i % 3] += img.pixels[i];
      sq[i % 3] += double(img.pixels[i]) * img.pixels[i];
    }
    n += int64_t{img.height} * img.width;
  }
  Require(n > 0, ErrorCode::kInvalidArgument, "preprocess: no decodable images");
  for (int ch = 0; ch < 3; ++ch) {
    const double m = sum[ch] / double(n);
    const double var = std::max(sq[ch] / double(n) - m * m, 1e-12);
    s.mean.push_back(static_cast<float>(m));
    s.std.push_back(static_cast<float>(std::sqrt(var)));
  }
  return s;
}

std::vector<float> ResizeTriangle(std::span<const float> chw, int channels,
                                  int height, int width, int out_height,
                                  int out_width) {
  struct Taps {
    std::vector<int> first;
    std::vector<std::vector<float>> weights;
  };
  auto plan = [](int in, int out) {
    Taps t;
    const double scale = double(in) / out;
    const double support = std::max(1.0, scale);
    for (int o = 0; o < out; ++o) {
      const double center = (o + 0.5) * scale - 0.5;
      const int lo = std::max(0, int(std::ceil(center - support)));
      const int hi = std::min(in - 1, int(std::floor(center + support)));
      std::vector<float> w;
      double total = 0;
      for (int i = lo; i <= hi; ++i) {
        const double v = std::max(0.0, 1.0 - std::abs(i - center) / support);
        w.push_back(float(v));
        total += v;
      }
      for (float& v : w) v = float(v / total);
      t.first.push_back(lo);
      t.weights.push_back(std::move(w));
    }
    return t;
  };
  const Taps ty = plan(height, out_height), tx = plan(width, out_width);
  std::vector<float> mid(size_t(channels) * out_height * width);
  std::vector<float> out(size_t(channels) * out_height * out_width);
  for (int c = 0; c < channels; ++c) {
    const float* src = chw.data() + size_t(c) * height * width;
    float* m = mid.data() + size_t(c) * out_height * width;
    for (int y = 0; y < out_height; ++y) {
      for (int x = 0; x < width; ++x) {
        float acc = 0;
        for (size_t k = 0; k < ty.weights[y].size(); ++k) {
          acc += ty.weights[y][k] * src[(ty.first[y] + k) * width + x];
        }
        m[y * width + x] = acc;
      }
    }
    float* dst = out.data() + size_t(c) * out_height * out_width;
    for (int y = 0; y < out_height; ++y) {
      for (int x = 0; x < out_width; ++x) {
        float acc = 0;
        for (size_t k = 0; k < tx.weights[x].size(); ++k) {
          acc += tx.weights[x][k] * m[y * width + tx.first[x] + k];
        }
        dst[y * out_width + x] = acc;
      }
    }
  }
  return out;
}

PreprocessResult Preprocess(const std::vector<RawImage>& raw,
                            const std::vector<int>& labels, int num_classes,
                            int resolution,
                            const std::optional<ChannelStats>& stats) {
  Require(raw.size() == labels.size(), ErrorCode::kShape,
          "preprocess: image and label counts differ");
  Require(resolution >= 1, ErrorCode::kInvalidArgument,
          "preprocess: resolution must be positive");
  PreprocessResult result;
  result.stats = stats ? *stats : ComputeRawStats(raw);
  const ChannelStats& st = result.stats;
  std::vector<float> data;
  std::vector<int> kept;
  for (size_t i = 0; i < raw.size(); ++i) {
    const RawImage& img = raw[i];
    if (img.channels != 3 || img.height <= 0 || img.width <= 0 ||
        img.pixels.size() != size_t(img.height) * img.width * 3) {
      spdlog::warn("preprocess: skipping undecodable image at index {}", i);
      result.skipped.push_back(static_cast<int64_t>(i));
      continue;
    }
    // 1. normalize (HWC -> CHW)
    const size_t hw = size_t(img.height) * img.width;
    std::vector<float> chw(3 * hw);
    for (size_t p = 0; p < hw; ++p) {
      for (int c = 0; c < 3; ++c) {
        chw[c * hw + p] = (img.pixels[p * 3 + c] - st.mean[c]) / st.std[c];
      }
    }
    // 2. resize the shorter side to the target
    int rh, rw;
    if (img.height <= img.width) {
      rh = resolution;
      rw = std::max(resolution, int(std::lround(double(img.width) * resolution /
                                                img.height)));
    } else {
      rw = resolution;
      rh = std::max(resolution, int(std::lround(double(img.height) * resolution /
                                                img.width)));
    }
    const auto resized =
        ResizeTriangle(chw, 3, img.height, img.width, rh, rw);
    // 3. center crop
    const int top = (rh - resolution) / 2, left = (rw - resolution) / 2;
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < resolution; ++y) {
        const float* row = resized.data() + (size_t(c) * rh + top + y) * rw + left;
        data.insert(data.end(), row, row + resolution);
      }
    }
    kept.push_back(labels[i]);
  }
  Require(!kept.empty(), ErrorCode::kInvalidArgument,
          "preprocess: no decodable images");
  const int64_t n = static_cast<int64_t>(kept.size());
  result.data.images = Tensor::FromData({n, 3, resolution, resolution},
                                        std::move(data));
  result.data.labels = std::move(kept);
  result.data.num_classes = num_classes;
  return result;
}

DatasetSplits MakeDeskDataset(const DeskConfig& config) {
  Require(config.train_per_class >= 1 && config.test_per_class >= 1,
          ErrorCode::kConfig, "desk10: split sizes must be positive");
  Require(config.resolution >= 8 && config.resolution % 8 == 0,
          ErrorCode::kConfig, "desk10: resolution must be a multiple of 8");
  const auto& entry = FindDataset("desk10");
  const int k = static_cast<int>(entry.class_names.size());
  const int size = config.resolution;
  const int64_t plane = int64_t{size} * size;
  auto generate = [&](int per_class, uint64_t stream) {
    Rng rng = Rng(config.seed).Derive(stream);
    std::vector<float> chw;
    std::vector<int> labels;
    chw.reserve(size_t(per_class) * k * 3 * plane);
    for (int i = 0; i < per_class; ++i) {
      for (int c = 0; c < k; ++c) {
        const auto img = DeskImage(c, size, rng);
        chw.insert(chw.end(), img.begin(), img.end());
        labels.push_back(c);
      }
    }
    return std::make_pair(std::move(chw), std::move(labels));
  };
  auto [train_x, train_y] = generate(config.train_per_class, 1);
  auto [test_x, test_y] = generate(config.test_per_class, 2);
  DatasetSplits out;
  out.stats = PlanarStats(train_x, static_cast<int64_t>(train_y.size()), plane);
  out.train = NormalizeImages(std::move(train_x), std::move(train_y), k, size,
                              out.stats);
  out.test = NormalizeImages(std::move(test_x), std::move(test_y), k, size,
                             out.stats);
  out.train.class_names = out.test.class_names = entry.class_names;
  return out;
}

RawImage ReadImageFile(const std::string& path) {
#ifdef LDISTILL_HAVE_OPENCV
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  if (m.empty()) Fail(ErrorCode::kFormat, path + ": cannot decode image");
  RawImage img{m.rows, m.cols, 3, {}};
  img.pixels.resize(size_t(m.rows) * m.cols * 3);
  for (int y = 0; y < m.rows; ++y) {
    const unsigned char* row = m.ptr<unsigned char>(y);
    for (int x = 0; x < m.cols; ++x) {
      for (int c = 0; c < 3; ++c) {  // BGR -> RGB
        img.pixels[(size_t(y) * m.cols + x) * 3 + c] = row[x * 3 + 2 - c] / 255.0f;
      }
    }
  }
  return img;
#else
  return ReadPpm(path);
#endif
}

DatasetSplits LoadImageFolder(const DatasetRegistryEntry& entry,
                              const std::string& root, int resolution) {
  entry.Validate();
  auto load_split = [&](const std::string& split) {
    const fs::path dir = fs::path(root) / split;
    Require(fs::is_directory(dir), ErrorCode::kIo,
            "image folder: missing split directory " + dir.string());
    std::vector<RawImage> raw;
    std::vector<int> labels;
    for (size_t c = 0; c < entry.class_names.size(); ++c) {
      const std::string want = NormalizeName(entry.class_names[c]);
      const std::string index =
          entry.class_indices.empty() ? "" : std::to_string(entry.class_indices[c]);
      fs::path class_dir;
      for (const auto& d : fs::directory_iterator(dir)) {
        const std::string n = d.path().filename().string();
        if (d.is_directory() && (NormalizeName(n) == want || n == index)) {
          class_dir = d.path();
        }
      }
      Require(!class_dir.empty(), ErrorCode::kIo,
              "image folder: no directory for class '" + entry.class_names[c] +
                  "' under " + dir.string());
      std::vector<fs::path> files;
      for (const auto& f : fs::directory_iterator(class_dir)) {
        if (f.is_regular_file()) files.push_back(f.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        try {
          raw.push_back(ReadImageFile(f.string()));
        } catch (const Error& e) {
          spdlog::warn("{}", e.what());
          raw.push_back(RawImage{});
        }
        labels.push_back(static_cast<int>(c));
      }
    }
    return std::make_pair(std::move(raw), std::move(labels));
  };
  const int k = static_cast<int>(entry.class_names.size());
  auto [train_raw, train_y] = load_split(entry.splits.at(0));
  auto train = Preprocess(train_raw, train_y, k, resolution);
  train_raw.clear();
  auto [test_raw, test_y] = load_split(entry.splits.at(1));
  auto test = Preprocess(test_raw, test_y, k, resolution, train.stats);
  DatasetSplits out{std::move(train.data), std::move(test.data), train.stats};
  out.train.class_names = out.test.class_names = entry.class_names;
  return out;
}

DatasetSplits LoadDataset(const std::string& name, const std::string& root,
                          int resolution, uint64_t seed) {
  const auto& entry = FindDataset(name);
  if (entry.source == SourceKind::kBuiltinToy) {
    DeskConfig cfg;
    cfg.seed = seed;
    if (resolution > 0) cfg.resolution = resolution;
    return MakeDeskDataset(cfg);
  }
  Require(!root.empty(), ErrorCode::kConfig,
          "dataset " + name + " needs a local image folder (--data-root)");
  return LoadImageFolder(entry, root, resolution > 0 ? resolution : entry.resolution);
}

}  // namespace ldistill
