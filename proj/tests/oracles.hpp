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

// Toy problems and finite-difference oracles for the matching losses.
// Shared by the unit tests and the acceptance binary.

#ifndef LDISTILL_TESTS_ORACLES_HPP_
#define LDISTILL_TESTS_ORACLES_HPP_

#include <cmath>
#include <vector>

#include "ldistill/distill_dc.hpp"
#include "ldistill/distill_dm.hpp"
#include "ldistill/distill_mtt.hpp"
#include "ldistill/ops.hpp"
#include "test_util.hpp"

namespace ldistill::testing {

// Gaussian class blobs in latent form: mean_c + noise, one mean per class.
inline LatentDataset Blobs(int classes, int per_class, int channels, int hw,
                           double separation, uint64_t seed) {
  Rng rng(seed);
  const int64_t item = int64_t{channels} * hw * hw;
  std::vector<std::vector<float>> means(classes, std::vector<float>(item));
  for (auto& m : means) {
    for (float& v : m) v = static_cast<float>(rng.Normal(0.0, separation));
  }
  LatentDataset d;
  std::vector<float> values;
  for (int i = 0; i < per_class; ++i) {
    for (int c = 0; c < classes; ++c) {
      for (int64_t j = 0; j < item; ++j) {
        values.push_back(means[c][j] + static_cast<float>(rng.Normal()));
      }
      d.labels.push_back(c);
    }
  }
  const int64_t n = int64_t{classes} * per_class;
  d.latents = Tensor::FromData({n, channels, hw, hw}, std::move(values));
  d.num_classes = classes;
  d.codec_factor = 4;
  d.c_lat = channels;
  d.codec_fingerprint = 0x5eed;
  d.ComputeChannelStats();
  return d;
}

// Relative error of Grad(loss(x), x) against central differences.
inline double GradCheck(const std::function<Tensor(const Tensor&)>& loss,
                        const Tensor& x0, double h = 1e-2) {
  Tensor x = x0.clone();
  x.set_requires_grad(true);
  const Tensor g = Grad(loss(x), {x})[0];
  const auto num = NumericGrad(
      [&](const Tensor& p) { return static_cast<double>(loss(p).item()); }, x0, h);
  return RelError(g.data(), num);
}

// Two-layer smooth network: 3x3 conv, softplus, linear head. Kink-free, so
// central differences with a moderate step are accurate in float.
struct SmoothNet {
  int channels, hw, classes, width;

  std::vector<Shape> Shapes() const {
    return {{width, channels, 3, 3}, {classes, int64_t{width} * hw * hw}, {classes}};
  }
  int64_t Count() const {
    int64_t n = 0;
    for (const auto& s : Shapes()) n += NumElements(s);
    return n;
  }
  std::vector<Tensor> Slices(const Tensor& flat) const {
    std::vector<Tensor> out;
    int64_t off = 0;
    for (const auto& s : Shapes()) {
      out.push_back(ops::Slice(flat, off, s));
      off += NumElements(s);
    }
    return out;
  }
  Tensor Embed(const std::vector<Tensor>& p, const Tensor& x) const {
    const Tensor z = ops::Conv2d(x, p[0], 1, 1);
    const Tensor act = ops::Log(ops::AddScalar(ops::Exp(z), 1.0f));
    return ops::Reshape(act, {x.dim(0), int64_t{width} * hw * hw});
  }
  Tensor Forward(const std::vector<Tensor>& p, const Tensor& x) const {
    return ops::BiasAdd(ops::MatMul(Embed(p, x), p[1], false, true), p[2]);
  }
};

struct ToyMatchProblem {
  SmoothNet net;
  std::vector<Tensor> params;
  Tensor real_x, syn_x;
  std::vector<int> real_y, syn_y;
};

inline ToyMatchProblem MakeToyMatchProblem(uint64_t seed) {
  const LatentDataset real = Blobs(2, 6, 2, 4, 1.0, seed);
  ToyMatchProblem p{{2, 4, 2, 3}, {}, real.latents, RandomTensor({4, 2, 4, 4}, seed + 2),
                    real.labels, {0, 0, 1, 1}};
  uint64_t k = seed + 10;
  for (const auto& s : p.net.Shapes()) {
    Tensor t = RandomTensor(s, k++, 0.3);
    t.set_requires_grad(true);
    p.params.push_back(t);
  }
  return p;
}

inline double DcGradientError(uint64_t seed, MatchLoss kind, double h = 1e-2) {
  ToyMatchProblem p = MakeToyMatchProblem(seed);
  auto greal = Grad(ops::CrossEntropy(p.net.Forward(p.params, p.real_x), p.real_y), p.params);
  return GradCheck(
      [&](const Tensor& syn) {
        const auto gs = Grad(ops::CrossEntropy(p.net.Forward(p.params, syn), p.syn_y),
                             p.params, true);
        return GradientMatchLoss(gs, greal, kind);
      },
      p.syn_x, h);
}

inline double DmGradientError(uint64_t seed, double h = 1e-2) {
  ToyMatchProblem p = MakeToyMatchProblem(seed);
  const auto embed = [&](const Tensor& x) { return p.net.Embed(p.params, x); };
  return GradCheck([&](const Tensor& syn) { return MmdClassLoss(p.real_x, syn, embed); },
                   p.syn_x, h);
}

// Student unrolled for `steps` plain gradient steps on the synthetic batch.
inline Tensor UnrolledStudent(const SmoothNet& net, const Tensor& start, const Tensor& syn,
                              const std::vector<int>& labels, const Tensor& eta, int steps) {
  Tensor theta = start;
  for (int s = 0; s < steps; ++s) {
    const Tensor ce = ops::CrossEntropy(net.Forward(net.Slices(theta), syn), labels);
    const Tensor g = Grad(ce, {theta}, true)[0];
    theta = ops::Sub(theta, ops::ScalarMul(g, eta));
  }
  return theta;
}

inline double MttGradientError(uint64_t seed, double h = 1e-2) {
  ToyMatchProblem p = MakeToyMatchProblem(seed);
  const Tensor start = RandomTensor({p.net.Count()}, seed + 20, 0.3);
  // Target: three real-data steps away from the start.
  Tensor t = start.clone();
  t.set_requires_grad(true);
  for (int s = 0; s < 3; ++s) {
    const Tensor ce = ops::CrossEntropy(p.net.Forward(p.net.Slices(t), p.real_x), p.real_y);
    const Tensor g = Grad(ce, {t})[0];
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] -= 0.5f * g.data()[i];
  }
  const Tensor target = t.detach().clone();
  const Tensor eta = Tensor::FromData({1}, {0.5f});
  return GradCheck(
      [&](const Tensor& syn) {
        Tensor theta = start.clone();
        theta.set_requires_grad(true);
        return TrajectoryMatchLoss(UnrolledStudent(p.net, theta, syn, p.syn_y, eta, 3),
                                   start, target);
      },
      p.syn_x, h);
}

// Scalar quadratic "network": l(theta; x) = a/2 (theta - x)^2, unrolled for
// `steps` gradient steps from theta0 and matched against `target`.
struct QuadraticUnroll {
  double a = 1.5, eta = 0.2, theta0 = -1.0, target = 0.7;
  int steps = 4;

  Tensor Loss(const Tensor& x) const {
    const Tensor start = Tensor::FromData({1}, {static_cast<float>(theta0)});
    const Tensor tgt = Tensor::FromData({1}, {static_cast<float>(target)});
    const Tensor lr = Tensor::FromData({1}, {static_cast<float>(eta)});
    Tensor theta = start.clone();
    theta.set_requires_grad(true);
    for (int s = 0; s < steps; ++s) {
      const Tensor l = ops::Scale(ops::SquaredNorm(ops::Sub(theta, x)), 0.5f * float(a));
      theta = ops::Sub(theta, ops::ScalarMul(Grad(l, {theta}, true)[0], lr));
    }
    return TrajectoryMatchLoss(theta, start, tgt);
  }
  // d loss / dx in closed form.
  double Exact(double x) const {
    const double rn = std::pow(1.0 - eta * a, steps);
    const double theta = rn * theta0 + (1.0 - rn) * x;
    const double d = theta0 - target;
    return 2.0 * (theta - target) * (1.0 - rn) / (d * d);
  }
};

}  // namespace ldistill::testing

#endif  // LDISTILL_TESTS_ORACLES_HPP_
