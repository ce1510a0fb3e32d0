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

#include "ldistill/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>

#include "ldistill/error.hpp"

namespace ldistill::ops {

namespace {

using RowMat =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void CheckSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    Fail(ErrorCode::kShape, std::string(op) + ": shape mismatch " +
                                ShapeToString(a.shape()) + " vs " +
                                ShapeToString(b.shape()));
  }
}

template <typename F>
std::vector<float> Map1(const Tensor& a, F f) {
  const auto x = a.data();
  std::vector<float> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

template <typename F>
std::vector<float> Map2(const Tensor& a, const Tensor& b, F f) {
  const auto x = a.data();
  const auto y = b.data();
  std::vector<float> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = f(x[i], y[i]);
  return out;
}

template <typename NodeT, typename... Args>
std::shared_ptr<Node> MaybeNode(std::initializer_list<const Tensor*> ins,
                                Args&&... args) {
  if (!ShouldRecord(ins)) return nullptr;
  return std::make_shared<NodeT>(std::forward<Args>(args)...);
}

// ---------------------------------------------------------------------------
// Elementwise nodes.

struct AddNode : Node {
  AddNode(Tensor a, Tensor b) : Node({std::move(a), std::move(b)}) {}
  std::vector<Tensor> Backward(const Tensor& g) override { return {g, g}; }
  const char* name() const override { return "Add"; }
};

struct SubNode : Node {
  SubNode(Tensor a, Tensor b) : Node({std::move(a), std::move(b)}) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {g, needs_input_grad(1) ? Neg(g) : Tensor()};
  }
  const char* name() const override { return "Sub"; }
};

struct MulNode : Node {
  MulNode(Tensor a, Tensor b) : Node({std::move(a), std::move(b)}) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {needs_input_grad(0) ? Mul(g, inputs_[1]) : Tensor(),
            needs_input_grad(1) ? Mul(g, inputs_[0]) : Tensor()};
  }
  const char* name() const override { return "Mul"; }
};

struct DivNode : Node {
  DivNode(Tensor a, Tensor b) : Node({std::move(a), std::move(b)}) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    const Tensor& a = inputs_[0];
    const Tensor& b = inputs_[1];
    Tensor ga = needs_input_grad(0) ? Div(g, b) : Tensor();
    Tensor gb = needs_input_grad(1) ? Neg(Div(Mul(g, a), Mul(b, b))) : Tensor();
    return {ga, gb};
  }
  const char* name() const override { return "Div"; }
};

struct NegNode : Node {
  explicit NegNode(Tensor a) : Node({std::move(a)}) {}
  std::vector<Tensor> Backward(const Tensor& g) override { return {Neg(g)}; }
  const char* name() const override { return "Neg"; }
};

struct ScaleNode : Node {
  ScaleNode(Tensor a, float f) : Node({std::move(a)}), factor(f) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {Scale(g, factor)};
  }
  const char* name() const override { return "Scale"; }
  float factor;
};

struct IdentityGradNode : Node {
  explicit IdentityGradNode(Tensor a) : Node({std::move(a)}) {}
  std::vector<Tensor> Backward(const Tensor& g) override { return {g}; }
  const char* name() const override { return "AddScalar"; }
};

struct PowNode : Node {
  PowNode(Tensor a, float p) : Node({std::move(a)}), exponent(p) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    if (exponent == 1.0f) return {g};
    return {Mul(g, Scale(Pow(inputs_[0], exponent - 1.0f), exponent))};
  }
  const char* name() const override { return "Pow"; }
  float exponent;
};

struct ExpNode : Node {
  explicit ExpNode(Tensor a) : Node({std::move(a)}) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {Mul(g, Exp(inputs_[0]))};
  }
  const char* name() const override { return "Exp"; }
};

struct LogNode : Node {
  explicit LogNode(Tensor a) : Node({std::move(a)}) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {Div(g, inputs_[0])};
  }
  const char* name() const override { return "Log"; }
};

struct ReluNode : Node {
  ReluNode(Tensor a, Tensor m) : Node({std::move(a)}), mask(std::move(m)) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {Mul(g, mask)};
  }
  const char* name() const override { return "Relu"; }
  Tensor mask;
};

struct ReshapeNode : Node {
  explicit ReshapeNode(Tensor a) : Node({std::move(a)}) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {Reshape(g, inputs_[0].shape())};
  }
  const char* name() const override { return "Reshape"; }
};

struct SumOuterInnerNode : Node {
  SumOuterInnerNode(Tensor a, int64_t o, int64_t i)
      : Node({std::move(a)}), outer(o), inner(i) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {Broadcast(g, outer, inner, inputs_[0].shape())};
  }
  const char* name() const override { return "SumOuterInner"; }
  int64_t outer, inner;
};

struct BroadcastNode : Node {
  BroadcastNode(Tensor a, int64_t o, int64_t i)
      : Node({std::move(a)}), outer(o), inner(i) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    const Tensor& a = inputs_[0];
    return {SumOuterInner(g, outer, a.numel(), inner, a.shape())};
  }
  const char* name() const override { return "Broadcast"; }
  int64_t outer, inner;
};

struct MatMulNode : Node {
  MatMulNode(Tensor a, Tensor b, bool ta, bool tb)
      : Node({std::move(a), std::move(b)}), trans_a(ta), trans_b(tb) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    const Tensor& a = inputs_[0];
    const Tensor& b = inputs_[1];
    Tensor ga, gb;
    if (!trans_a && !trans_b) {
      if (needs_input_grad(0)) ga = MatMul(g, b, false, true);
      if (needs_input_grad(1)) gb = MatMul(a, g, true, false);
    } else if (!trans_a && trans_b) {
      if (needs_input_grad(0)) ga = MatMul(g, b, false, false);
      if (needs_input_grad(1)) gb = MatMul(g, a, true, false);
    } else if (trans_a && !trans_b) {
      if (needs_input_grad(0)) ga = MatMul(b, g, false, true);
      if (needs_input_grad(1)) gb = MatMul(a, g, false, false);
    } else {
      if (needs_input_grad(0)) ga = MatMul(b, g, true, true);
      if (needs_input_grad(1)) gb = MatMul(g, a, true, true);
    }
    return {ga, gb};
  }
  const char* name() const override { return "MatMul"; }
  bool trans_a, trans_b;
};

// ---------------------------------------------------------------------------
// Convolution kernels (im2col + GEMM).

struct ConvGeom {
  int64_t n, c, h, w;  // input
  int64_t o, k;        // filters
  int64_t stride, pad;
  int64_t ho, wo;
  int64_t K() const { return c * k * k; }
  int64_t P() const { return ho * wo; }
};

ConvGeom MakeGeom(const Shape& x, const Shape& w, int stride, int pad) {
  if (x.size() != 4 || w.size() != 4) {
    Fail(ErrorCode::kShape, "Conv2d expects NCHW input and OIKK weight, got " +
                                ShapeToString(x) + " and " + ShapeToString(w));
  }
  if (x[1] != w[1] || w[2] != w[3]) {
    Fail(ErrorCode::kShape, "Conv2d channel mismatch: input " +
                                ShapeToString(x) + ", weight " +
                                ShapeToString(w));
  }
  ConvGeom g{x[0], x[1], x[2], x[3], w[0], w[2], stride, pad, 0, 0};
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;
  if (g.ho <= 0 || g.wo <= 0) {
    Fail(ErrorCode::kShape, "Conv2d input " + ShapeToString(x) +
                                " too small for kernel " + std::to_string(g.k));
  }
  return g;
}

int64_t ChunkSamples(const ConvGeom& g) {
  constexpr int64_t kBudget = int64_t{1} << 23;  // floats per im2col buffer
  const int64_t per = std::max<int64_t>(1, g.K() * g.P());
  return std::clamp<int64_t>(kBudget / per, 1, g.n);
}

void Im2Col(const float* x, const ConvGeom& g, int64_t n0, int64_t nb,
            float* col) {
  const int64_t cols = nb * g.P();
  for (int64_t c = 0; c < g.c; ++c) {
    for (int64_t ki = 0; ki < g.k; ++ki) {
      for (int64_t kj = 0; kj < g.k; ++kj) {
        float* dst = col + ((c * g.k + ki) * g.k + kj) * cols;
        for (int64_t b = 0; b < nb; ++b) {
          const float* src = x + ((n0 + b) * g.c + c) * g.h * g.w;
          for (int64_t oh = 0; oh < g.ho; ++oh) {
            const int64_t ih = oh * g.stride - g.pad + ki;
            if (ih < 0 || ih >= g.h) {
              std::fill(dst, dst + g.wo, 0.0f);
              dst += g.wo;
              continue;
            }
            const float* row = src + ih * g.w;
            for (int64_t ow = 0; ow < g.wo; ++ow) {
              const int64_t iw = ow * g.stride - g.pad + kj;
              *dst++ = (iw >= 0 && iw < g.w) ? row[iw] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void Col2Im(const float* col, const ConvGeom& g, int64_t n0, int64_t nb,
            float* dx) {
  const int64_t cols = nb * g.P();
  for (int64_t c = 0; c < g.c; ++c) {
    for (int64_t ki = 0; ki < g.k; ++ki) {
      for (int64_t kj = 0; kj < g.k; ++kj) {
        const float* srcp = col + ((c * g.k + ki) * g.k + kj) * cols;
        for (int64_t b = 0; b < nb; ++b) {
          float* dst = dx + ((n0 + b) * g.c + c) * g.h * g.w;
          for (int64_t oh = 0; oh < g.ho; ++oh) {
            const int64_t ih = oh * g.stride - g.pad + ki;
            if (ih < 0 || ih >= g.h) {
              srcp += g.wo;
              continue;
            }
            float* row = dst + ih * g.w;
            for (int64_t ow = 0; ow < g.wo; ++ow) {
              const int64_t iw = ow * g.stride - g.pad + kj;
              if (iw >= 0 && iw < g.w) row[iw] += *srcp;
              ++srcp;
            }
          }
        }
      }
    }
  }
}

// (N, O, P) slab -> (O, nb*P) matrix for samples [n0, n0+nb).
void GatherOutput(const float* y, const ConvGeom& g, int64_t n0, int64_t nb,
                  float* m) {
  const int64_t P = g.P();
  for (int64_t o = 0; o < g.o; ++o) {
    for (int64_t b = 0; b < nb; ++b) {
      const float* src = y + ((n0 + b) * g.o + o) * P;
      std::copy(src, src + P, m + o * nb * P + b * P);
    }
  }
}

void ScatterOutput(const float* m, const ConvGeom& g, int64_t n0, int64_t nb,
                   float* y) {
  const int64_t P = g.P();
  for (int64_t o = 0; o < g.o; ++o) {
    for (int64_t b = 0; b < nb; ++b) {
      const float* src = m + o * nb * P + b * P;
      std::copy(src, src + P, y + ((n0 + b) * g.o + o) * P);
    }
  }
}

std::vector<float> ConvForwardKernel(const Tensor& x, const Tensor& w,
                                     const ConvGeom& g) {
  std::vector<float> y(g.n * g.o * g.P());
  const int64_t chunk = ChunkSamples(g);
  std::vector<float> col(g.K() * chunk * g.P());
  std::vector<float> out(g.o * chunk * g.P());
  ConstMatMap wm(w.data().data(), g.o, g.K());
  for (int64_t n0 = 0; n0 < g.n; n0 += chunk) {
    const int64_t nb = std::min(chunk, g.n - n0);
    Im2Col(x.data().data(), g, n0, nb, col.data());
    ConstMatMap cm(col.data(), g.K(), nb * g.P());
    MatMap om(out.data(), g.o, nb * g.P());
    om.noalias() = wm * cm;
    ScatterOutput(out.data(), g, n0, nb, y.data());
  }
  return y;
}

std::vector<float> ConvInputGradKernel(const Tensor& gy, const Tensor& w,
                                       const ConvGeom& g) {
  std::vector<float> dx(g.n * g.c * g.h * g.w, 0.0f);
  const int64_t chunk = ChunkSamples(g);
  std::vector<float> col(g.K() * chunk * g.P());
  std::vector<float> gm(g.o * chunk * g.P());
  ConstMatMap wm(w.data().data(), g.o, g.K());
  for (int64_t n0 = 0; n0 < g.n; n0 += chunk) {
    const int64_t nb = std::min(chunk, g.n - n0);
    GatherOutput(gy.data().data(), g, n0, nb, gm.data());
    ConstMatMap gmm(gm.data(), g.o, nb * g.P());
    MatMap cm(col.data(), g.K(), nb * g.P());
    cm.noalias() = wm.transpose() * gmm;
    Col2Im(col.data(), g, n0, nb, dx.data());
  }
  return dx;
}

std::vector<float> ConvWeightGradKernel(const Tensor& x, const Tensor& gy,
                                        const ConvGeom& g) {
  std::vector<float> dw(g.o * g.K(), 0.0f);
  const int64_t chunk = ChunkSamples(g);
  std::vector<float> col(g.K() * chunk * g.P());
  std::vector<float> gm(g.o * chunk * g.P());
  MatMap dwm(dw.data(), g.o, g.K());
  for (int64_t n0 = 0; n0 < g.n; n0 += chunk) {
    const int64_t nb = std::min(chunk, g.n - n0);
    Im2Col(x.data().data(), g, n0, nb, col.data());
    GatherOutput(gy.data().data(), g, n0, nb, gm.data());
    ConstMatMap cm(col.data(), g.K(), nb * g.P());
    ConstMatMap gmm(gm.data(), g.o, nb * g.P());
    dwm.noalias() += gmm * cm.transpose();
  }
  return dw;
}

struct Conv2dNode : Node {
  Conv2dNode(Tensor x, Tensor w, int s, int p)
      : Node({std::move(x), std::move(w)}), stride(s), pad(p) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    const Tensor& x = inputs_[0];
    const Tensor& w = inputs_[1];
    Tensor gx = needs_input_grad(0)
                    ? Conv2dInputGrad(g, w, x.shape(), stride, pad)
                    : Tensor();
    Tensor gw = needs_input_grad(1)
                    ? Conv2dWeightGrad(x, g, w.shape(), stride, pad)
                    : Tensor();
    return {gx, gw};
  }
  const char* name() const override { return "Conv2d"; }
  int stride, pad;
};

struct Conv2dInputGradNode : Node {
  Conv2dInputGradNode(Tensor gy, Tensor w, int s, int p)
      : Node({std::move(gy), std::move(w)}), stride(s), pad(p) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    const Tensor& gy = inputs_[0];
    const Tensor& w = inputs_[1];
    Tensor d_gy = needs_input_grad(0) ? Conv2d(g, w, stride, pad) : Tensor();
    Tensor d_w = needs_input_grad(1)
                     ? Conv2dWeightGrad(g, gy, w.shape(), stride, pad)
                     : Tensor();
    return {d_gy, d_w};
  }
  const char* name() const override { return "Conv2dInputGrad"; }
  int stride, pad;
};

struct Conv2dWeightGradNode : Node {
  Conv2dWeightGradNode(Tensor x, Tensor gy, int s, int p)
      : Node({std::move(x), std::move(gy)}), stride(s), pad(p) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    const Tensor& x = inputs_[0];
    const Tensor& gy = inputs_[1];
    Tensor d_x = needs_input_grad(0)
                     ? Conv2dInputGrad(gy, g, x.shape(), stride, pad)
                     : Tensor();
    Tensor d_gy = needs_input_grad(1) ? Conv2d(x, g, stride, pad) : Tensor();
    return {d_x, d_gy};
  }
  const char* name() const override { return "Conv2dWeightGrad"; }
  int stride, pad;
};

// ---------------------------------------------------------------------------
// Pooling, slicing, row selection.

struct AvgPool2Node : Node {
  explicit AvgPool2Node(Tensor x) : Node({std::move(x)}) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {Scale(Upsample2(g), 0.25f)};
  }
  const char* name() const override { return "AvgPool2"; }
};

struct Upsample2Node : Node {
  explicit Upsample2Node(Tensor x) : Node({std::move(x)}) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {Scale(AvgPool2(g), 4.0f)};
  }
  const char* name() const override { return "Upsample2"; }
};

struct SliceNode : Node {
  SliceNode(Tensor flat, int64_t off) : Node({std::move(flat)}), offset(off) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {PadInto(g, offset, inputs_[0].numel())};
  }
  const char* name() const override { return "Slice"; }
  int64_t offset;
};

struct PadIntoNode : Node {
  PadIntoNode(Tensor a, int64_t off) : Node({std::move(a)}), offset(off) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {Slice(g, offset, inputs_[0].shape())};
  }
  const char* name() const override { return "PadInto"; }
  int64_t offset;
};

struct ConcatNode : Node {
  explicit ConcatNode(std::vector<Tensor> parts) : Node(std::move(parts)) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    std::vector<Tensor> out;
    int64_t offset = 0;
    for (size_t i = 0; i < inputs_.size(); ++i) {
      out.push_back(needs_input_grad(i) ? Slice(g, offset, inputs_[i].shape())
                                        : Tensor());
      offset += inputs_[i].numel();
    }
    return out;
  }
  const char* name() const override { return "Concat"; }
};

struct IndexSelectNode : Node {
  IndexSelectNode(Tensor x, std::vector<int64_t> r)
      : Node({std::move(x)}), rows(std::move(r)) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {IndexAdd(g, rows, inputs_[0].shape())};
  }
  const char* name() const override { return "IndexSelect"; }
  std::vector<int64_t> rows;
};

struct IndexAddNode : Node {
  IndexAddNode(Tensor src, std::vector<int64_t> r)
      : Node({std::move(src)}), rows(std::move(r)) {}
  std::vector<Tensor> Backward(const Tensor& g) override {
    return {IndexSelect(g, rows)};
  }
  const char* name() const override { return "IndexAdd"; }
  std::vector<int64_t> rows;
};

void CheckPoolable(const Shape& s, const char* op) {
  if (s.size() != 4) {
    Fail(ErrorCode::kShape, std::string(op) + " expects NCHW, got " +
                                ShapeToString(s));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor Add(const Tensor& a, const Tensor& b) {
  CheckSameShape(a, b, "Add");
  return Tensor::MakeResult(a.shape(),
                            Map2(a, b, [](float x, float y) { return x + y; }),
                            MaybeNode<AddNode>({&a, &b}, a, b));
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  CheckSameShape(a, b, "Sub");
  return Tensor::MakeResult(a.shape(),
                            Map2(a, b, [](float x, float y) { return x - y; }),
                            MaybeNode<SubNode>({&a, &b}, a, b));
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  CheckSameShape(a, b, "Mul");
  return Tensor::MakeResult(a.shape(),
                            Map2(a, b, [](float x, float y) { return x * y; }),
                            MaybeNode<MulNode>({&a, &b}, a, b));
}

Tensor Div(const Tensor& a, const Tensor& b) {
  CheckSameShape(a, b, "Div");
  return Tensor::MakeResult(a.shape(),
                            Map2(a, b, [](float x, float y) { return x / y; }),
                            MaybeNode<DivNode>({&a, &b}, a, b));
}

Tensor Neg(const Tensor& a) {
  return Tensor::MakeResult(a.shape(), Map1(a, [](float x) { return -x; }),
                            MaybeNode<NegNode>({&a}, a));
}

Tensor Scale(const Tensor& a, float factor) {
  return Tensor::MakeResult(a.shape(),
                            Map1(a, [factor](float x) { return x * factor; }),
                            MaybeNode<ScaleNode>({&a}, a, factor));
}

Tensor AddScalar(const Tensor& a, float value) {
  return Tensor::MakeResult(a.shape(),
                            Map1(a, [value](float x) { return x + value; }),
                            MaybeNode<IdentityGradNode>({&a}, a));
}

Tensor Pow(const Tensor& a, float exponent) {
  std::vector<float> out;
  if (exponent == 2.0f) {
    out = Map1(a, [](float x) { return x * x; });
  } else if (exponent == -0.5f) {
    out = Map1(a, [](float x) { return 1.0f / std::sqrt(x); });
  } else {
    out = Map1(a, [exponent](float x) { return std::pow(x, exponent); });
  }
  return Tensor::MakeResult(a.shape(), std::move(out),
                            MaybeNode<PowNode>({&a}, a, exponent));
}

Tensor Exp(const Tensor& a) {
  return Tensor::MakeResult(a.shape(),
                            Map1(a, [](float x) { return std::exp(x); }),
                            MaybeNode<ExpNode>({&a}, a));
}

Tensor Log(const Tensor& a) {
  return Tensor::MakeResult(a.shape(),
                            Map1(a, [](float x) { return std::log(x); }),
                            MaybeNode<LogNode>({&a}, a));
}

Tensor Relu(const Tensor& a) {
  std::shared_ptr<Node> node;
  if (ShouldRecord({&a})) {
    Tensor mask = Tensor::FromData(
        a.shape(), Map1(a, [](float x) { return x > 0.0f ? 1.0f : 0.0f; }));
    node = std::make_shared<ReluNode>(a, std::move(mask));
  }
  return Tensor::MakeResult(
      a.shape(), Map1(a, [](float x) { return x > 0.0f ? x : 0.0f; }),
      std::move(node));
}

Tensor Reshape(const Tensor& a, Shape shape) {
  return Tensor::ShareStorage(a, std::move(shape),
                              MaybeNode<ReshapeNode>({&a}, a));
}

Tensor SumOuterInner(const Tensor& a, int64_t outer, int64_t mid,
                     int64_t inner, Shape shape) {
  Require(outer * mid * inner == a.numel() && NumElements(shape) == mid,
          ErrorCode::kShape, "SumOuterInner: bad factorization of " +
                                 ShapeToString(a.shape()));
  const float* x = a.data().data();
  std::vector<double> acc(mid, 0.0);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t m = 0; m < mid; ++m) {
      const float* p = x + (o * mid + m) * inner;
      double s = 0.0;
      for (int64_t i = 0; i < inner; ++i) s += p[i];
      acc[m] += s;
    }
  }
  std::vector<float> out(acc.begin(), acc.end());
  return Tensor::MakeResult(std::move(shape), std::move(out),
                            MaybeNode<SumOuterInnerNode>({&a}, a, outer, inner));
}

Tensor Broadcast(const Tensor& a, int64_t outer, int64_t inner, Shape shape) {
  const int64_t mid = a.numel();
  Require(outer * mid * inner == NumElements(shape), ErrorCode::kShape,
          "Broadcast: " + ShapeToString(a.shape()) + " cannot fill " +
              ShapeToString(shape));
  const float* x = a.data().data();
  std::vector<float> out(outer * mid * inner);
  float* y = out.data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t m = 0; m < mid; ++m) {
      std::fill(y, y + inner, x[m]);
      y += inner;
    }
  }
  return Tensor::MakeResult(std::move(shape), std::move(out),
                            MaybeNode<BroadcastNode>({&a}, a, outer, inner));
}

Tensor Sum(const Tensor& a) { return SumOuterInner(a, 1, 1, a.numel(), {}); }

Tensor Mean(const Tensor& a) {
  return Scale(Sum(a), 1.0f / static_cast<float>(a.numel()));
}

Tensor SquaredNorm(const Tensor& a) { return Sum(Mul(a, a)); }

Tensor MatMul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  Require(a.rank() == 2 && b.rank() == 2, ErrorCode::kShape,
          "MatMul expects matrices, got " + ShapeToString(a.shape()) + " and " +
              ShapeToString(b.shape()));
  const int64_t ar = a.dim(0), ac = a.dim(1), br = b.dim(0), bc = b.dim(1);
  const int64_t m = trans_a ? ac : ar;
  const int64_t k = trans_a ? ar : ac;
  const int64_t k2 = trans_b ? bc : br;
  const int64_t n = trans_b ? br : bc;
  Require(k == k2, ErrorCode::kShape,
          "MatMul inner dimension mismatch " + ShapeToString(a.shape()) +
              " x " + ShapeToString(b.shape()));
  std::vector<float> out(m * n);
  ConstMatMap am(a.data().data(), ar, ac);
  ConstMatMap bm(b.data().data(), br, bc);
  MatMap cm(out.data(), m, n);
  if (!trans_a && !trans_b) {
    cm.noalias() = am * bm;
  } else if (!trans_a && trans_b) {
    cm.noalias() = am * bm.transpose();
  } else if (trans_a && !trans_b) {
    cm.noalias() = am.transpose() * bm;
  } else {
    cm.noalias() = am.transpose() * bm.transpose();
  }
  return Tensor::MakeResult({m, n}, std::move(out),
                            MaybeNode<MatMulNode>({&a, &b}, a, b, trans_a,
                                                  trans_b));
}

Tensor Conv2d(const Tensor& x, const Tensor& w, int stride, int pad) {
  const ConvGeom g = MakeGeom(x.shape(), w.shape(), stride, pad);
  return Tensor::MakeResult({g.n, g.o, g.ho, g.wo}, ConvForwardKernel(x, w, g),
                            MaybeNode<Conv2dNode>({&x, &w}, x, w, stride, pad));
}

Tensor Conv2dInputGrad(const Tensor& grad_y, const Tensor& w,
                       const Shape& x_shape, int stride, int pad) {
  const ConvGeom g = MakeGeom(x_shape, w.shape(), stride, pad);
  Require(grad_y.shape() == Shape({g.n, g.o, g.ho, g.wo}), ErrorCode::kShape,
          "Conv2dInputGrad: output gradient shape mismatch");
  return Tensor::MakeResult(
      x_shape, ConvInputGradKernel(grad_y, w, g),
      MaybeNode<Conv2dInputGradNode>({&grad_y, &w}, grad_y, w, stride, pad));
}

Tensor Conv2dWeightGrad(const Tensor& x, const Tensor& grad_y,
                        const Shape& w_shape, int stride, int pad) {
  const ConvGeom g = MakeGeom(x.shape(), w_shape, stride, pad);
  Require(grad_y.shape() == Shape({g.n, g.o, g.ho, g.wo}), ErrorCode::kShape,
          "Conv2dWeightGrad: output gradient shape mismatch");
  return Tensor::MakeResult(
      w_shape, ConvWeightGradKernel(x, grad_y, g),
      MaybeNode<Conv2dWeightGradNode>({&x, &grad_y}, x, grad_y, stride, pad));
}

Tensor AvgPool2(const Tensor& x) {
  CheckPoolable(x.shape(), "AvgPool2");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Require(h % 2 == 0 && w % 2 == 0, ErrorCode::kShape,
          "AvgPool2 needs even spatial size, got " + ShapeToString(x.shape()));
  const int64_t ho = h / 2, wo = w / 2;
  std::vector<float> out(n * c * ho * wo);
  const float* src = x.data().data();
  for (int64_t p = 0; p < n * c; ++p) {
    const float* s = src + p * h * w;
    float* d = out.data() + p * ho * wo;
    for (int64_t i = 0; i < ho; ++i) {
      const float* r0 = s + (2 * i) * w;
      const float* r1 = r0 + w;
      for (int64_t j = 0; j < wo; ++j) {
        d[i * wo + j] =
            0.25f * (r0[2 * j] + r0[2 * j + 1] + r1[2 * j] + r1[2 * j + 1]);
      }
    }
  }
  return Tensor::MakeResult({n, c, ho, wo}, std::move(out),
                            MaybeNode<AvgPool2Node>({&x}, x));
}

Tensor Upsample2(const Tensor& x) {
  CheckPoolable(x.shape(), "Upsample2");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t ho = 2 * h, wo = 2 * w;
  std::vector<float> out(n * c * ho * wo);
  const float* src = x.data().data();
  for (int64_t p = 0; p < n * c; ++p) {
    const float* s = src + p * h * w;
    float* d = out.data() + p * ho * wo;
    for (int64_t i = 0; i < ho; ++i) {
      const float* r = s + (i / 2) * w;
      for (int64_t j = 0; j < wo; ++j) d[i * wo + j] = r[j / 2];
    }
  }
  return Tensor::MakeResult({n, c, ho, wo}, std::move(out),
                            MaybeNode<Upsample2Node>({&x}, x));
}

Tensor Slice(const Tensor& flat, int64_t offset, Shape shape) {
  const int64_t len = NumElements(shape);
  Require(offset >= 0 && offset + len <= flat.numel(), ErrorCode::kShape,
          "Slice out of range");
  const auto src = flat.data();
  std::vector<float> out(src.begin() + offset, src.begin() + offset + len);
  return Tensor::MakeResult(std::move(shape), std::move(out),
                            MaybeNode<SliceNode>({&flat}, flat, offset));
}

Tensor PadInto(const Tensor& a, int64_t offset, int64_t total) {
  Require(offset >= 0 && offset + a.numel() <= total, ErrorCode::kShape,
          "PadInto out of range");
  std::vector<float> out(total, 0.0f);
  const auto src = a.data();
  std::copy(src.begin(), src.end(), out.begin() + offset);
  return Tensor::MakeResult({total}, std::move(out),
                            MaybeNode<PadIntoNode>({&a}, a, offset));
}

Tensor Concat(const std::vector<Tensor>& parts) {
  int64_t total = 0;
  bool record = false;
  for (const Tensor& p : parts) {
    total += p.numel();
    record = record || ShouldRecord({&p});
  }
  std::vector<float> out;
  out.reserve(total);
  for (const Tensor& p : parts) {
    const auto d = p.data();
    out.insert(out.end(), d.begin(), d.end());
  }
  std::shared_ptr<Node> node;
  if (record) node = std::make_shared<ConcatNode>(parts);
  return Tensor::MakeResult({total}, std::move(out), std::move(node));
}

Tensor IndexSelect(const Tensor& x, const std::vector<int64_t>& rows) {
  Require(x.rank() >= 1, ErrorCode::kShape, "IndexSelect on scalar");
  const int64_t n = x.dim(0);
  const int64_t row = n ? x.numel() / n : 0;
  Shape shape = x.shape();
  shape[0] = static_cast<int64_t>(rows.size());
  std::vector<float> out(rows.size() * row);
  const float* src = x.data().data();
  for (size_t i = 0; i < rows.size(); ++i) {
    Require(rows[i] >= 0 && rows[i] < n, ErrorCode::kShape,
            "IndexSelect row out of range");
    std::copy(src + rows[i] * row, src + (rows[i] + 1) * row,
              out.begin() + i * row);
  }
  return Tensor::MakeResult(std::move(shape), std::move(out),
                            MaybeNode<IndexSelectNode>({&x}, x, rows));
}

Tensor IndexAdd(const Tensor& src, const std::vector<int64_t>& rows,
                const Shape& shape) {
  const int64_t n = shape.empty() ? 0 : shape[0];
  const int64_t row = n ? NumElements(shape) / n : 0;
  Require(src.dim(0) == static_cast<int64_t>(rows.size()) &&
              src.numel() == static_cast<int64_t>(rows.size()) * row,
          ErrorCode::kShape, "IndexAdd shape mismatch");
  std::vector<float> out(NumElements(shape), 0.0f);
  const float* s = src.data().data();
  for (size_t i = 0; i < rows.size(); ++i) {
    float* d = out.data() + rows[i] * row;
    for (int64_t j = 0; j < row; ++j) d[j] += s[i * row + j];
  }
  return Tensor::MakeResult(shape, std::move(out),
                            MaybeNode<IndexAddNode>({&src}, src, rows));
}

// ---------------------------------------------------------------------------

Tensor BiasAdd(const Tensor& x, const Tensor& bias) {
  Require(x.rank() >= 2 && x.dim(1) == bias.numel(), ErrorCode::kShape,
          "BiasAdd: bias " + ShapeToString(bias.shape()) + " vs input " +
              ShapeToString(x.shape()));
  const int64_t outer = x.dim(0);
  const int64_t inner = x.numel() / (outer * x.dim(1));
  return Add(x, Broadcast(bias, outer, inner, x.shape()));
}

Tensor ScalarMul(const Tensor& x, const Tensor& scalar) {
  Require(scalar.numel() == 1, ErrorCode::kShape, "ScalarMul needs a scalar");
  return Mul(x, Broadcast(scalar, 1, x.numel(), x.shape()));
}

Tensor InstanceNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    float eps) {
  Require(x.rank() == 4, ErrorCode::kShape, "InstanceNorm expects NCHW");
  const int64_t n = x.dim(0), c = x.dim(1);
  const int64_t rows = n * c;
  const int64_t spatial = x.dim(2) * x.dim(3);
  const float inv_s = 1.0f / static_cast<float>(spatial);
  Tensor mean = Scale(SumOuterInner(x, 1, rows, spatial, {rows}), inv_s);
  Tensor centered = Sub(x, Broadcast(mean, 1, spatial, x.shape()));
  Tensor var =
      Scale(SumOuterInner(Mul(centered, centered), 1, rows, spatial, {rows}),
            inv_s);
  Tensor inv_std = Pow(AddScalar(var, eps), -0.5f);
  Tensor normed = Mul(centered, Broadcast(inv_std, 1, spatial, x.shape()));
  Tensor scaled = Mul(normed, Broadcast(gamma, n, spatial, x.shape()));
  return Add(scaled, Broadcast(beta, n, spatial, x.shape()));
}

Tensor LogSoftmax(const Tensor& logits) {
  Require(logits.rank() == 2, ErrorCode::kShape, "LogSoftmax expects (B, K)");
  const int64_t b = logits.dim(0), k = logits.dim(1);
  std::vector<float> row_max(b);
  const float* z = logits.data().data();
  for (int64_t i = 0; i < b; ++i) {
    row_max[i] = *std::max_element(z + i * k, z + (i + 1) * k);
  }
  Tensor shift = Broadcast(Tensor::FromData({b}, std::move(row_max)), 1, k,
                           logits.shape());
  Tensor shifted = Sub(logits, shift);
  Tensor lse = Log(SumOuterInner(Exp(shifted), 1, b, k, {b}));
  return Sub(shifted, Broadcast(lse, 1, k, logits.shape()));
}

Tensor SoftCrossEntropy(const Tensor& logits, const Tensor& targets) {
  CheckSameShape(logits, targets, "SoftCrossEntropy");
  const float inv_b = 1.0f / static_cast<float>(logits.dim(0));
  return Scale(Sum(Mul(LogSoftmax(logits), targets)), -inv_b);
}

Tensor CrossEntropy(const Tensor& logits, const std::vector<int>& labels) {
  Require(logits.rank() == 2 &&
              logits.dim(0) == static_cast<int64_t>(labels.size()),
          ErrorCode::kShape, "CrossEntropy: label count mismatch");
  const int64_t k = logits.dim(1);
  std::vector<float> onehot(logits.numel(), 0.0f);
  for (size_t i = 0; i < labels.size(); ++i) {
    Require(labels[i] >= 0 && labels[i] < k, ErrorCode::kDomain,
            "CrossEntropy: label out of range");
    onehot[i * k + labels[i]] = 1.0f;
  }
  return SoftCrossEntropy(logits,
                          Tensor::FromData(logits.shape(), std::move(onehot)));
}

}  // namespace ldistill::ops
