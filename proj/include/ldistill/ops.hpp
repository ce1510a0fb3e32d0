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

// Differentiable tensor ops. Backward passes are expressed with these same
// ops, so every op here supports higher-order differentiation.

#ifndef LDISTILL_OPS_HPP_
#define LDISTILL_OPS_HPP_

#include <cstdint>
#include <vector>

#include "ldistill/tensor.hpp"

namespace ldistill::ops {

// Elementwise, equal shapes.
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Div(const Tensor& a, const Tensor& b);
Tensor Neg(const Tensor& a);
Tensor Scale(const Tensor& a, float factor);
Tensor AddScalar(const Tensor& a, float value);
Tensor Pow(const Tensor& a, float exponent);
Tensor Exp(const Tensor& a);
Tensor Log(const Tensor& a);
Tensor Relu(const Tensor& a);

Tensor Reshape(const Tensor& a, Shape shape);

// Views `a` as (outer, mid, inner) and sums the outer and inner axes; the
// result has `shape` with NumElements(shape) == mid.
Tensor SumOuterInner(const Tensor& a, int64_t outer, int64_t mid,
                     int64_t inner, Shape shape);
// Adjoint of SumOuterInner: repeats `a` (mid elements) to (outer, mid, inner).
Tensor Broadcast(const Tensor& a, int64_t outer, int64_t inner, Shape shape);

Tensor Sum(const Tensor& a);
Tensor Mean(const Tensor& a);
Tensor SquaredNorm(const Tensor& a);

// 2-D matrix product with optional transposes.
Tensor MatMul(const Tensor& a, const Tensor& b, bool trans_a = false,
              bool trans_b = false);

// NCHW convolution without bias; weight is (out, in, k, k).
Tensor Conv2d(const Tensor& x, const Tensor& w, int stride, int pad);
Tensor Conv2dInputGrad(const Tensor& grad_y, const Tensor& w,
                       const Shape& x_shape, int stride, int pad);
Tensor Conv2dWeightGrad(const Tensor& x, const Tensor& grad_y,
                        const Shape& w_shape, int stride, int pad);

// 2x2 average pooling and its adjoint-up-to-scale, nearest upsampling.
Tensor AvgPool2(const Tensor& x);
Tensor Upsample2(const Tensor& x);

// Reads `NumElements(shape)` values of a 1-D tensor starting at `offset`.
Tensor Slice(const Tensor& flat, int64_t offset, Shape shape);
// Writes `a` into a zero 1-D tensor of length `total` at `offset`.
Tensor PadInto(const Tensor& a, int64_t offset, int64_t total);
// Flattens and concatenates into one 1-D tensor.
Tensor Concat(const std::vector<Tensor>& parts);

// Rows along axis 0.
Tensor IndexSelect(const Tensor& x, const std::vector<int64_t>& rows);
Tensor IndexAdd(const Tensor& src, const std::vector<int64_t>& rows,
                const Shape& shape);

// Composites.
Tensor BiasAdd(const Tensor& x, const Tensor& bias);  // bias over axis 1
Tensor ScalarMul(const Tensor& x, const Tensor& scalar);
Tensor InstanceNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    float eps = 1e-5f);
Tensor LogSoftmax(const Tensor& logits);
// Mean cross entropy of (batch, classes) logits against integer labels.
Tensor CrossEntropy(const Tensor& logits, const std::vector<int>& labels);
// Mean cross entropy against (batch, classes) target distributions.
Tensor SoftCrossEntropy(const Tensor& logits, const Tensor& targets);

}  // namespace ldistill::ops

#endif  // LDISTILL_OPS_HPP_
