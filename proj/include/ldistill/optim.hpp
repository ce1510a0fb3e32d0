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

#ifndef LDISTILL_OPTIM_HPP_
#define LDISTILL_OPTIM_HPP_

#include <cmath>
#include <vector>

#include "ldistill/error.hpp"
#include "ldistill/tensor.hpp"

namespace ldistill {

// SGD with heavy-ball momentum and L2 weight decay, updating leaf tensors
// in place:  v <- mu v + (g + wd p);  p <- p - lr v.
class Sgd {
 public:
  Sgd(float lr, float momentum = 0.0f, float weight_decay = 0.0f)
      : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

  void set_lr(float lr) { lr_ = lr; }
  float lr() const { return lr_; }

  void Step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
    Require(params.size() == grads.size(), ErrorCode::kInternal,
            "optimizer: parameter/gradient count mismatch");
    if (velocity_.empty() && momentum_ != 0.0f) {
      for (const Tensor& p : params) velocity_.emplace_back(p.numel(), 0.0f);
    }
    for (size_t i = 0; i < params.size(); ++i) {
      auto p = params[i].data();
      const auto g = grads[i].data();
      if (momentum_ != 0.0f) {
        auto& v = velocity_[i];
        for (size_t j = 0; j < p.size(); ++j) {
          v[j] = momentum_ * v[j] + g[j] + weight_decay_ * p[j];
          p[j] -= lr_ * v[j];
        }
      } else {
        for (size_t j = 0; j < p.size(); ++j) {
          p[j] -= lr_ * (g[j] + weight_decay_ * p[j]);
        }
      }
    }
  }

 private:
  float lr_;
  float momentum_;
  float weight_decay_;
  std::vector<std::vector<float>> velocity_;
};

class Adam {
 public:
  explicit Adam(float lr, float beta1 = 0.9f, float beta2 = 0.999f,
                float eps = 1e-8f)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void Step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
    if (m_.empty()) {
      for (const Tensor& p : params) {
        m_.emplace_back(p.numel(), 0.0f);
        v_.emplace_back(p.numel(), 0.0f);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    const float step = static_cast<float>(lr_ * std::sqrt(c2) / c1);
    for (size_t i = 0; i < params.size(); ++i) {
      auto p = params[i].data();
      const auto g = grads[i].data();
      auto& m = m_[i];
      auto& v = v_[i];
      for (size_t j = 0; j < p.size(); ++j) {
        m[j] = beta1_ * m[j] + (1.0f - beta1_) * g[j];
        v[j] = beta2_ * v[j] + (1.0f - beta2_) * g[j] * g[j];
        p[j] -= step * m[j] / (std::sqrt(v[j]) + eps_);
      }
    }
  }

 private:
  float lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace ldistill

#endif  // LDISTILL_OPTIM_HPP_
