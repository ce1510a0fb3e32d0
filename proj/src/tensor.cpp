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

#include "ldistill/tensor.hpp"

#include <atomic>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "ldistill/error.hpp"
#include "ldistill/ops.hpp"

namespace ldistill {

namespace {

thread_local bool g_grad_mode = true;
std::atomic<int64_t> g_live_bytes{0};
std::atomic<int64_t> g_peak_bytes{0};

std::shared_ptr<std::vector<float>> MakeStorage(std::vector<float>&& values) {
  const int64_t bytes = static_cast<int64_t>(values.capacity() * sizeof(float));
  const int64_t live = g_live_bytes.fetch_add(bytes) + bytes;
  int64_t peak = g_peak_bytes.load();
  while (live > peak && !g_peak_bytes.compare_exchange_weak(peak, live)) {
  }
  return std::shared_ptr<std::vector<float>>(
      new std::vector<float>(std::move(values)), [bytes](std::vector<float>* v) {
        g_live_bytes.fetch_sub(bytes);
        delete v;
      });
}

}  // namespace

int64_t LiveTensorBytes() { return g_live_bytes.load(); }
int64_t PeakTensorBytes() { return g_peak_bytes.load(); }
void ResetPeakTensorBytes() { g_peak_bytes.store(g_live_bytes.load()); }

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ')';
  return out.str();
}

Tensor Tensor::Zeros(Shape shape) { return Full(std::move(shape), 0.0f); }

Tensor Tensor::Full(Shape shape, float value) {
  const int64_t n = NumElements(shape);
  return FromData(std::move(shape), std::vector<float>(n, value));
}

Tensor Tensor::FromData(Shape shape, std::vector<float> values) {
  for (int64_t d : shape) {
    Require(d >= 0, ErrorCode::kShape, "negative tensor extent");
  }
  Require(NumElements(shape) == static_cast<int64_t>(values.size()),
          ErrorCode::kShape,
          "tensor data size does not match shape " + ShapeToString(shape));
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->shape = std::move(shape);
  t.impl_->storage = MakeStorage(std::move(values));
  return t;
}

Tensor Tensor::Scalar(float value) { return FromData({}, {value}); }

Tensor Tensor::MakeResult(Shape shape, std::vector<float> values,
                          std::shared_ptr<Node> grad_fn) {
  Tensor t = FromData(std::move(shape), std::move(values));
  if (grad_fn) {
    t.impl_->requires_grad = true;
    t.impl_->grad_fn = std::move(grad_fn);
  }
  return t;
}

Tensor Tensor::ShareStorage(const Tensor& source, Shape shape,
                            std::shared_ptr<Node> grad_fn) {
  Require(NumElements(shape) == source.numel(), ErrorCode::kShape,
          "cannot view " + ShapeToString(source.shape()) + " as " +
              ShapeToString(shape));
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->shape = std::move(shape);
  t.impl_->storage = source.impl_->storage;
  if (grad_fn) {
    t.impl_->requires_grad = true;
    t.impl_->grad_fn = std::move(grad_fn);
  }
  return t;
}

const Shape& Tensor::shape() const {
  Require(defined(), ErrorCode::kInternal, "undefined tensor");
  return impl_->shape;
}

int64_t Tensor::dim(int axis) const {
  const Shape& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  Require(axis >= 0 && axis < static_cast<int>(s.size()), ErrorCode::kShape,
          "axis out of range for " + ShapeToString(s));
  return s[axis];
}

int64_t Tensor::numel() const { return NumElements(shape()); }

std::span<float> Tensor::data() {
  Require(defined(), ErrorCode::kInternal, "undefined tensor");
  return {impl_->storage->data(), impl_->storage->size()};
}

std::span<const float> Tensor::data() const {
  Require(defined(), ErrorCode::kInternal, "undefined tensor");
  return {impl_->storage->data(), impl_->storage->size()};
}

float Tensor::item() const {
  Require(numel() == 1, ErrorCode::kShape,
          "item() on tensor of shape " + ShapeToString(shape()));
  return (*impl_->storage)[0];
}

bool Tensor::requires_grad() const { return defined() && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  Require(defined() && !impl_->grad_fn, ErrorCode::kInternal,
          "requires_grad can only be set on leaf tensors");
  impl_->requires_grad = value;
  return *this;
}

const std::shared_ptr<Node>& Tensor::grad_fn() const {
  static const std::shared_ptr<Node> kNone;
  return defined() ? impl_->grad_fn : kNone;
}

Tensor Tensor::detach() const { return ShareStorage(*this, shape(), nullptr); }

Tensor Tensor::clone() const {
  const auto values = data();
  return FromData(shape(), std::vector<float>(values.begin(), values.end()));
}

bool GradModeEnabled() { return g_grad_mode; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(g_grad_mode) {
  g_grad_mode = enabled;
}

GradModeGuard::~GradModeGuard() { g_grad_mode = previous_; }

bool ShouldRecord(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_mode) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

std::vector<Tensor> Grad(const Tensor& output, const std::vector<Tensor>& inputs,
                         bool create_graph) {
  Require(output.numel() == 1, ErrorCode::kShape,
          "Grad needs a scalar output, got " + ShapeToString(output.shape()));

  std::unordered_set<const TensorImpl*> targets;
  for (const Tensor& t : inputs) targets.insert(t.impl());

  // Post-order walk; `needed` marks tensors with a path to some target.
  std::unordered_map<const TensorImpl*, bool> needed;
  std::vector<const TensorImpl*> order;
  {
    struct Frame {
      const TensorImpl* impl;
      size_t next;
    };
    std::vector<Frame> stack;
    std::unordered_set<const TensorImpl*> visited;
    stack.push_back({output.impl(), 0});
    visited.insert(output.impl());
    while (!stack.empty()) {
      Frame& top = stack.back();
      const Node* node = top.impl->grad_fn.get();
      if (node && top.next < node->inputs().size()) {
        const Tensor& in = node->inputs()[top.next++];
        if (in.defined() && in.requires_grad() &&
            visited.insert(in.impl()).second) {
          stack.push_back({in.impl(), 0});
        }
        continue;
      }
      bool need = targets.count(top.impl) > 0;
      if (node) {
        for (const Tensor& in : node->inputs()) {
          if (in.defined()) {
            auto it = needed.find(in.impl());
            if (it != needed.end() && it->second) need = true;
          }
        }
      }
      needed[top.impl] = need;
      order.push_back(top.impl);
      stack.pop_back();
    }
  }

  std::unordered_map<const TensorImpl*, Tensor> grads;
  GradModeGuard mode(create_graph);
  grads[output.impl()] = Tensor::Full(output.shape(), 1.0f);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const TensorImpl* impl = *it;
    if (!needed[impl] || !impl->grad_fn) continue;
    auto git = grads.find(impl);
    if (git == grads.end()) continue;
    Tensor g = git->second;
    if (!targets.count(impl)) grads.erase(git);

    Node* node = impl->grad_fn.get();
    bool any = false;
    std::vector<bool> needs;
    needs.reserve(node->inputs().size());
    for (const Tensor& in : node->inputs()) {
      const bool n = in.defined() && in.requires_grad() && needed[in.impl()];
      needs.push_back(n);
      any = any || n;
    }
    if (!any) continue;
    node->set_needs_input_grad(std::move(needs));
    std::vector<Tensor> in_grads = node->Backward(g);
    const auto& ins = node->inputs();
    for (size_t i = 0; i < ins.size() && i < in_grads.size(); ++i) {
      if (!ins[i].defined() || !in_grads[i].defined()) continue;
      if (!ins[i].requires_grad() || !needed[ins[i].impl()]) continue;
      auto [slot, inserted] = grads.try_emplace(ins[i].impl(), in_grads[i]);
      if (!inserted) slot->second = ops::Add(slot->second, in_grads[i]);
    }
  }

  std::vector<Tensor> result;
  result.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    auto it = grads.find(t.impl());
    if (it != grads.end()) {
      result.push_back(it->second);
    } else {
      result.push_back(Tensor::Zeros(t.shape()));
    }
  }
  return result;
}

}  // namespace ldistill
