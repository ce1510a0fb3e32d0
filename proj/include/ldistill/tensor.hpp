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

// Dense float tensors with a reverse-mode tape.
//
// Every differentiable op records a Node whose backward pass is itself
// written in terms of differentiable ops. Running the backward pass with
// `create_graph = true` therefore records a second graph, which is what
// gradient matching (gradients of gradients) and unrolled trajectory
// matching (gradients through optimizer steps) need.

#ifndef LDISTILL_TENSOR_HPP_
#define LDISTILL_TENSOR_HPP_

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ldistill {

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

class Node;

struct TensorImpl {
  Shape shape;
  std::shared_ptr<std::vector<float>> storage;
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(Shape shape);
  static Tensor Full(Shape shape, float value);
  static Tensor FromData(Shape shape, std::vector<float> values);
  static Tensor Scalar(float value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int64_t dim(int axis) const;
  int rank() const { return static_cast<int>(shape().size()); }
  int64_t numel() const;

  std::span<float> data();
  std::span<const float> data() const;
  float item() const;

  bool requires_grad() const;
  // Marks a leaf as trainable. Returns *this for chaining.
  Tensor& set_requires_grad(bool value);
  const std::shared_ptr<Node>& grad_fn() const;

  // Shares storage, drops history.
  Tensor detach() const;
  // Deep copy without history.
  Tensor clone() const;

  TensorImpl* impl() const { return impl_.get(); }

  // Only for op implementations.
  static Tensor MakeResult(Shape shape, std::vector<float> values,
                           std::shared_ptr<Node> grad_fn);
  static Tensor ShareStorage(const Tensor& source, Shape shape,
                             std::shared_ptr<Node> grad_fn);

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Backward function of one op output.
class Node {
 public:
  explicit Node(std::vector<Tensor> inputs) : inputs_(std::move(inputs)) {}
  virtual ~Node() = default;
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  // One entry per input; an undefined tensor means "no gradient".
  virtual std::vector<Tensor> Backward(const Tensor& grad_output) = 0;
  virtual const char* name() const = 0;

  const std::vector<Tensor>& inputs() const { return inputs_; }

  // Set by Grad() before Backward(); ops may skip gradients nobody reads.
  void set_needs_input_grad(std::vector<bool> needs) {
    needs_input_grad_ = std::move(needs);
  }
  bool needs_input_grad(size_t i) const {
    return i >= needs_input_grad_.size() || needs_input_grad_[i];
  }

 protected:
  std::vector<Tensor> inputs_;

 private:
  std::vector<bool> needs_input_grad_;
};

// Thread-local switch controlling whether ops record history.
bool GradModeEnabled();

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

class NoGradGuard : public GradModeGuard {
 public:
  NoGradGuard() : GradModeGuard(false) {}
};

// Gradients of a scalar `output` with respect to `inputs`. Inputs that do not
// influence the output receive zeros. With `create_graph` the returned
// gradients carry history and can be differentiated again.
std::vector<Tensor> Grad(const Tensor& output, const std::vector<Tensor>& inputs,
                         bool create_graph = false);

// True when an op on these inputs should record a node.
// Bytes held by all live tensor buffers, and the high-water mark since the
// last reset.
int64_t LiveTensorBytes();
int64_t PeakTensorBytes();
void ResetPeakTensorBytes();

bool ShouldRecord(std::initializer_list<const Tensor*> inputs);

}  // namespace ldistill

#endif  // LDISTILL_TENSOR_HPP_
