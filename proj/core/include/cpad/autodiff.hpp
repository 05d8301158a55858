#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cpad/tensor.hpp"

namespace cpad {

// Reverse-mode autodiff over dense tensors. A Var is a handle into an acyclic
// computation graph kept alive by shared ownership; backward() walks the graph
// in reverse topological order and accumulates (sums) gradients across fan-out.
// No operation mutates its inputs.

struct Node {
  Tensor value;
  Tensor grad;  // allocated on demand, zeroed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // reads this->grad, accumulates parents'
  const char* op = "leaf";

  void ensure_grad();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Var constant(Tensor value);
  static Var param(Tensor value);  // leaf with requires_grad

  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool defined() const { return node_ != nullptr; }
  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// primitives
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double c);
Var add_const(const Var& a, double c);
Var pow_const(const Var& a, double p);
Var vlog(const Var& a);
Var vclamp(const Var& a, double lo, double hi);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
Var softmax(const Var& a, int axis);  // shift-normalized
Var transpose(const Var& a);
Var concat(const std::vector<Var>& parts, int axis);
Var slice(const Var& a, int axis, int start, int len);
Var sum_all(const Var& a);    // -> 1x1
Var mean_all(const Var& a);   // -> 1x1
Var sum_axis(const Var& a, int axis);
Var mean_axis(const Var& a, int axis);
// broadcast: b is 1xN against a MxN (row_*), or Mx1 against MxN (col_*)
Var row_broadcast_add(const Var& a, const Var& b);
Var row_broadcast_mul(const Var& a, const Var& b);
Var col_broadcast_add(const Var& a, const Var& b);
Var col_broadcast_mul(const Var& a, const Var& b);

// Reverse accumulation from a scalar loss; gradient of the loss w.r.t. itself
// is 1. Throws if loss is not 1x1.
void backward(const Var& loss);

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  int64_t step = 0;
};

// Standard Adam with bias correction. params/grads must be index-aligned; the
// state is created lazily on the first call.
void adam_step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

}  // namespace cpad
