#include "cpad/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace cpad {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
}

std::shared_ptr<Node> make_node(Tensor value, std::vector<std::shared_ptr<Node>> parents,
                                const char* op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->op = op;
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  return n;
}

// elementwise helper: value = f(a), da += dy * dfdx(a, y)
Var unary_elementwise(const Var& a, const char* op, auto&& f, auto&& dfdx) {
  const Tensor& x = a.value();
  Tensor y = x;
  for (auto& v : y.data) v = f(v);
  auto n = make_node(std::move(y), {a.node()}, op);
  if (n->requires_grad) {
    n->backprop = [dfdx](Node& self) {
      Node& pa = *self.parents[0];
      if (!pa.requires_grad) return;
      pa.ensure_grad();
      const size_t sz = self.value.data.size();
      for (size_t i = 0; i < sz; ++i)
        pa.grad.data[i] +=
            self.grad.data[i] * dfdx(pa.value.data[i], self.value.data[i]);
    };
  }
  return Var(n);
}

}  // namespace

void Node::ensure_grad() {
  if (grad.data.empty()) grad = Tensor(value.shape, 0.0);
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(n);
}

Var Var::param(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(n);
}

Var matmul(const Var& a, const Var& b) {
  Tensor c;
  matmul_nn(a.value(), b.value(), c, false);
  auto n = make_node(std::move(c), {a.node(), b.node()}, "matmul");
  if (n->requires_grad) {
    n->backprop = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        matmul_nt(self.grad, pb.value, pa.grad, true);  // dA += dC * B^T
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        matmul_tn(pa.value, self.grad, pb.grad, true);  // dB += A^T * dC
      }
    };
  }
  return Var(n);
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += b.value().data[i];
  auto n = make_node(std::move(y), {a.node(), b.node()}, "add");
  if (n->requires_grad) {
    n->backprop = [](Node& self) {
      for (auto& p : self.parents) {
        if (!p->requires_grad) continue;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.data.size(); ++i)
          p->grad.data[i] += self.grad.data[i];
      }
    };
  }
  return Var(n);
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] -= b.value().data[i];
  auto n = make_node(std::move(y), {a.node(), b.node()}, "sub");
  if (n->requires_grad) {
    n->backprop = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (size_t i = 0; i < self.grad.data.size(); ++i)
          pa.grad.data[i] += self.grad.data[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (size_t i = 0; i < self.grad.data.size(); ++i)
          pb.grad.data[i] -= self.grad.data[i];
      }
    };
  }
  return Var(n);
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "multiply");
  Tensor y = a.value();
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] *= b.value().data[i];
  auto n = make_node(std::move(y), {a.node(), b.node()}, "multiply");
  if (n->requires_grad) {
    n->backprop = [](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (size_t i = 0; i < self.grad.data.size(); ++i)
          pa.grad.data[i] += self.grad.data[i] * pb.value.data[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (size_t i = 0; i < self.grad.data.size(); ++i)
          pb.grad.data[i] += self.grad.data[i] * pa.value.data[i];
      }
    };
  }
  return Var(n);
}

Var scale(const Var& a, double c) {
  return unary_elementwise(
      a, "scale", [c](double x) { return c * x; },
      [c](double, double) { return c; });
}

Var add_const(const Var& a, double c) {
  return unary_elementwise(
      a, "add_const", [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Var pow_const(const Var& a, double p) {
  return unary_elementwise(
      a, "pow_const", [p](double x) { return std::pow(x, p); },
      [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Var vlog(const Var& a) {
  return unary_elementwise(
      a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var vclamp(const Var& a, double lo, double hi) {
  return unary_elementwise(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var relu(const Var& a) {
  return unary_elementwise(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& a, double slope) {
  return unary_elementwise(
      a, "leaky_relu", [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var sigmoid(const Var& a) {
  return unary_elementwise(
      a, "sigmoid",
      [](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var softmax(const Var& a, int axis) {
  const Tensor& x = a.value();
  if (x.shape.size() > 2) throw std::invalid_argument("softmax: rank > 2");
  if (axis != 0 && axis != 1) throw std::invalid_argument("softmax: axis must be 0 or 1");
  const int R = x.rows(), C = x.cols();
  Tensor y = x;
  auto apply_lane = [&](int count, auto&& get, auto&& set) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < count; ++i) mx = std::max(mx, get(i));
    double denom = 0.0;
    for (int i = 0; i < count; ++i) denom += std::exp(get(i) - mx);
    for (int i = 0; i < count; ++i) set(i, std::exp(get(i) - mx) / denom);
  };
  if (axis == 1) {
    for (int r = 0; r < R; ++r)
      apply_lane(
          C, [&](int i) { return x.at(r, i); }, [&](int i, double v) { y.at(r, i) = v; });
  } else {
    for (int c = 0; c < C; ++c)
      apply_lane(
          R, [&](int i) { return x.at(i, c); }, [&](int i, double v) { y.at(i, c) = v; });
  }
  auto n = make_node(std::move(y), {a.node()}, "softmax");
  if (n->requires_grad) {
    n->backprop = [axis, R, C](Node& self) {
      Node& pa = *self.parents[0];
      if (!pa.requires_grad) return;
      pa.ensure_grad();
      auto lane = [&](int count, auto&& yv, auto&& gv, auto&& out) {
        double dot = 0.0;
        for (int i = 0; i < count; ++i) dot += yv(i) * gv(i);
        for (int i = 0; i < count; ++i) out(i, yv(i) * (gv(i) - dot));
      };
      if (axis == 1) {
        for (int r = 0; r < R; ++r)
          lane(
              C, [&](int i) { return self.value.at(r, i); },
              [&](int i) { return self.grad.at(r, i); },
              [&](int i, double v) { pa.grad.at(r, i) += v; });
      } else {
        for (int c = 0; c < C; ++c)
          lane(
              R, [&](int i) { return self.value.at(i, c); },
              [&](int i) { return self.grad.at(i, c); },
              [&](int i, double v) { pa.grad.at(i, c) += v; });
      }
    };
  }
  return Var(n);
}

Var transpose(const Var& a) {
  const Tensor& x = a.value();
  const int R = x.rows(), C = x.cols();
  Tensor y({C, R});
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) y.at(c, r) = x.at(r, c);
  auto n = make_node(std::move(y), {a.node()}, "transpose");
  if (n->requires_grad) {
    n->backprop = [R, C](Node& self) {
      Node& pa = *self.parents[0];
      if (!pa.requires_grad) return;
      pa.ensure_grad();
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) pa.grad.at(r, c) += self.grad.at(c, r);
    };
  }
  return Var(n);
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: empty part list");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  const int R0 = parts[0].value().rows(), C0 = parts[0].value().cols();
  int total = 0;
  for (const auto& p : parts) {
    const Tensor& t = p.value();
    if (axis == 0 && t.cols() != C0)
      throw std::invalid_argument("concat: column mismatch " + t.shape_str());
    if (axis == 1 && t.rows() != R0)
      throw std::invalid_argument("concat: row mismatch " + t.shape_str());
    total += axis == 0 ? t.rows() : t.cols();
  }
  Tensor y(axis == 0 ? std::vector<int>{total, C0} : std::vector<int>{R0, total});
  int off = 0;
  for (const auto& p : parts) {
    const Tensor& t = p.value();
    if (axis == 0) {
      std::copy(t.data.begin(), t.data.end(), y.data.begin() + static_cast<size_t>(off) * C0);
      off += t.rows();
    } else {
      for (int r = 0; r < R0; ++r)
        for (int c = 0; c < t.cols(); ++c) y.at(r, off + c) = t.at(r, c);
      off += t.cols();
    }
  }
  std::vector<std::shared_ptr<Node>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) parents.push_back(p.node());
  auto n = make_node(std::move(y), std::move(parents), "concat");
  if (n->requires_grad) {
    n->backprop = [axis](Node& self) {
      int off = 0;
      const int C = self.value.cols();
      for (auto& p : self.parents) {
        const int pr = p->value.rows(), pc = p->value.cols();
        if (p->requires_grad) {
          p->ensure_grad();
          if (axis == 0) {
            for (int r = 0; r < pr; ++r)
              for (int c = 0; c < pc; ++c)
                p->grad.at(r, c) += self.grad.data[static_cast<size_t>(off + r) * C + c];
          } else {
            for (int r = 0; r < pr; ++r)
              for (int c = 0; c < pc; ++c) p->grad.at(r, c) += self.grad.at(r, off + c);
          }
        }
        off += axis == 0 ? pr : pc;
      }
    };
  }
  return Var(n);
}

Var slice(const Var& a, int axis, int start, int len) {
  const Tensor& x = a.value();
  if (axis != 0 && axis != 1) throw std::invalid_argument("slice: axis must be 0 or 1");
  const int R = x.rows(), C = x.cols();
  const int dim = axis == 0 ? R : C;
  if (start < 0 || len <= 0 || start + len > dim)
    throw std::invalid_argument("slice: range out of bounds");
  Tensor y(axis == 0 ? std::vector<int>{len, C} : std::vector<int>{R, len});
  if (axis == 0) {
    std::copy(x.data.begin() + static_cast<size_t>(start) * C,
              x.data.begin() + static_cast<size_t>(start + len) * C, y.data.begin());
  } else {
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < len; ++c) y.at(r, c) = x.at(r, start + c);
  }
  auto n = make_node(std::move(y), {a.node()}, "slice");
  if (n->requires_grad) {
    n->backprop = [axis, start](Node& self) {
      Node& pa = *self.parents[0];
      if (!pa.requires_grad) return;
      pa.ensure_grad();
      const int pr = self.value.rows(), pc = self.value.cols();
      if (axis == 0) {
        const int C = pa.value.cols();
        for (int r = 0; r < pr; ++r)
          for (int c = 0; c < pc; ++c)
            pa.grad.data[static_cast<size_t>(start + r) * C + c] += self.grad.at(r, c);
      } else {
        for (int r = 0; r < pr; ++r)
          for (int c = 0; c < pc; ++c) pa.grad.at(r, start + c) += self.grad.at(r, c);
      }
    };
  }
  return Var(n);
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  auto n = make_node(Tensor::scalar(s), {a.node()}, "sum");
  if (n->requires_grad) {
    n->backprop = [](Node& self) {
      Node& pa = *self.parents[0];
      if (!pa.requires_grad) return;
      pa.ensure_grad();
      const double g = self.grad.data[0];
      for (auto& v : pa.grad.data) v += g;
    };
  }
  return Var(n);
}

Var mean_all(const Var& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.value().numel()));
}

Var sum_axis(const Var& a, int axis) {
  const Tensor& x = a.value();
  if (axis != 0 && axis != 1) throw std::invalid_argument("sum_axis: axis must be 0 or 1");
  const int R = x.rows(), C = x.cols();
  Tensor y(axis == 0 ? std::vector<int>{1, C} : std::vector<int>{R, 1});
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) {
      if (axis == 0)
        y.at(0, c) += x.at(r, c);
      else
        y.at(r, 0) += x.at(r, c);
    }
  auto n = make_node(std::move(y), {a.node()}, "sum_axis");
  if (n->requires_grad) {
    n->backprop = [axis, R, C](Node& self) {
      Node& pa = *self.parents[0];
      if (!pa.requires_grad) return;
      pa.ensure_grad();
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c)
          pa.grad.at(r, c) += axis == 0 ? self.grad.at(0, c) : self.grad.at(r, 0);
    };
  }
  return Var(n);
}

Var mean_axis(const Var& a, int axis) {
  const double denom = axis == 0 ? a.value().rows() : a.value().cols();
  return scale(sum_axis(a, axis), 1.0 / denom);
}

Var row_broadcast_add(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& v = b.value();
  const int R = x.rows(), C = x.cols();
  if (v.rows() != 1 || v.cols() != C)
    throw std::invalid_argument("row_broadcast_add: bias shape " + v.shape_str() +
                                " vs matrix " + x.shape_str());
  Tensor y = x;
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) y.at(r, c) += v.at(0, c);
  auto n = make_node(std::move(y), {a.node(), b.node()}, "row_broadcast_add");
  if (n->requires_grad) {
    n->backprop = [R, C](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (size_t i = 0; i < self.grad.data.size(); ++i)
          pa.grad.data[i] += self.grad.data[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c) pb.grad.at(0, c) += self.grad.at(r, c);
      }
    };
  }
  return Var(n);
}

Var row_broadcast_mul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& v = b.value();
  const int R = x.rows(), C = x.cols();
  if (v.rows() != 1 || v.cols() != C)
    throw std::invalid_argument("row_broadcast_mul: shape " + v.shape_str() + " vs " +
                                x.shape_str());
  Tensor y = x;
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) y.at(r, c) *= v.at(0, c);
  auto n = make_node(std::move(y), {a.node(), b.node()}, "row_broadcast_mul");
  if (n->requires_grad) {
    n->backprop = [R, C](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c)
            pa.grad.at(r, c) += self.grad.at(r, c) * pb.value.at(0, c);
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c)
            pb.grad.at(0, c) += self.grad.at(r, c) * pa.value.at(r, c);
      }
    };
  }
  return Var(n);
}

Var col_broadcast_add(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& v = b.value();
  const int R = x.rows(), C = x.cols();
  if (v.rows() != R || v.cols() != 1)
    throw std::invalid_argument("col_broadcast_add: shape " + v.shape_str() + " vs " +
                                x.shape_str());
  Tensor y = x;
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) y.at(r, c) += v.at(r, 0);
  auto n = make_node(std::move(y), {a.node(), b.node()}, "col_broadcast_add");
  if (n->requires_grad) {
    n->backprop = [R, C](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (size_t i = 0; i < self.grad.data.size(); ++i)
          pa.grad.data[i] += self.grad.data[i];
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c) pb.grad.at(r, 0) += self.grad.at(r, c);
      }
    };
  }
  return Var(n);
}

Var col_broadcast_mul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& v = b.value();
  const int R = x.rows(), C = x.cols();
  if (v.rows() != R || v.cols() != 1)
    throw std::invalid_argument("col_broadcast_mul: shape " + v.shape_str() + " vs " +
                                x.shape_str());
  Tensor y = x;
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) y.at(r, c) *= v.at(r, 0);
  auto n = make_node(std::move(y), {a.node(), b.node()}, "col_broadcast_mul");
  if (n->requires_grad) {
    n->backprop = [R, C](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      if (pa.requires_grad) {
        pa.ensure_grad();
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c)
            pa.grad.at(r, c) += self.grad.at(r, c) * pb.value.at(r, 0);
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < C; ++c)
            pb.grad.at(r, 0) += self.grad.at(r, c) * pa.value.at(r, c);
      }
    };
  }
  return Var(n);
}

void backward(const Var& loss) {
  if (!loss.defined() || !loss.value().is_scalar())
    throw std::invalid_argument("backward: loss must be a scalar node");
  // iterative post-order topological sort
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({loss.node().get(), 0});
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (!seen.count(p) && p->requires_grad) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->grad = Tensor(n->value.shape, 0.0);
  loss.node()->grad.data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

void adam_step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: params/grads size mismatch");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape, 0.0);
      state.v.emplace_back(p->shape, 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state size mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (!p.same_shape(g))
      throw std::invalid_argument("adam_step: shape mismatch " + p.shape_str() +
                                  " vs " + g.shape_str());
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (size_t j = 0; j < p.data.size(); ++j) {
      m.data[j] = beta1 * m.data[j] + (1.0 - beta1) * g.data[j];
      v.data[j] = beta2 * v.data[j] + (1.0 - beta2) * g.data[j] * g.data[j];
      const double mhat = m.data[j] / bc1;
      const double vhat = v.data[j] / bc2;
      p.data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace cpad
