#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpad/rng.hpp"

namespace cpad {

// Dense row-major 64-bit tensor. Everything the network needs is rank 1 or 2;
// rank-1 tensors behave as row vectors where a matrix is expected.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> shape_, double fill = 0.0);
  static Tensor row(std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor xavier(int rows, int cols, Rng& rng);

  int64_t numel() const;
  int rows() const;
  int cols() const;
  bool is_scalar() const { return numel() == 1; }

  double& at(int r, int c);
  double at(int r, int c) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const;
  bool all_finite() const;
};

// Raw matmul kernels shared by forward and backward passes.
// C += or = A * B with optional logical transposes; shapes are the logical
// (post-transpose) ones.
void matmul_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate);

}  // namespace cpad
