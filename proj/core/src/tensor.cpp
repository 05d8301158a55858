#include "cpad/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cpad {

Tensor::Tensor(std::vector<int> shape_, double fill) : shape(std::move(shape_)) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dimension");
    n *= d;
  }
  data.assign(static_cast<size_t>(n), fill);
}

Tensor Tensor::row(std::vector<double> values) {
  Tensor t;
  t.shape = {1, static_cast<int>(values.size())};
  t.data = std::move(values);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t({1, 1});
  t.data[0] = v;
  return t;
}

Tensor Tensor::xavier(int rows, int cols, Rng& rng) {
  Tensor t({rows, cols});
  const double bound = std::sqrt(6.0 / (rows + cols));
  for (auto& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

int64_t Tensor::numel() const {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

int Tensor::rows() const {
  if (shape.size() == 1) return 1;
  if (shape.size() == 2) return shape[0];
  throw std::invalid_argument("Tensor::rows: rank > 2");
}

int Tensor::cols() const {
  if (shape.size() == 1) return shape[0];
  if (shape.size() == 2) return shape[1];
  throw std::invalid_argument("Tensor::cols: rank > 2");
}

double& Tensor::at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
double Tensor::at(int r, int c) const {
  return data[static_cast<size_t>(r) * cols() + c];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ')';
  return os.str();
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {
void check_mm(const Tensor& a, const Tensor& b, int m, int k, int k2, int n,
              const char* name) {
  if (k != k2)
    throw std::invalid_argument(std::string(name) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
  (void)m;
  (void)n;
}
}  // namespace

void matmul_nn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  check_mm(a, b, m, k, b.rows(), n, "matmul");
  if (!accumulate) c = Tensor({m, n});
  const double* A = a.data.data();
  const double* B = b.data.data();
  double* C = c.data.data();
  for (int i = 0; i < m; ++i) {
    double* Ci = C + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = A[static_cast<size_t>(i) * k + p];
      const double* Bp = B + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) Ci[j] += av * Bp[j];
    }
  }
}

// c[m x n] (+)= a[m x k] * b[n x k]^T
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  const int m = a.rows(), k = a.cols(), n = b.rows();
  check_mm(a, b, m, k, b.cols(), n, "matmul_nt");
  if (!accumulate) c = Tensor({m, n});
  const double* A = a.data.data();
  const double* B = b.data.data();
  double* C = c.data.data();
  for (int i = 0; i < m; ++i) {
    const double* Ai = A + static_cast<size_t>(i) * k;
    double* Ci = C + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* Bj = B + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += Ai[p] * Bj[p];
      Ci[j] += acc;
    }
  }
}

// c[k x n] (+)= a[m x k]^T * b[m x n]
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& c, bool accumulate) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  check_mm(a, b, k, m, b.rows(), n, "matmul_tn");
  if (!accumulate) c = Tensor({k, n});
  const double* A = a.data.data();
  const double* B = b.data.data();
  double* C = c.data.data();
  for (int i = 0; i < m; ++i) {
    const double* Bi = B + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = A[static_cast<size_t>(i) * k + p];
      double* Cp = C + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) Cp[j] += av * Bi[j];
    }
  }
}

}  // namespace cpad
