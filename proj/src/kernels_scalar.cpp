#include "dsr/kernels.hpp"

// Reference kernels. Deliberately plain loops with single accumulators so
// results are well-defined; the SIMD variants are tested against these.

namespace dsr::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(a + r * cols, x, cols);
}

void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x,
                   double* y) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(x[r], a + r * cols, y, cols);
}

void ger_scalar(double* a, std::size_t rows, std::size_t cols, double alpha, const double* x,
                const double* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(alpha * x[r], y, a + r * cols, cols);
}

void relu_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(const double* act, const double* gout, double* gin, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) gin[i] = act[i] > 0.0 ? gout[i] : 0.0;
}

double sq_diff_sum_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void momentum_update_scalar(double* p, double* v, const double* g, std::size_t n, double mu,
                            double lr) {
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = mu * v[i] - lr * g[i];
    p[i] += v[i];
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops table{
      "scalar",        dot_scalar,         axpy_scalar,        gemv_scalar,
      gemv_t_scalar,   ger_scalar,         relu_scalar,        relu_backward_scalar,
      sq_diff_sum_scalar, momentum_update_scalar,
  };
  return table;
}

}  // namespace dsr::kernels
