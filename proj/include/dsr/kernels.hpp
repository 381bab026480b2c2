#pragma once

#include <cstddef>

namespace dsr::kernels {

enum class Backend { Auto, Scalar, Avx2 };

/// Table of the numeric inner-loop primitives everything hot is built on.
/// One scalar reference implementation always exists; an AVX2+FMA variant is
/// selected at runtime when the CPU supports it. Elementwise ops are
/// bit-identical across backends; reductions (dot, gemv, sq_diff_sum) may
/// reassociate and are equivalence-tested under tolerance instead.
struct Ops {
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);

  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  /// y = A x for row-major A (rows x cols), y has length rows.
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);

  /// y = A^T x for row-major A (rows x cols), y has length cols.
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);

  /// A += alpha * x y^T for row-major A (rows x cols).
  void (*ger)(double* a, std::size_t rows, std::size_t cols, double alpha, const double* x,
              const double* y);

  /// y[i] = max(x[i], 0)
  void (*relu)(const double* x, double* y, std::size_t n);

  /// gin[i] = act[i] > 0 ? gout[i] : 0
  void (*relu_backward)(const double* act, const double* gout, double* gin, std::size_t n);

  /// sum_i (a[i] - b[i])^2
  double (*sq_diff_sum)(const double* a, const double* b, std::size_t n);

  /// Classical momentum: v = mu*v - lr*g; p += v.
  void (*momentum_update)(double* p, double* v, const double* g, std::size_t n, double mu,
                          double lr);
};

const Ops& scalar_ops();

/// Null when the build target has no AVX2 code path.
const Ops* avx2_ops();

bool avx2_runtime_supported();

/// Select the backend. Auto resolves to AVX2 when compiled in and supported
/// by the running CPU, otherwise scalar. Throws when an explicit request
/// cannot be satisfied.
void set_backend(Backend b);
Backend parse_backend(const char* name);

/// The active table. Resolves Auto on first use.
const Ops& ops();
const char* active_name();

}  // namespace dsr::kernels
