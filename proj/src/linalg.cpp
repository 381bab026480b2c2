#include "dsr/linalg.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "dsr/error.hpp"
#include "dsr/kernels.hpp"

namespace dsr {

Vec matvec(const Mat& m, const Vec& x) {
  require(x.size() == m.cols, ErrCode::DimensionMismatch, "matvec dims");
  Vec y(m.rows);
  kernels::ops().gemv(m.a.data(), m.rows, m.cols, x.data(), y.data());
  return y;
}

LuFactor lu_factor(Mat a) {
  require(a.rows == a.cols, ErrCode::DimensionMismatch, "lu_factor requires a square matrix");
  const std::size_t n = a.rows;
  LuFactor f;
  f.piv.resize(n);
  std::iota(f.piv.begin(), f.piv.end(), 0);
  const auto& k = kernels::ops();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    double best = std::fabs(a.at(col, col));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::fabs(a.at(r, col));
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best == 0.0) fail(ErrCode::SingularSystem, "singular matrix in lu_factor");
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a.at(col, c), a.at(pivot, c));
      std::swap(f.piv[col], f.piv[pivot]);
    }
    const double inv = 1.0 / a.at(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a.at(r, col) * inv;
      a.at(r, col) = factor;
      if (factor != 0.0)
        k.axpy(-factor, a.row(col) + col + 1, a.row(r) + col + 1, n - col - 1);
    }
  }
  f.lu = std::move(a);
  return f;
}

void lu_solve_inplace(const LuFactor& f, double* b) {
  const std::size_t n = f.lu.rows;
  Vec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[f.piv[i]];
  // forward substitution (unit lower triangle)
  for (std::size_t i = 1; i < n; ++i)
    x[i] -= kernels::ops().dot(f.lu.row(i), x.data(), i);
  // back substitution
  for (std::size_t ii = n; ii-- > 0;) {
    const double s = kernels::ops().dot(f.lu.row(ii) + ii + 1, x.data() + ii + 1, n - ii - 1);
    x[ii] = (x[ii] - s) / f.lu.at(ii, ii);
  }
  for (std::size_t i = 0; i < n; ++i) b[i] = x[i];
}

Vec lu_solve(const LuFactor& f, const Vec& b) {
  require(b.size() == f.lu.rows, ErrCode::DimensionMismatch, "lu_solve dims");
  Vec x = b;
  lu_solve_inplace(f, x.data());
  return x;
}

}  // namespace dsr
