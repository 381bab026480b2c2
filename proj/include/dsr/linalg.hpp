#pragma once

#include <cstddef>
#include <vector>

#include "dsr/vec.hpp"

namespace dsr {

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
  double* row(std::size_t r) { return a.data() + r * cols; }
  const double* row(std::size_t r) const { return a.data() + r * cols; }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

Vec matvec(const Mat& m, const Vec& x);

/// LU factorization with partial pivoting, stored in place.
struct LuFactor {
  Mat lu;
  std::vector<int> piv;
};

LuFactor lu_factor(Mat a);  // throws SingularSystem on exact breakdown
void lu_solve_inplace(const LuFactor& f, double* b);
Vec lu_solve(const LuFactor& f, const Vec& b);

}  // namespace dsr
