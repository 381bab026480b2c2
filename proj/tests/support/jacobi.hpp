#pragma once

// Dense symmetric eigensolver used only as a test oracle: cyclic Jacobi
// rotations, independent of the production inverse-iteration path.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dsr/linalg.hpp"

namespace dsr::testing {

struct JacobiResult {
  Vec values;                // ascending
  std::vector<Vec> vectors;  // matching eigenvectors, unit norm
};

inline JacobiResult jacobi_eigensymm(Mat a, int max_sweeps = 200) {
  const std::size_t n = a.rows;
  Mat v = Mat::identity(n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off <= 1e-26) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a.at(i, p);
          const double aiq = a.at(i, q);
          a.at(i, p) = c * aip - s * aiq;
          a.at(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a.at(p, i);
          const double aqi = a.at(q, i);
          a.at(p, i) = c * api - s * aqi;
          a.at(q, i) = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v.at(i, p);
          const double viq = v.at(i, q);
          v.at(i, p) = c * vip - s * viq;
          v.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a.at(x, x) < a.at(y, y); });
  JacobiResult out;
  out.values.resize(n);
  out.vectors.resize(n, Vec(n));
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a.at(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors[k][i] = v.at(i, order[k]);
  }
  return out;
}

}  // namespace dsr::testing
