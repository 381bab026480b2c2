#pragma once

#include <cmath>
#include <vector>

namespace dsr {

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace dsr
