#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "rsp/errors.hpp"

namespace rsp {

/// Logarithmic grid with `per_decade` points per decade, both ends included
/// when they sit on the lattice of points.
inline std::vector<double> log_grid(double lo, double hi, double per_decade) {
  if (!(lo > 0.0) || !(hi > lo) || !(per_decade > 0.0))
    throw InvalidParameter("log grid needs 0 < lo < hi and positive density");
  const auto count =
      static_cast<std::size_t>(std::floor(std::log10(hi / lo) * per_decade + 1e-9)) + 1;
  std::vector<double> g(count);
  for (std::size_t k = 0; k < count; ++k)
    g[k] = lo * std::pow(10.0, static_cast<double>(k) / per_decade);
  return g;
}

}  // namespace rsp
