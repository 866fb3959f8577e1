#pragma once

// minmod limiter, scalar and lane-generic forms. Zero when the arguments
// disagree in sign (or either is zero), else the argument of smaller
// magnitude.

#include <cmath>

#include "taskmesh/lanes.hpp"

namespace taskmesh::hydro {

inline double minmod(double a, double b) {
  if (a * b <= 0.0) return 0.0;
  return std::fabs(a) < std::fabs(b) ? a : b;
}

template <unsigned W>
lanes::LanePack<W> minmod(const lanes::LanePack<W>& a,
                          const lanes::LanePack<W>& b) {
  using P = lanes::LanePack<W>;
  auto zero = P(0.0);
  auto same_sign = (a * b) > zero;
  auto smaller = select(vabs(a) < vabs(b), a, b);
  return select(same_sign, smaller, zero);
}

}  // namespace taskmesh::hydro
