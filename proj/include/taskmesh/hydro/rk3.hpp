#pragma once

// SSP-RK3 (Shu-Osher) stage combination. Each stage s feeds the kernel the
// current state u and receives v = u + dt L(u); the combine folds v back:
//   stage 1: u1 = v
//   stage 2: u2 = 3/4 u0 + 1/4 v  =  u0 + (v - u0)/4
//   stage 3: u3 = 1/3 u0 + 2/3 v  =  u0 + 2(v - u0)/3
// The incremental form keeps u exactly unchanged when L == 0.
// The stage's effective flux weight (for flux-register accumulation) is
// dt * {1, 1/4, 2/3}.

#include <span>

namespace taskmesh::hydro {

inline constexpr double kStageFluxWeight[3] = {1.0, 0.25, 2.0 / 3.0};

inline double rk3_combine(int stage, double u0, double v) {
  switch (stage) {
    case 1:
      return v;
    case 2:
      return u0 + 0.25 * (v - u0);
    default:
      return u0 + (2.0 / 3.0) * (v - u0);
  }
}

inline void rk3_combine_span(int stage, std::span<const double> u0,
                             std::span<const double> v,
                             std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = rk3_combine(stage, u0[i], v[i]);
}

}  // namespace taskmesh::hydro
