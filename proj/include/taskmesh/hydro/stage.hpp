#pragma once

// One solver stage on one sub-grid: dimension-split MUSCL/Rusanov divergence
// update over the ghosted state, in fixed axis order x,y,z. The stage is a
// pure function of its input slice, which is what makes fused launches,
// lane widths, worker counts, and transports transparent to the result.
//
// Input slice:  [ 8-double header | vars * S^3 ghosted state ]
// Output slice: [ vars * E^3 updated interior
//               | 6 boundary-face flux blocks (axis-,axis+ per axis),
//                 each vars * E^2 in (t2,t1) row order
//               | 1 diagnostic double: positivity-floor activations ]

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "taskmesh/aggregator.hpp"
#include "taskmesh/hydro/euler.hpp"

namespace taskmesh::hydro {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode : int { scalar = 0, euler = 1 };

struct StageParams {
  Mode mode = Mode::scalar;
  double dx = 1.0;
  double dt = 0.0;
  double gamma = kDefaultGamma;
  std::array<double, 3> advect{1.0, 0.0, 0.0};  // scalar-mode velocity
};

inline constexpr std::size_t kHeaderDoubles = 8;

void encode_header(const StageParams& p, std::span<double> out);
StageParams decode_header(std::span<const double> in);

struct StageGeom {
  int edge = 8;
  int ghost = 2;
  int vars = 1;

  int stride() const { return edge + 2 * ghost; }
  std::size_t ghosted_elems() const {
    std::size_t s = stride();
    return static_cast<std::size_t>(vars) * s * s * s;
  }
  std::size_t in_slice() const { return kHeaderDoubles + ghosted_elems(); }
  std::size_t interior_elems() const {
    return static_cast<std::size_t>(vars) * edge * edge * edge;
  }
  std::size_t face_elems() const {
    return static_cast<std::size_t>(vars) * edge * edge;
  }
  std::size_t face_offset(int axis, int side) const {
    return interior_elems() + (2 * axis + side) * face_elems();
  }
  std::size_t diag_offset() const { return interior_elems() + 6 * face_elems(); }
  std::size_t out_slice() const { return diag_offset() + 1; }
};

/// Runs one stage: in = vars*S^3 ghosted state, out as documented above.
/// Output bits are invariant to lane_width.
void stage_subgrid(const StageParams& p, const StageGeom& geom,
                   unsigned lane_width, const double* in, double* out);

/// The stage as a fusable kernel over [header|state] slices.
agg::KernelSpec make_stage_kernel(const StageGeom& geom, unsigned lane_width,
                                  std::uint32_t kernel_id);

/// Max interior wave speed (|velocity|+c in Euler mode, |advect| in scalar
/// mode); the CFL reduction divides dx by this.
double max_wavespeed(const StageParams& p, const StageGeom& geom,
                     const double* ghosted);

}  // namespace taskmesh::hydro
