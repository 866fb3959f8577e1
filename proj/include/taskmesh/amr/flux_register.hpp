#pragma once

// Flux registers for conservation across refinement jumps. For every coarse
// face adjacent to finer leaves, the register accumulates the coarse-side
// flux and the area-weighted sum (mean) of the covering fine fluxes; apply
// replaces the coarse flux contribution by the fine one:
//   u_face_cell += -dir * (w*dt/dx) * (fine_mean - coarse_flux)
// Entries are applied in sorted (leaf, axis, dir) order and the register is
// zeroed afterwards, so corrections are deterministic even when one cell is
// touched from several faces.

#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "taskmesh/amr/octree.hpp"

namespace taskmesh::amr {

class FluxRegister {
 public:
  FluxRegister(int edge, int vars) : edge_(edge), vars_(vars) {}

  /// Coarse-side flux of one face (vars * E^2 in (t2,t1) row order).
  void add_coarse(const NodeId& leaf, int axis, int dir,
                  std::span<const double> flux);

  /// One fine quadrant's restricted flux (vars * (E/2)^2): the 2x2 mean of
  /// the fine face fluxes covering each coarse face cell.
  void add_fine(const NodeId& coarse_leaf, int axis, int dir, int qt1, int qt2,
                std::span<const double> restricted);

  /// Applies every correction with weight w (= stage coefficient * dt) and
  /// clears the register.
  void apply_and_clear(Tree& tree, double w);

  bool empty() const;

  /// Restricts a fine face-flux block (vars * E^2) to coarse resolution
  /// (vars * (E/2)^2): arithmetic mean of each 2x2 group.
  static std::vector<double> restrict_face(std::span<const double> fine,
                                           int edge, int vars);

 private:
  struct FaceKey {
    std::uint64_t leaf;
    int axis;
    int dir;
    friend auto operator<=>(const FaceKey&, const FaceKey&) = default;
  };
  struct Entry {
    std::vector<double> coarse;    // vars * E^2
    std::vector<double> fine_sum;  // vars * E^2 at coarse resolution
  };

  Entry& entry_locked(const FaceKey& key);

  int edge_;
  int vars_;
  mutable std::mutex mu_;
  std::map<FaceKey, Entry> entries_;
};

}  // namespace taskmesh::amr
