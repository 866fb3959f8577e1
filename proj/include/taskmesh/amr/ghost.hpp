#pragma once

// Ghost-shell fills. Every fill is an extract/apply pair over a flat slab
// buffer with a fixed documented layout, so local fills and fills that
// crossed the wire are bitwise identical. dir is always the destination's
// fill direction: +1 fills the high-side ghosts.
//
// The exchange runs as three sequential axis passes (x, then y, then z);
// same-level slabs span the full tangential extent, which fills edge and
// corner ghosts transitively across passes. Within a pass, prolonged slabs
// are extracted before any ghost of that axis is overwritten (their slope
// stencil reaches into the source's own ghosts), making fill order
// irrelevant to the result.

#include <span>
#include <unordered_map>
#include <vector>

#include "taskmesh/amr/octree.hpp"

namespace taskmesh::amr::ghost {

std::size_t same_slab_elems(const SubGrid& g);
std::size_t prolonged_slab_elems(const SubGrid& g);
std::size_t restricted_slab_elems(const SubGrid& g);

/// Source side of a same-level fill: the G interior layers adjacent to the
/// face the data leaves through, full tangential extent.
void extract_same_slab(const SubGrid& src, int axis, int dir,
                       std::span<double> out);
void apply_same_slab(SubGrid& dst, int axis, int dir,
                     std::span<const double> in);

/// Coarse neighbor serving a fine leaf's ghost slab: piecewise linear along
/// the face normal (minmod slope), piecewise constant tangentially.
/// (qt1, qt2) select the quadrant of the coarse face the fine leaf covers.
void extract_prolonged_slab(const SubGrid& coarse_src, int axis, int dir,
                            int qt1, int qt2, std::span<double> out);
void apply_prolonged_slab(SubGrid& fine_dst, int axis, int dir,
                          std::span<const double> in);

/// Fine neighbor serving one quadrant of a coarse leaf's ghost slab:
/// arithmetic mean of 2x2x2 fine interior cells per coarse ghost cell.
void extract_restricted_slab(const SubGrid& fine_src, int axis, int dir,
                             std::span<double> out);
void apply_restricted_slab(SubGrid& coarse_dst, int axis, int dir, int qt1,
                           int qt2, std::span<const double> in);

/// Reflective wall fill: mirrors interior layers; negates the normal
/// momentum component when one is given (normal_momentum_var >= 0).
void reflective_fill(SubGrid& g, int axis, int dir, int normal_momentum_var);

/// One directed fill of one leaf's ghost slab for one axis pass.
struct FillEntry {
  NodeId dst;
  NodeId src;  // unused for boundary fills
  NeighborKind kind = NeighborKind::boundary;
  std::int8_t axis = 0;
  std::int8_t dir = 0;  // -1 or +1
  std::int8_t qt1 = 0, qt2 = 0;
};

/// Every fill of one axis pass, in canonical leaf order (finer sources give
/// four entries, one per quadrant). Deterministic for a given topology.
std::vector<FillEntry> plan_axis_fills(const Tree& tree, int axis);

std::size_t slab_elems(const Tree& tree, const FillEntry& fill);

/// Source-side extraction for a planned fill (not for boundary fills).
void extract_for(const Tree& tree, const FillEntry& fill,
                 std::span<double> out);

/// Destination-side application of a slab produced by extract_for.
void apply_for(Tree& tree, const FillEntry& fill, std::span<const double> in);

/// Key for staged prolonged slabs: one per (dst leaf, dir).
inline std::uint64_t prolonged_key(const NodeId& dst, int dir) {
  return dst.packed() * 2 + (dir > 0 ? 1 : 0);
}
using ProlongedSlabs = std::unordered_map<std::uint64_t, std::vector<double>>;

/// Executes one fill with both grids local. Coarser fills read their slab
/// from `staged` (phase-1 extraction); all other kinds extract inline.
void execute_fill_local(Tree& tree, const FillEntry& fill,
                        const ProlongedSlabs& staged);

/// Synchronous whole-tree exchange for single-locality use; every leaf grid
/// must be present. The task-based exchange performs exactly these fills.
void fill_ghosts_sync(Tree& tree);

}  // namespace taskmesh::amr::ghost
