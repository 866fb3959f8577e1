#pragma once

// Adaptive octree of sub-grids. Nodes are keyed by (level, global cell
// coordinates); data lives only at leaves. The root is a small array of
// level-0 sub-grids (root_dims), which keeps cells cubic for slab-shaped
// domains; the classic single-root octree is root_dims {1,1,1}.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "taskmesh/amr/morton.hpp"
#include "taskmesh/amr/subgrid.hpp"

namespace taskmesh::amr {

enum class Boundary : std::uint8_t { periodic, reflective };

struct NodeId {
  int level = 0;
  std::uint32_t ci = 0, cj = 0, ck = 0;  // global coords at this level

  friend bool operator==(const NodeId&, const NodeId&) = default;

  std::uint64_t packed() const {
    return (static_cast<std::uint64_t>(level) << 60) |
           (static_cast<std::uint64_t>(ci) << 40) |
           (static_cast<std::uint64_t>(cj) << 20) | ck;
  }
  static NodeId unpack(std::uint64_t bits) {
    NodeId id;
    id.level = static_cast<int>(bits >> 60);
    id.ci = static_cast<std::uint32_t>((bits >> 40) & 0xFFFFF);
    id.cj = static_cast<std::uint32_t>((bits >> 20) & 0xFFFFF);
    id.ck = static_cast<std::uint32_t>(bits & 0xFFFFF);
    return id;
  }

  NodeId parent() const { return {level - 1, ci >> 1, cj >> 1, ck >> 1}; }
  NodeId child(int ci_bit, int cj_bit, int ck_bit) const {
    return {level + 1, (ci << 1) | static_cast<std::uint32_t>(ci_bit),
            (cj << 1) | static_cast<std::uint32_t>(cj_bit),
            (ck << 1) | static_cast<std::uint32_t>(ck_bit)};
  }
};

struct NodeIdHash {
  std::size_t operator()(const NodeId& id) const {
    std::uint64_t x = id.packed();
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    return static_cast<std::size_t>(x);
  }
};

struct TreeConfig {
  int edge = 8;
  int ghost = 2;
  int vars = 1;
  int max_level = 10;
  std::array<int, 3> root_dims{1, 1, 1};
  std::array<Boundary, 3> bc{Boundary::periodic, Boundary::periodic,
                             Boundary::periodic};
};

struct Node {
  NodeId id;
  std::uint8_t children_mask = 0;  // 0 (leaf) or 0xFF
  int owner = 0;
  std::unique_ptr<SubGrid> grid;  // leaves only; null when remotely owned

  bool is_leaf() const { return children_mask == 0; }
};

enum class NeighborKind : std::uint8_t { same, coarser, finer, boundary };

/// Result of a face-neighbor query. same/coarser carry one id; finer carries
/// the four leaves covering the face, ordered by (t2, t1) quadrant.
struct FaceNeighbors {
  NeighborKind kind = NeighborKind::boundary;
  int count = 0;
  std::array<NodeId, 4> ids{};
};

class Tree {
 public:
  explicit Tree(TreeConfig cfg);

  const TreeConfig& config() const { return cfg_; }

  /// Cells are cubic; one level-0 sub-grid spans 1/max(root_dims) of the
  /// unit box, so the longest domain axis has extent 1.
  double root_extent() const { return root_extent_; }
  double cell_size(int level) const {
    return root_extent_ / (cfg_.edge * (1 << level));
  }
  std::array<double, 3> domain_extent() const {
    return {cfg_.root_dims[0] * root_extent_, cfg_.root_dims[1] * root_extent_,
            cfg_.root_dims[2] * root_extent_};
  }
  /// Center of an interior cell given in storage coordinates.
  std::array<double, 3> cell_center(const NodeId& id, int i, int j,
                                    int k) const;

  bool contains(const NodeId& id) const { return nodes_.count(id) != 0; }
  Node& at(const NodeId& id);
  const Node& at(const NodeId& id) const;

  std::uint32_t cells_per_axis(int level, int axis) const {
    return static_cast<std::uint32_t>(cfg_.root_dims[axis]) << level;
  }

  /// Leaves in canonical order: root raster order, then Morton depth-first
  /// order within each root octree.
  const std::vector<NodeId>& leaves() const;

  std::size_t leaf_count() const { return leaves().size(); }
  std::uint64_t topology_version() const { return version_; }

  /// Splits a leaf into 8 children, prolonging its grid into them, then
  /// re-establishes 2:1 balance by cascading refines of coarser neighbors.
  void refine(const NodeId& id);

  /// Replaces 8 leaf children by their parent via restriction. Rejected if
  /// the result would violate 2:1 balance.
  void coarsen(const NodeId& parent);

  /// Relative density-gradient refinement criterion; ghosts must be filled.
  bool flag_refinement(const NodeId& leaf, double theta,
                       double rho_floor = 1e-10) const;

  /// The leaf whose region contains the given same-level cell, walking up
  /// or down as needed. Returns nullopt only on topology corruption.
  std::optional<NodeId> covering_leaf(const NodeId& cell) const;

  /// Face neighbor resolution with periodic wrap / reflective boundary.
  FaceNeighbors face_neighbor(const NodeId& leaf, int axis, int dir) const;

  /// Exhaustive 2:1 face-balance scan.
  bool is_balanced() const;

  /// Drops grids of leaves not owned by rank (multi-locality replicas).
  void strip_remote_grids(int rank);

  /// Allocates grids for every leaf (topology-first construction).
  void alloc_all_grids();

 private:
  void create_children(Node& parent);
  void prolong_into_children(Node& parent);

  TreeConfig cfg_;
  double root_extent_ = 1.0;
  std::unordered_map<NodeId, Node, NodeIdHash> nodes_;
  mutable std::vector<NodeId> leaf_cache_;
  mutable bool leaf_cache_valid_ = false;
  std::uint64_t version_ = 0;
};

/// Conservative prolongation of one coarse cell into its 8 fine children:
/// minmod-limited linear slopes per axis; offsets come in exact +/- pairs.
/// Child order is (k,j,i) bit order, i fastest.
std::array<double, 8> prolong_cell(double c, double xm, double xp, double ym,
                                   double yp, double zm, double zp);

/// Arithmetic mean of 8 fine cells in fixed child order.
double restrict_cells(const std::array<double, 8>& fine);

/// Greedy contiguous partition of leaves (in the given order) by weight:
/// cut after the first prefix reaching i*total/L. Every leaf is assigned
/// exactly once; erroring when localities exceed leaves.
std::vector<int> partition_leaves(const std::vector<std::uint64_t>& weights,
                                  int localities);

}  // namespace taskmesh::amr
