#include "taskmesh/amr/octree.hpp"

#include <algorithm>
#include <cmath>

#include "taskmesh/hydro/limiter.hpp"

namespace taskmesh::amr {

Tree::Tree(TreeConfig cfg) : cfg_(cfg) {
  if (cfg_.edge < 4 || cfg_.edge % 2 != 0)
    throw AmrError("subgrid edge must be even and at least 4");
  if (cfg_.ghost < 2) throw AmrError("ghost width must be at least 2");
  int maxdim = std::max({cfg_.root_dims[0], cfg_.root_dims[1], cfg_.root_dims[2]});
  if (maxdim < 1) throw AmrError("root_dims must be positive");
  root_extent_ = 1.0 / maxdim;
  for (int rk = 0; rk < cfg_.root_dims[2]; ++rk)
    for (int rj = 0; rj < cfg_.root_dims[1]; ++rj)
      for (int ri = 0; ri < cfg_.root_dims[0]; ++ri) {
        NodeId id{0, static_cast<std::uint32_t>(ri),
                  static_cast<std::uint32_t>(rj),
                  static_cast<std::uint32_t>(rk)};
        Node n;
        n.id = id;
        n.grid = std::make_unique<SubGrid>(cfg_.edge, cfg_.ghost, cfg_.vars);
        nodes_.emplace(id, std::move(n));
      }
}

Node& Tree::at(const NodeId& id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw AmrError("node not in tree");
  return it->second;
}

const Node& Tree::at(const NodeId& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw AmrError("node not in tree");
  return it->second;
}

std::array<double, 3> Tree::cell_center(const NodeId& id, int i, int j,
                                        int k) const {
  double dx = cell_size(id.level);
  auto coord = [&](std::uint32_t c, int s) {
    long long g = static_cast<long long>(c) * cfg_.edge + (s - cfg_.ghost);
    return (static_cast<double>(g) + 0.5) * dx;
  };
  return {coord(id.ci, i), coord(id.cj, j), coord(id.ck, k)};
}

const std::vector<NodeId>& Tree::leaves() const {
  if (!leaf_cache_valid_) {
    leaf_cache_.clear();
    leaf_cache_.reserve(nodes_.size());
    for (auto& [id, node] : nodes_)
      if (node.is_leaf()) leaf_cache_.push_back(id);
    auto rank = [this](const NodeId& id) {
      std::uint32_t ri = id.ci >> id.level;
      std::uint32_t rj = id.cj >> id.level;
      std::uint32_t rk = id.ck >> id.level;
      std::uint64_t root_linear =
          (static_cast<std::uint64_t>(rk) * cfg_.root_dims[1] + rj) *
              cfg_.root_dims[0] +
          ri;
      std::uint64_t mask = (1u << id.level) - 1;
      MortonKey key = morton_encode(id.level, id.ci & mask, id.cj & mask,
                                    id.ck & mask);
      return std::pair<std::uint64_t, std::uint64_t>(root_linear,
                                                     morton_dfs_rank(key));
    };
    std::sort(leaf_cache_.begin(), leaf_cache_.end(),
              [&](const NodeId& a, const NodeId& b) { return rank(a) < rank(b); });
    leaf_cache_valid_ = true;
  }
  return leaf_cache_;
}

std::optional<NodeId> Tree::covering_leaf(const NodeId& cell) const {
  for (int lvl = cell.level; lvl >= 0; --lvl) {
    int shift = cell.level - lvl;
    NodeId probe{lvl, cell.ci >> shift, cell.cj >> shift, cell.ck >> shift};
    auto it = nodes_.find(probe);
    if (it != nodes_.end()) {
      if (it->second.is_leaf()) return probe;
      return std::nullopt;  // region refined at least as fine as cell.level
    }
  }
  return std::nullopt;
}

FaceNeighbors Tree::face_neighbor(const NodeId& leaf, int axis, int dir) const {
  FaceNeighbors out;
  std::int64_t coords[3] = {leaf.ci, leaf.cj, leaf.ck};
  coords[axis] += dir > 0 ? 1 : -1;
  std::int64_t extent = static_cast<std::int64_t>(cells_per_axis(leaf.level, axis));
  if (coords[axis] < 0 || coords[axis] >= extent) {
    if (cfg_.bc[axis] == Boundary::reflective) {
      out.kind = NeighborKind::boundary;
      return out;
    }
    coords[axis] = (coords[axis] + extent) % extent;
  }
  NodeId cell{leaf.level, static_cast<std::uint32_t>(coords[0]),
              static_cast<std::uint32_t>(coords[1]),
              static_cast<std::uint32_t>(coords[2])};
  auto it = nodes_.find(cell);
  if (it != nodes_.end() && !it->second.is_leaf()) {
    // Finer: the four children of the neighbor cell that touch our face.
    out.kind = NeighborKind::finer;
    int face_bit = dir > 0 ? 0 : 1;  // their side facing us
    int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
    for (int b2 = 0; b2 < 2; ++b2)
      for (int b1 = 0; b1 < 2; ++b1) {
        int bits[3];
        bits[axis] = face_bit;
        bits[t1] = b1;
        bits[t2] = b2;
        out.ids[out.count++] = cell.child(bits[0], bits[1], bits[2]);
      }
    return out;
  }
  auto covering = covering_leaf(cell);
  if (!covering) throw AmrError("face_neighbor: topology corrupt");
  if (covering->level == leaf.level)
    out.kind = NeighborKind::same;
  else
    out.kind = NeighborKind::coarser;
  out.ids[0] = *covering;
  out.count = 1;
  return out;
}

void Tree::create_children(Node& parent) {
  parent.children_mask = 0xFF;
  for (int bk = 0; bk < 2; ++bk)
    for (int bj = 0; bj < 2; ++bj)
      for (int bi = 0; bi < 2; ++bi) {
        Node child;
        child.id = parent.id.child(bi, bj, bk);
        child.owner = parent.owner;
        if (parent.grid)
          child.grid =
              std::make_unique<SubGrid>(cfg_.edge, cfg_.ghost, cfg_.vars);
        nodes_.emplace(child.id, std::move(child));
      }
}

std::array<double, 8> prolong_cell(double c, double xm, double xp, double ym,
                                   double yp, double zm, double zp) {
  using hydro::minmod;
  // Division by 4 is exact; offsets come in exact +/- pairs, so the child
  // sum cancels slope contributions up to the rounding of c+o itself.
  double ox = 0.25 * minmod(xp - c, c - xm);
  double oy = 0.25 * minmod(yp - c, c - ym);
  double oz = 0.25 * minmod(zp - c, c - zm);
  std::array<double, 8> fine;
  for (int bk = 0; bk < 2; ++bk)
    for (int bj = 0; bj < 2; ++bj)
      for (int bi = 0; bi < 2; ++bi) {
        double v = c + (bi ? ox : -ox);
        v += bj ? oy : -oy;
        v += bk ? oz : -oz;
        fine[bk * 4 + bj * 2 + bi] = v;
      }
  return fine;
}

double restrict_cells(const std::array<double, 8>& fine) {
  double acc = 0.0;
  for (double v : fine) acc += v;
  return acc * 0.125;
}

void Tree::prolong_into_children(Node& parent) {
  const SubGrid& pg = *parent.grid;
  const int G = cfg_.ghost, E = cfg_.edge;
  for (int var = 0; var < cfg_.vars; ++var)
    for (int k = G; k < G + E; ++k)
      for (int j = G; j < G + E; ++j)
        for (int i = G; i < G + E; ++i) {
          auto fine = prolong_cell(
              pg.at(var, i, j, k), pg.at(var, i - 1, j, k),
              pg.at(var, i + 1, j, k), pg.at(var, i, j - 1, k),
              pg.at(var, i, j + 1, k), pg.at(var, i, j, k - 1),
              pg.at(var, i, j, k + 1));
          int pi = i - G, pj = j - G, pk = k - G;
          int bi = pi >= E / 2, bj = pj >= E / 2, bk = pk >= E / 2;
          Node& child = at(parent.id.child(bi, bj, bk));
          int fi = G + 2 * pi - bi * E, fj = G + 2 * pj - bj * E,
              fk = G + 2 * pk - bk * E;
          for (int dk = 0; dk < 2; ++dk)
            for (int dj = 0; dj < 2; ++dj)
              for (int di = 0; di < 2; ++di)
                child.grid->at(var, fi + di, fj + dj, fk + dk) =
                    fine[dk * 4 + dj * 2 + di];
        }
}

void Tree::refine(const NodeId& id) {
  {
    Node& n = at(id);
    if (!n.is_leaf()) throw AmrError("refine of a non-leaf");
    if (id.level >= cfg_.max_level) throw AmrError("refine beyond max_level");
  }
  // Eager 2:1 balance: coarser face neighbors refine first (cascading).
  for (int axis = 0; axis < 3; ++axis)
    for (int dir : {-1, +1}) {
      while (true) {
        std::int64_t coords[3] = {at(id).id.ci, at(id).id.cj, at(id).id.ck};
        coords[axis] += dir;
        std::int64_t extent =
            static_cast<std::int64_t>(cells_per_axis(id.level, axis));
        if (coords[axis] < 0 || coords[axis] >= extent) {
          if (cfg_.bc[axis] == Boundary::reflective) break;
          coords[axis] = (coords[axis] + extent) % extent;
        }
        NodeId cell{id.level, static_cast<std::uint32_t>(coords[0]),
                    static_cast<std::uint32_t>(coords[1]),
                    static_cast<std::uint32_t>(coords[2])};
        auto covering = covering_leaf(cell);
        if (!covering || covering->level >= id.level) break;
        refine(*covering);
      }
    }
  Node& n = at(id);
  create_children(n);
  if (n.grid) {
    prolong_into_children(n);
    n.grid.reset();
  }
  leaf_cache_valid_ = false;
  version_ += 1;
}

void Tree::coarsen(const NodeId& parent) {
  Node& p = at(parent);
  if (p.children_mask != 0xFF) throw AmrError("coarsen of a leaf");
  std::array<Node*, 8> children;
  for (int b = 0; b < 8; ++b) {
    NodeId cid = parent.child(b & 1, (b >> 1) & 1, (b >> 2) & 1);
    children[b] = &at(cid);
    if (!children[b]->is_leaf())
      throw AmrError("coarsen requires all 8 children to be leaves");
  }
  // Balance: no leaf deeper than parent.level+1 may touch the new leaf.
  for (int axis = 0; axis < 3; ++axis)
    for (int dir : {-1, +1}) {
      std::int64_t coords[3] = {parent.ci, parent.cj, parent.ck};
      coords[axis] += dir;
      std::int64_t extent =
          static_cast<std::int64_t>(cells_per_axis(parent.level, axis));
      if (coords[axis] < 0 || coords[axis] >= extent) {
        if (cfg_.bc[axis] == Boundary::reflective) continue;
        coords[axis] = (coords[axis] + extent) % extent;
      }
      NodeId cell{parent.level, static_cast<std::uint32_t>(coords[0]),
                  static_cast<std::uint32_t>(coords[1]),
                  static_cast<std::uint32_t>(coords[2])};
      auto it = nodes_.find(cell);
      if (it == nodes_.end() || it->second.is_leaf()) continue;
      // Neighbor cell is subdivided: its face children must all be leaves.
      int face_bit = dir > 0 ? 0 : 1;
      int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
      for (int b2 = 0; b2 < 2; ++b2)
        for (int b1 = 0; b1 < 2; ++b1) {
          int bits[3];
          bits[axis] = face_bit;
          bits[t1] = b1;
          bits[t2] = b2;
          const Node& fc = at(cell.child(bits[0], bits[1], bits[2]));
          if (!fc.is_leaf())
            throw AmrError("coarsen would violate 2:1 balance");
        }
    }
  bool have_grids = children[0]->grid != nullptr;
  if (have_grids) {
    p.grid = std::make_unique<SubGrid>(cfg_.edge, cfg_.ghost, cfg_.vars);
    const int G = cfg_.ghost, E = cfg_.edge;
    for (int var = 0; var < cfg_.vars; ++var)
      for (int k = G; k < G + E; ++k)
        for (int j = G; j < G + E; ++j)
          for (int i = G; i < G + E; ++i) {
            int pi = i - G, pj = j - G, pk = k - G;
            int bi = pi >= E / 2, bj = pj >= E / 2, bk = pk >= E / 2;
            const SubGrid& cg =
                *children[bk * 4 + bj * 2 + bi]->grid;
            int fi = G + 2 * pi - bi * E, fj = G + 2 * pj - bj * E,
                fk = G + 2 * pk - bk * E;
            std::array<double, 8> fine;
            for (int dk = 0; dk < 2; ++dk)
              for (int dj = 0; dj < 2; ++dj)
                for (int di = 0; di < 2; ++di)
                  fine[dk * 4 + dj * 2 + di] =
                      cg.at(var, fi + di, fj + dj, fk + dk);
            p.grid->at(var, i, j, k) = restrict_cells(fine);
          }
  }
  for (int b = 0; b < 8; ++b)
    nodes_.erase(parent.child(b & 1, (b >> 1) & 1, (b >> 2) & 1));
  p.children_mask = 0;
  leaf_cache_valid_ = false;
  version_ += 1;
}

bool Tree::flag_refinement(const NodeId& leaf, double theta,
                           double rho_floor) const {
  const Node& n = at(leaf);
  if (!n.grid) throw AmrError("flag_refinement on a gridless leaf");
  const SubGrid& g = *n.grid;
  const int G = cfg_.ghost, E = cfg_.edge;
  for (int k = G; k < G + E; ++k)
    for (int j = G; j < G + E; ++j)
      for (int i = G; i < G + E; ++i) {
        double gx = 0.5 * (g.at(0, i + 1, j, k) - g.at(0, i - 1, j, k));
        double gy = 0.5 * (g.at(0, i, j + 1, k) - g.at(0, i, j - 1, k));
        double gz = 0.5 * (g.at(0, i, j, k + 1) - g.at(0, i, j, k - 1));
        double mag = std::sqrt(gx * gx + gy * gy + gz * gz);
        double rho = std::max(g.at(0, i, j, k), rho_floor);
        if (mag / rho > theta) return true;  // |grad rho|*dx / rho, undivided
      }
  return false;
}

bool Tree::is_balanced() const {
  for (const NodeId& leaf : leaves())
    for (int axis = 0; axis < 3; ++axis)
      for (int dir : {-1, +1}) {
        std::int64_t coords[3] = {leaf.ci, leaf.cj, leaf.ck};
        coords[axis] += dir;
        std::int64_t extent =
            static_cast<std::int64_t>(cells_per_axis(leaf.level, axis));
        if (coords[axis] < 0 || coords[axis] >= extent) {
          if (cfg_.bc[axis] == Boundary::reflective) continue;
          coords[axis] = (coords[axis] + extent) % extent;
        }
        NodeId cell{leaf.level, static_cast<std::uint32_t>(coords[0]),
                    static_cast<std::uint32_t>(coords[1]),
                    static_cast<std::uint32_t>(coords[2])};
        auto it = nodes_.find(cell);
        if (it != nodes_.end() && !it->second.is_leaf()) {
          // Any grandchild on our face breaks 2:1.
          int face_bit = dir > 0 ? 0 : 1;
          int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
          for (int b2 = 0; b2 < 2; ++b2)
            for (int b1 = 0; b1 < 2; ++b1) {
              int bits[3];
              bits[axis] = face_bit;
              bits[t1] = b1;
              bits[t2] = b2;
              if (!at(cell.child(bits[0], bits[1], bits[2])).is_leaf())
                return false;
            }
          continue;
        }
        auto covering = covering_leaf(cell);
        if (!covering) return false;
        if (leaf.level - covering->level > 1) return false;
      }
  return true;
}

void Tree::strip_remote_grids(int rank) {
  for (auto& [id, node] : nodes_)
    if (node.is_leaf() && node.owner != rank) node.grid.reset();
}

void Tree::alloc_all_grids() {
  for (auto& [id, node] : nodes_)
    if (node.is_leaf() && !node.grid)
      node.grid = std::make_unique<SubGrid>(cfg_.edge, cfg_.ghost, cfg_.vars);
}

std::vector<int> partition_leaves(const std::vector<std::uint64_t>& weights,
                                  int localities) {
  if (localities < 1) throw AmrError("partition: localities must be >= 1");
  if (static_cast<std::size_t>(localities) > weights.size())
    throw AmrError("partition: more localities than leaves");
  unsigned __int128 total = 0;
  for (auto w : weights) total += w;
  std::vector<int> owner(weights.size());
  unsigned __int128 cum = 0;
  int rank = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    owner[i] = rank;
    cum += weights[i];
    if (rank + 1 == localities) continue;
    // Close the range at the first prefix reaching the cumulative target.
    // At most one advance per leaf, forced when the remaining localities
    // need every remaining leaf: ranges are never empty.
    std::size_t remaining = weights.size() - i - 1;
    std::size_t needed = static_cast<std::size_t>(localities - rank - 1);
    bool must = remaining == needed;
    bool want = cum * static_cast<unsigned __int128>(localities) >=
                static_cast<unsigned __int128>(rank + 1) * total;
    if (must || (want && remaining >= needed)) rank += 1;
  }
  return owner;
}

}  // namespace taskmesh::amr
