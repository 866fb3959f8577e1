#include "taskmesh/amr/ghost.hpp"

#include "taskmesh/hydro/limiter.hpp"

namespace taskmesh::amr::ghost {

namespace {

// Composes (i,j,k) from an axis-decomposed triple: na along `axis`, v1/v2
// along the following axes (axis+1)%3 and (axis+2)%3.
inline void axis_coords(int axis, int na, int v1, int v2, int& i, int& j,
                        int& k) {
  int c[3];
  c[axis] = na;
  c[(axis + 1) % 3] = v1;
  c[(axis + 2) % 3] = v2;
  i = c[0];
  j = c[1];
  k = c[2];
}

thread_local std::vector<double> tl_slab;

}  // namespace

std::size_t same_slab_elems(const SubGrid& g) {
  return static_cast<std::size_t>(g.vars()) * g.ghost() * g.stride() *
         g.stride();
}

std::size_t prolonged_slab_elems(const SubGrid& g) {
  return static_cast<std::size_t>(g.vars()) * g.ghost() * g.edge() * g.edge();
}

std::size_t restricted_slab_elems(const SubGrid& g) {
  return static_cast<std::size_t>(g.vars()) * g.ghost() * (g.edge() / 2) *
         (g.edge() / 2);
}

void extract_same_slab(const SubGrid& src, int axis, int dir,
                       std::span<double> out) {
  const int G = src.ghost(), E = src.edge(), S = src.stride();
  std::size_t n = 0;
  int i, j, k;
  for (int var = 0; var < src.vars(); ++var)
    for (int v2 = 0; v2 < S; ++v2)
      for (int v1 = 0; v1 < S; ++v1)
        for (int q = 0; q < G; ++q) {
          int na = dir > 0 ? G + q : E + q;
          axis_coords(axis, na, v1, v2, i, j, k);
          out[n++] = src.at(var, i, j, k);
        }
}

void apply_same_slab(SubGrid& dst, int axis, int dir,
                     std::span<const double> in) {
  const int G = dst.ghost(), E = dst.edge(), S = dst.stride();
  std::size_t n = 0;
  int i, j, k;
  for (int var = 0; var < dst.vars(); ++var)
    for (int v2 = 0; v2 < S; ++v2)
      for (int v1 = 0; v1 < S; ++v1)
        for (int q = 0; q < G; ++q) {
          int na = dir > 0 ? G + E + q : q;
          axis_coords(axis, na, v1, v2, i, j, k);
          dst.at(var, i, j, k) = in[n++];
        }
}

void extract_prolonged_slab(const SubGrid& coarse_src, int axis, int dir,
                            int qt1, int qt2, std::span<double> out) {
  const int G = coarse_src.ghost(), E = coarse_src.edge();
  std::size_t n = 0;
  int i, j, k, im, jm, km, ip, jp, kp;
  for (int var = 0; var < coarse_src.vars(); ++var)
    for (int f2 = 0; f2 < E; ++f2)
      for (int f1 = 0; f1 < E; ++f1)
        for (int dd = 0; dd < G; ++dd) {
          int cd = dd / 2;
          int sub = dd - 2 * cd;
          // Coarse normal layer counted from the face toward the source
          // interior; its +/-1 stencil may touch the source's own ghosts.
          int na = dir > 0 ? G + cd : G + E - 1 - cd;
          int ct1 = G + qt1 * (E / 2) + f1 / 2;
          int ct2 = G + qt2 * (E / 2) + f2 / 2;
          axis_coords(axis, na, ct1, ct2, i, j, k);
          axis_coords(axis, na - 1, ct1, ct2, im, jm, km);
          axis_coords(axis, na + 1, ct1, ct2, ip, jp, kp);
          double c = coarse_src.at(var, i, j, k);
          double s = hydro::minmod(coarse_src.at(var, ip, jp, kp) - c,
                                   c - coarse_src.at(var, im, jm, km));
          double off = 0.25 * s;
          int sign = dir > 0 ? (sub == 0 ? -1 : +1) : (sub == 0 ? +1 : -1);
          out[n++] = sign > 0 ? c + off : c - off;
        }
}

void apply_prolonged_slab(SubGrid& fine_dst, int axis, int dir,
                          std::span<const double> in) {
  const int G = fine_dst.ghost(), E = fine_dst.edge();
  std::size_t n = 0;
  int i, j, k;
  for (int var = 0; var < fine_dst.vars(); ++var)
    for (int f2 = 0; f2 < E; ++f2)
      for (int f1 = 0; f1 < E; ++f1)
        for (int dd = 0; dd < G; ++dd) {
          int na = dir > 0 ? G + E + dd : G - 1 - dd;
          axis_coords(axis, na, G + f1, G + f2, i, j, k);
          fine_dst.at(var, i, j, k) = in[n++];
        }
}

void extract_restricted_slab(const SubGrid& fine_src, int axis, int dir,
                             std::span<double> out) {
  const int G = fine_src.ghost(), E = fine_src.edge();
  std::size_t n = 0;
  int i, j, k;
  for (int var = 0; var < fine_src.vars(); ++var)
    for (int c2 = 0; c2 < E / 2; ++c2)
      for (int c1 = 0; c1 < E / 2; ++c1)
        for (int dd = 0; dd < G; ++dd) {
          double acc = 0.0;
          for (int dn = 0; dn < 2; ++dn)
            for (int d1 = 0; d1 < 2; ++d1)
              for (int d2 = 0; d2 < 2; ++d2) {
                int fn = dir > 0 ? G + 2 * dd + dn : G + E - 1 - (2 * dd + dn);
                axis_coords(axis, fn, G + 2 * c1 + d1, G + 2 * c2 + d2, i, j,
                            k);
                acc += fine_src.at(var, i, j, k);
              }
          out[n++] = acc * 0.125;
        }
}

void apply_restricted_slab(SubGrid& coarse_dst, int axis, int dir, int qt1,
                           int qt2, std::span<const double> in) {
  const int G = coarse_dst.ghost(), E = coarse_dst.edge();
  std::size_t n = 0;
  int i, j, k;
  for (int var = 0; var < coarse_dst.vars(); ++var)
    for (int c2 = 0; c2 < E / 2; ++c2)
      for (int c1 = 0; c1 < E / 2; ++c1)
        for (int dd = 0; dd < G; ++dd) {
          int na = dir > 0 ? G + E + dd : G - 1 - dd;
          axis_coords(axis, na, G + qt1 * (E / 2) + c1, G + qt2 * (E / 2) + c2,
                      i, j, k);
          coarse_dst.at(var, i, j, k) = in[n++];
        }
}

void reflective_fill(SubGrid& g, int axis, int dir, int normal_momentum_var) {
  const int G = g.ghost(), E = g.edge(), S = g.stride();
  int gi, gj, gk, ii, ij, ik;
  for (int var = 0; var < g.vars(); ++var) {
    double sign = var == normal_momentum_var ? -1.0 : 1.0;
    for (int v2 = 0; v2 < S; ++v2)
      for (int v1 = 0; v1 < S; ++v1)
        for (int dd = 0; dd < G; ++dd) {
          int ng = dir > 0 ? G + E + dd : G - 1 - dd;
          int ni = dir > 0 ? G + E - 1 - dd : G + dd;
          axis_coords(axis, ng, v1, v2, gi, gj, gk);
          axis_coords(axis, ni, v1, v2, ii, ij, ik);
          g.at(var, gi, gj, gk) = sign * g.at(var, ii, ij, ik);
        }
  }
}

std::vector<FillEntry> plan_axis_fills(const Tree& tree, int axis) {
  std::vector<FillEntry> plan;
  for (const NodeId& leaf : tree.leaves())
    for (int dir : {-1, +1}) {
      FaceNeighbors nb = tree.face_neighbor(leaf, axis, dir);
      FillEntry fill;
      fill.dst = leaf;
      fill.kind = nb.kind;
      fill.axis = static_cast<std::int8_t>(axis);
      fill.dir = static_cast<std::int8_t>(dir);
      switch (nb.kind) {
        case NeighborKind::boundary:
          plan.push_back(fill);
          break;
        case NeighborKind::same:
          fill.src = nb.ids[0];
          plan.push_back(fill);
          break;
        case NeighborKind::coarser: {
          fill.src = nb.ids[0];
          int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
          std::uint32_t c[3] = {leaf.ci, leaf.cj, leaf.ck};
          fill.qt1 = static_cast<std::int8_t>(c[t1] & 1);
          fill.qt2 = static_cast<std::int8_t>(c[t2] & 1);
          plan.push_back(fill);
          break;
        }
        case NeighborKind::finer: {
          // ids are ordered by (qt2, qt1) quadrants of our face.
          int q = 0;
          for (int qt2 = 0; qt2 < 2; ++qt2)
            for (int qt1 = 0; qt1 < 2; ++qt1) {
              fill.src = nb.ids[q++];
              fill.qt1 = static_cast<std::int8_t>(qt1);
              fill.qt2 = static_cast<std::int8_t>(qt2);
              plan.push_back(fill);
            }
          break;
        }
      }
    }
  return plan;
}

std::size_t slab_elems(const Tree& tree, const FillEntry& fill) {
  const SubGrid& dst = *tree.at(fill.dst).grid;
  switch (fill.kind) {
    case NeighborKind::same:
      return same_slab_elems(dst);
    case NeighborKind::coarser:
      return prolonged_slab_elems(dst);
    case NeighborKind::finer:
      return restricted_slab_elems(dst);
    default:
      return 0;
  }
}

void extract_for(const Tree& tree, const FillEntry& fill,
                 std::span<double> out) {
  const SubGrid& src = *tree.at(fill.src).grid;
  switch (fill.kind) {
    case NeighborKind::same:
      extract_same_slab(src, fill.axis, fill.dir, out);
      break;
    case NeighborKind::coarser:
      extract_prolonged_slab(src, fill.axis, fill.dir, fill.qt1, fill.qt2,
                             out);
      break;
    case NeighborKind::finer:
      extract_restricted_slab(src, fill.axis, fill.dir, out);
      break;
    case NeighborKind::boundary:
      throw AmrError("boundary fills have no source slab");
  }
}

void apply_for(Tree& tree, const FillEntry& fill, std::span<const double> in) {
  SubGrid& dst = *tree.at(fill.dst).grid;
  switch (fill.kind) {
    case NeighborKind::same:
      apply_same_slab(dst, fill.axis, fill.dir, in);
      break;
    case NeighborKind::coarser:
      apply_prolonged_slab(dst, fill.axis, fill.dir, in);
      break;
    case NeighborKind::finer:
      apply_restricted_slab(dst, fill.axis, fill.dir, fill.qt1, fill.qt2, in);
      break;
    case NeighborKind::boundary:
      throw AmrError("boundary fills have no source slab");
  }
}

void execute_fill_local(Tree& tree, const FillEntry& fill,
                        const ProlongedSlabs& staged) {
  if (fill.kind == NeighborKind::boundary) {
    const bool euler = tree.config().vars == 5;
    reflective_fill(*tree.at(fill.dst).grid, fill.axis, fill.dir,
                    euler ? 1 + fill.axis : -1);
    return;
  }
  if (fill.kind == NeighborKind::coarser) {
    auto it = staged.find(prolonged_key(fill.dst, fill.dir));
    if (it == staged.end())
      throw AmrError("prolonged slab was not staged before the apply phase");
    apply_for(tree, fill, it->second);
    return;
  }
  tl_slab.resize(slab_elems(tree, fill));
  extract_for(tree, fill, tl_slab);
  apply_for(tree, fill, tl_slab);
}

void fill_ghosts_sync(Tree& tree) {
  for (int axis = 0; axis < 3; ++axis) {
    auto plan = plan_axis_fills(tree, axis);
    // Phase 1: prolonged slabs snapshot the pre-pass ghost state.
    ProlongedSlabs staged;
    for (const FillEntry& fill : plan)
      if (fill.kind == NeighborKind::coarser) {
        std::vector<double> slab(slab_elems(tree, fill));
        extract_for(tree, fill, slab);
        staged.emplace(prolonged_key(fill.dst, fill.dir), std::move(slab));
      }
    // Phase 2: order-independent applies.
    for (const FillEntry& fill : plan) execute_fill_local(tree, fill, staged);
  }
}

}  // namespace taskmesh::amr::ghost
