#include "taskmesh/hydro/stage.hpp"

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

namespace taskmesh::hydro {

void encode_header(const StageParams& p, std::span<double> out) {
  out[0] = static_cast<double>(p.mode);
  out[1] = p.dx;
  out[2] = p.dt;
  out[3] = p.gamma;
  out[4] = p.advect[0];
  out[5] = p.advect[1];
  out[6] = p.advect[2];
  out[7] = 0.0;
}

StageParams decode_header(std::span<const double> in) {
  StageParams p;
  p.mode = in[0] == 0.0 ? Mode::scalar : Mode::euler;
  p.dx = in[1];
  p.dt = in[2];
  p.gamma = in[3];
  p.advect = {in[4], in[5], in[6]};
  return p;
}

namespace {

struct PencilScratch {
  // Conserved pencils (vars x S) and, in Euler mode, primitive pencils.
  std::vector<double> cons;
  std::vector<double> rho, u, v, w, p;
  std::vector<double> flux;  // vars x (E+1)
};

thread_local PencilScratch tl_scratch;

// Face kernel over one pencil at compile-time width W: computes fluxes for
// faces [f0, f0+W) of one pencil. Lane-independent per face.
template <unsigned W>
void faces_scalar(const double* pen, int ghost, std::size_t f0, double a,
                  double* flux) {
  using P = lanes::LanePack<W>;
  P um1 = P::load(pen + ghost + f0 - 2);
  P u0 = P::load(pen + ghost + f0 - 1);
  P up1 = P::load(pen + ghost + f0);
  P up2 = P::load(pen + ghost + f0 + 1);
  auto face = reconstruct_face(um1, u0, up1, up2);
  P f = rusanov_scalar(P(a), face.left, face.right);
  f.store(flux + f0);
}

template <unsigned W>
void faces_euler(PencilScratch& s, int ghost, std::size_t f0, int axis,
                 double gamma, int edge) {
  using P = lanes::LanePack<W>;
  auto load4 = [&](const std::vector<double>& q) {
    return std::array<P, 4>{
        P::load(q.data() + ghost + f0 - 2), P::load(q.data() + ghost + f0 - 1),
        P::load(q.data() + ghost + f0), P::load(q.data() + ghost + f0 + 1)};
  };
  auto r = load4(s.rho), u = load4(s.u), v = load4(s.v), w = load4(s.w),
       p = load4(s.p);
  Prim<P> ql, qr;
  auto rec = [&](const std::array<P, 4>& q, P& l, P& rgt) {
    auto f = reconstruct_face(q[0], q[1], q[2], q[3]);
    l = f.left;
    rgt = f.right;
  };
  rec(r, ql.rho, qr.rho);
  rec(u, ql.u, qr.u);
  rec(v, ql.v, qr.v);
  rec(w, ql.w, qr.w);
  rec(p, ql.p, qr.p);
  // Reconstruction can undershoot near steep fronts; clamp to the floors.
  ql.rho = vmax(ql.rho, P(kRhoFloor));
  qr.rho = vmax(qr.rho, P(kRhoFloor));
  ql.p = vmax(ql.p, P(kPressureFloor));
  qr.p = vmax(qr.p, P(kPressureFloor));
  Cons<P> f = rusanov_euler(ql, qr, P(gamma), axis);
  double* base = s.flux.data();
  f.rho.store(base + 0 * (edge + 1) + f0);
  f.mx.store(base + 1 * (edge + 1) + f0);
  f.my.store(base + 2 * (edge + 1) + f0);
  f.mz.store(base + 3 * (edge + 1) + f0);
  f.e.store(base + 4 * (edge + 1) + f0);
}

template <unsigned W>
void stage_impl(const StageParams& par, const StageGeom& geom,
                const double* in, double* out) {
  const int E = geom.edge, G = geom.ghost, S = geom.stride(), V = geom.vars;
  const std::size_t s2 = static_cast<std::size_t>(S) * S;
  const std::size_t s3 = s2 * S;
  const bool euler = par.mode == Mode::euler;
  const double cdt = par.dt / par.dx;

  // out interior starts as a copy of the interior state.
  {
    std::size_t n = 0;
    for (int var = 0; var < V; ++var)
      for (int k = G; k < G + E; ++k)
        for (int j = G; j < G + E; ++j)
          for (int i = G; i < G + E; ++i)
            out[n++] = in[var * s3 + k * s2 + j * S + i];
  }

  PencilScratch& sc = tl_scratch;
  sc.cons.resize(static_cast<std::size_t>(V) * S);
  sc.flux.assign(static_cast<std::size_t>(V) * (E + 1), 0.0);
  if (euler) {
    sc.rho.resize(S);
    sc.u.resize(S);
    sc.v.resize(S);
    sc.w.resize(S);
    sc.p.resize(S);
  }

  const std::size_t nf = static_cast<std::size_t>(E) + 1;
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t stride_a = axis == 0 ? 1 : axis == 1 ? S : s2;
    const int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
    const std::size_t stride_t1 = t1 == 0 ? 1 : t1 == 1 ? S : s2;
    const std::size_t stride_t2 = t2 == 0 ? 1 : t2 == 1 ? S : s2;
    const double a_vel = par.advect[axis];

    for (int c2 = 0; c2 < E; ++c2)
      for (int c1 = 0; c1 < E; ++c1) {
        const std::size_t pencil_base =
            (G + c1) * stride_t1 + (G + c2) * stride_t2;
        // Gather the pencil (all S cells along the axis) per var.
        for (int var = 0; var < V; ++var) {
          const double* src = in + var * s3 + pencil_base;
          double* dst = sc.cons.data() + var * S;
          for (int sx = 0; sx < S; ++sx) dst[sx] = src[sx * stride_a];
        }
        if (euler) {
          for (int q = 0; q < S; ++q) {
            double rho = std::max(sc.cons[q], kRhoFloor);
            double mx = sc.cons[S + q], my = sc.cons[2 * S + q],
                   mz = sc.cons[3 * S + q], et = sc.cons[4 * S + q];
            double iu = mx / rho, iv = my / rho, iw = mz / rho;
            double ke = 0.5 * rho * (iu * iu + iv * iv + iw * iw);
            sc.rho[q] = rho;
            sc.u[q] = iu;
            sc.v[q] = iv;
            sc.w[q] = iw;
            sc.p[q] = std::max((par.gamma - 1.0) * (et - ke), kPressureFloor);
          }
          // floor(nf/W) full packs, then the same kernel at width 1.
          std::size_t f = 0;
          for (; f + W <= nf; f += W) faces_euler<W>(sc, G, f, axis, par.gamma, E);
          for (; f < nf; ++f) faces_euler<1>(sc, G, f, axis, par.gamma, E);
        } else {
          std::size_t f = 0;
          for (; f + W <= nf; f += W)
            faces_scalar<W>(sc.cons.data(), G, f, a_vel, sc.flux.data());
          for (; f < nf; ++f)
            faces_scalar<1>(sc.cons.data(), G, f, a_vel, sc.flux.data());
        }

        // Divergence update along this axis, plus boundary-face recording.
        for (int var = 0; var < V; ++var) {
          const double* fx = sc.flux.data() + var * (E + 1);
          for (int c0 = 0; c0 < E; ++c0) {
            // out interior index for cell (c0 along axis, c1, c2)
            int cc[3];
            cc[axis] = c0;
            cc[t1] = c1;
            cc[t2] = c2;
            std::size_t oi =
                ((static_cast<std::size_t>(var) * E + cc[2]) * E + cc[1]) * E +
                cc[0];
            out[oi] -= cdt * (fx[c0 + 1] - fx[c0]);
          }
          std::size_t fo = static_cast<std::size_t>(var) * E * E + c2 * E + c1;
          out[geom.face_offset(axis, 0) + fo] = fx[0];
          out[geom.face_offset(axis, 1) + fo] = fx[E];
        }
      }
  }

  // Positivity floors and the non-finite check.
  double floor_hits = 0.0;
  const std::size_t e3 = static_cast<std::size_t>(E) * E * E;
  if (euler) {
    for (std::size_t c = 0; c < e3; ++c) {
      double& rho = out[c];
      double& mx = out[e3 + c];
      double& my = out[2 * e3 + c];
      double& mz = out[3 * e3 + c];
      double& et = out[4 * e3 + c];
      if (rho < kRhoFloor) {
        rho = kRhoFloor;
        floor_hits += 1.0;
      }
      double ke = 0.5 * (mx * mx + my * my + mz * mz) / rho;
      double p = (par.gamma - 1.0) * (et - ke);
      if (p < kPressureFloor) {
        et = kPressureFloor / (par.gamma - 1.0) + ke;
        floor_hits += 1.0;
      }
    }
  }
  for (std::size_t c = 0; c < static_cast<std::size_t>(V) * e3; ++c)
    if (!std::isfinite(out[c])) {
      std::size_t cell = c % e3;
      throw SolverError("non-finite state after stage at cell (" +
                        std::to_string(cell % E) + "," +
                        std::to_string(cell / E % E) + "," +
                        std::to_string(cell / (E * E)) + ")");
    }
  out[geom.diag_offset()] = floor_hits;
}

}  // namespace

void stage_subgrid(const StageParams& p, const StageGeom& geom,
                   unsigned lane_width, const double* in, double* out) {
  lanes::with_width(lane_width, [&](auto tag) {
    stage_impl<decltype(tag)::value>(p, geom, in, out);
  });
}

agg::KernelSpec make_stage_kernel(const StageGeom& geom, unsigned lane_width,
                                  std::uint32_t kernel_id) {
  agg::KernelSpec spec;
  spec.id = kernel_id;
  spec.in_slice = geom.in_slice();
  spec.out_slice = geom.out_slice();
  spec.fn = [geom, lane_width](const double* in, double* out,
                               std::size_t in_slice, std::size_t out_slice,
                               std::size_t count) {
    for (std::size_t s = 0; s < count; ++s) {
      const double* slice = in + s * in_slice;
      StageParams p = decode_header({slice, kHeaderDoubles});
      stage_subgrid(p, geom, lane_width, slice + kHeaderDoubles,
                    out + s * out_slice);
    }
  };
  return spec;
}

double max_wavespeed(const StageParams& p, const StageGeom& geom,
                     const double* ghosted) {
  if (p.mode == Mode::scalar)
    return std::sqrt(p.advect[0] * p.advect[0] + p.advect[1] * p.advect[1] +
                     p.advect[2] * p.advect[2]);
  const int E = geom.edge, G = geom.ghost, S = geom.stride();
  const std::size_t s2 = static_cast<std::size_t>(S) * S, s3 = s2 * S;
  double smax = 0.0;
  for (int k = G; k < G + E; ++k)
    for (int j = G; j < G + E; ++j)
      for (int i = G; i < G + E; ++i) {
        std::size_t c = k * s2 + j * S + i;
        double rho = std::max(ghosted[c], kRhoFloor);
        double iu = ghosted[s3 + c] / rho, iv = ghosted[2 * s3 + c] / rho,
               iw = ghosted[3 * s3 + c] / rho;
        double ke = 0.5 * rho * (iu * iu + iv * iv + iw * iw);
        double pr =
            std::max((p.gamma - 1.0) * (ghosted[4 * s3 + c] - ke),
                     kPressureFloor);
        double s = std::sqrt(iu * iu + iv * iv + iw * iw) +
                   std::sqrt(p.gamma * pr / rho);
        smax = std::max(smax, s);
      }
  return smax;
}

}  // namespace taskmesh::hydro
