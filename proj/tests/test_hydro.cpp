#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "taskmesh/hydro/rk3.hpp"
#include "taskmesh/hydro/stage.hpp"

using namespace taskmesh;
using namespace taskmesh::hydro;

namespace {

using P1 = lanes::LanePack<1>;

double mm1(double a, double b) { return minmod(P1(a), P1(b)).v[0]; }

std::vector<double> random_state(const StageGeom& g, std::uint64_t seed,
                                 bool euler) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.2, 2.0);
  std::uniform_real_distribution<double> vel(-0.5, 0.5);
  std::vector<double> state(g.ghosted_elems());
  const std::size_t s3 = state.size() / g.vars;
  for (std::size_t c = 0; c < s3; ++c) {
    if (!euler) {
      state[c] = dist(rng);
      continue;
    }
    double rho = dist(rng), u = vel(rng), v = vel(rng), w = vel(rng),
           p = dist(rng);
    state[c] = rho;
    state[s3 + c] = rho * u;
    state[2 * s3 + c] = rho * v;
    state[3 * s3 + c] = rho * w;
    state[4 * s3 + c] = p / (kDefaultGamma - 1.0) +
                        0.5 * rho * (u * u + v * v + w * w);
  }
  return state;
}

// Independent naive stage evaluation: direct triple loops, formulas written
// out from their definitions (shared kernels are not called). Bitwise
// comparable because it uses the same expression groupings the solver
// documents: conversions divide momenta first, fluxes are
// 1/2(F(L)+F(R)) - 1/2 smax (R-L), updates subtract per axis in x,y,z order.
void naive_stage(const StageParams& par, const StageGeom& g,
                 const std::vector<double>& in, std::vector<double>& out) {
  const int E = g.edge, G = g.ghost, S = g.stride(), V = g.vars;
  const std::size_t s2 = static_cast<std::size_t>(S) * S, s3 = s2 * S;
  const std::size_t e3 = static_cast<std::size_t>(E) * E * E;
  const double cdt = par.dt / par.dx;
  auto at = [&](int var, int i, int j, int k) {
    return in[var * s3 + k * s2 + j * S + i];
  };
  auto mmref = [](double a, double b) {
    if (a * b <= 0.0) return 0.0;
    return std::fabs(a) < std::fabs(b) ? a : b;
  };
  out.assign(g.out_slice(), 0.0);
  for (int var = 0; var < V; ++var) {
    std::size_t n = 0;
    for (int k = G; k < G + E; ++k)
      for (int j = G; j < G + E; ++j)
        for (int i = G; i < G + E; ++i) out[var * e3 + n++] = at(var, i, j, k);
  }
  for (int axis = 0; axis < 3; ++axis) {
    int t1 = (axis + 1) % 3, t2 = (axis + 2) % 3;
    for (int c2 = 0; c2 < E; ++c2)
      for (int c1 = 0; c1 < E; ++c1) {
        auto cell = [&](int var, int a) {
          int cc[3];
          cc[axis] = a;
          cc[t1] = G + c1;
          cc[t2] = G + c2;
          return at(var, cc[0], cc[1], cc[2]);
        };
        std::vector<std::vector<double>> flux(
            V, std::vector<double>(E + 1, 0.0));
        for (int f = 0; f <= E; ++f) {
          if (par.mode == Mode::scalar) {
            double um1 = cell(0, G + f - 2), u0 = cell(0, G + f - 1),
                   up1 = cell(0, G + f), up2 = cell(0, G + f + 1);
            double L = u0 + 0.5 * mmref(u0 - um1, up1 - u0);
            double R = up1 - 0.5 * mmref(up1 - u0, up2 - up1);
            double a = par.advect[axis];
            flux[0][f] = 0.5 * (a * L + a * R) - 0.5 * std::fabs(a) * (R - L);
            continue;
          }
          // Euler: primitive reconstruction then Rusanov.
          double prim[4][5];
          for (int s = 0; s < 4; ++s) {
            int a = G + f - 2 + s;
            double rho = std::max(cell(0, a), kRhoFloor);
            double uu = cell(1, a) / rho, vv = cell(2, a) / rho,
                   ww = cell(3, a) / rho;
            double ke = 0.5 * rho * (uu * uu + vv * vv + ww * ww);
            double pp =
                std::max((par.gamma - 1.0) * (cell(4, a) - ke), kPressureFloor);
            prim[s][0] = rho;
            prim[s][1] = uu;
            prim[s][2] = vv;
            prim[s][3] = ww;
            prim[s][4] = pp;
          }
          double ql[5], qr[5];
          for (int q = 0; q < 5; ++q) {
            ql[q] = prim[1][q] +
                    0.5 * mmref(prim[1][q] - prim[0][q], prim[2][q] - prim[1][q]);
            qr[q] = prim[2][q] -
                    0.5 * mmref(prim[2][q] - prim[1][q], prim[3][q] - prim[2][q]);
          }
          ql[0] = std::max(ql[0], kRhoFloor);
          qr[0] = std::max(qr[0], kRhoFloor);
          ql[4] = std::max(ql[4], kPressureFloor);
          qr[4] = std::max(qr[4], kPressureFloor);
          auto pack = [&](const double* q, double* cons, double* fl) {
            double rho = q[0], uu = q[1], vv = q[2], ww = q[3], pp = q[4];
            cons[0] = rho;
            cons[1] = rho * uu;
            cons[2] = rho * vv;
            cons[3] = rho * ww;
            cons[4] = pp / (par.gamma - 1.0) +
                      0.5 * rho * (uu * uu + vv * vv + ww * ww);
            double un = q[1 + axis];
            fl[0] = cons[0] * un;
            fl[1] = cons[1] * un;
            fl[2] = cons[2] * un;
            fl[3] = cons[3] * un;
            fl[1 + axis] = fl[1 + axis] + pp;
            fl[4] = (cons[4] + pp) * un;
          };
          double ucl[5], ucr[5], fcl[5], fcr[5];
          pack(ql, ucl, fcl);
          pack(qr, ucr, fcr);
          double cl = std::sqrt(par.gamma * ql[4] / ql[0]);
          double cr = std::sqrt(par.gamma * qr[4] / qr[0]);
          double smax = std::max(std::fabs(ql[1 + axis]) + cl,
                                 std::fabs(qr[1 + axis]) + cr);
          for (int q = 0; q < 5; ++q)
            flux[q][f] = 0.5 * (fcl[q] + fcr[q]) - 0.5 * smax * (ucr[q] - ucl[q]);
        }
        for (int var = 0; var < V; ++var) {
          for (int c0 = 0; c0 < E; ++c0) {
            int cc[3];
            cc[axis] = c0;
            cc[t1] = c1;
            cc[t2] = c2;
            std::size_t oi =
                ((static_cast<std::size_t>(var) * E + cc[2]) * E + cc[1]) * E +
                cc[0];
            out[oi] -= cdt * (flux[var][c0 + 1] - flux[var][c0]);
          }
          std::size_t fo = static_cast<std::size_t>(var) * E * E + c2 * E + c1;
          out[g.face_offset(axis, 0) + fo] = flux[var][0];
          out[g.face_offset(axis, 1) + fo] = flux[var][E];
        }
      }
  }
  if (par.mode == Mode::euler) {
    double hits = 0.0;
    for (std::size_t c = 0; c < e3; ++c) {
      if (out[c] < kRhoFloor) {
        out[c] = kRhoFloor;
        hits += 1;
      }
      double ke = 0.5 *
                  (out[e3 + c] * out[e3 + c] + out[2 * e3 + c] * out[2 * e3 + c] +
                   out[3 * e3 + c] * out[3 * e3 + c]) /
                  out[c];
      double p = (par.gamma - 1.0) * (out[4 * e3 + c] - ke);
      if (p < kPressureFloor) {
        out[4 * e3 + c] = kPressureFloor / (par.gamma - 1.0) + ke;
        hits += 1;
      }
    }
    out[g.diag_offset()] = hits;
  }
}

}  // namespace

TEST_CASE("minmod basics") {
  CHECK(mm1(1, 2) == 1);
  CHECK(mm1(-1, 2) == 0);
  CHECK(mm1(-2, -3) == -2);
  CHECK(mm1(0, 5) == 0);
}

TEST_CASE("reconstruct_face: constant and linear data") {
  auto f = reconstruct_face_scalar(3.0, 3.0, 3.0, 3.0);
  CHECK(f.left.v[0] == 3.0);
  CHECK(f.right.v[0] == 3.0);
  // Linear u_i = i around face between cells 1 and 2: both sides 1.5.
  auto g = reconstruct_face_scalar(0.0, 1.0, 2.0, 3.0);
  CHECK(g.left.v[0] == 1.5);
  CHECK(g.right.v[0] == 1.5);
}

TEST_CASE("reconstruct_face equals the direct formula on random data") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-4, 4);
  for (int t = 0; t < 2000; ++t) {
    double um1 = dist(rng), u0 = dist(rng), up1 = dist(rng), up2 = dist(rng);
    auto f = reconstruct_face_scalar(um1, u0, up1, up2);
    auto mm = [](double a, double b) {
      if (a * b <= 0.0) return 0.0;
      return std::fabs(a) < std::fabs(b) ? a : b;
    };
    CHECK(f.left.v[0] == u0 + 0.5 * mm(u0 - um1, up1 - u0));
    CHECK(f.right.v[0] == up1 - 0.5 * mm(up1 - u0, up2 - up1));
  }
}

TEST_CASE("rusanov: equal states give the physical flux exactly") {
  Prim<P1> q{P1(1.0), P1(0.3), P1(-0.2), P1(0.1), P1(0.7)};
  auto f = rusanov_euler(q, q, P1(kDefaultGamma), 0);
  auto phys = euler_flux(q, P1(kDefaultGamma), 0);
  CHECK(f.rho.v[0] == phys.rho.v[0]);
  CHECK(f.mx.v[0] == phys.mx.v[0]);
  CHECK(f.my.v[0] == phys.my.v[0]);
  CHECK(f.mz.v[0] == phys.mz.v[0]);
  CHECK(f.e.v[0] == phys.e.v[0]);
}

TEST_CASE("rusanov scalar arithmetic example") {
  CHECK(rusanov_scalar(P1(1.0), P1(1.0), P1(0.0)).v[0] == 1.0);
}

TEST_CASE("rusanov on Sod face states matches an independent evaluation") {
  // Sod left/right: (rho,p) = (1,1) / (0.125,0.1), velocities zero.
  Prim<P1> l{P1(1.0), P1(0.0), P1(0.0), P1(0.0), P1(1.0)};
  Prim<P1> r{P1(0.125), P1(0.0), P1(0.0), P1(0.0), P1(0.1)};
  double gamma = kDefaultGamma;
  auto f = rusanov_euler(l, r, P1(gamma), 0);
  // Direct formula evaluation.
  double el = 1.0 / (gamma - 1.0);
  double er = 0.1 / (gamma - 1.0);
  double cl = std::sqrt(gamma * 1.0 / 1.0), cr = std::sqrt(gamma * 0.1 / 0.125);
  double smax = std::max(cl, cr);
  CHECK(f.rho.v[0] == 0.5 * (0.0 + 0.0) - 0.5 * smax * (0.125 - 1.0));
  CHECK(f.mx.v[0] == 0.5 * (1.0 + 0.1) - 0.5 * smax * 0.0);
  CHECK(f.e.v[0] == -0.5 * smax * (er - el));
}

TEST_CASE("uniform state gives a bitwise-zero update") {
  for (bool euler : {false, true}) {
    StageGeom g;
    g.vars = euler ? 5 : 1;
    StageParams p;
    p.mode = euler ? Mode::euler : Mode::scalar;
    p.dx = 0.1;
    p.dt = 0.01;
    std::vector<double> in(g.ghosted_elems());
    const std::size_t s3 = in.size() / g.vars;
    for (std::size_t c = 0; c < s3; ++c) {
      in[c] = 1.4;
      if (euler) {
        in[s3 + c] = 0.21;
        in[2 * s3 + c] = -0.07;
        in[3 * s3 + c] = 0.035;
        in[4 * s3 + c] = 2.5;
      }
    }
    std::vector<double> out(g.out_slice());
    stage_subgrid(p, g, 4, in.data(), out.data());
    const std::size_t e3 = 512;
    for (int var = 0; var < g.vars; ++var) {
      double expect = in[var * s3];
      for (std::size_t c = 0; c < e3; ++c) CHECK(out[var * e3 + c] == expect);
    }
    CHECK(out[g.diag_offset()] == 0.0);
  }
}

TEST_CASE("stage equals the independent naive evaluation bitwise") {
  for (bool euler : {false, true}) {
    StageGeom g;
    g.vars = euler ? 5 : 1;
    StageParams p;
    p.mode = euler ? Mode::euler : Mode::scalar;
    p.dx = 1.0 / 64;
    p.dt = 0.4 * p.dx / 2.0;
    p.advect = {1.0, -0.5, 0.25};
    auto in = random_state(g, euler ? 11 : 12, euler);
    std::vector<double> out(g.out_slice());
    stage_subgrid(p, g, 8, in.data(), out.data());
    std::vector<double> ref;
    naive_stage(p, g, in, ref);
    REQUIRE(out.size() == ref.size());
    CHECK(std::memcmp(out.data(), ref.data(), out.size() * sizeof(double)) ==
          0);
  }
}

TEST_CASE("stage output is bitwise invariant across lane widths") {
  for (bool euler : {false, true}) {
    StageGeom g;
    g.vars = euler ? 5 : 1;
    StageParams p;
    p.mode = euler ? Mode::euler : Mode::scalar;
    p.dx = 0.05;
    p.dt = 0.002;
    p.advect = {0.7, 0.1, -0.3};
    auto in = random_state(g, euler ? 21 : 22, euler);
    std::vector<double> ref(g.out_slice());
    stage_subgrid(p, g, 1, in.data(), ref.data());
    for (unsigned w : {2u, 4u, 8u, 16u}) {
      std::vector<double> out(g.out_slice());
      stage_subgrid(p, g, w, in.data(), out.data());
      CHECK(std::memcmp(out.data(), ref.data(), out.size() * sizeof(double)) ==
            0);
    }
  }
}

TEST_CASE("interior update plus boundary fluxes conserve mass to rounding") {
  StageGeom g;
  StageParams p;
  p.mode = Mode::scalar;
  p.dx = 1.0 / 8;
  p.dt = 0.4 * p.dx;
  p.advect = {1.0, 0.5, -0.25};
  auto in = random_state(g, 33, false);
  std::vector<double> out(g.out_slice());
  stage_subgrid(p, g, 8, in.data(), out.data());

  const int E = g.edge, G = g.ghost, S = g.stride();
  double mass_old = 0.0;
  for (int k = G; k < G + E; ++k)
    for (int j = G; j < G + E; ++j)
      for (int i = G; i < G + E; ++i)
        mass_old += in[k * S * S + j * S + i];
  double mass_new = 0.0;
  for (std::size_t c = 0; c < 512; ++c) mass_new += out[c];
  double boundary = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    for (std::size_t f = 0; f < g.face_elems(); ++f) {
      boundary -= out[g.face_offset(axis, 0) + f];
      boundary += out[g.face_offset(axis, 1) + f];
    }
  }
  // Telescoping: interior change equals the boundary flux imbalance.
  CHECK(mass_new - mass_old ==
        doctest::Approx(-(p.dt / p.dx) * boundary).epsilon(1e-12));
}

TEST_CASE("mirror symmetry: x-reflected input gives x-reflected output") {
  StageGeom g;
  g.vars = 5;
  StageParams p;
  p.mode = Mode::euler;
  p.dx = 0.1;
  p.dt = 0.004;
  auto in = random_state(g, 44, true);
  const int S = g.stride();
  const std::size_t s2 = static_cast<std::size_t>(S) * S, s3 = s2 * S;
  std::vector<double> mirrored(in.size());
  for (int var = 0; var < 5; ++var)
    for (int k = 0; k < S; ++k)
      for (int j = 0; j < S; ++j)
        for (int i = 0; i < S; ++i) {
          double v = in[var * s3 + k * s2 + j * S + (S - 1 - i)];
          mirrored[var * s3 + k * s2 + j * S + i] = var == 1 ? -v : v;
        }
  std::vector<double> out(g.out_slice()), out_m(g.out_slice());
  stage_subgrid(p, g, 8, in.data(), out.data());
  stage_subgrid(p, g, 8, mirrored.data(), out_m.data());
  const int E = g.edge;
  const std::size_t e2 = static_cast<std::size_t>(E) * E, e3 = e2 * E;
  for (int var = 0; var < 5; ++var)
    for (int k = 0; k < E; ++k)
      for (int j = 0; j < E; ++j)
        for (int i = 0; i < E; ++i) {
          double v = out[var * e3 + k * e2 + j * E + (E - 1 - i)];
          if (var == 1) v = -v;
          CHECK(out_m[var * e3 + k * e2 + j * E + i] == v);
        }
}

TEST_CASE("fused kernel slices equal direct stage calls bitwise") {
  StageGeom g;
  g.vars = 5;
  unsigned width = 4;
  auto spec = make_stage_kernel(g, width, 2);
  StageParams p;
  p.mode = Mode::euler;
  p.dx = 0.02;
  p.dt = 0.0005;
  const std::size_t n = 6;
  std::vector<double> packed_in(n * spec.in_slice), packed_out(n * spec.out_slice);
  std::vector<std::vector<double>> direct(n);
  for (std::size_t s = 0; s < n; ++s) {
    auto state = random_state(g, 100 + s, true);
    encode_header(p, {packed_in.data() + s * spec.in_slice, kHeaderDoubles});
    std::memcpy(packed_in.data() + s * spec.in_slice + kHeaderDoubles,
                state.data(), state.size() * sizeof(double));
    direct[s].resize(g.out_slice());
    stage_subgrid(p, g, width, state.data(), direct[s].data());
  }
  spec.fn(packed_in.data(), packed_out.data(), spec.in_slice, spec.out_slice, n);
  for (std::size_t s = 0; s < n; ++s)
    CHECK(std::memcmp(packed_out.data() + s * spec.out_slice, direct[s].data(),
                      g.out_slice() * sizeof(double)) == 0);
}

TEST_CASE("ssp-rk3 on u' = -u matches the hand-evaluated oracle") {
  double dt = 0.1, u0 = 1.0;
  auto L = [](double u) { return -u; };
  // Solver path: v = u + dt L(u), then the incremental combines.
  double u = u0;
  double v1 = u + dt * L(u);
  u = rk3_combine(1, u0, v1);
  double v2 = u + dt * L(u);
  u = rk3_combine(2, u0, v2);
  double v3 = u + dt * L(u);
  u = rk3_combine(3, u0, v3);
  // Oracle: the textbook convex-combination form, evaluated directly.
  double o1 = u0 + dt * L(u0);
  double o2 = 0.75 * u0 + 0.25 * (o1 + dt * L(o1));
  double o3 = (1.0 / 3.0) * u0 + (2.0 / 3.0) * (o2 + dt * L(o2));
  CHECK(u == doctest::Approx(o3).epsilon(1e-15));
  CHECK(o3 == doctest::Approx(0.9048333333333333).epsilon(1e-12));
}

TEST_CASE("rk3 with a zero operator returns u0 bitwise") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> dist(-10, 10);
  for (int t = 0; t < 1000; ++t) {
    double u0 = dist(rng);
    double u = u0;
    for (int stage = 1; stage <= 3; ++stage) u = rk3_combine(stage, u0, u);
    CHECK(u == u0);
  }
}

TEST_CASE("max_wavespeed: scalar advection magnitude and euler |u|+c") {
  StageGeom g;
  StageParams p;
  p.mode = Mode::scalar;
  p.advect = {3.0, 0.0, 4.0};
  CHECK(max_wavespeed(p, g, nullptr) == 5.0);

  StageGeom ge;
  ge.vars = 5;
  StageParams pe;
  pe.mode = Mode::euler;
  std::vector<double> state(ge.ghosted_elems());
  const std::size_t s3 = state.size() / 5;
  for (std::size_t c = 0; c < s3; ++c) {
    state[c] = 1.0;
    state[s3 + c] = 0.5;  // u = 0.5
    state[4 * s3 + c] = 1.0 / (kDefaultGamma - 1.0) + 0.5 * 0.25;
  }
  double expect = 0.5 + std::sqrt(kDefaultGamma);
  CHECK(max_wavespeed(pe, ge, state.data()) ==
        doctest::Approx(expect).epsilon(1e-12));
}
