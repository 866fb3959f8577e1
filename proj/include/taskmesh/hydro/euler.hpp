#pragma once

// Lane-generic building blocks of the finite-volume solver: MUSCL face
// reconstruction and the Rusanov flux for scalar advection and the 3D
// compressible Euler equations. All functions are pure and instantiate at
// any lane width; width-1 packs are the scalar reference.

#include <array>

#include "taskmesh/hydro/limiter.hpp"
#include "taskmesh/lanes.hpp"

namespace taskmesh::hydro {

inline constexpr double kRhoFloor = 1e-10;
inline constexpr double kPressureFloor = 1e-12;
inline constexpr double kDefaultGamma = 7.0 / 5.0;

/// MUSCL face states at i+1/2 from the four-cell stencil:
/// left  = u_i     + 1/2 minmod(u_i - u_{i-1}, u_{i+1} - u_i)
/// right = u_{i+1} - 1/2 minmod(u_{i+1} - u_i, u_{i+2} - u_{i+1})
template <class P>
struct FacePair {
  P left, right;
};

template <class P>
FacePair<P> reconstruct_face(const P& um1, const P& u0, const P& up1,
                             const P& up2) {
  P half(0.5);
  FacePair<P> f;
  f.left = u0 + half * minmod(u0 - um1, up1 - u0);
  f.right = up1 - half * minmod(up1 - u0, up2 - up1);
  return f;
}

inline FacePair<lanes::LanePack<1>> reconstruct_face_scalar(double um1,
                                                            double u0,
                                                            double up1,
                                                            double up2) {
  using P = lanes::LanePack<1>;
  return reconstruct_face(P(um1), P(u0), P(up1), P(up2));
}

/// Scalar advection Rusanov flux: F(u) = a u, dissipation |a|.
template <class P>
P rusanov_scalar(const P& a, const P& left, const P& right) {
  P half(0.5);
  return half * (a * left + a * right) - half * vabs(a) * (right - left);
}

/// Primitive state (rho, u, v, w, p) per lane.
template <class P>
struct Prim {
  P rho, u, v, w, p;
};

/// Conserved state / flux vector (rho, mx, my, mz, E) per lane.
template <class P>
struct Cons {
  P rho, mx, my, mz, e;
};

template <class P>
Prim<P> cons_to_prim(const Cons<P>& c, const P& gamma) {
  Prim<P> q;
  P floor_rho(kRhoFloor);
  q.rho = vmax(c.rho, floor_rho);
  q.u = c.mx / q.rho;
  q.v = c.my / q.rho;
  q.w = c.mz / q.rho;
  P half(0.5);
  P ke = half * q.rho * (q.u * q.u + q.v * q.v + q.w * q.w);
  q.p = vmax((gamma - P(1.0)) * (c.e - ke), P(kPressureFloor));
  return q;
}

template <class P>
Cons<P> prim_to_cons(const Prim<P>& q, const P& gamma) {
  Cons<P> c;
  c.rho = q.rho;
  c.mx = q.rho * q.u;
  c.my = q.rho * q.v;
  c.mz = q.rho * q.w;
  P half(0.5);
  c.e = q.p / (gamma - P(1.0)) +
        half * q.rho * (q.u * q.u + q.v * q.v + q.w * q.w);
  return c;
}

template <class P>
P sound_speed(const Prim<P>& q, const P& gamma) {
  return vsqrt(gamma * q.p / q.rho);
}

/// Physical Euler flux along `axis` (0=x,1=y,2=z).
template <class P>
Cons<P> euler_flux(const Prim<P>& q, const P& gamma, int axis) {
  const P& un = axis == 0 ? q.u : axis == 1 ? q.v : q.w;
  Cons<P> c = prim_to_cons(q, gamma);
  Cons<P> f;
  f.rho = c.rho * un;
  f.mx = c.mx * un;
  f.my = c.my * un;
  f.mz = c.mz * un;
  if (axis == 0)
    f.mx = f.mx + q.p;
  else if (axis == 1)
    f.my = f.my + q.p;
  else
    f.mz = f.mz + q.p;
  f.e = (c.e + q.p) * un;
  return f;
}

/// Rusanov flux between primitive face states:
/// 1/2 (F(L)+F(R)) - 1/2 s_max (U_R - U_L), s_max = max(|un|+c) over sides.
template <class P>
Cons<P> rusanov_euler(const Prim<P>& ql, const Prim<P>& qr, const P& gamma,
                      int axis) {
  const P& unl = axis == 0 ? ql.u : axis == 1 ? ql.v : ql.w;
  const P& unr = axis == 0 ? qr.u : axis == 1 ? qr.v : qr.w;
  P smax = vmax(vabs(unl) + sound_speed(ql, gamma),
                vabs(unr) + sound_speed(qr, gamma));
  Cons<P> fl = euler_flux(ql, gamma, axis);
  Cons<P> fr = euler_flux(qr, gamma, axis);
  Cons<P> ul = prim_to_cons(ql, gamma);
  Cons<P> ur = prim_to_cons(qr, gamma);
  P half(0.5);
  Cons<P> f;
  f.rho = half * (fl.rho + fr.rho) - half * smax * (ur.rho - ul.rho);
  f.mx = half * (fl.mx + fr.mx) - half * smax * (ur.mx - ul.mx);
  f.my = half * (fl.my + fr.my) - half * smax * (ur.my - ul.my);
  f.mz = half * (fl.mz + fr.mz) - half * smax * (ur.mz - ul.mz);
  f.e = half * (fl.e + fr.e) - half * smax * (ur.e - ul.e);
  return f;
}

}  // namespace taskmesh::hydro
