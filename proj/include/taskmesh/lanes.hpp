#pragma once

// Lane-width-generic element-wise kernels with masks: one kernel text,
// instantiated at width W on CPU lanes or width 1 as the device stand-in.
// Element ops act lane-independently, so results are bitwise identical for
// every width. Reductions are excluded from lane widening on purpose:
// vreduce_sum is strictly sequential to keep sums bitwise deterministic.

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace taskmesh::lanes {

class LaneError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <unsigned W>
struct LaneMask {
  static_assert(W >= 1 && W <= 16 && (W & (W - 1)) == 0);
  std::array<bool, W> m{};

  static constexpr unsigned width = W;

  friend LaneMask operator&&(const LaneMask& a, const LaneMask& b) {
    LaneMask r;
    for (unsigned i = 0; i < W; ++i) r.m[i] = a.m[i] && b.m[i];
    return r;
  }
  friend LaneMask operator||(const LaneMask& a, const LaneMask& b) {
    LaneMask r;
    for (unsigned i = 0; i < W; ++i) r.m[i] = a.m[i] || b.m[i];
    return r;
  }
  friend LaneMask operator!(const LaneMask& a) {
    LaneMask r;
    for (unsigned i = 0; i < W; ++i) r.m[i] = !a.m[i];
    return r;
  }
  bool all() const {
    for (unsigned i = 0; i < W; ++i)
      if (!m[i]) return false;
    return true;
  }
  bool any() const {
    for (unsigned i = 0; i < W; ++i)
      if (m[i]) return true;
    return false;
  }
};

template <unsigned W>
struct LanePack {
  static_assert(W >= 1 && W <= 16 && (W & (W - 1)) == 0);
  std::array<double, W> v{};

  static constexpr unsigned width = W;
  using mask_type = LaneMask<W>;

  LanePack() = default;
  explicit LanePack(double x) { v.fill(x); }

  static LanePack load(const double* p) {
    LanePack r;
    for (unsigned i = 0; i < W; ++i) r.v[i] = p[i];
    return r;
  }
  void store(double* p) const {
    for (unsigned i = 0; i < W; ++i) p[i] = v[i];
  }
  double operator[](unsigned i) const { return v[i]; }

  friend LanePack operator+(const LanePack& a, const LanePack& b) {
    LanePack r;
    for (unsigned i = 0; i < W; ++i) r.v[i] = a.v[i] + b.v[i];
    return r;
  }
  friend LanePack operator-(const LanePack& a, const LanePack& b) {
    LanePack r;
    for (unsigned i = 0; i < W; ++i) r.v[i] = a.v[i] - b.v[i];
    return r;
  }
  friend LanePack operator*(const LanePack& a, const LanePack& b) {
    LanePack r;
    for (unsigned i = 0; i < W; ++i) r.v[i] = a.v[i] * b.v[i];
    return r;
  }
  friend LanePack operator/(const LanePack& a, const LanePack& b) {
    LanePack r;
    for (unsigned i = 0; i < W; ++i) r.v[i] = a.v[i] / b.v[i];
    return r;
  }
  friend LanePack operator-(const LanePack& a) {
    LanePack r;
    for (unsigned i = 0; i < W; ++i) r.v[i] = -a.v[i];
    return r;
  }

  friend LanePack vmin(const LanePack& a, const LanePack& b) {
    LanePack r;
    for (unsigned i = 0; i < W; ++i) r.v[i] = a.v[i] < b.v[i] ? a.v[i] : b.v[i];
    return r;
  }
  friend LanePack vmax(const LanePack& a, const LanePack& b) {
    LanePack r;
    for (unsigned i = 0; i < W; ++i) r.v[i] = a.v[i] > b.v[i] ? a.v[i] : b.v[i];
    return r;
  }
  friend LanePack vabs(const LanePack& a) {
    LanePack r;
    for (unsigned i = 0; i < W; ++i) r.v[i] = std::fabs(a.v[i]);
    return r;
  }
  friend LanePack vsqrt(const LanePack& a) {
    LanePack r;
    for (unsigned i = 0; i < W; ++i) r.v[i] = std::sqrt(a.v[i]);
    return r;
  }

  friend LaneMask<W> operator<(const LanePack& a, const LanePack& b) {
    LaneMask<W> r;
    for (unsigned i = 0; i < W; ++i) r.m[i] = a.v[i] < b.v[i];
    return r;
  }
  friend LaneMask<W> operator<=(const LanePack& a, const LanePack& b) {
    LaneMask<W> r;
    for (unsigned i = 0; i < W; ++i) r.m[i] = a.v[i] <= b.v[i];
    return r;
  }
  friend LaneMask<W> operator>(const LanePack& a, const LanePack& b) {
    LaneMask<W> r;
    for (unsigned i = 0; i < W; ++i) r.m[i] = a.v[i] > b.v[i];
    return r;
  }
  friend LaneMask<W> operator>=(const LanePack& a, const LanePack& b) {
    LaneMask<W> r;
    for (unsigned i = 0; i < W; ++i) r.m[i] = a.v[i] >= b.v[i];
    return r;
  }
};

/// Per-lane conditional: select(m, a, b)[i] = m[i] ? a[i] : b[i].
template <unsigned W>
LanePack<W> select(const LaneMask<W>& m, const LanePack<W>& a,
                   const LanePack<W>& b) {
  LanePack<W> r;
  for (unsigned i = 0; i < W; ++i) r.v[i] = m.m[i] ? a.v[i] : b.v[i];
  return r;
}

namespace detail {

inline void check_equal_lengths(std::size_t n, std::size_t m) {
  if (n != m) throw LaneError("vmap inputs have mismatched lengths");
}

}  // namespace detail

/// Applies a lane-generic kernel over equal-length arrays: floor(N/W) full
/// packs, then a width-1 remainder loop of the same kernel text. The kernel
/// receives one pack per input and returns one pack.
template <unsigned W, class K, class... In>
std::vector<double> vmap(K kernel, std::span<const double> first, In... rest) {
  const std::size_t n = first.size();
  (detail::check_equal_lengths(n, rest.size()), ...);
  std::vector<double> out(n);
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    auto r = kernel(LanePack<W>::load(first.data() + i),
                    LanePack<W>::load(rest.data() + i)...);
    r.store(out.data() + i);
  }
  for (; i < n; ++i) {
    auto r = kernel(LanePack<1>::load(first.data() + i),
                    LanePack<1>::load(rest.data() + i)...);
    out[i] = r.v[0];
  }
  return out;
}

/// Strictly sequential left-to-right sum, independent of any lane width.
inline double vreduce_sum(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc;
}

/// Runtime-width dispatch: invokes f with a compile-time width tag.
template <unsigned W>
struct WidthTag {
  static constexpr unsigned value = W;
};

template <class F>
decltype(auto) with_width(unsigned w, F&& f) {
  switch (w) {
    case 1:
      return f(WidthTag<1>{});
    case 2:
      return f(WidthTag<2>{});
    case 4:
      return f(WidthTag<4>{});
    case 8:
      return f(WidthTag<8>{});
    case 16:
      return f(WidthTag<16>{});
    default:
      throw LaneError("unsupported lane width (must be 1,2,4,8,16)");
  }
}

}  // namespace taskmesh::lanes
