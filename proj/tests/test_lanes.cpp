#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>
#include <vector>

#include "taskmesh/lanes.hpp"

using namespace taskmesh::lanes;

namespace {

std::vector<double> random_array(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Lane-generic minmod, same text the hydro limiter uses.
auto minmod_kernel = [](auto a, auto b) {
  using P = decltype(a);
  auto zero = P(0.0);
  auto same_sign = (a * b) > zero;
  auto smaller = select(vabs(a) < vabs(b), a, b);
  return select(same_sign, smaller, zero);
};

}  // namespace

TEST_CASE("vmap applies the kernel with a scalar remainder") {
  std::vector<double> in{1, 2, 3, 4, 5};
  auto out = vmap<4>([](auto x) { return x + decltype(x)(1.0); },
                     std::span<const double>(in));
  CHECK(out == std::vector<double>{2, 3, 4, 5, 6});
}

TEST_CASE("mask semantics: clamp negatives to zero for every width") {
  std::vector<double> in{-1, 2, -3};
  auto kernel = [](auto x) {
    using P = decltype(x);
    return select(x < P(0.0), P(0.0), x);
  };
  std::vector<double> expect{0, 2, 0};
  CHECK(vmap<1>(kernel, std::span<const double>(in)) == expect);
  CHECK(vmap<2>(kernel, std::span<const double>(in)) == expect);
  CHECK(vmap<4>(kernel, std::span<const double>(in)) == expect);
  CHECK(vmap<8>(kernel, std::span<const double>(in)) == expect);
}

TEST_CASE("minmod kernel: W=8 output bitwise equals the scalar oracle") {
  auto a = random_array(1001, 42);
  auto b = random_array(1001, 43);
  // Independent scalar oracle, written directly from the definition.
  std::vector<double> oracle(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] * b[i] <= 0.0)
      oracle[i] = 0.0;
    else
      oracle[i] = std::fabs(a[i]) < std::fabs(b[i]) ? a[i] : b[i];
  }
  auto w8 = vmap<8>(minmod_kernel, std::span<const double>(a),
                    std::span<const double>(b));
  auto w1 = vmap<1>(minmod_kernel, std::span<const double>(a),
                    std::span<const double>(b));
  CHECK(bitwise_equal(w8, oracle));
  CHECK(bitwise_equal(w1, oracle));
}

TEST_CASE("vselect: all-true picks a, all-false picks b, mixed per lane") {
  LanePack<2> a;
  a.v = {1, 1};
  LanePack<2> b;
  b.v = {2, 2};
  LaneMask<2> all_true;
  all_true.m = {true, true};
  LaneMask<2> all_false;
  all_false.m = {false, false};
  LaneMask<2> mixed;
  mixed.m = {true, false};
  CHECK(select(all_true, a, b).v == a.v);
  CHECK(select(all_false, a, b).v == b.v);
  auto r = select(mixed, a, b);
  CHECK(r.v[0] == 1);
  CHECK(r.v[1] == 2);
}

TEST_CASE("vreduce_sum: empty is zero, small case, width-independent") {
  CHECK(vreduce_sum({}) == 0.0);
  std::vector<double> v{1, 2, 3};
  CHECK(vreduce_sum(v) == 6.0);
  auto big = random_array(512, 7);
  double r = vreduce_sum(big);
  // The sum is sequential by definition; re-evaluating after any pack-width
  // work can't change it.
  CHECK(vreduce_sum(big) == r);
}

TEST_CASE("width invariance on a compound kernel across 1,2,4,8") {
  auto a = random_array(1000, 11);
  auto b = random_array(1000, 12);
  auto kernel = [](auto x, auto y) {
    using P = decltype(x);
    auto d = vsqrt(vabs(x * y)) + vmax(x, y) / P(3.0);
    return select(d > P(1.0), d - P(1.0), d * y);
  };
  auto ref = vmap<1>(kernel, std::span<const double>(a), std::span<const double>(b));
  CHECK(bitwise_equal(vmap<2>(kernel, std::span<const double>(a),
                              std::span<const double>(b)), ref));
  CHECK(bitwise_equal(vmap<4>(kernel, std::span<const double>(a),
                              std::span<const double>(b)), ref));
  CHECK(bitwise_equal(vmap<8>(kernel, std::span<const double>(a),
                              std::span<const double>(b)), ref));
}

TEST_CASE("mismatched input lengths are a contract error") {
  std::vector<double> a(4), b(5);
  auto add = [](auto x, auto y) { return x + y; };
  CHECK_THROWS_AS(vmap<2>(add, std::span<const double>(a),
                          std::span<const double>(b)),
                  LaneError);
}

TEST_CASE("with_width dispatches to the matching compile-time width") {
  unsigned got = 0;
  with_width(8, [&](auto tag) { got = decltype(tag)::value; });
  CHECK(got == 8);
  CHECK_THROWS_AS(with_width(3, [](auto) {}), LaneError);
}

TEST_CASE("purity: output depends only on same-index inputs") {
  auto a = random_array(64, 5);
  auto kernel = [](auto x) { return x * x - x; };
  auto ref = vmap<4>(kernel, std::span<const double>(a));
  auto mutated = a;
  mutated[10] = 1e9;
  auto out = vmap<4>(kernel, std::span<const double>(mutated));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i != 10) CHECK(out[i] == ref[i]);
  }
}
