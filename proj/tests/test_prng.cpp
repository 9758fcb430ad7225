#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "strokeppg/prng.hpp"

using strokeppg::Prng;

TEST_CASE("same seed reproduces the same stream") {
  Prng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("counter-based: output i depends only on (seed, i)") {
  Prng a(7);
  a.next_u64();
  a.next_u64();
  uint64_t third = a.next_u64();
  Prng b(7);
  b.next_u64();
  b.next_u64();
  CHECK(b.next_u64() == third);
}

TEST_CASE("derived streams differ from each other and the base") {
  Prng base(123);
  Prng s1 = Prng::derive(123, 1);
  Prng s2 = Prng::derive(123, 2);
  std::set<uint64_t> firsts{base.next_u64(), s1.next_u64(), s2.next_u64()};
  CHECK(firsts.size() == 3);
}

TEST_CASE("uniform doubles stay in [0,1) with sane mean") {
  Prng g(5);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = g.next_double();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("normal draws have ~N(0,1) moments") {
  Prng g(17);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = g.next_normal();
    s += x;
    s2 += x * x;
  }
  double mean = s / n;
  double var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("next_below respects the bound") {
  Prng g(9);
  for (int i = 0; i < 10000; ++i) CHECK(g.next_below(13) < 13);
}

TEST_CASE("uniform(lo,hi) covers the interval") {
  Prng g(11);
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < 10000; ++i) {
    double u = g.uniform(2.0, 3.0);
    REQUIRE(u >= 2.0);
    REQUIRE(u < 3.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 2.01);
  CHECK(hi > 2.99);
}
