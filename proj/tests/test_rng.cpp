#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <vector>

#include "lsbd/rng.hpp"

using lsbd::Rng;

TEST_CASE("engine matches the standard-pinned mt19937_64 stream") {
  // The 10000th output of a default-seeded (5489) engine is fixed by the
  // C++ standard; our draws stay portable only if this holds.
  Rng rng(5489);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = rng.next_u64();
  CHECK(x == 9981545732273789042ULL);
}

TEST_CASE("derived draws match an independent reimplementation") {
  // Frozen from a from-scratch Mersenne Twister + the same documented
  // uniform / Box-Muller / rejection / Fisher-Yates constructions.
  CHECK(Rng(123).next_u64() == 5777523539921853504ULL);

  Rng u(123);
  CHECK(u.uniform01() == doctest::Approx(0.31320017867847072).epsilon(1e-15));
  CHECK(u.uniform01() == doctest::Approx(0.55597911939485845).epsilon(1e-15));
  CHECK(u.uniform01() == doctest::Approx(0.93828510817776878).epsilon(1e-15));

  Rng g(123);
  CHECK(g.gaussian() == doctest::Approx(-0.81377841167813381).epsilon(1e-13));
  CHECK(g.gaussian() == doctest::Approx(-0.29864613998177097).epsilon(1e-13));
  CHECK(g.gaussian() == doctest::Approx(-0.20258611675033977).epsilon(1e-13));
  CHECK(g.gaussian() == doctest::Approx(-2.3514716461390792).epsilon(1e-13));

  Rng b(123);
  const std::vector<std::uint64_t> expected_below{4, 1, 1, 0, 0};
  for (std::uint64_t e : expected_below) CHECK(b.below(10) == e);

  Rng s(123);
  std::vector<int> v(8);
  std::iota(v.begin(), v.end(), 0);
  s.shuffle(v);
  CHECK(v == std::vector<int>{6, 3, 2, 4, 7, 1, 5, 0});
}

TEST_CASE("gaussian pair consumes two words and caches the spare") {
  Rng a(7), b(7);
  a.gaussian();
  a.gaussian();  // spare: no extra word
  b.next_u64();
  b.next_u64();
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform01 stays in [0, 1)") {
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const double x = rng.uniform01();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("gaussian moments") {
  Rng rng(2024);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.gaussian();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sum2 / n - mean * mean - 1.0) < 0.05);
}

TEST_CASE("below is in range and roughly uniform") {
  Rng rng(5);
  std::vector<int> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    const auto x = rng.below(6);
    REQUIRE(x < 6);
    ++counts[static_cast<std::size_t>(x)];
  }
  for (int c : counts) CHECK(std::abs(c - n / 6) < 500);  // ~5.5 sigma
  CHECK_THROWS_AS(rng.below(0), lsbd::InvalidInput);
}

TEST_CASE("shuffle permutes and is seed-deterministic") {
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  Rng a(11);
  a.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);

  std::vector<int> w(100);
  std::iota(w.begin(), w.end(), 0);
  Rng b(11);
  b.shuffle(w);
  CHECK(v == w);
}
