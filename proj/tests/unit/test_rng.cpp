#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "scalebench/rng.hpp"

using namespace scalebench;

TEST_CASE("splitmix64 reference outputs") {
  // First outputs for state 0, as published with the algorithm.
  std::uint64_t state = 0;
  CHECK(splitmix64(state) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(state) == 0x6e789e6aa1b965f4ULL);
  CHECK(splitmix64(state) == 0x06c45d188009454fULL);
}

TEST_CASE("same seed and stream give the same sequence") {
  Rng a(42, 7);
  Rng b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("streams and seeds are independent") {
  Rng a(42, 0);
  Rng b(42, 1);
  Rng c(43, 0);
  int same_ab = 0;
  int same_ac = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    same_ab += x == b.next();
    same_ac += x == c.next();
  }
  CHECK(same_ab == 0);
  CHECK(same_ac == 0);
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}

TEST_CASE("uniform stays in [0, 1) and averages one half") {
  Rng rng(1);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("uniform_int covers the closed range") {
  Rng rng(9);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const auto v = rng.uniform_int(-15, 15);
    REQUIRE(v >= -15);
    REQUIRE(v <= 15);
    seen.insert(v);
  }
  CHECK(seen.size() == 31);
  CHECK(rng.uniform_int(3, 3) == 3);
}

TEST_CASE("normal moments") {
  Rng rng(5);
  const int n = 200000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(10.0, 2.0);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(mean == doctest::Approx(10.0).epsilon(0.005));
  CHECK(std::sqrt(var) == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("poisson mean") {
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.poisson(0.05);
  CHECK(sum / n == doctest::Approx(0.05).epsilon(0.05));
  CHECK(rng.poisson(0.0) == 0u);
}
