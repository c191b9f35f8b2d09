#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dmfnet/random.hpp"

using dmfnet::RandomStream;

TEST_SUITE("random") {
  TEST_CASE("identical seeds give identical streams") {
    RandomStream a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  }

  TEST_CASE("different seeds diverge") {
    RandomStream a(1), b(2);
    int agree = 0;
    for (int i = 0; i < 64; ++i)
      if (a.uniform() == b.uniform()) ++agree;
    CHECK(agree == 0);
  }

  TEST_CASE("forked streams are independent of parent consumption") {
    RandomStream parent(7);
    RandomStream child_before = parent.fork(3);
    parent.uniform();
    parent.uniform();
    RandomStream child_after = parent.fork(3);
    for (int i = 0; i < 16; ++i) CHECK(child_before.uniform() == child_after.uniform());
  }

  TEST_CASE("uniform stays inside its bounds") {
    RandomStream rng(11);
    for (int i = 0; i < 1000; ++i) {
      const double v = rng.uniform(-2.0, 3.0);
      CHECK(v >= -2.0);
      CHECK(v < 3.0);
    }
  }

  TEST_CASE("uniform_int covers the full range and nothing else") {
    RandomStream rng(5);
    std::vector<int> seen(5, 0);
    for (int i = 0; i < 2000; ++i) {
      const int64_t v = rng.uniform_int(5);
      REQUIRE(v >= 0);
      REQUIRE(v < 5);
      ++seen[static_cast<size_t>(v)];
    }
    for (int count : seen) CHECK(count > 0);
  }

  TEST_CASE("normal draws have roughly standard moments") {
    RandomStream rng(9);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double v = rng.normal();
      sum += v;
      sq += v * v;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
  }

  TEST_CASE("permutation is a permutation") {
    RandomStream rng(13);
    const std::vector<size_t> p = rng.permutation(50);
    REQUIRE(p.size() == 50);
    std::vector<bool> seen(50, false);
    for (size_t v : p) {
      REQUIRE(v < 50);
      CHECK(!seen[v]);
      seen[v] = true;
    }
  }
}
