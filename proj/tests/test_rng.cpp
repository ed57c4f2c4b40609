#include <doctest.h>

#include <cmath>
#include <set>

#include "banet/nn/rng.hpp"

using banet::nn::Rng;

TEST_SUITE_BEGIN("rng");

TEST_CASE("deterministic and stateless") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.bits(i) == b.bits(i));
  CHECK(a.bits(3) == a.bits(3)); // draws do not consume state
  Rng c(8);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.bits(i) == c.bits(i);
  CHECK(same == 0);
}

TEST_CASE("derive forks independent streams") {
  Rng root(42);
  Rng d1 = root.derive(1), d2 = root.derive(2), d1b = root.derive(1);
  CHECK(d1.key() == d1b.key());
  CHECK(d1.key() != d2.key());
  CHECK(root.derive("alpha").key() == root.derive("alpha").key());
  CHECK(root.derive("alpha").key() != root.derive("beta").key());
  // nested derivations stay distinct
  std::set<std::uint64_t> keys;
  for (int i = 0; i < 200; ++i) keys.insert(root.derive(i).derive(7).key());
  CHECK(keys.size() == 200);
}

TEST_CASE("unit draws are uniform-ish") {
  Rng r(123);
  const int n = 20000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.unit(i);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sumsq += u * u;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
  CHECK(var == doctest::Approx(1.0 / 12).epsilon(0.05));
}

TEST_CASE("gaussian stream sanity") {
  auto s = Rng(99).stream();
  const int n = 20000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < n; ++i) {
    const double g = s.next_gauss();
    sum += g;
    sumsq += g * g;
  }
  const double mean = sum / n;
  CHECK(std::fabs(mean) < 0.03);
  CHECK(sumsq / n - mean * mean == doctest::Approx(1.0).epsilon(0.05));
}

TEST_SUITE_END();
