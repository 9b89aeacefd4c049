#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "enkf/rng.hpp"

using namespace enkf;

TEST_CASE("identical keys give identical streams") {
  RngStream a(derive_key(7, {stream::kTrajectory, 3}));
  RngStream b(derive_key(7, {stream::kTrajectory, 3}));
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("derive_key separates purposes, labels and label order") {
  const std::uint64_t base = derive_key(1, {stream::kTrajectory});
  CHECK(base != derive_key(1, {stream::kEnsembleInit}));
  CHECK(derive_key(1, {2, 3}) != derive_key(1, {3, 2}));
  CHECK(derive_key(1, {2, 3}) != derive_key(2, {2, 3}));
  CHECK(derive_key(1, {2, 3}) == derive_key(1, {2, 3}));

  std::set<std::uint64_t> keys;
  for (std::uint64_t j = 0; j < 1000; ++j) {
    keys.insert(derive_key(42, {stream::kEnkfStep, 5, j}));
  }
  CHECK(keys.size() == 1000);
}

TEST_CASE("split children differ from the parent and each other") {
  RngStream parent(derive_key(9, {stream::kVerify}));
  RngStream c0 = parent.split(0);
  RngStream c1 = parent.split(1);
  CHECK(c0.key64() != c1.key64());
  CHECK(c0.key64() != parent.key64());
  CHECK(c0.next_u64() != c1.next_u64());
}

TEST_CASE("uniform stays in [0,1) with the right mean") {
  RngStream g(derive_key(11, {stream::kVerify, 1}));
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("normal moments match the standard Gaussian") {
  RngStream g(derive_key(12, {stream::kVerify, 2}));
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}
