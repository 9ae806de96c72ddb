#include <doctest.h>

#include <cmath>
#include <vector>

#include "pflm/rng.hpp"

using pflm::mix_key;
using pflm::Rng;
using pflm::Role;

TEST_CASE("substreams are reproducible and keyed by all three words") {
  Rng a(42, 7, Role::noise);
  Rng b(42, 7, Role::noise);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  CHECK(mix_key(42, 7, 1) != mix_key(42, 7, 2));
  CHECK(mix_key(42, 7, 1) != mix_key(42, 8, 1));
  CHECK(mix_key(42, 7, 1) != mix_key(43, 7, 1));
  // stream/role must not be interchangeable
  CHECK(mix_key(42, 7, 3) != mix_key(42, 3, 7));
}

TEST_CASE("uniform01 stays in [0,1) with mean near 1/2") {
  Rng rng(1, 0, Role::monte_carlo);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // SE of the mean is 1/sqrt(12 n); allow 5 SE
  CHECK(std::abs(sum / n - 0.5) < 5.0 / std::sqrt(12.0 * n));
}

TEST_CASE("normal variates have mean 0 and variance 1") {
  Rng rng(2, 0, Role::noise);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
  // var of the sample variance is about 2/n for normals
  CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("laplace absolute moments match b^l l!") {
  const double b = 0.7;
  Rng rng(3, 0, Role::covariates);
  const int n = 400000;
  std::vector<double> abs_moment(5, 0.0);
  for (int i = 0; i < n; ++i) {
    const double x = rng.laplace(b);
    double pw = 1.0;
    for (int l = 1; l <= 4; ++l) {
      pw *= std::abs(x);
      abs_moment[l] += pw;
    }
  }
  double factorial = 1.0;
  for (int l = 1; l <= 4; ++l) {
    factorial *= l;
    const double exact = std::pow(b, l) * factorial;
    CHECK(abs_moment[l] / n == doctest::Approx(exact).epsilon(0.05));
  }
}
