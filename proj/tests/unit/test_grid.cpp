#include <doctest.h>

#include <cmath>
#include <vector>

#include "pflm/errors.hpp"
#include "pflm/grid.hpp"

using namespace pflm;

TEST_CASE("uniform grid weights are composite trapezoid") {
  auto g2 = make_uniform_grid(0.0, 1.0, 2);
  CHECK(g2->points()[0] == 0.0);
  CHECK(g2->points()[1] == 1.0);
  CHECK(g2->weights()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g2->weights()[1] == doctest::Approx(0.5).epsilon(1e-15));

  auto g3 = make_uniform_grid(0.0, 1.0, 3);
  CHECK(g3->weights()[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(g3->weights()[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g3->weights()[2] == doctest::Approx(0.25).epsilon(1e-15));

  auto g101 = make_uniform_grid(0.0, 1.0, 101);
  CHECK(g101->weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (int j = 0; j < 101; ++j) CHECK(g101->weights()[j] > 0.0);
  for (int j = 1; j < 101; ++j) CHECK(g101->points()[j] > g101->points()[j - 1]);
}

TEST_CASE("grid construction rejects bad arguments") {
  CHECK_THROWS_AS(make_uniform_grid(0.0, 1.0, 1), InvalidArgument);
  CHECK_THROWS_AS(make_uniform_grid(1.0, 0.0, 10), InvalidArgument);
  CHECK_THROWS_AS(make_uniform_grid(1.0, 1.0, 10), InvalidArgument);
}

TEST_CASE("quad_inner matches analytic integrals") {
  auto grid = make_uniform_grid(0.0, 1.0, 101);
  GridFunction one(grid, Eigen::VectorXd::Ones(101));
  CHECK(quad_inner(one, one) == doctest::Approx(1.0).epsilon(1e-14));

  // degree <= 1 is integrated exactly
  GridFunction t(grid, grid->points());
  CHECK(grid->inner(t.values, Eigen::VectorXd::Ones(101)) ==
        doctest::Approx(0.5).epsilon(1e-14));

  // int t^2 dt = 1/3 with O(h^2) error
  CHECK(std::abs(quad_inner(t, t) - 1.0 / 3.0) < 1e-4);
}

TEST_CASE("quad_inner rejects mismatched grids") {
  auto ga = make_uniform_grid(0.0, 1.0, 11);
  auto gb = make_uniform_grid(0.0, 1.0, 12);
  GridFunction f(ga, Eigen::VectorXd::Zero(11));
  GridFunction g(gb, Eigen::VectorXd::Zero(12));
  CHECK_THROWS_AS(quad_inner(f, g), GridMismatch);
}

TEST_CASE("trapezoid error decays at second order") {
  // f = g = t against the analytic value 1/3
  std::vector<int> sizes = {51, 101, 201, 401};
  std::vector<double> log_h, log_err;
  for (int m : sizes) {
    auto grid = make_uniform_grid(0.0, 1.0, m);
    GridFunction t(grid, grid->points());
    log_h.push_back(std::log(1.0 / (m - 1)));
    log_err.push_back(std::log(std::abs(quad_inner(t, t) - 1.0 / 3.0)));
  }
  // least-squares slope of log err on log h
  double mx = 0, my = 0;
  for (size_t i = 0; i < log_h.size(); ++i) {
    mx += log_h[i];
    my += log_err[i];
  }
  mx /= log_h.size();
  my /= log_err.size();
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < log_h.size(); ++i) {
    sxy += (log_h[i] - mx) * (log_err[i] - my);
    sxx += (log_h[i] - mx) * (log_h[i] - mx);
  }
  CHECK(sxy / sxx == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("cosine basis values and orthonormality") {
  auto grid = make_uniform_grid(0.0, 1.0, 401);
  auto psi1 = cosine_basis(1, grid);
  for (int j = 0; j < 401; ++j) CHECK(psi1.values[j] == 1.0);

  auto psi2 = cosine_basis(2, grid);
  CHECK(psi2.values[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));

  for (int k = 1; k <= 10; ++k) {
    auto psi = cosine_basis(k, grid);
    CHECK(quad_inner(psi, psi) == doctest::Approx(1.0).epsilon(1e-6));
  }

  // Gram matrix of the first 20 elements is the identity
  const int K = 20;
  for (int j = 1; j <= K; ++j) {
    auto pj = cosine_basis(j, grid);
    for (int k = j; k <= K; ++k) {
      auto pk = cosine_basis(k, grid);
      const double expect = (j == k) ? 1.0 : 0.0;
      CHECK(std::abs(quad_inner(pj, pk) - expect) < 1e-6);
    }
  }
}

TEST_CASE("cosine basis orthogonality at m=201 is near exact") {
  auto grid = make_uniform_grid(0.0, 1.0, 201);
  auto psi2 = cosine_basis(2, grid);
  auto psi3 = cosine_basis(3, grid);
  CHECK(std::abs(quad_inner(psi2, psi3)) < 1e-8);
}

TEST_CASE("cosine basis rejects bad input") {
  auto grid = make_uniform_grid(0.0, 1.0, 11);
  CHECK_THROWS_AS(cosine_basis(0, grid), InvalidArgument);
  auto shifted = make_uniform_grid(0.0, 2.0, 11);
  CHECK_THROWS_AS(cosine_basis(1, shifted), InvalidArgument);
}
