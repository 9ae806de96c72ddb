#include <doctest.h>

#include <cmath>

#include "pflm/risk.hpp"
#include "pflm/rng.hpp"

using namespace pflm;

namespace {

ModelSpec make_model(int p, int m0, double sigma, double decay = 2.0) {
  ModelSpec spec;
  Eigen::VectorXd alpha(4);
  alpha << 1.0, -0.5, 0.25, 0.7;
  spec.alpha0 = alpha.head(p);
  Eigen::VectorXd c(3);
  c << 0.8, -0.4, 0.2;
  spec.f0_coeffs = c;
  spec.kernel = SyntheticSpectrum{1.0, decay, m0};
  spec.mu = Eigen::VectorXd(m0);
  for (int k = 1; k <= m0; ++k) spec.mu[k - 1] = std::pow(double(k), -decay);
  spec.laplace_scale = 1.0;
  spec.sigma = sigma;
  return spec;
}

PflmFit truth_fit(const ModelSpec& spec, const PopulationOps& pop) {
  PflmFit fit;
  fit.alpha_hat = spec.alpha0;
  fit.f_hat = pop.f0;
  fit.beta_hat = pop.beta0;
  return fit;
}

const SuiteRow& find_row(const ConcentrationReport& report,
                         const std::string& lemma) {
  for (const auto& row : report.rows) {
    if (row.lemma == lemma) return row;
  }
  REQUIRE_MESSAGE(false, "missing suite row ", lemma);
  static SuiteRow dummy;
  return dummy;
}

}  // namespace

TEST_CASE("excess risk is zero at the truth and exact on an alpha shift") {
  const auto grid = make_uniform_grid(0.0, 1.0, 41);
  const auto spec = make_model(2, 8, 0.3);
  const auto pop = population_operators(spec, grid);

  const auto at_truth = excess_risk(truth_fit(spec, pop), spec, pop);
  CHECK(at_truth.total <= 1e-14);
  CHECK(at_truth.upper_bound <= 1e-14);

  // alpha off by e1 with D = 2I contributes exactly 2
  auto fit = truth_fit(spec, pop);
  fit.alpha_hat[0] += 1.0;
  const auto shifted = excess_risk(fit, spec, pop);
  CHECK(shifted.alpha_part == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(shifted.functional_part <= 1e-14);
  CHECK(shifted.total == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(shifted.alpha_err == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(shifted.upper_bound ==
        doctest::Approx(2.0 * pop.lambda_max).epsilon(1e-12));
}

TEST_CASE("excess risk matches a Monte Carlo estimate over fresh draws") {
  const auto grid = make_uniform_grid(0.0, 1.0, 41);
  const auto spec = make_model(2, 8, 0.3);
  const auto pop = population_operators(spec, grid);
  const int m = grid->size();
  const int m0 = static_cast<int>(spec.mu.size());

  auto fit = truth_fit(spec, pop);
  fit.alpha_hat += (Eigen::VectorXd(2) << 0.1, -0.2).finished();
  fit.f_hat.values += 0.3 * cosine_basis(2, grid).values -
                      0.15 * cosine_basis(5, grid).values;
  fit.beta_hat = pop.Khalf.apply(fit.f_hat);
  const double exact = excess_risk(fit, spec, pop).total;
  REQUIRE(exact > 1e-4);

  const Eigen::VectorXd dalpha = fit.alpha_hat - spec.alpha0;
  const Eigen::VectorXd dbeta = fit.beta_hat.values - pop.beta0.values;
  Eigen::MatrixXd basis(m, m0);
  for (int k = 1; k <= m0; ++k) basis.col(k - 1) = cosine_basis(k, grid).values;
  const Eigen::VectorXd sqrt_mu = spec.mu.array().sqrt();
  const Eigen::VectorXd weighted_dbeta =
      grid->weights().asDiagonal() * dbeta;
  const Eigen::VectorXd projected = basis.transpose() * weighted_dbeta;

  Rng rng(505, 0, Role::monte_carlo);
  const int draws = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  const double sqrt3 = std::sqrt(3.0);
  for (int i = 0; i < draws; ++i) {
    double eta = 0.0;
    for (int j = 0; j < dalpha.size(); ++j) {
      eta += dalpha[j] * rng.laplace(spec.laplace_scale);
    }
    // <Y, dbeta> accumulated in coefficient space
    for (int k = 0; k < m0; ++k) {
      eta += sqrt_mu[k] * rng.uniform(-sqrt3, sqrt3) * projected[k];
    }
    sum += eta * eta;
    sum_sq += eta * eta * eta * eta;
  }
  const double mc = sum / draws;
  const double var = std::max(0.0, sum_sq / draws - mc * mc);
  const double se = std::sqrt(var / draws);
  REQUIRE(se > 0.0);
  CHECK(std::abs(exact - mc) <= 3.0 * se);
}

TEST_CASE("risk decomposition identities on a solver fit") {
  const auto grid = make_uniform_grid(0.0, 1.0, 41);
  const auto spec = make_model(2, 8, 0.3);
  const auto pop = population_operators(spec, grid);
  const auto data = gen_dataset(spec, pop, 80, 61);
  const auto fit = fit_joint(data, pop.Khalf, 0.1);
  const auto risk = excess_risk(fit, spec, pop);

  CHECK(risk.total ==
        doctest::Approx(risk.alpha_part + risk.functional_part)
            .epsilon(1e-14));
  // <dbeta, L_C dbeta> = <df, T df> because beta = Khalf f throughout
  CHECK(risk.functional_part ==
        doctest::Approx(risk.tfhalf_err * risk.tfhalf_err).epsilon(1e-9));
  CHECK(risk.total <= risk.upper_bound * (1.0 + 1e-12));
  CHECK(risk.alpha_err ==
        doctest::Approx((fit.alpha_hat - spec.alpha0).norm()).epsilon(1e-14));
}

TEST_CASE("bound constants match hand evaluation") {
  const auto grid = make_uniform_grid(0.0, 1.0, 21);
  PopulationOps pop;
  pop.T = spectral_decompose(
      kernel_matrix(SyntheticSpectrum{1.0, 2.0, 5}, grid));
  pop.kappa = 1.0;
  pop.M2 = 2.0;
  pop.M1 = 1.0;
  pop.upsilon = 1.0;
  pop.d_inv_norm = 1.0;
  pop.lambda_max = 2.0;

  ModelSpec one;
  one.alpha0 = Eigen::VectorXd::Ones(1);
  one.sigma = 1.0;
  BoundConfig cfg;
  cfg.delta5 = 0.05;
  cfg.theta = 0.5;

  const auto report = bound_constants(cfg, one, pop, 1.0, 1000);
  CHECK(report.N1 ==
        doctest::Approx(48.0 * 49.0 * std::log(40.0)).epsilon(1e-12));
  CHECK(report.c1 == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(report.N2_printed > report.N2_proof);
  CHECK(report.n0 == std::ceil(std::max(report.N1, report.N2_printed)));
  for (const double value :
       {report.c2, report.c3, report.c4, report.c5, report.c6, report.c7,
        report.c8, report.c9, report.C1, report.C2, report.C3, report.N1,
        report.N2_printed, report.N2_proof, report.B_n, report.bound}) {
    CHECK(std::isfinite(value));
    CHECK(value > 0.0);
  }

  ModelSpec four;
  four.alpha0 = Eigen::VectorXd::Ones(4);
  four.sigma = 1.0;
  const auto report4 = bound_constants(cfg, four, pop, 1.0, 1000);
  CHECK(report4.c3 == doctest::Approx(2.0).epsilon(1e-14));

  ModelSpec none;
  CHECK_THROWS_AS(bound_constants(cfg, none, pop, 1.0, 1000),
                  InvalidArgument);
  BoundConfig bad = cfg;
  bad.delta2 = 0.9;  // above 2/e
  CHECK_THROWS_AS(bound_constants(bad, one, pop, 1.0, 1000), InvalidArgument);
  bad = cfg;
  bad.delta1 = 0.74;
  CHECK_THROWS_AS(validate_bound_config(bad), InvalidArgument);
  bad = cfg;
  bad.delta3 = 0.0;
  CHECK_THROWS_AS(validate_bound_config(bad), InvalidArgument);
}

TEST_CASE("bound value evaluates the printed rates") {
  BoundReport rep;
  rep.C1 = rep.C2 = rep.C3 = 1.0;
  rep.theta = 1.0;
  rep.omega = 1.0;
  rep.n0 = 1.0;
  const auto v = bound_value(rep, 100);
  CHECK(v.bound ==
        doctest::Approx(0.01 + std::pow(100.0, -0.75) + 0.1).epsilon(1e-14));
  CHECK_FALSE(v.below_n0);

  BoundReport zeros;
  zeros.theta = 1.0;
  zeros.omega = 1.0;
  const auto vz = bound_value(zeros, 50);
  CHECK(vz.bound == 0.0);
  CHECK(vz.alpha_radius == 0.0);
  CHECK(vz.f_radius == 0.0);

  BoundReport tail;
  tail.C3 = 1.0;
  tail.theta = 1.0;
  tail.omega = 1.0;
  const double ratio = bound_value(tail, 800).bound /
                       bound_value(tail, 400).bound;
  CHECK(ratio == doctest::Approx(std::pow(2.0, -0.5)).epsilon(1e-12));

  rep.n0 = 1e9;
  CHECK(bound_value(rep, 100).below_n0);
}

TEST_CASE("decay exponent mapping") {
  CHECK(theta_from_decay(1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(theta_from_decay(2.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(theta_from_decay(0.5), InvalidArgument);
  CHECK_THROWS_AS(theta_from_decay(0.3), InvalidArgument);
  // optimal-rate exponent 2r/(1+2r) equals 1/(1+theta)
  const double r = 1.0;
  CHECK(2.0 * r / (1.0 + 2.0 * r) ==
        doctest::Approx(1.0 / (1.0 + theta_from_decay(r))).epsilon(1e-15));
}

TEST_CASE("gram deviation radius solves the tail equation") {
  const int p = 2, n = 500;
  const double ups = 0.8, M1 = 1.1, delta = 0.05;
  const double t = dn_deviation_radius(p, ups, M1, n, delta);
  CHECK(t > 0.0);
  const double tail =
      2.0 * p * p *
      std::exp(-n * t * t / (16.0 * ups * ups * (16.0 * M1 * M1 + t)));
  CHECK(tail == doctest::Approx(delta).epsilon(1e-10));
  CHECK(dn_deviation_radius(p, ups, M1, 5000, delta) < t);
  CHECK_THROWS_AS(dn_deviation_radius(0, ups, M1, n, delta),
                  InvalidArgument);
  CHECK_THROWS_AS(dn_deviation_radius(p, ups, M1, n, 1.5), InvalidArgument);
}

TEST_CASE("effective dimension envelope constant") {
  const auto grid = make_uniform_grid(0.0, 1.0, 101);
  // tau_k = k^{-4}, so theta = 1/4
  const auto T = spectral_decompose(
      kernel_matrix(SyntheticSpectrum{1.0, 4.0, 40}, grid));
  const double theta = 0.25;
  const double c = fit_c_eff(T, theta);
  CHECK(c > 0.0);
  for (int i = 0; i <= 300; ++i) {
    const double lam = std::pow(10.0, -4.0 + 4.0 * i / 300.0);
    CHECK(effective_dimension(T, lam) * std::pow(lam, theta) <= c * 1.02);
  }
  Eigen::VectorXd fine(201);
  for (int i = 0; i < 201; ++i) {
    fine[i] = std::pow(10.0, -4.0 + 4.0 * i / 200.0);
  }
  CHECK(fit_c_eff(T, theta, fine) == doctest::Approx(c).epsilon(0.02));
  CHECK_THROWS_AS(fit_c_eff(T, 0.0), InvalidArgument);
}

TEST_CASE("operator inequality check") {
  const auto grid = make_uniform_grid(0.0, 1.0, 31);
  const auto kern = kernel_matrix(SyntheticSpectrum{1.0, 2.0, 6}, grid);
  const auto T = spectral_decompose(kern);
  const double lambda = 0.05;

  SUBCASE("identical operators") {
    const auto rep = inequality_check(T, T, lambda);
    CHECK(rep.whitened_diff_norm <= 1e-12);
    CHECK(rep.resolvent_product_norm == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.half_product_norm == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.ineq1_ok);
    CHECK(rep.ineq2_ok);
    CHECK_FALSE(rep.whitened_checked);
    CHECK(inequality_check(T, T, lambda, 1e-6).whitened_ok);
  }
  SUBCASE("rank-one perturbation against a dense oracle") {
    const Eigen::VectorXd psi1 = cosine_basis(1, grid).values;
    Eigen::MatrixXd pert = kern.values + 0.1 * psi1 * psi1.transpose();
    const auto Tn = spectral_decompose(CovarianceMatrix{grid, pert});
    const auto rep = inequality_check(T, Tn, lambda);

    // oracle: everything in symmetrized coordinates W^{1/2} R W^{1/2}
    const Eigen::VectorXd sw = grid->weights().array().sqrt();
    const Eigen::MatrixXd st =
        sw.asDiagonal() * kern.values * sw.asDiagonal();
    const Eigen::MatrixXd stn = sw.asDiagonal() * pert * sw.asDiagonal();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(st);
    const auto power = [&](double expnt) {
      Eigen::VectorXd d = eig.eigenvalues();
      for (int i = 0; i < d.size(); ++i) {
        d[i] = std::pow(std::max(0.0, d[i]) + lambda, expnt);
      }
      return Eigen::MatrixXd(eig.eigenvectors() * d.asDiagonal() *
                             eig.eigenvectors().transpose());
    };
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_n(stn);
    const auto power_n = [&](double expnt) {
      Eigen::VectorXd d = eig_n.eigenvalues();
      for (int i = 0; i < d.size(); ++i) {
        d[i] = std::pow(std::max(0.0, d[i]) + lambda, expnt);
      }
      return Eigen::MatrixXd(eig_n.eigenvectors() * d.asDiagonal() *
                             eig_n.eigenvectors().transpose());
    };
    const auto spec_norm = [](const Eigen::MatrixXd& M) {
      return Eigen::BDCSVD<Eigen::MatrixXd>(M).singularValues()[0];
    };
    const double s1 = spec_norm(power(-0.5) * (stn - st));
    const double s2 = spec_norm(power(1.0) * power_n(-1.0));
    const double s3 = spec_norm(power(0.5) * power_n(-0.5));
    CHECK(rep.whitened_diff_norm == doctest::Approx(s1).epsilon(1e-8));
    CHECK(rep.resolvent_product_norm == doctest::Approx(s2).epsilon(1e-8));
    CHECK(rep.half_product_norm == doctest::Approx(s3).epsilon(1e-8));
    const double ratio = s1 / std::sqrt(lambda);
    CHECK(s2 <= (1.0 + ratio) * (1.0 + ratio) * (1.0 + 1e-9));
    CHECK(s3 <= (1.0 + ratio) * (1.0 + 1e-9));
    CHECK(rep.ineq1_ok);
    CHECK(rep.ineq2_ok);
  }
  SUBCASE("guards") {
    CHECK_THROWS_AS(inequality_check(T, T, 0.0), InvalidArgument);
    const auto other = make_uniform_grid(0.0, 1.0, 21);
    const auto T2 = spectral_decompose(
        kernel_matrix(SyntheticSpectrum{1.0, 2.0, 6}, other));
    CHECK_THROWS_AS(inequality_check(T, T2, lambda), GridMismatch);
  }
}

TEST_CASE("concentration suite meets its stated floors") {
  const auto grid = make_uniform_grid(0.0, 1.0, 41);
  auto spec = make_model(1, 10, 0.5);
  const auto pop = population_operators(spec, grid);
  BoundConfig cfg;
  cfg.delta1 = 0.1;
  cfg.delta2 = 0.1;
  cfg.delta3 = 0.1;
  cfg.delta4 = 0.2;
  cfg.delta5 = 0.1;
  cfg.theta = 0.25;  // tau_k = k^{-4} here
  cfg.c_eff = fit_c_eff(pop.T, cfg.theta);

  const auto report = concentration_suite(spec, grid, 200, 1000, cfg, 909);
  CHECK(find_row(report, "whitened-deviation").frequency >= 0.9);
  CHECK(find_row(report, "cross-operator").frequency >= 0.9);
  CHECK(find_row(report, "cross-operator-adjoint").frequency == 1.0);
  CHECK(find_row(report, "noise-term").frequency >= 0.8);
  CHECK(find_row(report, "gram-deviation").frequency >= 0.9);
  CHECK(find_row(report, "operator-inequality-1").frequency == 1.0);
  CHECK(find_row(report, "operator-inequality-2").frequency == 1.0);
  CHECK(report.inequalities_all_held);

  // at p = 1 the inversion threshold collapses to 1176 log(2/delta5)
  CHECK(report.n1 ==
        doctest::Approx(1176.0 * std::log(20.0)).epsilon(1e-12));
  CHECK_FALSE(report.n_exceeds_n1);
  const auto& inversion = find_row(report, "gram-inversion");
  CHECK_FALSE(inversion.applicable);
  CHECK(std::isnan(inversion.frequency));

}

TEST_CASE("concentration suite is deterministic across worker counts") {
  const auto grid = make_uniform_grid(0.0, 1.0, 31);
  const auto spec = make_model(1, 6, 0.5);
  BoundConfig cfg;
  cfg.theta = 0.25;
  const auto narrow = concentration_suite(spec, grid, 150, 150, cfg, 909);
  const auto again = concentration_suite(spec, grid, 150, 150, cfg, 909);
  const auto wide = concentration_suite(spec, grid, 150, 150, cfg, 909, 4);
  REQUIRE(narrow.rows.size() == wide.rows.size());
  for (size_t i = 0; i < narrow.rows.size(); ++i) {
    if (!narrow.rows[i].applicable) continue;
    CHECK(narrow.rows[i].frequency == again.rows[i].frequency);
    CHECK(narrow.rows[i].frequency == wide.rows[i].frequency);
  }
  CHECK_THROWS_AS(concentration_suite(spec, grid, 150, 50, cfg, 1),
                  InvalidArgument);
}

TEST_CASE("gram inversion event activates past its sample threshold") {
  const auto grid = make_uniform_grid(0.0, 1.0, 31);
  auto spec = make_model(1, 6, 0.4);
  BoundConfig cfg;
  cfg.delta5 = 0.5;
  cfg.theta = 0.25;
  // threshold is 1176 log(4) ~ 1630 at p = 1
  const auto report = concentration_suite(spec, grid, 1700, 150, cfg, 77);
  CHECK(report.n_exceeds_n1);
  const auto& inversion = find_row(report, "gram-inversion");
  CHECK(inversion.applicable);
  CHECK(inversion.frequency >= 0.5);
  CHECK(inversion.threshold == doctest::Approx(1.5 * 0.5).epsilon(1e-12));
}

TEST_CASE("concentration suite without a multivariate part") {
  const auto grid = make_uniform_grid(0.0, 1.0, 31);
  const auto spec = make_model(0, 6, 0.4);
  BoundConfig cfg;
  cfg.theta = 0.25;
  const auto report = concentration_suite(spec, grid, 100, 120, cfg, 5);
  CHECK(find_row(report, "whitened-deviation").frequency >= 0.9);
  CHECK(report.inequalities_all_held);
  for (const char* name :
       {"cross-operator", "noise-term", "gram-deviation", "gram-inversion"}) {
    const auto& row = find_row(report, name);
    CHECK_FALSE(row.applicable);
    CHECK(std::isnan(row.frequency));
  }
  CHECK(std::isnan(report.n1));
}
