#include "pflm/risk.hpp"

#include <cmath>

#include "pflm/parallel.hpp"
#include "pflm/rng.hpp"

namespace pflm {

namespace {
const double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void validate_bound_config(const BoundConfig& cfg) {
  const auto in01 = [](double d) { return d > 0.0 && d < 1.0; };
  if (!in01(cfg.delta1) || !in01(cfg.delta2) || !in01(cfg.delta3) ||
      !in01(cfg.delta4) || !in01(cfg.delta5)) {
    throw InvalidArgument("bound config: every delta must lie in (0, 1)");
  }
  const double two_over_e = 2.0 / std::exp(1.0);
  if (!(cfg.delta1 < two_over_e)) {
    throw InvalidArgument("bound config: delta1 must be below 2/e");
  }
  if (!(cfg.delta2 < two_over_e)) {
    throw InvalidArgument("bound config: delta2 must be below 2/e");
  }
  if (!(cfg.omega > 0.0)) {
    throw InvalidArgument("bound config: omega must be > 0");
  }
  if (!(cfg.theta > 0.0)) {
    throw InvalidArgument("bound config: theta must be > 0");
  }
  if (!(cfg.c_eff > 0.0)) {
    throw InvalidArgument("bound config: c_eff must be > 0");
  }
}

RiskBreakdown excess_risk(const PflmFit& fit, const ModelSpec& spec,
                          const PopulationOps& pop) {
  const auto& grid = pop.C.grid;
  if (!fit.f_hat.grid || !fit.f_hat.grid->same_as(*grid)) {
    throw GridMismatch("excess_risk: fit and population on different grids");
  }
  if (fit.alpha_hat.size() != spec.p()) {
    throw InvalidArgument("excess_risk: alpha length does not match p");
  }

  RiskBreakdown out;
  const Eigen::VectorXd da = fit.alpha_hat - spec.alpha0;
  if (spec.p() > 0) {
    out.alpha_part = da.dot(pop.D * da);
    out.alpha_err = da.norm();
  }
  const Eigen::VectorXd dbeta = fit.beta_hat.values - pop.beta0.values;
  const Eigen::VectorXd lc_dbeta =
      pop.C.values * (grid->weights().asDiagonal() * dbeta);
  out.functional_part = grid->inner(dbeta, lc_dbeta);
  out.total = out.alpha_part + out.functional_part;

  const Eigen::VectorXd df = fit.f_hat.values - pop.f0.values;
  const double tf2 = std::max(0.0, grid->inner(df, pop.T.apply(df)));
  out.tfhalf_err = std::sqrt(tf2);
  out.upper_bound = 2.0 * pop.lambda_max * da.squaredNorm() + 2.0 * tf2;
  return out;
}

BoundReport bound_constants(const BoundConfig& cfg, const ModelSpec& spec,
                            const PopulationOps& pop, double f0_norm, int n) {
  validate_bound_config(cfg);
  const int p = spec.p();
  if (p < 1) {
    throw InvalidArgument(
        "bound_constants: needs p >= 1; without a multivariate part the "
        "Gram thresholds are undefined");
  }
  if (n < 1) throw InvalidArgument("bound_constants: n must be >= 1");
  if (!(f0_norm >= 0.0)) {
    throw InvalidArgument("bound_constants: f0_norm must be >= 0");
  }

  BoundReport r;
  r.p = p;
  r.n = n;
  r.theta = cfg.theta;
  r.omega = cfg.omega;
  r.c_eff = cfg.c_eff;
  r.kappa = pop.kappa;
  r.lambda_max = pop.lambda_max;
  r.f0_norm = f0_norm;
  r.sigma = spec.sigma;
  r.delta_sum = cfg.delta_sum();

  const double dinv = pop.d_inv_norm;
  const double M1 = pop.M1;
  const double M2 = pop.M2;
  const double ups = pop.upsilon;
  const double kap = pop.kappa;
  const double sig = spec.sigma;
  const double log_2p_d2 = std::log(2.0 * p / cfg.delta2);
  const double log_2p_d5 = std::log(2.0 * p / cfg.delta5);
  const double log_2_d1 = std::log(2.0 / cfg.delta1);
  const double log_2p2_d5 = std::log(2.0 * p * p / cfg.delta5);

  r.c1 = 2.0 * kap * kap * M2 * M2;
  r.c2 = 2.0 * p * kap * (ups + M1) * M2;
  r.c3 = std::sqrt(static_cast<double>(p)) * sig * M1;
  r.c4 = 1.5 * r.c2 * dinv * log_2p_d2;
  r.c5 = 1.5 * r.c3 * dinv / std::sqrt(cfg.delta4);

  // every sqrt(lambda_n)-normalized B_n is bounded by this constant
  const double ga = 1.0 / cfg.omega +
                    std::pow(cfg.omega, -(1.0 + cfg.theta) / 2.0) *
                        std::sqrt(cfg.c_eff);
  r.c6 = f0_norm + r.c2 * r.c5 / cfg.omega * log_2p_d2 +
         sig * ga / std::sqrt(cfg.delta3);
  const double amp = r.c1 * ga * log_2_d1 + 1.0;
  r.c7 = f0_norm * amp;
  r.c8 = amp * amp * sig * ga / std::sqrt(cfg.delta3);
  r.c9 = r.c2 * (2.0 * r.c4 * r.c6 + r.c5) / std::sqrt(cfg.omega) * amp *
         log_2p_d2;

  const double radius_scale = 2.0 * r.c4 * r.c6 + r.c5;
  r.C1 = 2.0 * pop.lambda_max * radius_scale * radius_scale + 2.0 * r.c9 * r.c9;
  r.C2 = 4.0 * (r.c7 + r.c8) * r.c9;
  r.C3 = 2.0 * (r.c7 + r.c8) * (r.c7 + r.c8);

  r.N1 = 48.0 * ups * ups * p * dinv * (48.0 * p * dinv * M1 * M1 + 1.0) *
         log_2p2_d5;
  const double expo = (1.0 + cfg.theta) / cfg.theta;
  r.N2_printed = std::pow(12.0 * p * p * kap * kap * (ups + M1) * (ups + M1) *
                              M2 * M2 * dinv / cfg.omega *
                              std::pow(log_2p_d2, 3) * log_2p_d5,
                          expo);
  r.N2_proof = std::pow(2.0 * r.c2 * r.c4 / cfg.omega * log_2p_d5, expo);
  r.n0 = std::ceil(std::max(r.N1, r.N2_printed));

  r.lambda_n = lambda_schedule(cfg.omega, cfg.theta, n);
  r.eff_dim = effective_dimension(pop.T, r.lambda_n);
  r.B_n = 1.0 / (n * std::sqrt(r.lambda_n)) + std::sqrt(r.eff_dim / n);
  r.bound = r.C1 / n + r.C2 * std::sqrt(r.lambda_n / n) + r.C3 * r.lambda_n;
  return r;
}

BoundValue bound_value(const BoundReport& report, int n) {
  if (n < 1) throw InvalidArgument("bound_value: n must be >= 1");
  const double lam =
      report.omega * std::pow(static_cast<double>(n),
                              -1.0 / (1.0 + report.theta));
  BoundValue v;
  v.bound = report.C1 / n + report.C2 * std::sqrt(lam / n) + report.C3 * lam;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  v.alpha_radius = (2.0 * report.c4 * report.c6 + report.c5) / sqrt_n;
  v.f_radius = (report.c7 + report.c8) * std::sqrt(lam) + report.c9 / sqrt_n;
  v.below_n0 = n < report.n0;
  return v;
}

double theta_from_decay(double r) {
  if (!(r > 0.5)) {
    throw InvalidArgument(
        "theta_from_decay: r must exceed 1/2, the spectrum is not summable "
        "otherwise");
  }
  return 1.0 / (2.0 * r);
}

double dn_deviation_radius(int p, double upsilon, double M1, int n,
                           double delta) {
  if (p < 1) throw InvalidArgument("dn_deviation_radius: p must be >= 1");
  if (n < 1) throw InvalidArgument("dn_deviation_radius: n must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("dn_deviation_radius: delta must lie in (0, 1)");
  }
  if (!(upsilon > 0.0) || !(M1 > 0.0)) {
    throw InvalidArgument(
        "dn_deviation_radius: moment constants must be positive");
  }
  // positive root of n t^2 - L t - 16 M1^2 L = 0
  const double L =
      16.0 * upsilon * upsilon * std::log(2.0 * p * p / delta);
  return (L + std::sqrt(L * L + 64.0 * n * M1 * M1 * L)) / (2.0 * n);
}

double fit_c_eff(const SpectralOperator& T, double theta,
                 const Eigen::VectorXd& lambdas) {
  if (!(theta > 0.0)) throw InvalidArgument("fit_c_eff: theta must be > 0");
  if (lambdas.size() == 0) {
    throw InvalidArgument("fit_c_eff: empty lambda grid");
  }
  double best = 0.0;
  for (int i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) {
      throw InvalidArgument("fit_c_eff: lambdas must be positive");
    }
    best = std::max(best, effective_dimension(T, lambdas[i]) *
                              std::pow(lambdas[i], theta));
  }
  return best;
}

double fit_c_eff(const SpectralOperator& T, double theta) {
  const int count = 61;
  Eigen::VectorXd lambdas(count);
  for (int i = 0; i < count; ++i) {
    lambdas[i] = std::pow(10.0, -4.0 + 4.0 * i / (count - 1));
  }
  return fit_c_eff(T, theta, lambdas);
}

InequalityReport inequality_check(const SpectralOperator& T,
                                  const SpectralOperator& Tn, double lambda,
                                  double whitened_threshold) {
  if (!T.grid() || !Tn.grid() || !T.grid()->same_as(*Tn.grid())) {
    throw GridMismatch("inequality_check: operators on different grids");
  }
  if (!(lambda > 0.0)) {
    throw InvalidArgument("inequality_check: lambda must be > 0");
  }
  const Grid& grid = *T.grid();
  const Eigen::MatrixXd diff = Tn.dense() - T.dense();

  InequalityReport rep;
  rep.whitened_diff_norm = weighted_operator_norm(
      grid, T.shifted_power_dense(lambda, -0.5) * diff);
  rep.resolvent_product_norm = weighted_operator_norm(
      grid, T.shifted_power_dense(lambda, 1.0) *
                Tn.shifted_power_dense(lambda, -1.0));
  rep.half_product_norm = weighted_operator_norm(
      grid, T.shifted_power_dense(lambda, 0.5) *
                Tn.shifted_power_dense(lambda, -0.5));

  // the asserted relations are exact operator inequalities; the slack only
  // absorbs rounding in the dense evaluations
  const double s = rep.whitened_diff_norm / std::sqrt(lambda);
  const double slack = 1e-9;
  rep.ineq1_ok =
      rep.resolvent_product_norm <= (1.0 + s) * (1.0 + s) * (1.0 + slack);
  rep.ineq2_ok = rep.half_product_norm <= (1.0 + s) * (1.0 + slack);
  rep.whitened_threshold = whitened_threshold;
  rep.whitened_checked = std::isfinite(whitened_threshold);
  rep.whitened_ok =
      rep.whitened_checked && rep.whitened_diff_norm <= whitened_threshold;
  return rep;
}

ConcentrationReport concentration_suite(const ModelSpec& spec,
                                        const GridPtr& grid, int n, int reps,
                                        const BoundConfig& cfg,
                                        std::uint64_t seed, int workers) {
  validate_model(spec);
  validate_bound_config(cfg);
  if (reps < 100) {
    throw InvalidArgument("concentration_suite: reps must be >= 100");
  }
  if (n < 1) throw InvalidArgument("concentration_suite: n must be >= 1");

  const auto pop = population_operators(spec, grid);
  const int p = spec.p();
  const bool has_x = p >= 1;

  const double lambda_n = lambda_schedule(cfg.omega, cfg.theta, n);
  const double eff = effective_dimension(pop.T, lambda_n);
  const double b_n = 1.0 / (n * std::sqrt(lambda_n)) + std::sqrt(eff / n);
  const double c1 = 2.0 * pop.kappa * pop.kappa * pop.M2 * pop.M2;
  const double thr_whitened = c1 * std::log(2.0 / cfg.delta1) * b_n;

  double thr_cross = kNaN, thr_noise = kNaN, thr_gram = kNaN, thr_gram_inv = kNaN, n1 = kNaN;
  if (has_x) {
    const double c2 =
        2.0 * p * pop.kappa * (pop.upsilon + pop.M1) * pop.M2;
    thr_cross = c2 * std::log(2.0 * p / cfg.delta2) / std::sqrt(double(n));
    const double c3 = std::sqrt(double(p)) * spec.sigma * pop.M1;
    thr_noise = c3 / (std::sqrt(cfg.delta4) * std::sqrt(double(n)));
    thr_gram = dn_deviation_radius(p, pop.upsilon, pop.M1, n, cfg.delta5);
    n1 = 48.0 * pop.upsilon * pop.upsilon * p * pop.d_inv_norm *
         (48.0 * p * pop.d_inv_norm * pop.M1 * pop.M1 + 1.0) *
         std::log(2.0 * p * p / cfg.delta5);
    thr_gram_inv = 1.5 * pop.d_inv_norm;
  }
  const bool check_gram_inv = has_x && n > n1;

  struct RepFlags {
    bool whitened_ok_flag = false, cross_ok = false, adjoint_ok = false;
    bool noise_ok = false, gram_ok = false, gram_inv_ok = false;
    bool i1 = false, i2 = false;
  };
  std::vector<RepFlags> flags(reps);

  parallel_for_index(reps, workers, [&](int rep) {
    const auto data = gen_dataset(
        spec, pop, n,
        mix_key(seed, static_cast<std::uint64_t>(rep),
                static_cast<std::uint64_t>(Role::monte_carlo)));
    const auto ops = build_empirical(data, pop.Khalf);
    const auto ineq = inequality_check(pop.T, ops.Tn, lambda_n, thr_whitened);

    RepFlags f;
    f.whitened_ok_flag = ineq.whitened_ok;
    f.i1 = ineq.ineq1_ok;
    f.i2 = ineq.ineq2_ok;
    if (has_x) {
      const double g_norm = operator_norm_G(ops);
      const double h_norm = operator_norm_H(ops);
      f.cross_ok = g_norm <= thr_cross;
      f.adjoint_ok = std::abs(g_norm - h_norm) <= 1e-8 * std::max(1.0, g_norm);
      f.noise_ok = ops.has_noise_diagnostics && ops.an.norm() <= thr_noise;
      f.gram_ok = (ops.Dn - pop.D).cwiseAbs().maxCoeff() < thr_gram;
      if (check_gram_inv) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ops.Dn);
        const double emin = eig.eigenvalues()[0];
        f.gram_inv_ok = emin > 0.0 && 1.0 / emin <= thr_gram_inv;
      }
    }
    flags[rep] = f;
  });

  int n_whitened = 0, n_cross = 0, n_adjoint = 0, n_noise = 0, n_gram = 0, n_gram_inv = 0, ci1 = 0,
      ci2 = 0;
  for (const auto& f : flags) {
    n_whitened += f.whitened_ok_flag;
    n_cross += f.cross_ok;
    n_adjoint += f.adjoint_ok;
    n_noise += f.noise_ok;
    n_gram += f.gram_ok;
    n_gram_inv += f.gram_inv_ok;
    ci1 += f.i1;
    ci2 += f.i2;
  }
  const auto freq = [reps](int count) { return double(count) / reps; };

  ConcentrationReport report;
  report.n1 = n1;
  report.n_exceeds_n1 = check_gram_inv;
  report.inequalities_all_held = ci1 == reps && ci2 == reps;
  report.rows = {
      {"whitened-deviation", n, reps, cfg.delta1, freq(n_whitened), thr_whitened, true},
      {"cross-operator", n, reps, cfg.delta2,
       has_x ? freq(n_cross) : kNaN, thr_cross, has_x},
      {"cross-operator-adjoint", n, reps, kNaN,
       has_x ? freq(n_adjoint) : kNaN, kNaN, has_x},
      {"noise-term", n, reps, cfg.delta4, has_x ? freq(n_noise) : kNaN, thr_noise,
       has_x},
      {"gram-deviation", n, reps, cfg.delta5, has_x ? freq(n_gram) : kNaN,
       thr_gram, has_x},
      {"gram-inversion", n, reps, cfg.delta5,
       check_gram_inv ? freq(n_gram_inv) : kNaN, thr_gram_inv, check_gram_inv},
      {"operator-inequality-1", n, reps, kNaN, freq(ci1), kNaN, true},
      {"operator-inequality-2", n, reps, kNaN, freq(ci2), kNaN, true},
  };
  return report;
}

}  // namespace pflm
