#pragma once

#include "pflm/synthetic.hpp"

namespace pflm {

// Empirical counterparts of the population quantities, built from one
// dataset. With u_i = Khalf Y_i:
//   Dn = (1/n) sum X_i X_i'
//   Cn(s,t) = (1/n) sum Y_i(s) Y_i(t)
//   Tn = Khalf o L_Cn o Khalf
//   G maps f to (1/n) sum <u_i, f> X_i   (p x m, grid coordinates)
//   H maps alpha to (1/n) sum (X_i' alpha) u_i, the adjoint of G
//   an = (1/n) sum eps_i X_i, gn = (1/n) sum eps_i u_i; these need the
//   generator-known noise and are skipped when the dataset lacks it.
struct EmpiricalOperators {
  Eigen::MatrixXd Dn;
  CovarianceMatrix Cn;
  SpectralOperator Tn;
  Eigen::MatrixXd G;
  Eigen::MatrixXd H;
  Eigen::VectorXd an;
  GridFunction gn;
  bool has_noise_diagnostics = false;
};

EmpiricalOperators build_empirical(const Dataset& data,
                                   const SpectralOperator& Khalf);

// Operator norms of G (and H) between the Euclidean and quadrature
// geometries; equal by adjointness.
double operator_norm_G(const EmpiricalOperators& ops);
double operator_norm_H(const EmpiricalOperators& ops);

enum class SolverTag { joint, coupled };

struct PflmFit {
  Eigen::VectorXd alpha_hat;
  GridFunction f_hat;
  GridFunction beta_hat;  // Khalf f_hat
  double lambda = 0.0;
  SolverTag solver = SolverTag::joint;
  // relative norm of the stationarity equations at the solution; fits with
  // residual > 1e-6 are treated as unconverged by the experiment drivers
  double residual = 0.0;
};

// Penalized least squares objective
//   (1/n) sum (z_i - X_i' alpha - <Y_i, Khalf f>)^2 + lambda ||f||^2.
double pflm_objective(const Dataset& data, const SpectralOperator& Khalf,
                      double lambda, const Eigen::VectorXd& alpha,
                      const GridFunction& f);

// Joint normal-equation solve over (alpha, f) in the full grid-coefficient
// space. lambda = 0 computes the minimum-norm least squares solution and
// requires the alpha-part to be identifiable (throws RankDeficiency
// otherwise).
PflmFit fit_joint(const Dataset& data, const SpectralOperator& Khalf,
                  double lambda);

// Coupled-equation route: eliminates alpha through Dn^{-1} and solves the
// resulting m x m system for f, then back-substitutes. Requires lambda > 0
// and invertible Dn.
PflmFit fit_coupled(const EmpiricalOperators& ops, const Dataset& data,
                    const SpectralOperator& Khalf, double lambda);

// omega * n^{-1/(1+theta)}.
double lambda_schedule(double omega, double theta, int n);

// Rows of Y mapped through A: row i of the result is A applied to row i.
Eigen::MatrixXd apply_rows(const SpectralOperator& A, const Eigen::MatrixXd& Y);

}  // namespace pflm
