#include "pflm/estimator.hpp"

#include <cmath>

namespace pflm {

namespace {

void check_dataset(const Dataset& data) {
  if (!data.grid) throw InvalidArgument("dataset: null grid");
  if (data.n() < 1) throw InvalidArgument("dataset: empty");
  if (data.Y.rows() != data.n() || data.Y.cols() != data.grid->size() ||
      data.X.rows() != data.n()) {
    throw GridMismatch("dataset: inconsistent shapes");
  }
}

void check_khalf(const Dataset& data, const SpectralOperator& Khalf) {
  if (!Khalf.grid() || !Khalf.grid()->same_as(*data.grid)) {
    throw GridMismatch("estimator: operator and data on different grids");
  }
}

// Stationarity residual of the fitted pair, relative to the data scale.
// eq_alpha: X'(X a + B f - z)/n = 0, eq_f: U'(X a + B f - z)/n + lam f = 0,
// with B = U W. The f equation lives in function coordinates, so its norm
// is the quadrature norm.
double stationarity_residual(const Dataset& data, const Eigen::MatrixXd& U,
                             double lambda, const Eigen::VectorXd& alpha,
                             const Eigen::VectorXd& f) {
  const int n = data.n();
  const auto& W = data.grid->weights();
  Eigen::VectorXd r = data.z - U * (W.asDiagonal() * f);
  if (alpha.size() > 0) r -= data.X * alpha;

  const Eigen::VectorXd r_alpha = data.X.transpose() * r / n;
  const Eigen::VectorXd r_f =
      (-(U.transpose() * r) / n + lambda * f).eval();
  const Eigen::VectorXd b_alpha = data.X.transpose() * data.z / n;
  const Eigen::VectorXd b_f = U.transpose() * data.z / n;

  const double wnorm2_rf = r_f.dot(W.asDiagonal() * r_f);
  const double wnorm2_bf = b_f.dot(W.asDiagonal() * b_f);
  const double num = std::sqrt(r_alpha.squaredNorm() + wnorm2_rf);
  const double den = std::sqrt(b_alpha.squaredNorm() + wnorm2_bf);
  return num / std::max(1.0, den);
}

PflmFit finish_fit(const Dataset& data, const SpectralOperator& Khalf,
                   const Eigen::MatrixXd& U, double lambda,
                   Eigen::VectorXd alpha, Eigen::VectorXd f, SolverTag tag) {
  PflmFit fit;
  fit.lambda = lambda;
  fit.solver = tag;
  fit.residual = stationarity_residual(data, U, lambda, alpha, f);
  fit.alpha_hat = std::move(alpha);
  fit.f_hat = GridFunction(data.grid, std::move(f));
  fit.beta_hat = Khalf.apply(fit.f_hat);
  return fit;
}

}  // namespace

Eigen::MatrixXd apply_rows(const SpectralOperator& A, const Eigen::MatrixXd& Y) {
  const auto& grid = A.grid();
  if (Y.cols() != grid->size()) {
    throw GridMismatch("apply_rows: column count does not match grid");
  }
  if (A.rank() == 0) return Eigen::MatrixXd::Zero(Y.rows(), Y.cols());
  const Eigen::MatrixXd weighted_basis =
      grid->weights().asDiagonal() * A.eigenfunctions();  // m x r
  Eigen::MatrixXd coeffs = Y * weighted_basis;            // n x r
  coeffs *= A.eigenvalues().asDiagonal();
  return coeffs * A.eigenfunctions().transpose();
}

EmpiricalOperators build_empirical(const Dataset& data,
                                   const SpectralOperator& Khalf) {
  check_dataset(data);
  check_khalf(data, Khalf);
  const int n = data.n();
  const int m = data.grid->size();
  const auto& W = data.grid->weights();

  EmpiricalOperators ops;
  ops.Dn = data.X.transpose() * data.X / n;
  Eigen::MatrixXd C = data.Y.transpose() * data.Y / n;
  ops.Cn = CovarianceMatrix{data.grid, 0.5 * (C + C.transpose().eval())};
  ops.Tn = sandwich(Khalf, ops.Cn);

  const Eigen::MatrixXd U = apply_rows(Khalf, data.Y);
  ops.G = data.X.transpose() * (U * W.asDiagonal()) / n;
  ops.H = U.transpose() * data.X / n;

  ops.has_noise_diagnostics = data.eps.size() == n;
  if (ops.has_noise_diagnostics) {
    ops.an = data.X.transpose() * data.eps / n;
    ops.gn = GridFunction(data.grid, U.transpose() * data.eps / n);
  } else {
    ops.an = Eigen::VectorXd::Zero(data.X.cols());
    ops.gn = GridFunction(data.grid, Eigen::VectorXd::Zero(m));
  }
  return ops;
}

double operator_norm_G(const EmpiricalOperators& ops) {
  // G maps the quadrature geometry to Euclidean: largest singular value of
  // G W^{-1/2}
  const Eigen::ArrayXd inv_sqrt_w =
      ops.Cn.grid->weights().array().sqrt().inverse();
  const Eigen::MatrixXd scaled = ops.G * inv_sqrt_w.matrix().asDiagonal();
  if (scaled.rows() == 0) return 0.0;
  return Eigen::BDCSVD<Eigen::MatrixXd>(scaled).singularValues()[0];
}

double operator_norm_H(const EmpiricalOperators& ops) {
  const Eigen::ArrayXd sqrt_w = ops.Cn.grid->weights().array().sqrt();
  const Eigen::MatrixXd scaled = sqrt_w.matrix().asDiagonal() * ops.H;
  if (scaled.cols() == 0) return 0.0;
  return Eigen::BDCSVD<Eigen::MatrixXd>(scaled).singularValues()[0];
}

double pflm_objective(const Dataset& data, const SpectralOperator& Khalf,
                      double lambda, const Eigen::VectorXd& alpha,
                      const GridFunction& f) {
  check_dataset(data);
  check_khalf(data, Khalf);
  const auto& W = data.grid->weights();
  const Eigen::MatrixXd U = apply_rows(Khalf, data.Y);
  Eigen::VectorXd r = data.z - U * (W.asDiagonal() * f.values);
  if (alpha.size() > 0) r -= data.X * alpha;
  return r.squaredNorm() / data.n() +
         lambda * f.values.dot(W.asDiagonal() * f.values);
}

PflmFit fit_joint(const Dataset& data, const SpectralOperator& Khalf,
                  double lambda) {
  check_dataset(data);
  check_khalf(data, Khalf);
  if (lambda < 0.0) throw InvalidArgument("fit_joint: lambda must be >= 0");

  const int n = data.n();
  const int m = data.grid->size();
  const int p = static_cast<int>(data.X.cols());
  const auto& W = data.grid->weights();
  const Eigen::MatrixXd U = apply_rows(Khalf, data.Y);
  const Eigen::MatrixXd B = U * W.asDiagonal();

  if (lambda == 0.0) {
    // minimum-norm least squares; valid only when alpha is identifiable,
    // i.e. the covariate columns are independent and their span meets the
    // span of the functional design only at 0
    Eigen::MatrixXd design(n, p + m);
    design.leftCols(p) = data.X;
    design.rightCols(m) = B;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    const auto rank_of = [](const Eigen::MatrixXd& M) {
      return M.size() == 0
                 ? Eigen::Index(0)
                 : Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(M)
                       .rank();
    };
    const auto rank_x = rank_of(data.X);
    if (rank_x < p) {
      throw RankDeficiency("fit_joint: covariate design is rank deficient");
    }
    if (cod.rank() < rank_x + rank_of(B)) {
      throw RankDeficiency(
          "fit_joint: combined design is rank deficient at lambda = 0");
    }
    const Eigen::VectorXd v = cod.solve(data.z);
    return finish_fit(data, Khalf, U, lambda, v.head(p), v.tail(m),
                      SolverTag::joint);
  }

  // symmetric normal equations in (alpha, f)
  Eigen::MatrixXd kkt(p + m, p + m);
  kkt.topLeftCorner(p, p) = data.X.transpose() * data.X / n;
  kkt.topRightCorner(p, m) = data.X.transpose() * B / n;
  kkt.bottomLeftCorner(m, p) = kkt.topRightCorner(p, m).transpose();
  kkt.bottomRightCorner(m, m) = B.transpose() * B / n;
  kkt.bottomRightCorner(m, m) += (lambda * W.array()).matrix().asDiagonal();

  Eigen::VectorXd rhs(p + m);
  rhs.head(p) = data.X.transpose() * data.z / n;
  rhs.tail(m) = B.transpose() * data.z / n;

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(kkt);
  if (ldlt.info() != Eigen::Success) {
    throw Error("fit_joint: normal-equation factorization failed");
  }
  const Eigen::VectorXd v = ldlt.solve(rhs);
  return finish_fit(data, Khalf, U, lambda, v.head(p), v.tail(m),
                    SolverTag::joint);
}

PflmFit fit_coupled(const EmpiricalOperators& ops, const Dataset& data,
                    const SpectralOperator& Khalf, double lambda) {
  check_dataset(data);
  check_khalf(data, Khalf);
  if (!(lambda > 0.0)) {
    throw InvalidArgument("fit_coupled: lambda must be > 0");
  }
  const int n = data.n();
  const int p = static_cast<int>(data.X.cols());

  Eigen::VectorXd b_alpha = data.X.transpose() * data.z / n;
  const Eigen::VectorXd b_f =
      Khalf.apply(Eigen::VectorXd(data.Y.transpose() * data.z / n));

  Eigen::MatrixXd system = ops.Tn.dense();
  system.diagonal().array() += lambda;
  Eigen::VectorXd rhs = b_f;

  Eigen::LLT<Eigen::MatrixXd> dn_chol;
  if (p > 0) {
    // invertibility of Dn is the small-sample hazard here: below the
    // stable-inversion threshold (the N1 constant of the bound report)
    // the empirical Gram matrix may be singular
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ops.Dn);
    const double emin = eig.eigenvalues()[0];
    const double emax = eig.eigenvalues()[p - 1];
    if (!(emin > 1e-12 * std::max(1.0, emax))) {
      throw SingularDesign(
          "fit_coupled: empirical covariate Gram matrix is singular; the "
          "sample is too small for stable inversion (compare the N1 "
          "threshold of the bound report)");
    }
    dn_chol.compute(ops.Dn);
    system -= ops.H * dn_chol.solve(ops.G);
    rhs -= ops.H * dn_chol.solve(b_alpha);
  }

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  const Eigen::VectorXd f = lu.solve(rhs);
  Eigen::VectorXd alpha(p);
  if (p > 0) alpha = dn_chol.solve(b_alpha - ops.G * f);

  const Eigen::MatrixXd U = apply_rows(Khalf, data.Y);
  return finish_fit(data, Khalf, U, lambda, std::move(alpha), f,
                    SolverTag::coupled);
}

double lambda_schedule(double omega, double theta, int n) {
  if (!(omega > 0.0)) throw InvalidArgument("lambda_schedule: omega must be > 0");
  if (!(theta > 0.0)) throw InvalidArgument("lambda_schedule: theta must be > 0");
  if (n < 1) throw InvalidArgument("lambda_schedule: n must be >= 1");
  return omega * std::pow(static_cast<double>(n), -1.0 / (1.0 + theta));
}

}  // namespace pflm
