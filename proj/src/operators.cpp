#include "pflm/operators.hpp"

#include <cmath>
#include <utility>

namespace pflm {

namespace {

void check_covariance(const CovarianceMatrix& R) {
  if (!R.grid) throw InvalidArgument("covariance: null grid");
  const auto m = R.grid->size();
  if (R.values.rows() != m || R.values.cols() != m) {
    throw GridMismatch("covariance: matrix shape does not match grid");
  }
  if (!R.values.allFinite()) {
    throw InvalidArgument("covariance: non-finite entries");
  }
  const double scale = std::max(1.0, R.values.cwiseAbs().maxCoeff());
  if ((R.values - R.values.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw InvalidArgument("covariance: matrix is not symmetric");
  }
}

// Eigenpairs of a symmetric matrix in the W^{1/2}-coordinates, sorted
// nonincreasing, truncated at tol * theta_1, mapped back to grid
// coordinates (columns quad-orthonormal).
SpectralOperator from_symmetrized(const GridPtr& grid, Eigen::MatrixXd S,
                                  double tol) {
  S = 0.5 * (S + S.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  if (eig.info() != Eigen::Success) {
    throw Error("spectral_decompose: eigensolver failed");
  }
  const auto m = S.rows();
  const Eigen::VectorXd& vals = eig.eigenvalues();  // ascending
  const double theta1 = vals[m - 1];
  if (!(theta1 > 0.0)) {
    return SpectralOperator(grid, Eigen::VectorXd(0), Eigen::MatrixXd(m, 0));
  }
  const double cutoff = tol * theta1;
  int rank = 0;
  while (rank < m && vals[m - 1 - rank] > cutoff) ++rank;

  Eigen::VectorXd theta(rank);
  Eigen::MatrixXd funcs(m, rank);
  const Eigen::ArrayXd inv_sqrt_w = grid->weights().array().sqrt().inverse();
  for (int k = 0; k < rank; ++k) {
    theta[k] = std::max(0.0, vals[m - 1 - k]);
    funcs.col(k) = eig.eigenvectors().col(m - 1 - k).array() * inv_sqrt_w;
  }
  return SpectralOperator(grid, std::move(theta), std::move(funcs));
}

}  // namespace

void validate_kernel(const KernelSpec& spec) {
  if (const auto* s = std::get_if<SyntheticSpectrum>(&spec)) {
    if (!(s->scale > 0.0)) {
      throw InvalidArgument("synthetic spectrum: scale must be > 0");
    }
    if (!(s->exponent > 1.0)) {
      throw InvalidArgument(
          "synthetic spectrum: exponent must be > 1 (summable spectrum)");
    }
    if (s->modes < 1) {
      throw InvalidArgument("synthetic spectrum: modes must be >= 1");
    }
  } else if (const auto* g = std::get_if<GaussianKernel>(&spec)) {
    if (!(g->length_scale > 0.0)) {
      throw InvalidArgument("gaussian kernel: length scale must be > 0");
    }
  }
}

SpectralOperator::SpectralOperator(GridPtr grid, Eigen::VectorXd eigenvalues,
                                   Eigen::MatrixXd eigenfunctions)
    : grid_(std::move(grid)),
      eigenvalues_(std::move(eigenvalues)),
      eigenfunctions_(std::move(eigenfunctions)) {
  if (!grid_) throw InvalidArgument("SpectralOperator: null grid");
  const auto m = grid_->size();
  const auto r = eigenvalues_.size();
  if (eigenfunctions_.rows() != m || eigenfunctions_.cols() != r) {
    throw GridMismatch("SpectralOperator: eigenfunction shape mismatch");
  }
  for (Eigen::Index k = 0; k < r; ++k) {
    if (!(eigenvalues_[k] >= 0.0)) {
      throw InvalidArgument("SpectralOperator: negative eigenvalue");
    }
    if (k > 0 && eigenvalues_[k] > eigenvalues_[k - 1]) {
      throw InvalidArgument("SpectralOperator: eigenvalues not sorted");
    }
  }
  if (r > 0) {
    const Eigen::MatrixXd weighted =
        grid_->weights().asDiagonal() * eigenfunctions_;
    const Eigen::MatrixXd gram = eigenfunctions_.transpose() * weighted;
    const Eigen::MatrixXd dev =
        gram - Eigen::MatrixXd::Identity(r, r);
    if (dev.cwiseAbs().maxCoeff() > 1e-6) {
      throw InvalidArgument(
          "SpectralOperator: eigenfunctions not quad-orthonormal");
    }
    // operator norm <= Hilbert-Schmidt norm holds for any valid spectrum
    if (operator_norm() > hs_norm() * (1.0 + 1e-12)) {
      throw Error("SpectralOperator: norm ordering violated");
    }
  }
}

GridFunction SpectralOperator::eigenfunction(int k) const {
  if (k < 1 || k > rank()) {
    throw InvalidArgument("eigenfunction: index out of range");
  }
  return GridFunction(grid_, eigenfunctions_.col(k - 1));
}

Eigen::VectorXd SpectralOperator::apply(const Eigen::VectorXd& f) const {
  if (f.size() != grid_->size()) {
    throw GridMismatch("SpectralOperator::apply: size mismatch");
  }
  if (rank() == 0) return Eigen::VectorXd::Zero(f.size());
  const Eigen::VectorXd coeffs =
      eigenfunctions_.transpose() * (grid_->weights().asDiagonal() * f);
  return eigenfunctions_ * (eigenvalues_.array() * coeffs.array()).matrix();
}

GridFunction SpectralOperator::apply(const GridFunction& f) const {
  if (!f.grid || !f.grid->same_as(*grid_)) {
    throw GridMismatch("SpectralOperator::apply: grid mismatch");
  }
  return GridFunction(grid_, apply(f.values));
}

Eigen::MatrixXd SpectralOperator::dense() const {
  const auto m = grid_->size();
  if (rank() == 0) return Eigen::MatrixXd::Zero(m, m);
  return eigenfunctions_ * eigenvalues_.asDiagonal() *
         eigenfunctions_.transpose() * grid_->weights().asDiagonal();
}

Eigen::MatrixXd SpectralOperator::shifted_power_dense(double lambda,
                                                      double power) const {
  const auto m = grid_->size();
  const double complement = std::pow(lambda, power);
  if (!std::isfinite(complement)) {
    throw InvalidArgument("shifted_power_dense: lambda^power not finite");
  }
  Eigen::MatrixXd out =
      complement * Eigen::MatrixXd::Identity(m, m);
  if (rank() > 0) {
    const Eigen::VectorXd diag =
        (eigenvalues_.array() + lambda).pow(power) - complement;
    out += eigenfunctions_ * diag.asDiagonal() * eigenfunctions_.transpose() *
           grid_->weights().asDiagonal();
  }
  return out;
}

CovarianceMatrix kernel_matrix(const KernelSpec& spec, const GridPtr& grid) {
  validate_kernel(spec);
  if (!grid) throw InvalidArgument("kernel_matrix: null grid");
  const int m = grid->size();
  Eigen::MatrixXd R(m, m);

  if (const auto* s = std::get_if<SyntheticSpectrum>(&spec)) {
    Eigen::MatrixXd psi(m, s->modes);
    Eigen::VectorXd nu(s->modes);
    for (int k = 1; k <= s->modes; ++k) {
      psi.col(k - 1) = cosine_basis(k, grid).values;
      nu[k - 1] = s->scale * std::pow(static_cast<double>(k), -s->exponent);
    }
    R = psi * nu.asDiagonal() * psi.transpose();
    R = 0.5 * (R + R.transpose().eval());
  } else if (std::holds_alternative<BrownianKernel>(spec)) {
    for (int j = 0; j < m; ++j) {
      for (int k = 0; k < m; ++k) {
        R(j, k) = std::min(grid->points()[j], grid->points()[k]);
      }
    }
  } else {
    const double l = std::get<GaussianKernel>(spec).length_scale;
    for (int j = 0; j < m; ++j) {
      for (int k = 0; k < m; ++k) {
        const double d = grid->points()[j] - grid->points()[k];
        R(j, k) = std::exp(-d * d / (2.0 * l * l));
      }
    }
  }
  return CovarianceMatrix{grid, std::move(R)};
}

SpectralOperator spectral_decompose(const CovarianceMatrix& R, double tol) {
  check_covariance(R);
  const Eigen::ArrayXd sqrt_w = R.grid->weights().array().sqrt();
  Eigen::MatrixXd S =
      sqrt_w.matrix().asDiagonal() * R.values * sqrt_w.matrix().asDiagonal();
  return from_symmetrized(R.grid, std::move(S), tol);
}

SpectralOperator operator_sqrt(const SpectralOperator& A) {
  return SpectralOperator(A.grid(), A.eigenvalues().cwiseSqrt(),
                          A.eigenfunctions());
}

SpectralOperator sandwich(const SpectralOperator& Khalf,
                          const CovarianceMatrix& C) {
  check_covariance(C);
  if (!Khalf.grid() || !Khalf.grid()->same_as(*C.grid)) {
    throw GridMismatch("sandwich: operator and covariance on different grids");
  }
  const auto& grid = Khalf.grid();
  const int m = grid->size();
  const int r = Khalf.rank();
  if (r == 0) {
    return SpectralOperator(grid, Eigen::VectorXd(0), Eigen::MatrixXd(m, 0));
  }

  // The range of Khalf L_C Khalf lies in span of Khalf's eigenfunctions, so
  // the eigenproblem reduces to rank(Khalf) dimensions: with V = W^{1/2} E
  // (orthonormal columns) and D = diag(theta^{Khalf}), the symmetrized
  // sandwich is V D (V' W^{1/2} C W^{1/2} V) D V'.
  const Eigen::ArrayXd sqrt_w = grid->weights().array().sqrt();
  const Eigen::MatrixXd V =
      sqrt_w.matrix().asDiagonal() * Khalf.eigenfunctions();
  const Eigen::MatrixXd Sc =
      sqrt_w.matrix().asDiagonal() * C.values * sqrt_w.matrix().asDiagonal();
  Eigen::MatrixXd core = V.transpose() * Sc * V;
  core = Khalf.eigenvalues().asDiagonal() * core *
         Khalf.eigenvalues().asDiagonal();
  core = 0.5 * (core + core.transpose().eval());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(core);
  if (eig.info() != Eigen::Success) {
    throw Error("sandwich: eigensolver failed");
  }
  const Eigen::VectorXd& vals = eig.eigenvalues();
  const double theta1 = vals[r - 1];
  if (!(theta1 > 0.0)) {
    return SpectralOperator(grid, Eigen::VectorXd(0), Eigen::MatrixXd(m, 0));
  }
  const double cutoff = 1e-12 * theta1;
  int rank = 0;
  while (rank < r && vals[r - 1 - rank] > cutoff) ++rank;

  Eigen::VectorXd tau(rank);
  Eigen::MatrixXd funcs(m, rank);
  const Eigen::ArrayXd inv_sqrt_w = sqrt_w.inverse();
  for (int k = 0; k < rank; ++k) {
    tau[k] = std::max(0.0, vals[r - 1 - k]);
    funcs.col(k) =
        (V * eig.eigenvectors().col(r - 1 - k)).array() * inv_sqrt_w;
  }
  return SpectralOperator(grid, std::move(tau), std::move(funcs));
}

double effective_dimension(const Eigen::VectorXd& eigenvalues, double lambda) {
  if (!(lambda > 0.0)) {
    throw InvalidArgument("effective_dimension: lambda must be > 0");
  }
  double sum = 0.0;
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
    const double tau = std::max(0.0, eigenvalues[k]);
    sum += tau / (tau + lambda);
  }
  return sum;
}

double effective_dimension(const SpectralOperator& A, double lambda) {
  return effective_dimension(A.eigenvalues(), lambda);
}

GridFunction shift_solve(const SpectralOperator& A, double lambda,
                         const GridFunction& f) {
  if (!(lambda > 0.0)) {
    throw InvalidArgument("shift_solve: lambda must be > 0");
  }
  if (!f.grid || !f.grid->same_as(*A.grid())) {
    throw GridMismatch("shift_solve: grid mismatch");
  }
  if (A.rank() == 0) return GridFunction(f.grid, f.values / lambda);

  const auto& E = A.eigenfunctions();
  const Eigen::VectorXd coeffs =
      E.transpose() * (A.grid()->weights().asDiagonal() * f.values);
  const Eigen::VectorXd scaled =
      (coeffs.array() / (A.eigenvalues().array() + lambda)).matrix();
  // retained span gets 1/(theta+lambda), complement 1/lambda
  Eigen::VectorXd out = f.values - E * coeffs;  // complement part of f
  out /= lambda;
  out += E * scaled;
  return GridFunction(f.grid, std::move(out));
}

double weighted_operator_norm(const Grid& grid, const Eigen::MatrixXd& M) {
  if (M.rows() != grid.size() || M.cols() != grid.size()) {
    throw GridMismatch("weighted_operator_norm: shape mismatch");
  }
  const Eigen::ArrayXd sqrt_w = grid.weights().array().sqrt();
  const Eigen::MatrixXd sym = sqrt_w.matrix().asDiagonal() * M *
                              sqrt_w.inverse().matrix().asDiagonal();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(sym);
  return svd.singularValues()[0];
}

}  // namespace pflm
