#pragma once

#include <Eigen/Dense>
#include <variant>

#include "pflm/grid.hpp"

namespace pflm {

// Kernel K(s,t) given by a truncated spectrum on the cosine basis:
// K = sum_{k<=modes} nu_k psi_k (x) psi_k with nu_k = scale * k^{-exponent}.
// exponent > 1 keeps the spectrum summable (exponent plays the role of 2a
// with a > 1/2).
struct SyntheticSpectrum {
  double scale = 1.0;
  double exponent = 2.0;
  int modes = 50;
};

// K(s,t) = min(s,t) on [0,1].
struct BrownianKernel {};

// K(s,t) = exp(-(s-t)^2 / (2 l^2)).
struct GaussianKernel {
  double length_scale = 0.25;
};

using KernelSpec = std::variant<SyntheticSpectrum, BrownianKernel, GaussianKernel>;

void validate_kernel(const KernelSpec& spec);

// Pointwise kernel or covariance evaluations R(t_j, t_k) on a grid.
struct CovarianceMatrix {
  GridPtr grid;
  Eigen::MatrixXd values;
};

// Self-adjoint PSD operator on the discretized L2, stored as eigenpairs.
// Eigenfunction columns are orthonormal under the quadrature inner product,
// so apply(f) = sum_k theta_k e_k <e_k, f>. The orthogonal complement of the
// retained span is treated as a 0-eigenspace throughout; shift_solve scales
// it by 1/lambda, matching the resolvent of the underlying operator on
// functions outside the numerical range.
class SpectralOperator {
 public:
  SpectralOperator() = default;

  // eigenvalues nonincreasing and >= 0; eigenfunction columns (m x rank)
  // quad-orthonormal. Both checked.
  SpectralOperator(GridPtr grid, Eigen::VectorXd eigenvalues,
                   Eigen::MatrixXd eigenfunctions);

  const GridPtr& grid() const { return grid_; }
  int rank() const { return static_cast<int>(eigenvalues_.size()); }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenfunctions() const { return eigenfunctions_; }
  GridFunction eigenfunction(int k) const;  // k is 1-based, as in tau_k

  Eigen::VectorXd apply(const Eigen::VectorXd& f) const;
  GridFunction apply(const GridFunction& f) const;

  double operator_norm() const {  // max eigenvalue
    return rank() == 0 ? 0.0 : eigenvalues_[0];
  }
  double hs_norm() const { return eigenvalues_.norm(); }

  // Dense m x m matrix of f -> A f in grid coordinates.
  Eigen::MatrixXd dense() const;

  // Dense matrix of f -> (A + lambda I)^power f, complement included as the
  // 0-eigenspace (coefficient lambda^power). Requires lambda > 0 when
  // power < 0 and the operator is rank deficient.
  Eigen::MatrixXd shifted_power_dense(double lambda, double power) const;

 private:
  GridPtr grid_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenfunctions_;
};

CovarianceMatrix kernel_matrix(const KernelSpec& spec, const GridPtr& grid);

// Eigendecomposition of the quadrature-weighted operator f -> R W f,
// computed through the symmetrized form W^{1/2} R W^{1/2}. Eigenvalues
// below tol * theta_1 are dropped, negatives clamped to zero.
SpectralOperator spectral_decompose(const CovarianceMatrix& R,
                                    double tol = 1e-12);

// Same eigenfunctions, eigenvalues sqrt(theta_k).
SpectralOperator operator_sqrt(const SpectralOperator& A);

// Spectral decomposition of Khalf o L_C o Khalf.
SpectralOperator sandwich(const SpectralOperator& Khalf,
                          const CovarianceMatrix& C);

// sum_k theta_k / (theta_k + lambda), lambda > 0.
double effective_dimension(const SpectralOperator& A, double lambda);
double effective_dimension(const Eigen::VectorXd& eigenvalues, double lambda);

// (A + lambda I)^{-1} f, lambda > 0.
GridFunction shift_solve(const SpectralOperator& A, double lambda,
                         const GridFunction& f);

// Operator norm of a dense grid-coordinate matrix with respect to the
// quadrature inner product: sigma_max(W^{1/2} M W^{-1/2}).
double weighted_operator_norm(const Grid& grid, const Eigen::MatrixXd& M);

}  // namespace pflm
