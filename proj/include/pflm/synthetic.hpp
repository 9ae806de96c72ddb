#pragma once

#include <cstdint>

#include "pflm/operators.hpp"

namespace pflm {

enum class NoiseKind {
  gaussian,            // N(0, sigma^2)
  bounded,             // uniform on [-sqrt(3) sigma, sqrt(3) sigma]
};

// Ground-truth model. Every constant the risk bounds need is available in
// closed form:
//   X_j iid Laplace(0, b):  E|X_j|^l = b^l l!, so the Bernstein moment
//     growth holds with equality for M1 = sqrt(2) b, upsilon = b, and
//     D = E[XX'] = 2 b^2 I.
//   Y = sum_k sqrt(mu_k) zeta_k psi_k, zeta iid uniform[-sqrt3, sqrt3]:
//     E[zeta^2] = 1, C = sum_k mu_k psi_k (x) psi_k, and ||Y|| is bounded
//     by M2 = sqrt(3 sum mu_k) almost surely.
struct ModelSpec {
  Eigen::VectorXd alpha0;    // length p; p = 0 drops the multivariate part
  Eigen::VectorXd f0_coeffs; // cosine-basis coefficients of f0
  KernelSpec kernel = SyntheticSpectrum{};
  Eigen::VectorXd mu;        // process spectrum, positive nonincreasing
  double laplace_scale = 1.0;
  double sigma = 0.5;
  NoiseKind noise = NoiseKind::gaussian;

  int p() const { return static_cast<int>(alpha0.size()); }
  double M1() const { return std::numbers::sqrt2 * laplace_scale; }
  double upsilon() const { return laplace_scale; }
  double M2() const { return std::sqrt(3.0 * mu.sum()); }
  double lambda_max() const { return 2.0 * laplace_scale * laplace_scale; }
};

// Throws InvalidArgument on violated field constraints. For a synthetic
// spectrum kernel, f0 must live in the kernel's retained span (coefficients
// beyond the truncation are rejected rather than silently annihilated).
void validate_model(const ModelSpec& spec);

struct Dataset {
  Eigen::MatrixXd X;    // n x p
  Eigen::MatrixXd Y;    // n x m, row i holds Y_i on the grid
  Eigen::VectorXd z;    // n
  Eigen::VectorXd eps;  // n; generator-known noise, used by synthetic-only
                        // diagnostics (g_n, a_n)
  GridPtr grid;
  std::uint64_t seed = 0;

  int n() const { return static_cast<int>(z.size()); }
  GridFunction y(int i) const { return GridFunction(grid, Y.row(i)); }
};

// Population-level quantities of a ModelSpec realized on a grid.
struct PopulationOps {
  Eigen::MatrixXd D;       // 2 b^2 I
  CovarianceMatrix C;
  SpectralOperator K;      // kernel operator
  SpectralOperator Khalf;
  SpectralOperator T;      // Khalf o L_C o Khalf
  GridFunction f0;
  GridFunction beta0;      // Khalf f0
  double kappa = 0.0;      // operator norm of Khalf
  double lambda_max = 0.0;
  double M1 = 0.0;
  double upsilon = 0.0;
  double M2 = 0.0;
  double d_inv_norm = 0.0; // ||D^{-1}||, 0 when p = 0
  double f0_norm = 0.0;
};

PopulationOps population_operators(const ModelSpec& spec, const GridPtr& grid);

// Deterministic given (spec, grid, n, seed): sample i draws from substreams
// keyed (seed, i, role), so datasets are reproducible under any scheduling
// and share their first samples across different n.
Dataset gen_dataset(const ModelSpec& spec, const GridPtr& grid, int n,
                    std::uint64_t seed);
Dataset gen_dataset(const ModelSpec& spec, const PopulationOps& pop, int n,
                    std::uint64_t seed);

// x' alpha0 + <y, beta0>.
double true_prediction(const ModelSpec& spec, const PopulationOps& pop,
                       const Eigen::VectorXd& x, const GridFunction& y);
double true_prediction(const ModelSpec& spec, const Eigen::VectorXd& x,
                       const GridFunction& y);

// beta0 on the given grid without a full PopulationOps build; closed form
// for shared-basis synthetic kernels.
GridFunction true_slope(const ModelSpec& spec, const GridPtr& grid);

}  // namespace pflm
