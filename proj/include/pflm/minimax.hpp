#pragma once

#include <cstdint>
#include <vector>

#include "pflm/operators.hpp"

namespace pflm {

// Binary packing of {0,1}^M: N + 1 codewords including the all-zero word,
// every pairwise Hamming distance strictly greater than M/8, and
// N >= 2^{M/8}. These are exactly the properties the lower-bound argument
// consumes, so they are verified exhaustively rather than assumed.
struct Packing {
  int M = 0;
  std::vector<std::vector<std::uint8_t>> Theta;  // Theta[0] is the zero word
  int min_hamming = 0;  // over all distinct pairs
  int N = 0;            // |Theta| - 1
};

int hamming(const std::vector<std::uint8_t>& a,
            const std::vector<std::uint8_t>& b);

// Exhaustive check of the Packing invariants (zero word present, entries
// binary, all pairwise distances > M/8, N >= 2^{M/8}). Returns the minimum
// pairwise distance; throws PackingFailure describing the first violation.
int verify_packing(const Packing& pack);

// Randomized greedy rejection sampling: starting from the zero word, draw
// uniform binary words and keep those at distance > M/8 from everything
// kept so far, until N >= 2^{M/8} codewords have been accepted beyond the
// zero word. Deterministic given the seed; single-threaded. Throws
// InvalidArgument for M < 8 and PackingFailure if the draw cap is hit
// (not observed for M <= 64).
Packing vg_packing(int M, std::uint64_t seed);

// Slope family indexed by the packing: for codeword theta,
//   beta_theta = M^{-1/2} sum_{j=1..M} theta_j Khalf phi_{M+j},
// phi_k the k-th eigenfunction of the sandwich operator T. The index
// offset keeps the family inside the spectral band (M, 2M], which is what
// pins both the separation and the KL budget.
struct BetaFamily {
  std::vector<GridFunction> betas;  // aligned with pack.Theta
  Eigen::VectorXd k_norm_sq;        // RKHS norm^2 of each member, M^{-1} sum_j theta_j
  double max_k_norm_sq = 0.0;       // <= 1: the family lives in the unit ball
};

// Requires T and Khalf on the same grid and rank(T) >= 2M; otherwise
// InsufficientSpectrum suggests a finer grid or larger truncation.
BetaFamily beta_family(const Packing& pack, const SpectralOperator& T,
                       const SpectralOperator& Khalf);

// Exact per-sample Kullback-Leibler divergence between the two response
// models z = <Y, beta_i> + eps, eps ~ N(0, sigma2), at a shared covariate
// effect: (1/(2 sigma2)) <dbeta, L_C dbeta> with dbeta = beta1 - beta2.
double kl_gaussian(const GridFunction& beta1, const GridFunction& beta2,
                   const CovarianceMatrix& C, double sigma2);

// sqrt(N)/(1 + sqrt(N)) * (1 - 2 rho - sqrt(2 rho / log N)): the
// probability floor of the multiple-hypothesis reduction. Tends to
// 1 - 2 rho as N grows. Requires N > 1 and rho > 0.
double fano_probability_floor(double n_hypotheses, double rho);

// Evaluated lower-bound certificate. M is the smallest integer exceeding
// b0 n^{1/(1+2r)} with b0 = (8 b2 K_sigma2 / log 2)^{1/(1+2r)} rho^{-1/(1+2r)};
// that choice makes the per-pair KL budget
//   b2 n K_sigma2 M^{-2r} <= rho log(N)
// hold by construction, which the certificate re-checks against the
// certified packing size rather than trusting the algebra.
struct LowerBoundCert {
  double r = 0.0;
  double b1 = 0.0;      // spectrum envelope b1 k^{-2r} <= tau_k <= b2 k^{-2r}
  double b2 = 0.0;
  double sigma2 = 0.0;
  double K_sigma2 = 0.0;  // 1/(2 sigma2)
  double rho = 0.0;       // in (0, 1/8)
  int n = 0;
  int M = 0;
  int N = 0;            // certified packing size
  int min_hamming = 0;
  double kl_budget_lhs = 0.0;  // b2 n K_sigma2 M^{-2r}
  double kl_budget_rhs = 0.0;  // rho log(N)
  bool kl_budget_ok = false;
  double separation = 0.0;   // b1 2^{-(2r+3)} M^{-2r}, pairwise excess-risk gap
  double lower_bound = 0.0;  // b1 2^{-4(1+r)} (8 b2 K / (rho log2))^{-2r/(1+2r)} n^{-2r/(1+2r)}
  double probability_floor = 0.0;
};

// Preconditions (each violation raises InvalidArgument naming the
// condition): r > 0, 0 < b1 <= b2, sigma2 > 0, rho in (0, 1/8), and
// n >= rho log2 / (8 b2 K_sigma2) so that M <= 2 b0 n^{1/(1+2r)}. The seed
// only steers the packing search; every certified value is deterministic
// given it.
LowerBoundCert lower_bound(int n, double r, double b1, double b2,
                           double sigma2, double rho, std::uint64_t seed = 0);

}  // namespace pflm
