#include "pflm/minimax.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "pflm/errors.hpp"
#include "pflm/rng.hpp"

namespace pflm {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Smallest integer Hamming distance satisfying d > M/8. For integers d the
// strict real inequality is d >= floor(M/8) + 1 whether or not 8 | M.
int distance_floor(int M) { return M / 8 + 1; }

// Smallest admissible packing size, the least integer >= 2^{M/8}. exp2 of
// a multiple-of-8 M is an exact power of two, so ceil never overshoots.
double target_size(int M) { return std::ceil(std::exp2(M / 8.0)); }

}  // namespace

int hamming(const std::vector<std::uint8_t>& a,
            const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size())
    throw InvalidArgument("hamming: word lengths differ (" +
                          std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

int verify_packing(const Packing& pack) {
  const int M = pack.M;
  if (M <= 0) throw PackingFailure("packing has M <= 0");
  if (pack.Theta.empty())
    throw PackingFailure("packing has no codewords; the zero word is required");
  for (std::size_t i = 0; i < pack.Theta.size(); ++i) {
    if (static_cast<int>(pack.Theta[i].size()) != M)
      throw PackingFailure("packing codeword " + std::to_string(i) +
                           " has length " +
                           std::to_string(pack.Theta[i].size()) +
                           ", expected M = " + std::to_string(M));
    for (std::uint8_t bit : pack.Theta[i])
      if (bit > 1)
        throw PackingFailure("packing codeword " + std::to_string(i) +
                             " has a non-binary entry");
  }
  for (std::uint8_t bit : pack.Theta[0])
    if (bit != 0)
      throw PackingFailure("packing codeword 0 is not the zero word");

  const int h_min = distance_floor(M);
  int min_seen = M + 1;
  for (std::size_t i = 0; i < pack.Theta.size(); ++i)
    for (std::size_t j = i + 1; j < pack.Theta.size(); ++j) {
      const int d = hamming(pack.Theta[i], pack.Theta[j]);
      if (d < h_min)
        throw PackingFailure(
            "packing codewords " + std::to_string(i) + " and " +
            std::to_string(j) + " are at Hamming distance " +
            std::to_string(d) + ", which does not exceed M/8 = " +
            fmt(M / 8.0));
      if (d < min_seen) min_seen = d;
    }

  const int N = static_cast<int>(pack.Theta.size()) - 1;
  if (N < target_size(M))
    throw PackingFailure("packing size N = " + std::to_string(N) +
                         " is below 2^{M/8} = " + fmt(std::exp2(M / 8.0)));
  if (pack.N != N)
    throw PackingFailure("packing N field (" + std::to_string(pack.N) +
                         ") disagrees with |Theta| - 1 = " +
                         std::to_string(N));
  return pack.Theta.size() > 1 ? min_seen : 0;
}

Packing vg_packing(int M, std::uint64_t seed) {
  if (M < 8)
    throw InvalidArgument("vg_packing requires M >= 8, got M = " +
                          std::to_string(M));
  const double target_d = target_size(M);
  // Greedy construction is quadratic in the target; sizes past ~2^20 are
  // far outside the regime this certificate is used in.
  if (target_d > 1048576.0)
    throw PackingFailure("packing target 2^{M/8} = " + fmt(target_d) +
                         " for M = " + std::to_string(M) +
                         " is too large to construct greedily");
  const int target = static_cast<int>(target_d);
  const int h_min = distance_floor(M);

  Packing pack;
  pack.M = M;
  pack.Theta.push_back(std::vector<std::uint8_t>(M, 0));

  Rng rng(seed, 0, Role::packing);
  const long long cap = 1000000;
  long long draws = 0;
  std::vector<std::uint8_t> cand(M);
  while (static_cast<int>(pack.Theta.size()) < target + 1 && draws < cap) {
    ++draws;
    std::uint64_t word = 0;
    int bits_left = 0;
    for (int i = 0; i < M; ++i) {
      if (bits_left == 0) {
        word = rng.next_u64();
        bits_left = 64;
      }
      cand[i] = static_cast<std::uint8_t>(word & 1u);
      word >>= 1;
      --bits_left;
    }
    bool ok = true;
    for (const auto& kept : pack.Theta)
      if (hamming(cand, kept) < h_min) {
        ok = false;
        break;
      }
    if (ok) pack.Theta.push_back(cand);
  }

  pack.N = static_cast<int>(pack.Theta.size()) - 1;
  if (pack.N < target)
    throw PackingFailure("packing search for M = " + std::to_string(M) +
                         " exhausted its draw cap (" + std::to_string(cap) +
                         ") at N = " + std::to_string(pack.N) +
                         ", short of the target " + std::to_string(target));
  pack.min_hamming = verify_packing(pack);
  return pack;
}

BetaFamily beta_family(const Packing& pack, const SpectralOperator& T,
                       const SpectralOperator& Khalf) {
  const int M = pack.M;
  if (M <= 0 || pack.Theta.empty())
    throw InvalidArgument("beta_family: empty packing");
  if (!T.grid() || !Khalf.grid())
    throw InvalidArgument("beta_family: operators without a grid");
  if (!T.grid()->same_as(*Khalf.grid()))
    throw GridMismatch("beta_family: T and Khalf live on different grids");
  if (T.rank() < 2 * M)
    throw InsufficientSpectrum(
        "beta_family needs the first 2M = " + std::to_string(2 * M) +
        " eigenpairs of the sandwich operator but only " +
        std::to_string(T.rank()) +
        " are retained; use a finer grid or a larger kernel/process "
        "truncation");

  // The family only touches eigenfunctions M+1 .. 2M; smooth each once.
  const GridPtr& grid = T.grid();
  std::vector<Eigen::VectorXd> smoothed(M);
  for (int j = 0; j < M; ++j)
    smoothed[j] = Khalf.apply(T.eigenfunction(M + j + 1)).values;

  const double scale = 1.0 / std::sqrt(static_cast<double>(M));
  BetaFamily family;
  family.betas.reserve(pack.Theta.size());
  family.k_norm_sq.resize(static_cast<int>(pack.Theta.size()));
  for (std::size_t i = 0; i < pack.Theta.size(); ++i) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(grid->size());
    int weight = 0;
    for (int j = 0; j < M; ++j)
      if (pack.Theta[i][j]) {
        acc += smoothed[j];
        ++weight;
      }
    family.betas.emplace_back(grid, Eigen::VectorXd(scale * acc));
    // Isometry: <Khalf phi_j, Khalf phi_k>_K = <phi_j, phi_k> = delta_jk,
    // so the RKHS norm is the plain coefficient norm.
    family.k_norm_sq[static_cast<int>(i)] =
        static_cast<double>(weight) / static_cast<double>(M);
  }
  family.max_k_norm_sq =
      family.k_norm_sq.size() > 0 ? family.k_norm_sq.maxCoeff() : 0.0;
  return family;
}

double kl_gaussian(const GridFunction& beta1, const GridFunction& beta2,
                   const CovarianceMatrix& C, double sigma2) {
  if (!(sigma2 > 0.0))
    throw InvalidArgument("kl_gaussian requires sigma2 > 0, got sigma2 = " +
                          fmt(sigma2));
  if (!beta1.grid || !beta2.grid || !C.grid)
    throw InvalidArgument("kl_gaussian: missing grid");
  if (!beta1.grid->same_as(*beta2.grid) || !beta1.grid->same_as(*C.grid))
    throw GridMismatch("kl_gaussian: beta1, beta2 and C on different grids");
  const int m = C.grid->size();
  if (C.values.rows() != m || C.values.cols() != m)
    throw InvalidArgument("kl_gaussian: covariance matrix is " +
                          std::to_string(C.values.rows()) + "x" +
                          std::to_string(C.values.cols()) +
                          ", expected " + std::to_string(m) + "x" +
                          std::to_string(m));

  const Eigen::VectorXd d = beta1.values - beta2.values;
  const Eigen::VectorXd lcd =
      C.values * (C.grid->weights().asDiagonal() * d);
  return 0.5 / sigma2 *
         quad_inner(GridFunction(C.grid, d), GridFunction(C.grid, lcd));
}

double fano_probability_floor(double n_hypotheses, double rho) {
  if (!(n_hypotheses > 1.0))
    throw InvalidArgument(
        "fano_probability_floor requires N > 1 hypotheses, got N = " +
        fmt(n_hypotheses));
  if (!(rho > 0.0))
    throw InvalidArgument("fano_probability_floor requires rho > 0, got rho = " +
                          fmt(rho));
  const double s = std::sqrt(n_hypotheses);
  return s / (1.0 + s) *
         (1.0 - 2.0 * rho - std::sqrt(2.0 * rho / std::log(n_hypotheses)));
}

LowerBoundCert lower_bound(int n, double r, double b1, double b2,
                           double sigma2, double rho, std::uint64_t seed) {
  if (!(r > 0.0))
    throw InvalidArgument("lower_bound requires r > 0, got r = " + fmt(r));
  if (!(b1 > 0.0) || !(b2 > 0.0) || !(b1 <= b2))
    throw InvalidArgument(
        "lower_bound requires envelope constants 0 < b1 <= b2, got b1 = " +
        fmt(b1) + ", b2 = " + fmt(b2));
  if (!(sigma2 > 0.0))
    throw InvalidArgument("lower_bound requires sigma2 > 0, got sigma2 = " +
                          fmt(sigma2));
  if (!(rho > 0.0 && rho < 0.125))
    throw InvalidArgument("lower_bound requires rho in (0, 1/8), got rho = " +
                          fmt(rho));
  const double K = 0.5 / sigma2;
  const double n_floor = rho * std::log(2.0) / (8.0 * b2 * K);
  if (n < 1 || static_cast<double>(n) < n_floor)
    throw InvalidArgument(
        "lower_bound requires n >= rho log2 / (8 b2 K_sigma2) = " +
        fmt(n_floor) + ", got n = " + std::to_string(n));

  const double expo = 1.0 / (1.0 + 2.0 * r);
  const double b0 =
      std::pow(8.0 * b2 * K / std::log(2.0), expo) * std::pow(rho, -expo);
  const double x = b0 * std::pow(static_cast<double>(n), expo);
  const double M_d = std::floor(x) + 1.0;  // smallest integer > x
  if (M_d < 8.0)
    throw InvalidArgument("lower_bound computed M = " + fmt(M_d) +
                          " < 8, too small for a certified packing; "
                          "increase n");
  if (M_d > 8388608.0)
    throw InvalidArgument("lower_bound computed M = " + fmt(M_d) +
                          ", beyond any constructible packing");
  const int M = static_cast<int>(M_d);

  Packing pack = vg_packing(M, seed);

  LowerBoundCert cert;
  cert.r = r;
  cert.b1 = b1;
  cert.b2 = b2;
  cert.sigma2 = sigma2;
  cert.K_sigma2 = K;
  cert.rho = rho;
  cert.n = n;
  cert.M = M;
  cert.N = pack.N;
  cert.min_hamming = pack.min_hamming;
  cert.kl_budget_lhs =
      b2 * static_cast<double>(n) * K * std::pow(static_cast<double>(M), -2.0 * r);
  cert.kl_budget_rhs = rho * std::log(static_cast<double>(pack.N));
  cert.kl_budget_ok = cert.kl_budget_lhs <= cert.kl_budget_rhs;
  cert.separation =
      b1 * std::pow(2.0, -(2.0 * r + 3.0)) *
      std::pow(static_cast<double>(M), -2.0 * r);
  const double rate = -2.0 * r / (1.0 + 2.0 * r);
  cert.lower_bound = b1 * std::pow(2.0, -4.0 * (1.0 + r)) *
                     std::pow(8.0 * b2 * K / (rho * std::log(2.0)), rate) *
                     std::pow(static_cast<double>(n), rate);
  cert.probability_floor =
      fano_probability_floor(static_cast<double>(pack.N), rho);
  return cert;
}

}  // namespace pflm
