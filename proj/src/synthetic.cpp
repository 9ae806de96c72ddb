#include "pflm/synthetic.hpp"

#include <cmath>

#include "pflm/rng.hpp"

namespace pflm {

namespace {

constexpr double kSqrt3 = 1.7320508075688772935274463415059;

int max_mode_count(const ModelSpec& spec) {
  int modes = static_cast<int>(
      std::max(spec.mu.size(), spec.f0_coeffs.size()));
  if (const auto* s = std::get_if<SyntheticSpectrum>(&spec.kernel)) {
    modes = std::max(modes, s->modes);
  }
  return modes;
}

// Basis values psi_1..psi_count as columns.
Eigen::MatrixXd basis_columns(const GridPtr& grid, int count) {
  Eigen::MatrixXd psi(grid->size(), count);
  for (int k = 1; k <= count; ++k) {
    psi.col(k - 1) = cosine_basis(k, grid).values;
  }
  return psi;
}

void check_grid_resolution(const ModelSpec& spec, const GridPtr& grid) {
  // Discrete cosine orthogonality is exact only for mode index <= m-1;
  // keep one spare so products of used basis elements stay exact.
  if (max_mode_count(spec) > grid->size() - 2) {
    throw InvalidArgument(
        "grid too coarse for the requested number of basis modes");
  }
}

}  // namespace

void validate_model(const ModelSpec& spec) {
  validate_kernel(spec.kernel);
  if (!spec.alpha0.allFinite()) {
    throw InvalidArgument("model: alpha0 has non-finite entries");
  }
  if (!spec.f0_coeffs.allFinite()) {
    throw InvalidArgument("model: f0 coefficients have non-finite entries");
  }
  if (!(spec.laplace_scale > 0.0)) {
    throw InvalidArgument("model: laplace scale must be > 0");
  }
  if (!(spec.sigma >= 0.0)) {
    throw InvalidArgument("model: sigma must be >= 0");
  }
  for (Eigen::Index k = 0; k < spec.mu.size(); ++k) {
    if (!(spec.mu[k] > 0.0)) {
      throw InvalidArgument("model: process spectrum must be positive");
    }
    if (k > 0 && spec.mu[k] > spec.mu[k - 1]) {
      throw InvalidArgument("model: process spectrum must be nonincreasing");
    }
  }
  if (const auto* s = std::get_if<SyntheticSpectrum>(&spec.kernel)) {
    if (spec.f0_coeffs.size() > s->modes) {
      throw InvalidArgument(
          "model: f0 extends beyond the kernel's retained span");
    }
  }
}

GridFunction true_slope(const ModelSpec& spec, const GridPtr& grid) {
  validate_model(spec);
  check_grid_resolution(spec, grid);
  const int m = grid->size();
  const int nf = static_cast<int>(spec.f0_coeffs.size());
  if (nf == 0) return GridFunction(grid, Eigen::VectorXd::Zero(m));

  if (const auto* s = std::get_if<SyntheticSpectrum>(&spec.kernel)) {
    // shared basis: Khalf psi_k = sqrt(nu_k) psi_k
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
    for (int k = 1; k <= nf; ++k) {
      const double root_nu =
          std::sqrt(s->scale) *
          std::pow(static_cast<double>(k), -0.5 * s->exponent);
      beta += spec.f0_coeffs[k - 1] * root_nu * cosine_basis(k, grid).values;
    }
    return GridFunction(grid, std::move(beta));
  }

  const auto Khalf =
      operator_sqrt(spectral_decompose(kernel_matrix(spec.kernel, grid)));
  Eigen::VectorXd f0 = basis_columns(grid, nf) * spec.f0_coeffs;
  return Khalf.apply(GridFunction(grid, std::move(f0)));
}

PopulationOps population_operators(const ModelSpec& spec, const GridPtr& grid) {
  validate_model(spec);
  check_grid_resolution(spec, grid);
  const int m = grid->size();
  const int p = spec.p();
  const double b = spec.laplace_scale;

  PopulationOps pop;
  pop.D = 2.0 * b * b * Eigen::MatrixXd::Identity(p, p);
  pop.lambda_max = spec.lambda_max();
  pop.M1 = spec.M1();
  pop.upsilon = spec.upsilon();
  pop.M2 = spec.M2();
  pop.d_inv_norm = p > 0 ? 1.0 / (2.0 * b * b) : 0.0;

  const int nmu = static_cast<int>(spec.mu.size());
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m, m);
  if (nmu > 0) {
    const Eigen::MatrixXd psi = basis_columns(grid, nmu);
    C = psi * spec.mu.asDiagonal() * psi.transpose();
    C = 0.5 * (C + C.transpose().eval());
  }
  pop.C = CovarianceMatrix{grid, std::move(C)};

  pop.K = spectral_decompose(kernel_matrix(spec.kernel, grid));
  pop.Khalf = operator_sqrt(pop.K);
  pop.kappa = pop.Khalf.operator_norm();
  pop.T = sandwich(pop.Khalf, pop.C);

  const int nf = static_cast<int>(spec.f0_coeffs.size());
  Eigen::VectorXd f0 = Eigen::VectorXd::Zero(m);
  if (nf > 0) f0 = basis_columns(grid, nf) * spec.f0_coeffs;
  pop.f0 = GridFunction(grid, std::move(f0));
  pop.beta0 = pop.Khalf.apply(pop.f0);
  pop.f0_norm = quad_norm(pop.f0);
  return pop;
}

Dataset gen_dataset(const ModelSpec& spec, const GridPtr& grid, int n,
                    std::uint64_t seed) {
  validate_model(spec);
  check_grid_resolution(spec, grid);
  if (n < 1) throw InvalidArgument("gen_dataset: requires n >= 1");

  const int m = grid->size();
  const int p = spec.p();
  const int nmu = static_cast<int>(spec.mu.size());
  const GridFunction beta0 = true_slope(spec, grid);
  const Eigen::MatrixXd psi =
      nmu > 0 ? basis_columns(grid, nmu) : Eigen::MatrixXd(m, 0);
  const Eigen::VectorXd root_mu = spec.mu.cwiseSqrt();
  // <psi_k, beta0> against quadrature weights, once
  const Eigen::VectorXd beta_coeffs =
      psi.transpose() * (grid->weights().asDiagonal() * beta0.values);
  const double m2_bound = spec.M2() + 1e-9;

  Dataset data;
  data.grid = grid;
  data.seed = seed;
  data.X.resize(n, p);
  data.Y.resize(n, m);
  data.z.resize(n);
  data.eps.resize(n);

  for (int i = 0; i < n; ++i) {
    Rng rx(seed, static_cast<std::uint64_t>(i), Role::covariates);
    for (int j = 0; j < p; ++j) {
      data.X(i, j) = rx.laplace(spec.laplace_scale);
    }

    Rng ry(seed, static_cast<std::uint64_t>(i), Role::process);
    Eigen::VectorXd zeta(nmu);
    for (int k = 0; k < nmu; ++k) zeta[k] = ry.uniform(-kSqrt3, kSqrt3);
    const Eigen::VectorXd coeffs =
        (root_mu.array() * zeta.array()).matrix();
    data.Y.row(i) = (psi * coeffs).transpose();

    Rng re(seed, static_cast<std::uint64_t>(i), Role::noise);
    double eps = 0.0;
    if (spec.sigma > 0.0) {
      eps = spec.noise == NoiseKind::gaussian
                ? spec.sigma * re.normal()
                : re.uniform(-kSqrt3 * spec.sigma, kSqrt3 * spec.sigma);
    }
    data.eps[i] = eps;
    data.z[i] = (p > 0 ? data.X.row(i).dot(spec.alpha0) : 0.0) +
                coeffs.dot(beta_coeffs) + eps;

    // Assumption-2 style almost-sure bound, enforced rather than assumed
    const double ynorm =
        std::sqrt(grid->inner(data.Y.row(i), data.Y.row(i)));
    if (ynorm > m2_bound) {
      throw Error("gen_dataset: ||Y|| exceeded its almost-sure bound");
    }
  }
  return data;
}

Dataset gen_dataset(const ModelSpec& spec, const PopulationOps& pop, int n,
                    std::uint64_t seed) {
  return gen_dataset(spec, pop.f0.grid, n, seed);
}

double true_prediction(const ModelSpec& spec, const PopulationOps& pop,
                       const Eigen::VectorXd& x, const GridFunction& y) {
  if (x.size() != spec.alpha0.size()) {
    throw InvalidArgument("true_prediction: covariate dimension mismatch");
  }
  const double linear = spec.p() > 0 ? x.dot(spec.alpha0) : 0.0;
  return linear + quad_inner(y, pop.beta0);
}

double true_prediction(const ModelSpec& spec, const Eigen::VectorXd& x,
                       const GridFunction& y) {
  if (x.size() != spec.alpha0.size()) {
    throw InvalidArgument("true_prediction: covariate dimension mismatch");
  }
  const double linear = spec.p() > 0 ? x.dot(spec.alpha0) : 0.0;
  return linear + quad_inner(y, true_slope(spec, y.grid));
}

}  // namespace pflm
