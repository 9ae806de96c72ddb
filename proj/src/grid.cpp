#include "pflm/grid.hpp"

#include <cmath>
#include <numbers>

namespace pflm {

double Grid::inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  if (f.size() != points_.size() || g.size() != points_.size()) {
    throw GridMismatch("inner: vector length does not match grid size");
  }
  return (weights_.array() * f.array() * g.array()).sum();
}

GridFunction::GridFunction(GridPtr g, Eigen::VectorXd v)
    : grid(std::move(g)), values(std::move(v)) {
  if (!grid) throw InvalidArgument("GridFunction: null grid");
  if (values.size() != grid->size()) {
    throw GridMismatch("GridFunction: value count does not match grid size");
  }
}

GridPtr make_uniform_grid(double a, double b, int m) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
    throw InvalidArgument("make_uniform_grid: requires finite a < b");
  }
  if (m < 2) throw InvalidArgument("make_uniform_grid: requires m >= 2");

  const double h = (b - a) / static_cast<double>(m - 1);
  Eigen::VectorXd points(m);
  for (int j = 0; j < m; ++j) points[j] = a + h * static_cast<double>(j);
  points[m - 1] = b;  // exact endpoint regardless of rounding

  Eigen::VectorXd weights = Eigen::VectorXd::Constant(m, h);
  weights[0] = 0.5 * h;
  weights[m - 1] = 0.5 * h;

  return GridPtr(new Grid(a, b, std::move(points), std::move(weights)));
}

double quad_inner(const GridFunction& f, const GridFunction& g) {
  if (!f.grid || !g.grid) throw InvalidArgument("quad_inner: null grid");
  if (!f.grid->same_as(*g.grid)) {
    throw GridMismatch("quad_inner: functions live on different grids");
  }
  return f.grid->inner(f.values, g.values);
}

double quad_norm(const GridFunction& f) {
  return std::sqrt(quad_inner(f, f));
}

GridFunction cosine_basis(int k, const GridPtr& grid) {
  if (k < 1) throw InvalidArgument("cosine_basis: requires k >= 1");
  if (!grid) throw InvalidArgument("cosine_basis: null grid");
  if (grid->a() != 0.0 || grid->b() != 1.0) {
    throw InvalidArgument("cosine_basis: basis is defined on [0,1]");
  }
  const int m = grid->size();
  Eigen::VectorXd v(m);
  if (k == 1) {
    v.setOnes();
  } else {
    const double freq = std::numbers::pi * static_cast<double>(k - 1);
    const double amp = std::numbers::sqrt2;
    for (int j = 0; j < m; ++j) v[j] = amp * std::cos(freq * grid->points()[j]);
  }
  return GridFunction(grid, std::move(v));
}

}  // namespace pflm
