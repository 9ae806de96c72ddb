#pragma once

#include <Eigen/Dense>
#include <memory>

#include "pflm/errors.hpp"

namespace pflm {

// Uniform discretization of a compact interval with composite-trapezoid
// weights. Every L2 inner product downstream is the weighted sum
// sum_j w_j f_j g_j, so a Grid fixes the geometry of the whole model:
// a function is identified with its value vector, an operator with how it
// maps value vectors under that weighted product.
//
// Immutable after construction and shared by pointer; workers may read the
// same Grid concurrently.
class Grid {
 public:
  double a() const { return a_; }
  double b() const { return b_; }
  int size() const { return static_cast<int>(points_.size()); }
  const Eigen::VectorXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  // Same discretization: equal endpoints and point count. Uniform grids
  // with equal (a, b, m) have identical points by construction.
  bool same_as(const Grid& other) const {
    return size() == other.size() && a_ == other.a_ && b_ == other.b_;
  }

  double inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;

 private:
  Grid(double a, double b, Eigen::VectorXd points, Eigen::VectorXd weights)
      : a_(a), b_(b), points_(std::move(points)), weights_(std::move(weights)) {}
  friend std::shared_ptr<const Grid> make_uniform_grid(double a, double b,
                                                       int m);

  double a_;
  double b_;
  Eigen::VectorXd points_;
  Eigen::VectorXd weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

struct GridFunction {
  GridPtr grid;
  Eigen::VectorXd values;

  GridFunction() = default;
  GridFunction(GridPtr g, Eigen::VectorXd v);
};

// Composite trapezoid rule: w_1 = w_m = h/2, interior w_j = h.
GridPtr make_uniform_grid(double a, double b, int m);

// sum_j w_j f_j g_j; rejects functions living on different grids.
double quad_inner(const GridFunction& f, const GridFunction& g);
double quad_norm(const GridFunction& f);

// psi_1 = 1, psi_k(t) = sqrt(2) cos((k-1) pi t). Requires the unit interval;
// the basis is quad-orthonormal there (exactly, by the discrete cosine
// orthogonality on a uniform grid).
GridFunction cosine_basis(int k, const GridPtr& grid);

}  // namespace pflm
