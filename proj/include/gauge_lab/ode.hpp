#pragma once

#include <functional>

#include "gauge_lab/time_grid.hpp"

namespace gauge_lab {

using ForceFn = std::function<Vector(double t, const Vector& x)>;
using JacobianFn = std::function<Matrix(double t, const Vector& x)>;

/// dx/dt = F(t, x) on R^d. Missing derivative callbacks fall back to
/// centered finite differences.
struct GenericNode {
  int dim = 0;
  ForceFn force;
  JacobianFn jacobian_x;
  ForceFn time_derivative;
};

/// dF/dx at (t, x); analytic when provided, else centered differences with
/// per-component step max(1e-6, 1e-6 |x_j|).
Matrix jacobian_x(const GenericNode& node, double t, const Vector& x);

/// dF/dt at (t, x); analytic when provided, else centered differences.
Vector time_derivative(const GenericNode& node, double t, const Vector& x);

/// Row k of `states` is x(t_k).
struct Trajectory {
  TimeGrid grid;
  Matrix states;

  Vector state(int k) const { return states.row(k).transpose(); }
  Vector final_state() const { return state(grid.n_steps()); }
};

/// Classical RK4, one step per grid cell. Throws NonFiniteState on blow-up.
Trajectory integrate(const GenericNode& node, const Vector& x0, const TimeGrid& grid);

/// dx/dt = w(t) x + b(t) with w, b piecewise-linear on a shared grid.
struct LinearNodeParams {
  MatrixField w;
  VectorField b;

  LinearNodeParams(MatrixField w, VectorField b);

  int dim() const { return static_cast<int>(b[0].size()); }
  const TimeGrid& grid() const { return w.grid(); }

  static LinearNodeParams zero(const TimeGrid& grid, int d);
};

Trajectory integrate_linear(const LinearNodeParams& params, const Vector& x0);

/// Final states x(T) for every column of X0, same stepper as integrate_linear.
Matrix integrate_linear_batch(const LinearNodeParams& params, const Matrix& X0);

/// The linear node as a GenericNode with analytic derivatives.
GenericNode as_generic(const LinearNodeParams& params);

/// The node extended by its time coordinate: state (t, x) evolves in s with
/// dt/ds = f0(s, (t, x)) and dx/ds = base.force(t, x).
struct SpacetimeNode {
  GenericNode base;
  std::function<double(double s, const Vector& point)> f0;

  int dim() const { return base.dim + 1; }
};

SpacetimeNode lift_to_spacetime(const GenericNode& node);

/// Integrates a spacetime node from (0, x0); the trajectory has d + 1 columns
/// with the time coordinate first.
Trajectory integrate_spacetime(const SpacetimeNode& node, const Vector& x0, const TimeGrid& grid);

}  // namespace gauge_lab
