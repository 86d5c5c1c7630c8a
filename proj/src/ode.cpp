#include "gauge_lab/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gauge_lab {

namespace {

template <typename Rhs>
Trajectory rk4(const Rhs& rhs, const Vector& y0, const TimeGrid& grid) {
  if (!y0.allFinite()) throw NonFiniteState("initial condition is not finite");
  const double h = grid.step();
  Matrix states(grid.node_count(), y0.size());
  states.row(0) = y0.transpose();
  Vector y = y0;
  for (int k = 0; k < grid.n_steps(); ++k) {
    const double t = grid.time(k);
    const double t_mid = t + 0.5 * h;
    const double t_next = grid.time(k + 1);
    const Vector k1 = rhs(t, y);
    const Vector k2 = rhs(t_mid, Vector(y + 0.5 * h * k1));
    const Vector k3 = rhs(t_mid, Vector(y + 0.5 * h * k2));
    const Vector k4 = rhs(t_next, Vector(y + h * k3));
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) {
      throw NonFiniteState("state became non-finite at t = " + std::to_string(t_next));
    }
    states.row(k + 1) = y.transpose();
  }
  return Trajectory{grid, std::move(states)};
}

}  // namespace

Matrix jacobian_x(const GenericNode& node, double t, const Vector& x) {
  if (node.jacobian_x) return node.jacobian_x(t, x);
  Matrix jac(node.dim, x.size());
  Vector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = std::max(1e-6, 1e-6 * std::abs(x[j]));
    probe[j] = x[j] + h;
    const Vector up = node.force(t, probe);
    probe[j] = x[j] - h;
    const Vector down = node.force(t, probe);
    probe[j] = x[j];
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

Vector time_derivative(const GenericNode& node, double t, const Vector& x) {
  if (node.time_derivative) return node.time_derivative(t, x);
  const double h = std::max(1e-6, 1e-6 * std::abs(t));
  return (node.force(t + h, x) - node.force(t - h, x)) / (2.0 * h);
}

Trajectory integrate(const GenericNode& node, const Vector& x0, const TimeGrid& grid) {
  if (node.dim != x0.size()) {
    throw ShapeError("node dim " + std::to_string(node.dim) + " vs x0 length " +
                     std::to_string(x0.size()));
  }
  return rk4(node.force, x0, grid);
}

LinearNodeParams::LinearNodeParams(MatrixField w_field, VectorField b_field)
    : w(std::move(w_field)), b(std::move(b_field)) {
  if (!(w.grid() == b.grid())) throw GridMismatch("w and b live on different grids");
  const auto d = b[0].size();
  if (w[0].rows() != d || w[0].cols() != d) {
    throw ShapeError("w must be " + std::to_string(d) + "x" + std::to_string(d));
  }
}

LinearNodeParams LinearNodeParams::zero(const TimeGrid& grid, int d) {
  return LinearNodeParams(MatrixField::constant(grid, Matrix::Zero(d, d)),
                          VectorField::constant(grid, Vector::Zero(d)));
}

Trajectory integrate_linear(const LinearNodeParams& params, const Vector& x0) {
  if (params.dim() != x0.size()) throw ShapeError("x0 length does not match params");
  const TimeGrid& grid = params.grid();
  const double h = grid.step();
  Matrix states(grid.node_count(), x0.size());
  states.row(0) = x0.transpose();
  Vector y = x0;
  for (int k = 0; k < grid.n_steps(); ++k) {
    const Matrix& w0 = params.w[k];
    const Matrix& w1 = params.w[k + 1];
    const Matrix wm = 0.5 * (w0 + w1);
    const Vector bm = 0.5 * (params.b[k] + params.b[k + 1]);
    const Vector k1 = w0 * y + params.b[k];
    const Vector k2 = wm * (y + 0.5 * h * k1) + bm;
    const Vector k3 = wm * (y + 0.5 * h * k2) + bm;
    const Vector k4 = w1 * (y + h * k3) + params.b[k + 1];
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) {
      throw NonFiniteState("state became non-finite at t = " + std::to_string(grid.time(k + 1)));
    }
    states.row(k + 1) = y.transpose();
  }
  return Trajectory{grid, std::move(states)};
}

Matrix integrate_linear_batch(const LinearNodeParams& params, const Matrix& X0) {
  if (params.dim() != X0.rows()) throw ShapeError("input rows do not match params");
  const TimeGrid& grid = params.grid();
  const double h = grid.step();
  Matrix y = X0;
  for (int k = 0; k < grid.n_steps(); ++k) {
    const Matrix& w0 = params.w[k];
    const Matrix& w1 = params.w[k + 1];
    const Matrix wm = 0.5 * (w0 + w1);
    const Vector bm = 0.5 * (params.b[k] + params.b[k + 1]);
    const Matrix k1 = (w0 * y).colwise() + params.b[k];
    const Matrix k2 = (wm * (y + 0.5 * h * k1)).colwise() + bm;
    const Matrix k3 = (wm * (y + 0.5 * h * k2)).colwise() + bm;
    const Matrix k4 = (w1 * (y + h * k3)).colwise() + params.b[k + 1];
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) {
      throw NonFiniteState("state became non-finite at t = " + std::to_string(grid.time(k + 1)));
    }
  }
  return y;
}

GenericNode as_generic(const LinearNodeParams& params) {
  GenericNode node;
  node.dim = params.dim();
  node.force = [params](double t, const Vector& x) -> Vector {
    return params.w.at(t) * x + params.b.at(t);
  };
  node.jacobian_x = [params](double t, const Vector&) -> Matrix { return params.w.at(t); };
  node.time_derivative = [params](double t, const Vector& x) -> Vector {
    return params.w.slope(t) * x + params.b.slope(t);
  };
  return node;
}

SpacetimeNode lift_to_spacetime(const GenericNode& node) {
  return SpacetimeNode{node, [](double, const Vector&) { return 1.0; }};
}

Trajectory integrate_spacetime(const SpacetimeNode& node, const Vector& x0, const TimeGrid& grid) {
  const int d = node.base.dim;
  if (d != x0.size()) throw ShapeError("spacetime node dim does not match x0");
  Vector y0(d + 1);
  y0[0] = 0.0;
  y0.tail(d) = x0;
  auto rhs = [&](double s, const Vector& point) -> Vector {
    Vector out(d + 1);
    out[0] = node.f0(s, point);
    out.tail(d) = node.base.force(point[0], point.tail(d));
    return out;
  };
  return rk4(rhs, y0, grid);
}

}  // namespace gauge_lab
