#include "gauge_lab/gauge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gauge_lab {

namespace {

void require_same_grid(const TimeGrid& a, const TimeGrid& b, const char* what) {
  if (!(a == b)) throw GridMismatch(what);
}

double condition_number(const Matrix& g) {
  const Eigen::JacobiSVD<Matrix> svd(g);
  const auto& s = svd.singularValues();
  const double smallest = s[s.size() - 1];
  if (smallest == 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / smallest;
}

}  // namespace

MatrixField GaugeTransformLinear::G_rate() const { return G_dot ? *G_dot : G.derivative(); }

VectorField GaugeTransformLinear::c_rate() const { return c_dot ? *c_dot : c.derivative(); }

double GaugeTransformLinear::boundary_defect() const {
  const int last = grid().n_steps();
  const Matrix eye = Matrix::Identity(dim(), dim());
  return std::max({(G[0] - eye).cwiseAbs().maxCoeff(), (G[last] - eye).cwiseAbs().maxCoeff(),
                   c[0].cwiseAbs().maxCoeff(), c[last].cwiseAbs().maxCoeff()});
}

double GaugeTransformLinear::max_condition() const {
  double worst = 1.0;
  for (const auto& g : G.values()) worst = std::max(worst, condition_number(g));
  return worst;
}

GaugeTransformLinear GaugeTransformLinear::identity(const TimeGrid& grid, int d) {
  return GaugeTransformLinear{MatrixField::constant(grid, Matrix::Identity(d, d)),
                              MatrixField::constant(grid, Matrix::Zero(d, d)),
                              VectorField::constant(grid, Vector::Zero(d)),
                              VectorField::constant(grid, Vector::Zero(d))};
}

void require_invertible(const GaugeTransformLinear& gauge) {
  for (int k = 0; k < gauge.G.size(); ++k) {
    const double cond = condition_number(gauge.G[k]);
    if (!(cond <= kSingularConditionLimit)) {
      throw SingularGauge("G(t_" + std::to_string(k) + ") has condition number " +
                          std::to_string(cond));
    }
  }
}

GaugeTransformLinear compose(const GaugeTransformLinear& first, const GaugeTransformLinear& second) {
  require_same_grid(first.grid(), second.grid(), "composed gauges live on different grids");
  const TimeGrid& grid = first.grid();
  const MatrixField g1_dot = first.G_rate();
  const MatrixField g2_dot = second.G_rate();
  const VectorField c1_dot = first.c_rate();
  const VectorField c2_dot = second.c_rate();
  std::vector<Matrix> g, g_dot;
  std::vector<Vector> c, c_dot;
  for (int k = 0; k < grid.node_count(); ++k) {
    g.push_back(first.G[k] * second.G[k]);
    g_dot.push_back(g1_dot[k] * second.G[k] + first.G[k] * g2_dot[k]);
    c.push_back(first.G[k] * second.c[k] + first.c[k]);
    c_dot.push_back(g1_dot[k] * second.c[k] + first.G[k] * c2_dot[k] + c1_dot[k]);
  }
  return GaugeTransformLinear{MatrixField(grid, std::move(g)), MatrixField(grid, std::move(g_dot)),
                              VectorField(grid, std::move(c)), VectorField(grid, std::move(c_dot))};
}

MatrixField transform_weight(const MatrixField& w, const GaugeTransformLinear& gauge) {
  require_same_grid(w.grid(), gauge.grid(), "weight field and gauge live on different grids");
  require_invertible(gauge);
  const MatrixField g_dot = gauge.G_rate();
  std::vector<Matrix> out;
  out.reserve(w.size());
  for (int k = 0; k < w.size(); ++k) {
    const auto lu = gauge.G[k].partialPivLu();
    out.push_back(lu.solve(w[k] * gauge.G[k]) - lu.solve(g_dot[k]));
  }
  return MatrixField(w.grid(), std::move(out));
}

LinearNodeParams apply_linear_gauge(const LinearNodeParams& params, const GaugeTransformLinear& gauge) {
  require_same_grid(params.grid(), gauge.grid(), "params and gauge live on different grids");
  if (gauge.dim() != params.dim()) throw ShapeError("gauge dimension does not match params");
  require_invertible(gauge);
  const MatrixField g_dot = gauge.G_rate();
  const VectorField c_dot = gauge.c_rate();
  std::vector<Matrix> w;
  std::vector<Vector> b;
  for (int k = 0; k < params.grid().node_count(); ++k) {
    const auto lu = gauge.G[k].partialPivLu();
    w.push_back(lu.solve(params.w[k] * gauge.G[k]) - lu.solve(g_dot[k]));
    b.push_back(lu.solve(Vector(params.b[k] + params.w[k] * gauge.c[k] - c_dot[k])));
  }
  return LinearNodeParams(MatrixField(params.grid(), std::move(w)),
                          VectorField(params.grid(), std::move(b)));
}

GaugeTransformLinear time_reparam_as_gauge(const LinearNodeParams& params, const ScalarField& eps0) {
  require_same_grid(params.grid(), eps0.grid(), "time shift and params live on different grids");
  const int d = params.dim();
  const TimeGrid& grid = params.grid();
  std::vector<Matrix> g;
  std::vector<Vector> c;
  for (int k = 0; k < grid.node_count(); ++k) {
    g.push_back(Matrix::Identity(d, d) + eps0[k] * params.w[k]);
    c.push_back(eps0[k] * params.b[k]);
  }
  GaugeTransformLinear gauge{MatrixField(grid, std::move(g)), std::nullopt,
                             VectorField(grid, std::move(c)), std::nullopt};
  require_invertible(gauge);
  return gauge;
}

Vector DiffeoGenerator::rate_t(double t, const Vector& x) const {
  if (d_dt) return d_dt(t, x);
  const double h = std::max(1e-6, 1e-6 * std::abs(t));
  return (epsilon(t + h, x) - epsilon(t - h, x)) / (2.0 * h);
}

Matrix DiffeoGenerator::rate_x(double t, const Vector& x) const {
  if (d_dx) return d_dx(t, x);
  Matrix jac(dim + 1, dim);
  Vector probe = x;
  for (int j = 0; j < dim; ++j) {
    const double h = std::max(1e-6, 1e-6 * std::abs(x[j]));
    probe[j] = x[j] + h;
    const Vector up = epsilon(t, probe);
    probe[j] = x[j] - h;
    const Vector down = epsilon(t, probe);
    probe[j] = x[j];
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

double DiffeoGenerator::boundary_defect(std::span<const Vector> probes, double t_end) const {
  double worst = 0.0;
  for (const auto& x : probes) {
    worst = std::max(worst, epsilon(0.0, x).cwiseAbs().maxCoeff());
    worst = std::max(worst, epsilon(t_end, x).cwiseAbs().maxCoeff());
  }
  return worst;
}

GenericNode spatial_diffeo_deform(const GenericNode& node, const DiffeoGenerator& eps, double amplitude) {
  if (eps.dim != node.dim) throw ShapeError("generator dimension does not match node");
  GenericNode out;
  out.dim = node.dim;
  out.force = [node, eps, amplitude](double t, const Vector& x) -> Vector {
    const int d = node.dim;
    const Vector f = node.force(t, x);
    if (amplitude == 0.0) return f;
    const Vector e = eps.epsilon(t, x).tail(d);
    const Matrix de_dx = eps.rate_x(t, x).bottomRows(d);
    const Vector de_dt = eps.rate_t(t, x).tail(d);
    return f + amplitude * (jacobian_x(node, t, x) * e - de_dx * f - de_dt);
  };
  return out;
}

GenericNode time_reparam_deform(const GenericNode& node, const TimeFunction& eps0, double amplitude) {
  GenericNode out;
  out.dim = node.dim;
  out.force = [node, eps0, amplitude](double t, const Vector& x) -> Vector {
    const Vector f = node.force(t, x);
    if (amplitude == 0.0) return f;
    return f + amplitude * (eps0.rate(t) * f + eps0(t) * time_derivative(node, t, x));
  };
  return out;
}

namespace {

// Deformed spacetime force F'^mu at the point (t, x).
Vector lie_deformed_force(const GenericNode& node, const DiffeoGenerator& eps, double amplitude,
                          const Vector& point) {
  const int d = node.dim;
  const double t = point[0];
  const Vector x = point.tail(d);
  Vector f(d + 1);
  f[0] = 1.0;
  f.tail(d) = node.force(t, x);
  if (amplitude == 0.0) return f;

  Matrix df = Matrix::Zero(d + 1, d + 1);
  df.block(1, 0, d, 1) = time_derivative(node, t, x);
  df.block(1, 1, d, d) = jacobian_x(node, t, x);
  Matrix de(d + 1, d + 1);
  de.col(0) = eps.rate_t(t, x);
  de.rightCols(d) = eps.rate_x(t, x);
  return f + amplitude * (df * eps.epsilon(t, x) - de * f);
}

}  // namespace

SpacetimeNode lie_deform(const GenericNode& node, const DiffeoGenerator& eps, double amplitude) {
  if (eps.dim != node.dim) throw ShapeError("generator dimension does not match node");
  const int d = node.dim;
  SpacetimeNode out;
  out.base.dim = d;
  out.base.force = [node, eps, amplitude, d](double t, const Vector& x) -> Vector {
    Vector point(d + 1);
    point[0] = t;
    point.tail(d) = x;
    return lie_deformed_force(node, eps, amplitude, point).tail(d);
  };
  out.f0 = [node, eps, amplitude](double, const Vector& point) -> double {
    return lie_deformed_force(node, eps, amplitude, point)[0];
  };
  return out;
}

namespace {

template <typename FinalA, typename FinalB>
InvarianceReport compare_outputs(std::span<const Vector> inputs, double tolerance,
                                 const FinalA& final_a, const FinalB& final_b) {
  InvarianceReport report;
  report.tolerance = tolerance;
  for (const auto& x0 : inputs) {
    InputDeviation dev;
    try {
      const Vector a = final_a(x0);
      const Vector b = final_b(x0);
      dev.absolute = (a - b).norm();
      dev.relative = dev.absolute / std::max(a.norm(), std::numeric_limits<double>::min());
      report.max_absolute = std::max(report.max_absolute, dev.absolute);
      report.max_relative = std::max(report.max_relative, dev.relative);
    } catch (const Error& e) {
      dev.error = e.what();
      ++report.failures;
    }
    report.per_input.push_back(std::move(dev));
  }
  report.passed = report.failures == 0 && report.max_absolute <= tolerance;
  return report;
}

}  // namespace

InvarianceReport verify_invariance(const GenericNode& a, const GenericNode& b,
                                   std::span<const Vector> inputs, const TimeGrid& grid,
                                   double tolerance) {
  if (a.dim != b.dim) throw ShapeError("compared nodes differ in dimension");
  return compare_outputs(
      inputs, tolerance, [&](const Vector& x0) { return integrate(a, x0, grid).final_state(); },
      [&](const Vector& x0) { return integrate(b, x0, grid).final_state(); });
}

InvarianceReport verify_invariance(const LinearNodeParams& a, const LinearNodeParams& b,
                                   std::span<const Vector> inputs, double tolerance) {
  if (a.dim() != b.dim()) throw ShapeError("compared nodes differ in dimension");
  return compare_outputs(
      inputs, tolerance, [&](const Vector& x0) { return integrate_linear(a, x0).final_state(); },
      [&](const Vector& x0) { return integrate_linear(b, x0).final_state(); });
}

}  // namespace gauge_lab
