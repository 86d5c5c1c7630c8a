#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gauge_lab/ode.hpp"

namespace gauge_lab {

/// Finite reparametrization x~(t) = G(t) x(t) + c(t) of a linear node.
/// The input-output map is preserved when G(0) = G(T) = I and
/// c(0) = c(T) = 0.
struct GaugeTransformLinear {
  MatrixField G;
  std::optional<MatrixField> G_dot;
  VectorField c;
  std::optional<VectorField> c_dot;

  int dim() const { return static_cast<int>(c[0].size()); }
  const TimeGrid& grid() const { return G.grid(); }

  /// dG/dt at every node: analytic when present, else finite differences.
  MatrixField G_rate() const;
  VectorField c_rate() const;

  /// max(|G(0) - I|, |G(T) - I|, |c(0)|, |c(T)|), max-abs entries.
  double boundary_defect() const;

  /// Largest 2-norm condition number over the nodes.
  double max_condition() const;

  static GaugeTransformLinear identity(const TimeGrid& grid, int d);
};

constexpr double kSingularConditionLimit = 1e12;

/// Throws SingularGauge if any G(t_k) has condition number above 1e12.
void require_invertible(const GaugeTransformLinear& gauge);

/// Gauge equivalent to applying `first`, then `second` to the result:
/// G = G1 G2, c = G1 c2 + c1. Derivatives follow the product rule.
GaugeTransformLinear compose(const GaugeTransformLinear& first, const GaugeTransformLinear& second);

/// w' = G^-1 w G - G^-1 dG/dt at every node.
MatrixField transform_weight(const MatrixField& w, const GaugeTransformLinear& gauge);

/// w' = G^-1 w G - G^-1 dG/dt, b' = G^-1 (b + w c - dc/dt) at every node.
LinearNodeParams apply_linear_gauge(const LinearNodeParams& params, const GaugeTransformLinear& gauge);

/// Infinitesimal time shift t -> t + eps(t) written as a gauge:
/// G = I + eps w, c = eps b.
GaugeTransformLinear time_reparam_as_gauge(const LinearNodeParams& params, const ScalarField& eps0);

/// Infinitesimal spacetime vector field eps^mu(t, x); component 0 is the
/// time part, components 1..d the spatial part.
struct DiffeoGenerator {
  int dim = 0;
  std::function<Vector(double t, const Vector& x)> epsilon;
  /// d eps / dt, length d + 1.
  std::function<Vector(double t, const Vector& x)> d_dt;
  /// d eps / dx, (d + 1) x d.
  std::function<Matrix(double t, const Vector& x)> d_dx;

  Vector rate_t(double t, const Vector& x) const;
  Matrix rate_x(double t, const Vector& x) const;

  /// Largest |eps(0, x)| or |eps(T, x)| over the probes.
  double boundary_defect(std::span<const Vector> probes, double t_end) const;
};

/// F' = F + (dF/dx) eps - (d eps/dx) F - d eps/dt with eps scaled by amplitude.
/// The generator's time component is ignored.
GenericNode spatial_diffeo_deform(const GenericNode& node, const DiffeoGenerator& eps, double amplitude);

/// F' = F + F d(eps0)/dt + (dF/dt) eps0 with eps0 scaled by amplitude.
GenericNode time_reparam_deform(const GenericNode& node, const TimeFunction& eps0, double amplitude);

/// F'^mu = F^mu + a (eps^nu d_nu F^mu - F^nu d_nu eps^mu) on the spacetime
/// lift (F^0 = 1).
SpacetimeNode lie_deform(const GenericNode& node, const DiffeoGenerator& eps, double amplitude);

struct InputDeviation {
  double absolute = 0.0;
  double relative = 0.0;
  std::string error;
};

struct InvarianceReport {
  std::vector<InputDeviation> per_input;
  double max_absolute = 0.0;
  double max_relative = 0.0;
  int failures = 0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Integrates both nodes from every input and compares x(T). Numerical
/// errors are recorded per input and count as failures.
InvarianceReport verify_invariance(const GenericNode& a, const GenericNode& b,
                                   std::span<const Vector> inputs, const TimeGrid& grid,
                                   double tolerance);

/// Same check for two linear nodes integrated on their own grids.
InvarianceReport verify_invariance(const LinearNodeParams& a, const LinearNodeParams& b,
                                   std::span<const Vector> inputs, double tolerance);

}  // namespace gauge_lab
