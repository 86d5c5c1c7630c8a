#pragma once

#include "gauge_lab/gauge.hpp"

namespace gauge_lab {

enum class Orientation { forward, reverse };

/// Propagator of dx/dt = w(t) x from t2 to t1.
struct WilsonLine {
  Matrix matrix;
  double t1 = 0.0;
  double t2 = 0.0;
  Orientation orientation = Orientation::forward;
};

/// Time-ordered exponential of w between t2 and t1, built as a product of
/// midpoint exponentials exp(w(t_mid) dt) over the grid cells covered (each
/// cell split into `substeps` equal pieces). Forward lines (t1 >= t2) put
/// later factors on the left. Reverse lines (t1 < t2) are the reverse-ordered
/// product of exp(-w dt), earlier factors on the left, so that
/// W(w)_{t1:t2} W(w)_{t2:t1} = I.
/// Throws OutOfDomain if an endpoint lies outside [0, T].
WilsonLine wilson_line(const MatrixField& w, double t1, double t2, int substeps = 1);

struct InverseIdentityReport {
  /// |W_{t1:t2} W_{t2:t1} - I|_F
  double round_trip = 0.0;
  /// |Tbar exp(-int_lo^hi w) - (T exp(int_lo^hi w))^-1|_F: the reverse-ordered
  /// factor inside the bias integral is the inverse of the forward line.
  double reverse_factor = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

InverseIdentityReport wilson_inverse_identity(const MatrixField& w, double t1, double t2,
                                              double tolerance = 1e-9);

/// int_{t_a}^{t_b} W(w)_{t_a:t'} b(t') dt' between nodes k_begin < k_end, by
/// Simpson's rule on each cell (node, midpoint, node).
Vector drift_integral(const MatrixField& w, const VectorField& b, int k_begin, int k_end);

/// x(T) = W_{T:0} (x0 + int_0^T W_{0:t'} b(t') dt').
Vector linear_solution(const LinearNodeParams& params, const Vector& x0);

/// |W(w')_{t1:t2} - G(t1)^-1 W(w)_{t1:t2} G(t2)|_F / |W(w)_{t1:t2}|_F with w'
/// the gauge-transformed weight field.
double wilson_gauge_covariance(const MatrixField& w, const GaugeTransformLinear& gauge, double t1,
                               double t2);

}  // namespace gauge_lab
