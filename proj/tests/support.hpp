#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "gauge_lab/time_grid.hpp"

namespace oracle {

using gauge_lab::Matrix;
using gauge_lab::Vector;

inline double rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

/// exp(A) by Eigen's own scaling-and-squaring routine.
inline Matrix eigen_expm(const Matrix& a) { return a.exp(); }

/// Fourth-order Taylor step, exact to roundoff when |A| is ~1e-6.
inline Matrix taylor_step(const Matrix& a) {
  const Matrix a2 = a * a;
  return Matrix::Identity(a.rows(), a.cols()) + a + a2 / 2.0 + a2 * a / 6.0 + a2 * a2 / 24.0;
}

/// Time-ordered product over [t0, t1] of `substeps` midpoint factors of a
/// callable w(t), later factors on the left.
inline Matrix fine_product(const std::function<Matrix(double)>& w, double t0, double t1, long substeps) {
  const double h = (t1 - t0) / static_cast<double>(substeps);
  Matrix out = Matrix::Identity(w(t0).rows(), w(t0).cols());
  for (long k = 0; k < substeps; ++k) out = taylor_step(w(t0 + (k + 0.5) * h) * h) * out;
  return out;
}

}  // namespace oracle
