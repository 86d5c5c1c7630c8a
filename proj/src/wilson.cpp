#include "gauge_lab/wilson.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gauge_lab/matrix_exp.hpp"

namespace gauge_lab {

namespace {

// Pieces [a, b] of [lo, hi] cut at grid nodes, in increasing time.
std::vector<std::pair<double, double>> cell_pieces(const TimeGrid& grid, double lo, double hi,
                                                   int substeps) {
  std::vector<std::pair<double, double>> pieces;
  if (hi <= lo) return pieces;
  const auto lo_node = grid.node_index(lo);
  const auto hi_node = grid.node_index(hi);
  const int first = lo_node ? *lo_node : grid.locate(lo).first;
  const int last = hi_node ? *hi_node - 1 : grid.locate(hi).first;
  for (int k = first; k <= last; ++k) {
    const double a = (k == first && !lo_node) ? lo : grid.time(k);
    const double b = (k == last && !hi_node) ? hi : grid.time(k + 1);
    if (b <= a) continue;
    const double width = (b - a) / substeps;
    for (int s = 0; s < substeps; ++s) {
      const double start = a + s * width;
      const double end = (s + 1 == substeps) ? b : a + (s + 1) * width;
      pieces.emplace_back(start, end);
    }
  }
  return pieces;
}

void require_in_domain(const TimeGrid& grid, double t) {
  if (!grid.contains(t)) {
    throw OutOfDomain("time " + std::to_string(t) + " outside [0, " + std::to_string(grid.t_end()) +
                      "]");
  }
}

Matrix forward_product(const MatrixField& w, double lo, double hi, int substeps) {
  const auto d = w[0].rows();
  Matrix out = Matrix::Identity(d, d);
  for (const auto& [a, b] : cell_pieces(w.grid(), lo, hi, substeps)) {
    out = expm(w.at(0.5 * (a + b)) * (b - a)) * out;
  }
  return out;
}

Matrix reverse_product(const MatrixField& w, double lo, double hi, int substeps) {
  const auto d = w[0].rows();
  Matrix out = Matrix::Identity(d, d);
  for (const auto& [a, b] : cell_pieces(w.grid(), lo, hi, substeps)) {
    out = out * expm(-w.at(0.5 * (a + b)) * (b - a));
  }
  return out;
}

}  // namespace

WilsonLine wilson_line(const MatrixField& w, double t1, double t2, int substeps) {
  if (substeps < 1) throw ShapeError("substeps must be >= 1");
  require_in_domain(w.grid(), t1);
  require_in_domain(w.grid(), t2);
  if (t1 >= t2) return WilsonLine{forward_product(w, t2, t1, substeps), t1, t2, Orientation::forward};
  return WilsonLine{reverse_product(w, t1, t2, substeps), t1, t2, Orientation::reverse};
}

InverseIdentityReport wilson_inverse_identity(const MatrixField& w, double t1, double t2,
                                              double tolerance) {
  InverseIdentityReport report;
  report.tolerance = tolerance;
  const auto d = w[0].rows();
  const Matrix there = wilson_line(w, t1, t2).matrix;
  const Matrix back = wilson_line(w, t2, t1).matrix;
  report.round_trip = (there * back - Matrix::Identity(d, d)).norm();

  const double lo = std::min(t1, t2);
  const double hi = std::max(t1, t2);
  const Matrix forward_inverse = wilson_line(w, hi, lo).matrix.inverse();
  report.reverse_factor = (reverse_product(w, lo, hi, 1) - forward_inverse).norm();
  report.passed = report.round_trip <= tolerance && report.reverse_factor <= tolerance;
  return report;
}

Vector drift_integral(const MatrixField& w, const VectorField& b, int k_begin, int k_end) {
  if (!(w.grid() == b.grid())) throw GridMismatch("w and b live on different grids");
  if (k_begin < 0 || k_end > w.grid().n_steps() || k_begin > k_end) {
    throw OutOfDomain("drift integral node range [" + std::to_string(k_begin) + ", " +
                      std::to_string(k_end) + "]");
  }
  const double h = w.grid().step();
  const auto d = w[0].rows();
  Matrix back = Matrix::Identity(d, d);  // W_{t_a : t_k}
  Vector sum = Vector::Zero(d);
  for (int k = k_begin; k < k_end; ++k) {
    const double t = w.grid().time(k);
    const Matrix w_mid = 0.5 * (w[k] + w[k + 1]);
    const Vector b_mid = 0.5 * (b[k] + b[k + 1]);
    const Matrix back_mid = back * expm(-w.at(t + 0.25 * h) * (0.5 * h));
    const Matrix back_next = back * expm(-w_mid * h);
    sum += (h / 6.0) * (back * b[k] + 4.0 * (back_mid * b_mid) + back_next * b[k + 1]);
    back = back_next;
  }
  return sum;
}

Vector linear_solution(const LinearNodeParams& params, const Vector& x0) {
  if (params.dim() != x0.size()) throw ShapeError("x0 length does not match params");
  const TimeGrid& grid = params.grid();
  const Matrix propagator = wilson_line(params.w, grid.t_end(), 0.0).matrix;
  const Vector out = propagator * (x0 + drift_integral(params.w, params.b, 0, grid.n_steps()));
  if (!out.allFinite()) throw NonFiniteState("closed-form solution is not finite");
  return out;
}

double wilson_gauge_covariance(const MatrixField& w, const GaugeTransformLinear& gauge, double t1,
                               double t2) {
  const MatrixField transformed = transform_weight(w, gauge);
  const Matrix original = wilson_line(w, t1, t2).matrix;
  const Matrix moved = wilson_line(transformed, t1, t2).matrix;
  const Matrix expected = gauge.G.at(t1).partialPivLu().solve(original * gauge.G.at(t2));
  return (moved - expected).norm() / original.norm();
}

}  // namespace gauge_lab
