#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gauge_lab/errors.hpp"

namespace gauge_lab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Uniform discretization of [0, T] into n_steps cells.
class TimeGrid {
 public:
  TimeGrid(double t_end, int n_steps);

  double t_end() const { return t_end_; }
  int n_steps() const { return n_steps_; }
  int node_count() const { return n_steps_ + 1; }
  double step() const { return step_; }

  /// Node time t_k = k * step; the last node is exactly t_end.
  double time(int k) const;

  /// Node index of t if t coincides with a node up to rounding.
  std::optional<int> node_index(double t) const;

  /// Cell containing t, clamped to [0, n_steps - 1], and the local fraction in [0, 1].
  std::pair<int, double> locate(double t) const;

  bool contains(double t) const;

  /// Same interval, n_steps * factor cells.
  TimeGrid refined(int factor) const { return TimeGrid(t_end_, n_steps_ * factor); }

  bool operator==(const TimeGrid& other) const = default;

 private:
  double t_end_;
  int n_steps_;
  double step_;
};

namespace detail {

inline std::pair<Eigen::Index, Eigen::Index> shape_of(double) { return {1, 1}; }
template <typename Derived>
std::pair<Eigen::Index, Eigen::Index> shape_of(const Eigen::MatrixBase<Derived>& v) {
  return {v.rows(), v.cols()};
}

inline bool all_finite(double v) { return std::isfinite(v); }
template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

}  // namespace detail

/// Values sampled at every grid node, read back with piecewise-linear
/// interpolation. Value is double, Vector, or Matrix.
template <typename Value>
class TimeSeriesField {
 public:
  TimeSeriesField(TimeGrid grid, std::vector<Value> values)
      : grid_(grid), values_(std::move(values)) {
    if (static_cast<int>(values_.size()) != grid_.node_count()) {
      throw ShapeError("field has " + std::to_string(values_.size()) +
                       " values for " + std::to_string(grid_.node_count()) + " nodes");
    }
    const auto shape = detail::shape_of(values_.front());
    for (const auto& v : values_) {
      if (detail::shape_of(v) != shape) throw ShapeError("field values differ in shape");
    }
  }

  template <typename Fn>
  static TimeSeriesField sample(const TimeGrid& grid, Fn&& fn) {
    std::vector<Value> values;
    values.reserve(grid.node_count());
    for (int k = 0; k < grid.node_count(); ++k) values.push_back(Value(fn(grid.time(k))));
    return TimeSeriesField(grid, std::move(values));
  }

  static TimeSeriesField constant(const TimeGrid& grid, const Value& v) {
    return TimeSeriesField(grid, std::vector<Value>(grid.node_count(), v));
  }

  const TimeGrid& grid() const { return grid_; }
  int size() const { return static_cast<int>(values_.size()); }
  const Value& operator[](int k) const { return values_[k]; }
  /// Mutable node access; the shape must be left unchanged.
  Value& operator[](int k) { return values_[k]; }
  std::span<const Value> values() const { return values_; }

  Value at(double t) const {
    const auto [k, theta] = grid_.locate(t);
    if (theta == 0.0) return values_[k];
    if (theta == 1.0) return values_[k + 1];
    return Value((1.0 - theta) * values_[k] + theta * values_[k + 1]);
  }

  /// Slope of the interpolant on the cell containing t.
  Value slope(double t) const {
    const int k = grid_.locate(t).first;
    return Value((values_[k + 1] - values_[k]) / grid_.step());
  }

  /// Derivative estimate at node k: centered in the interior, second-order
  /// one-sided at the ends (first-order when only two nodes exist).
  Value node_derivative(int k) const {
    const double h = grid_.step();
    const int last = grid_.n_steps();
    if (last == 1) return Value((values_[1] - values_[0]) / h);
    if (k == 0) return Value((-3.0 * values_[0] + 4.0 * values_[1] - values_[2]) / (2.0 * h));
    if (k == last) {
      return Value((3.0 * values_[last] - 4.0 * values_[last - 1] + values_[last - 2]) / (2.0 * h));
    }
    return Value((values_[k + 1] - values_[k - 1]) / (2.0 * h));
  }

  TimeSeriesField derivative() const {
    std::vector<Value> out;
    out.reserve(values_.size());
    for (int k = 0; k < size(); ++k) out.push_back(node_derivative(k));
    return TimeSeriesField(grid_, std::move(out));
  }

  bool all_finite() const {
    for (const auto& v : values_) {
      if (!detail::all_finite(v)) return false;
    }
    return true;
  }

 private:
  TimeGrid grid_;
  std::vector<Value> values_;
};

using MatrixField = TimeSeriesField<Matrix>;
using VectorField = TimeSeriesField<Vector>;
using ScalarField = TimeSeriesField<double>;

/// A smooth scalar function of time with an optional analytic derivative.
struct TimeFunction {
  std::function<double(double)> value;
  std::function<double(double)> derivative;

  double operator()(double t) const { return value(t); }
  double rate(double t) const;
};

}  // namespace gauge_lab
