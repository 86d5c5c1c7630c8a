#include "gauge_lab/time_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gauge_lab {

TimeGrid::TimeGrid(double t_end, int n_steps) : t_end_(t_end), n_steps_(n_steps), step_(0.0) {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) {
    throw ShapeError("time grid needs t_end > 0, got " + std::to_string(t_end));
  }
  if (n_steps < 1) throw ShapeError("time grid needs n_steps >= 1, got " + std::to_string(n_steps));
  step_ = t_end_ / n_steps_;
}

double TimeGrid::time(int k) const {
  if (k == n_steps_) return t_end_;
  return k * step_;
}

std::optional<int> TimeGrid::node_index(double t) const {
  const double scaled = t / step_;
  const double nearest = std::round(scaled);
  if (nearest < 0.0 || nearest > n_steps_) return std::nullopt;
  if (std::abs(scaled - nearest) > 1e-9) return std::nullopt;
  return static_cast<int>(nearest);
}

std::pair<int, double> TimeGrid::locate(double t) const {
  if (t <= 0.0) return {0, 0.0};
  if (t >= t_end_) return {n_steps_ - 1, 1.0};
  if (auto k = node_index(t)) {
    if (*k == n_steps_) return {n_steps_ - 1, 1.0};
    return {*k, 0.0};
  }
  int k = static_cast<int>(std::floor(t / step_));
  k = std::clamp(k, 0, n_steps_ - 1);
  const double theta = std::clamp((t - time(k)) / step_, 0.0, 1.0);
  return {k, theta};
}

bool TimeGrid::contains(double t) const {
  const double slack = 1e-12 * t_end_;
  return t >= -slack && t <= t_end_ + slack;
}

double TimeFunction::rate(double t) const {
  if (derivative) return derivative(t);
  const double h = 1e-6 * std::max(1.0, std::abs(t));
  return (value(t + h) - value(t - h)) / (2.0 * h);
}

}  // namespace gauge_lab
