#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "gauge_lab/attention.hpp"
#include "gauge_lab/discrete.hpp"
#include "gauge_lab/gauge.hpp"

namespace gauge_lab {

using Rng = std::mt19937_64;

/// Generator for trial `index` of a run seeded with `seed`.
Rng trial_rng(std::uint64_t seed, std::uint64_t index);

Vector normal_vector(Rng& rng, int d);
Matrix normal_matrix(Rng& rng, int rows, int cols);
std::vector<Vector> normal_inputs(Rng& rng, int count, int d);

/// w(t) and b(t) as low-frequency trigonometric series with N(0, scale^2)
/// coefficients, sampled at the grid nodes.
LinearNodeParams random_smooth_params(Rng& rng, const TimeGrid& grid, int d, double scale = 1.0);

/// G(t) = I + sin(pi t/T) M, c(t) = sin(pi t/T) v1 + sin(2 pi t/T) v2 with
/// analytic derivatives; |M|_2 = amplitude < 1 keeps G invertible.
GaugeTransformLinear random_smooth_gauge(Rng& rng, const TimeGrid& grid, int d, double amplitude = 0.3);

/// Same profile but G(t) = I + sin(pi t / 2T) M, so G(T) = I + M: violates the
/// output boundary condition.
GaugeTransformLinear boundary_violating_gauge(Rng& rng, const TimeGrid& grid, int d, double amplitude = 0.3);

/// F(t, x) = A x + cos(omega t) tanh(C x) + v with analytic derivatives.
GenericNode random_generic_node(Rng& rng, int d, double scale = 0.5);

/// eps(t, x) = sin(pi t/T) (v + U x + q * tanh(x)) spatially and, when
/// with_time, sin(pi t/T) (v0 + u0 . x) in the time slot; analytic derivatives.
DiffeoGenerator random_diffeo(Rng& rng, int d, double t_end, bool with_time);

DiscreteGauge random_discrete_gauge(Rng& rng, int depth, int d, double amplitude = 0.3);
FeedforwardLinearNet random_linear_net(Rng& rng, int depth, int d);
ReluNet random_relu_net(Rng& rng, int depth, int d);

}  // namespace gauge_lab
