#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "gauge_lab/gauge.hpp"

namespace gauge_lab {

struct RegularizerConfig {
  double strength = 0.0;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int iterations = 100;
  std::uint64_t seed = 0;
  /// Central-difference step for parameter gradients.
  double fd_step = 1e-6;
};

struct Sample {
  Vector input;
  Vector target;
};

using Dataset = std::vector<Sample>;

/// Node-wise dw/dt + w^2 and db/dt + w b; derivatives by finite differences.
std::pair<MatrixField, VectorField> uniform_motion_residual(const LinearNodeParams& params);

/// strength * int_0^T (|dw/dt + w^2|_F^2 + |db/dt + w b|^2) dt by composite
/// Simpson on the grid (3/8 rule on the last three cells for odd counts).
double regularizer(const LinearNodeParams& params, const RegularizerConfig& cfg);

/// Mean over samples of |x(T; input) - target|^2.
double data_loss(const LinearNodeParams& params, const Dataset& data);

/// All node values stacked: w nodes (row-major) then b nodes.
Vector flatten(const LinearNodeParams& params);
LinearNodeParams unflatten(const Vector& theta, const TimeGrid& grid, int d);

/// Central-difference gradient of f over the flattened parameters.
Vector numerical_gradient(const std::function<double(const LinearNodeParams&)>& f,
                          const LinearNodeParams& params, double step = 1e-6);

/// Infinitesimal gauge generator: G = I + a dG, c = a dc with dG, dc vanishing
/// at 0 and T.
struct OrbitGenerator {
  MatrixField dG;
  std::optional<MatrixField> dG_dot;
  VectorField dc;
  std::optional<VectorField> dc_dot;
};

/// d/da at a = 0 of the flattened gauge-transformed params, by central
/// differences in a.
Vector orbit_tangent(const LinearNodeParams& params, const OrbitGenerator& generator,
                     double step = 1e-5);

struct TrainRecord {
  double loss = 0.0;
  double regularizer = 0.0;
  /// Norm of the update's projection onto the span of sampled orbit tangents.
  double orbit_drift = 0.0;
};

struct TrainResult {
  LinearNodeParams params;
  /// Entry 0 is the starting point, one more per iteration.
  std::vector<TrainRecord> history;
};

/// Full-batch gradient descent on data_loss + regularizer over every node value
/// of w and b. Throws Divergence if the objective becomes non-finite.
TrainResult train(const LinearNodeParams& params0, const Dataset& data, const TrainConfig& tcfg,
                  const RegularizerConfig& rcfg);

/// Sine-mode generators sin(k pi t / T) E_ij and sin(k pi t / T) e_i with analytic
/// derivatives, k = 1..modes.
std::vector<OrbitGenerator> sine_generators(const TimeGrid& grid, int d, int modes);

}  // namespace gauge_lab
