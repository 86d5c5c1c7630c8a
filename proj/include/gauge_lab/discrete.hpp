#pragma once

#include <variant>
#include <vector>

#include "gauge_lab/gauge.hpp"

namespace gauge_lab {

/// x(n+1) = w_n x(n) + b_n for n = 0..N-1.
struct LinearLayer {
  Matrix weight;
  Vector bias;
};

struct FeedforwardLinearNet {
  std::vector<LinearLayer> layers;

  int depth() const { return static_cast<int>(layers.size()); }
  int dim() const { return static_cast<int>(layers.front().bias.size()); }
};

/// G_0..G_N and c_0..c_N with G_0 = G_N = I and c_0 = c_N = 0.
struct DiscreteGauge {
  std::vector<Matrix> G;
  std::vector<Vector> c;

  int depth() const { return static_cast<int>(G.size()) - 1; }
  bool respects_boundary() const;

  static DiscreteGauge identity(int depth, int d);
};

Vector forward_linear(const FeedforwardLinearNet& net, const Vector& x0);

/// w_n -> G_{n+1}^-1 w_n G_n, b_n -> G_{n+1}^-1 (b_n + w_n c_n - c_{n+1}).
FeedforwardLinearNet apply_discrete_gauge(const FeedforwardLinearNet& net, const DiscreteGauge& gauge);

/// Integrated discretization: layer n is the exact propagator of the linear
/// node over [n D, (n+1) D], D = T / N. Throws GridMismatch unless N divides
/// the params grid.
FeedforwardLinearNet discretize(const LinearNodeParams& params, int layers);

/// Continuous gauge through the discrete one: cubic Hermite interpolation
/// with zero knot slopes, so G(n D) = G_n and c(n D) = c_n exactly. The
/// analytic derivative fields are attached.
GaugeTransformLinear lift_gauge(const DiscreteGauge& gauge, const TimeGrid& grid);

struct DiagramReport {
  /// Per layer, Frobenius deviation of weights and 2-norm deviation of biases.
  std::vector<double> weight_deviation;
  std::vector<double> bias_deviation;
  double max_weight_deviation = 0.0;
  double max_bias_deviation = 0.0;
  /// Largest output deviation between the two nets over the probe inputs
  /// (zero and the unit vectors when none are given).
  double output_deviation = 0.0;
  FeedforwardLinearNet discrete_path;
  FeedforwardLinearNet continuous_path;
};

/// Compares gauge-after-discretize with discretize-after-lifted-gauge.
DiagramReport commuting_diagram_check(const LinearNodeParams& params, const DiscreteGauge& gauge,
                                      int layers, std::span<const Vector> probes = {});

/// Feedforward ReLU net, x(n+1) = ReLU(w_n x(n) + b_n), ReLU on every layer.
struct ReluNet {
  std::vector<LinearLayer> layers;

  int depth() const { return static_cast<int>(layers.size()); }
};

Vector forward_relu(const ReluNet& net, const Vector& x);

/// Positive scale per unit of each interior layer: alpha[n][j] rescales unit
/// j at the output of layer n, for n = 0..depth-2.
struct RescaleParams {
  std::vector<Vector> alpha;
};

/// Row j of w_n and b_n[j] scaled by alpha[n][j]; column j of w_{n+1} divided
/// by it. Throws NonPositiveAlpha for any alpha <= 0.
ReluNet rescale_relu(const ReluNet& net, const RescaleParams& alpha);

struct ConvLayer {
  Matrix filter;
};

/// L_s pooling over non-overlapping window x window tiles; s = infinity is max pooling.
struct PoolLayer {
  double s = 1.0;
  int window = 2;
};

struct ConvNet {
  std::vector<std::variant<ConvLayer, PoolLayer>> layers;

  int conv_count() const;
};

/// Valid-mode, stride-1, single-channel convolution followed by ReLU; pooling
/// as declared. Throws ShapeError when a layer does not fit its input.
Matrix forward_conv(const ConvNet& net, const Matrix& image);

/// Conv filter n scaled by alpha[n], the next conv filter by 1 / alpha[n].
/// alpha has one entry per conv layer; the last must be 1 (StructureError
/// otherwise, there is nothing downstream to absorb it).
ConvNet rescale_conv(const ConvNet& net, std::span<const double> alpha);

}  // namespace gauge_lab
