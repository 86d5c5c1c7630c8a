#include "gauge_lab/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gauge_lab/wilson.hpp"

namespace gauge_lab {

bool DiscreteGauge::respects_boundary() const {
  if (G.size() < 2 || G.size() != c.size()) return false;
  const auto d = G.front().rows();
  const Matrix eye = Matrix::Identity(d, d);
  return G.front() == eye && G.back() == eye && c.front().isZero(0.0) && c.back().isZero(0.0);
}

DiscreteGauge DiscreteGauge::identity(int depth, int d) {
  return DiscreteGauge{std::vector<Matrix>(depth + 1, Matrix::Identity(d, d)),
                       std::vector<Vector>(depth + 1, Vector::Zero(d))};
}

Vector forward_linear(const FeedforwardLinearNet& net, const Vector& x0) {
  Vector x = x0;
  for (const auto& layer : net.layers) {
    if (layer.weight.cols() != x.size() || layer.weight.rows() != layer.bias.size()) {
      throw ShapeError("linear layer does not fit its input");
    }
    x = layer.weight * x + layer.bias;
  }
  return x;
}

FeedforwardLinearNet apply_discrete_gauge(const FeedforwardLinearNet& net, const DiscreteGauge& gauge) {
  if (gauge.depth() != net.depth() || gauge.c.size() != gauge.G.size()) {
    throw ShapeError("gauge needs depth + 1 = " + std::to_string(net.depth() + 1) + " entries");
  }
  FeedforwardLinearNet out;
  out.layers.reserve(net.layers.size());
  for (int n = 0; n < net.depth(); ++n) {
    const auto lu = gauge.G[n + 1].fullPivLu();
    if (!lu.isInvertible()) throw SingularGauge("G_" + std::to_string(n + 1) + " is singular");
    const auto& layer = net.layers[n];
    out.layers.push_back(LinearLayer{
        lu.solve(layer.weight * gauge.G[n]),
        lu.solve(Vector(layer.bias + layer.weight * gauge.c[n] - gauge.c[n + 1]))});
  }
  return out;
}

FeedforwardLinearNet discretize(const LinearNodeParams& params, int layers) {
  const TimeGrid& grid = params.grid();
  if (layers < 1 || grid.n_steps() % layers != 0) {
    throw GridMismatch(std::to_string(layers) + " layers do not divide " +
                       std::to_string(grid.n_steps()) + " grid steps");
  }
  const int per_layer = grid.n_steps() / layers;
  FeedforwardLinearNet net;
  net.layers.reserve(layers);
  for (int n = 0; n < layers; ++n) {
    const int begin = n * per_layer;
    const int end = begin + per_layer;
    Matrix propagator = wilson_line(params.w, grid.time(end), grid.time(begin)).matrix;
    Vector bias = propagator * drift_integral(params.w, params.b, begin, end);
    net.layers.push_back(LinearLayer{std::move(propagator), std::move(bias)});
  }
  return net;
}

GaugeTransformLinear lift_gauge(const DiscreteGauge& gauge, const TimeGrid& grid) {
  const int layers = gauge.depth();
  if (layers < 1 || gauge.c.size() != gauge.G.size()) throw ShapeError("malformed discrete gauge");
  if (grid.n_steps() % layers != 0) {
    throw GridMismatch(std::to_string(layers) + " layers do not divide " +
                       std::to_string(grid.n_steps()) + " grid steps");
  }
  const int per_layer = grid.n_steps() / layers;
  const double span = grid.t_end() / layers;
  std::vector<Matrix> g, g_dot;
  std::vector<Vector> c, c_dot;
  for (int k = 0; k < grid.node_count(); ++k) {
    if (k % per_layer == 0) {
      const int n = k / per_layer;
      g.push_back(gauge.G[n]);
      c.push_back(gauge.c[n]);
      g_dot.push_back(Matrix::Zero(gauge.G[n].rows(), gauge.G[n].cols()));
      c_dot.push_back(Vector::Zero(gauge.c[n].size()));
      continue;
    }
    const int n = k / per_layer;
    const double u = static_cast<double>(k - n * per_layer) / per_layer;
    const double h00 = 2.0 * u * u * u - 3.0 * u * u + 1.0;
    const double h01 = 1.0 - h00;
    const double dh00 = (6.0 * u * u - 6.0 * u) / span;
    const double dh01 = -dh00;
    g.push_back(h00 * gauge.G[n] + h01 * gauge.G[n + 1]);
    c.push_back(h00 * gauge.c[n] + h01 * gauge.c[n + 1]);
    g_dot.push_back(dh00 * gauge.G[n] + dh01 * gauge.G[n + 1]);
    c_dot.push_back(dh00 * gauge.c[n] + dh01 * gauge.c[n + 1]);
  }
  GaugeTransformLinear out{MatrixField(grid, std::move(g)), MatrixField(grid, std::move(g_dot)),
                           VectorField(grid, std::move(c)), VectorField(grid, std::move(c_dot))};
  require_invertible(out);
  return out;
}

DiagramReport commuting_diagram_check(const LinearNodeParams& params, const DiscreteGauge& gauge,
                                      int layers, std::span<const Vector> probes) {
  DiagramReport report;
  report.discrete_path = apply_discrete_gauge(discretize(params, layers), gauge);
  report.continuous_path =
      discretize(apply_linear_gauge(params, lift_gauge(gauge, params.grid())), layers);
  for (int n = 0; n < layers; ++n) {
    const auto& a = report.discrete_path.layers[n];
    const auto& b = report.continuous_path.layers[n];
    report.weight_deviation.push_back((a.weight - b.weight).norm());
    report.bias_deviation.push_back((a.bias - b.bias).norm());
  }
  report.max_weight_deviation =
      *std::max_element(report.weight_deviation.begin(), report.weight_deviation.end());
  report.max_bias_deviation =
      *std::max_element(report.bias_deviation.begin(), report.bias_deviation.end());

  std::vector<Vector> defaults;
  if (probes.empty()) {
    const int d = params.dim();
    defaults.push_back(Vector::Zero(d));
    for (int i = 0; i < d; ++i) defaults.push_back(Vector::Unit(d, i));
    probes = defaults;
  }
  for (const auto& x : probes) {
    const double dev = (forward_linear(report.discrete_path, x) -
                        forward_linear(report.continuous_path, x)).norm();
    report.output_deviation = std::max(report.output_deviation, dev);
  }
  return report;
}

Vector forward_relu(const ReluNet& net, const Vector& x) {
  Vector h = x;
  for (const auto& layer : net.layers) {
    if (layer.weight.cols() != h.size() || layer.weight.rows() != layer.bias.size()) {
      throw ShapeError("relu layer does not fit its input");
    }
    h = (layer.weight * h + layer.bias).cwiseMax(0.0);
  }
  return h;
}

ReluNet rescale_relu(const ReluNet& net, const RescaleParams& params) {
  if (static_cast<int>(params.alpha.size()) != std::max(net.depth() - 1, 0)) {
    throw ShapeError("need one scale vector per interior layer");
  }
  ReluNet out = net;
  for (std::size_t n = 0; n < params.alpha.size(); ++n) {
    const Vector& alpha = params.alpha[n];
    auto& layer = out.layers[n];
    auto& next = out.layers[n + 1];
    if (alpha.size() != layer.weight.rows()) throw ShapeError("scale vector does not match layer width");
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
      if (!(alpha[j] > 0.0) || !std::isfinite(alpha[j])) {
        throw NonPositiveAlpha("alpha[" + std::to_string(n) + "][" + std::to_string(j) +
                               "] = " + std::to_string(alpha[j]));
      }
      layer.weight.row(j) *= alpha[j];
      layer.bias[j] *= alpha[j];
      next.weight.col(j) /= alpha[j];
    }
  }
  return out;
}

int ConvNet::conv_count() const {
  return static_cast<int>(std::count_if(layers.begin(), layers.end(), [](const auto& layer) {
    return std::holds_alternative<ConvLayer>(layer);
  }));
}

namespace {

Matrix convolve_relu(const Matrix& x, const Matrix& h) {
  const auto rows = x.rows() - h.rows() + 1;
  const auto cols = x.cols() - h.cols() + 1;
  if (rows < 1 || cols < 1) throw ShapeError("filter larger than its input");
  Matrix u(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      u(i, j) = x.block(i, j, h.rows(), h.cols()).cwiseProduct(h).sum();
    }
  }
  return u.cwiseMax(0.0);
}

Matrix pool(const Matrix& y, const PoolLayer& layer) {
  const int p = layer.window;
  if (p < 1 || y.rows() % p != 0 || y.cols() % p != 0) {
    throw ShapeError("pool window " + std::to_string(p) + " does not tile a " +
                     std::to_string(y.rows()) + "x" + std::to_string(y.cols()) + " input");
  }
  if (!(layer.s >= 1.0)) throw ShapeError("pooling exponent must be >= 1");
  const bool max_pool = std::isinf(layer.s);
  Matrix out(y.rows() / p, y.cols() / p);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const auto tile = y.block(i * p, j * p, p, p);
      if (max_pool) {
        out(i, j) = tile.maxCoeff();
      } else if (layer.s == 1.0) {
        out(i, j) = tile.mean();
      } else {
        out(i, j) = std::pow(tile.array().pow(layer.s).mean(), 1.0 / layer.s);
      }
    }
  }
  return out;
}

}  // namespace

Matrix forward_conv(const ConvNet& net, const Matrix& image) {
  Matrix x = image;
  for (const auto& layer : net.layers) {
    if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      x = convolve_relu(x, conv->filter);
    } else {
      x = pool(x, std::get<PoolLayer>(layer));
    }
  }
  return x;
}

ConvNet rescale_conv(const ConvNet& net, std::span<const double> alpha) {
  const int convs = net.conv_count();
  if (static_cast<int>(alpha.size()) != convs) {
    throw ShapeError("need one scale per conv layer (" + std::to_string(convs) + ")");
  }
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] > 0.0) || !std::isfinite(alpha[i])) {
      throw NonPositiveAlpha("alpha[" + std::to_string(i) + "] = " + std::to_string(alpha[i]));
    }
  }
  if (convs > 0 && alpha.back() != 1.0) {
    throw StructureError("the last conv layer has no downstream conv layer to absorb its scale");
  }
  ConvNet out = net;
  std::size_t index = 0;
  double carried = 1.0;
  for (auto& layer : out.layers) {
    auto* conv = std::get_if<ConvLayer>(&layer);
    if (!conv) continue;
    if (carried != 1.0) conv->filter /= carried;
    if (alpha[index] != 1.0) conv->filter *= alpha[index];
    carried = alpha[index];
    ++index;
  }
  return out;
}

}  // namespace gauge_lab
