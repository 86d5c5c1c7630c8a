#include "gauge_lab/sampling.hpp"

#include <cmath>
#include <numbers>

namespace gauge_lab {

Rng trial_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

Vector normal_vector(Rng& rng, int d) {
  std::normal_distribution<double> normal;
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = normal(rng);
  return v;
}

Matrix normal_matrix(Rng& rng, int rows, int cols) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

std::vector<Vector> normal_inputs(Rng& rng, int count, int d) {
  std::vector<Vector> out;
  for (int i = 0; i < count; ++i) out.push_back(normal_vector(rng, d));
  return out;
}

LinearNodeParams random_smooth_params(Rng& rng, const TimeGrid& grid, int d, double scale) {
  const double T = grid.t_end();
  const double pi = std::numbers::pi;
  // Three coefficient matrices with entry variance scale^2 / (3 d): |w(t)|_2 is O(scale).
  const double unit = scale / std::sqrt(3.0 * d);
  const Matrix a0 = unit * normal_matrix(rng, d, d);
  const Matrix a1 = unit * normal_matrix(rng, d, d);
  const Matrix a2 = unit * normal_matrix(rng, d, d);
  const Vector v0 = (scale / std::sqrt(2.0 * d)) * normal_vector(rng, d);
  const Vector v1 = (scale / std::sqrt(2.0 * d)) * normal_vector(rng, d);
  auto w = MatrixField::sample(grid, [&](double t) -> Matrix {
    return a0 + std::cos(pi * t / T) * a1 + std::sin(2.0 * pi * t / T) * a2;
  });
  auto b = VectorField::sample(grid, [&](double t) -> Vector {
    return v0 + std::sin(pi * t / T) * v1;
  });
  return LinearNodeParams(std::move(w), std::move(b));
}

namespace {

Matrix spectral_normalized(const Matrix& m, double target) {
  const double norm = Eigen::JacobiSVD<Matrix>(m).singularValues()[0];
  return (target / norm) * m;
}

}  // namespace

GaugeTransformLinear random_smooth_gauge(Rng& rng, const TimeGrid& grid, int d, double amplitude) {
  const double T = grid.t_end();
  const double pi = std::numbers::pi;
  const Matrix m = spectral_normalized(normal_matrix(rng, d, d), amplitude);
  const Vector v1 = amplitude * normal_vector(rng, d);
  const Vector v2 = amplitude * normal_vector(rng, d);
  const Matrix eye = Matrix::Identity(d, d);
  return GaugeTransformLinear{
      MatrixField::sample(grid, [&](double t) -> Matrix { return eye + std::sin(pi * t / T) * m; }),
      MatrixField::sample(grid, [&](double t) -> Matrix { return (pi / T) * std::cos(pi * t / T) * m; }),
      VectorField::sample(grid, [&](double t) -> Vector {
        return std::sin(pi * t / T) * v1 + std::sin(2.0 * pi * t / T) * v2;
      }),
      VectorField::sample(grid, [&](double t) -> Vector {
        return (pi / T) * (std::cos(pi * t / T) * v1 + 2.0 * std::cos(2.0 * pi * t / T) * v2);
      })};
}

GaugeTransformLinear boundary_violating_gauge(Rng& rng, const TimeGrid& grid, int d, double amplitude) {
  const double T = grid.t_end();
  const double pi = std::numbers::pi;
  const Matrix m = spectral_normalized(normal_matrix(rng, d, d), amplitude);
  const Matrix eye = Matrix::Identity(d, d);
  return GaugeTransformLinear{
      MatrixField::sample(grid, [&](double t) -> Matrix { return eye + std::sin(0.5 * pi * t / T) * m; }),
      MatrixField::sample(grid, [&](double t) -> Matrix {
        return (0.5 * pi / T) * std::cos(0.5 * pi * t / T) * m;
      }),
      VectorField::constant(grid, Vector::Zero(d)), VectorField::constant(grid, Vector::Zero(d))};
}

GenericNode random_generic_node(Rng& rng, int d, double scale) {
  const double unit = scale / std::sqrt(static_cast<double>(d));
  const Matrix a = unit * normal_matrix(rng, d, d);
  const Matrix c = unit * normal_matrix(rng, d, d);
  const Vector v = scale * normal_vector(rng, d);
  const double omega = 2.0 + std::uniform_real_distribution<double>(0.0, 2.0)(rng);
  GenericNode node;
  node.dim = d;
  node.force = [a, c, v, omega](double t, const Vector& x) -> Vector {
    return a * x + std::cos(omega * t) * (c * x).array().tanh().matrix() + v;
  };
  node.jacobian_x = [a, c, omega](double t, const Vector& x) -> Matrix {
    const Vector th = (c * x).array().tanh().matrix();
    const Vector sech2 = (1.0 - th.array().square()).matrix();
    return a + std::cos(omega * t) * sech2.asDiagonal() * c;
  };
  node.time_derivative = [c, omega](double t, const Vector& x) -> Vector {
    return -omega * std::sin(omega * t) * (c * x).array().tanh().matrix();
  };
  return node;
}

DiffeoGenerator random_diffeo(Rng& rng, int d, double t_end, bool with_time) {
  const double pi = std::numbers::pi;
  const Vector v = normal_vector(rng, d);
  const Matrix u = normal_matrix(rng, d, d) / std::sqrt(static_cast<double>(d));
  const Vector q = normal_vector(rng, d);
  const double v0 = with_time ? 0.5 * normal_vector(rng, 1)[0] : 0.0;
  const Vector u0 = with_time ? Vector(0.5 * normal_vector(rng, d)) : Vector::Zero(d);
  DiffeoGenerator gen;
  gen.dim = d;
  auto shape = [=](const Vector& x) {
    Vector out(d + 1);
    out[0] = v0 + u0.dot(x);
    out.tail(d) = v + u * x + q.cwiseProduct(x.array().tanh().matrix());
    return out;
  };
  gen.epsilon = [=](double t, const Vector& x) -> Vector { return std::sin(pi * t / t_end) * shape(x); };
  gen.d_dt = [=](double t, const Vector& x) -> Vector {
    return (pi / t_end) * std::cos(pi * t / t_end) * shape(x);
  };
  gen.d_dx = [=](double t, const Vector& x) -> Matrix {
    Matrix jac(d + 1, d);
    jac.row(0) = u0.transpose();
    const Vector sech2 = (1.0 - x.array().tanh().square()).matrix();
    jac.bottomRows(d) = u;
    jac.bottomRows(d).diagonal() += q.cwiseProduct(sech2);
    return std::sin(pi * t / t_end) * jac;
  };
  return gen;
}

DiscreteGauge random_discrete_gauge(Rng& rng, int depth, int d, double amplitude) {
  DiscreteGauge gauge = DiscreteGauge::identity(depth, d);
  for (int n = 1; n < depth; ++n) {
    gauge.G[n] += spectral_normalized(normal_matrix(rng, d, d), amplitude);
    gauge.c[n] = amplitude * normal_vector(rng, d);
  }
  return gauge;
}

FeedforwardLinearNet random_linear_net(Rng& rng, int depth, int d) {
  FeedforwardLinearNet net;
  for (int n = 0; n < depth; ++n) {
    net.layers.push_back(LinearLayer{Matrix::Identity(d, d) + 0.5 * normal_matrix(rng, d, d) / std::sqrt(d),
                                     normal_vector(rng, d)});
  }
  return net;
}

ReluNet random_relu_net(Rng& rng, int depth, int d) {
  ReluNet net;
  for (int n = 0; n < depth; ++n) {
    // Near-identity weights and positive biases keep units active; a net whose
    // output is identically zero would make every invariance check vacuous.
    Vector bias(d);
    for (int j = 0; j < d; ++j) bias[j] = std::uniform_real_distribution<double>(0.1, 0.6)(rng);
    net.layers.push_back(LinearLayer{
        Matrix::Identity(d, d) + 0.7 * normal_matrix(rng, d, d) / std::sqrt(static_cast<double>(d)), bias});
  }
  return net;
}

}  // namespace gauge_lab
