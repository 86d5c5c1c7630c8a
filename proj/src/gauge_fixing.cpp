#include "gauge_lab/gauge_fixing.hpp"

#include <cmath>
#include <numbers>

namespace gauge_lab {

std::pair<MatrixField, VectorField> uniform_motion_residual(const LinearNodeParams& params) {
  const MatrixField w_dot = params.w.derivative();
  const VectorField b_dot = params.b.derivative();
  std::vector<Matrix> rw;
  std::vector<Vector> rb;
  for (int k = 0; k < params.grid().node_count(); ++k) {
    rw.push_back(w_dot[k] + params.w[k] * params.w[k]);
    rb.push_back(b_dot[k] + params.w[k] * params.b[k]);
  }
  return {MatrixField(params.grid(), std::move(rw)), VectorField(params.grid(), std::move(rb))};
}

namespace {

// Composite Simpson over node samples; odd cell counts close with the 3/8 rule.
double simpson(std::span<const double> f, double h) {
  const int n = static_cast<int>(f.size()) - 1;
  if (n == 1) return 0.5 * h * (f[0] + f[1]);
  const int simpson_cells = (n % 2 == 0) ? n : n - 3;
  double sum = 0.0;
  for (int k = 0; k < simpson_cells; k += 2) sum += h / 3.0 * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
  if (simpson_cells != n) {
    const int k = simpson_cells;
    sum += 3.0 * h / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]);
  }
  return sum;
}

}  // namespace

double regularizer(const LinearNodeParams& params, const RegularizerConfig& cfg) {
  if (cfg.strength == 0.0) return 0.0;
  const auto [rw, rb] = uniform_motion_residual(params);
  std::vector<double> density;
  density.reserve(rw.size());
  for (int k = 0; k < rw.size(); ++k) density.push_back(rw[k].squaredNorm() + rb[k].squaredNorm());
  return cfg.strength * simpson(density, params.grid().step());
}

double data_loss(const LinearNodeParams& params, const Dataset& data) {
  if (data.empty()) throw ShapeError("dataset is empty");
  const int d = params.dim();
  Matrix inputs(d, data.size());
  Matrix targets(d, data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].input.size() != d || data[i].target.size() != d) {
      throw ShapeError("sample length does not match params");
    }
    inputs.col(i) = data[i].input;
    targets.col(i) = data[i].target;
  }
  return (integrate_linear_batch(params, inputs) - targets).squaredNorm() /
         static_cast<double>(data.size());
}

Vector flatten(const LinearNodeParams& params) {
  const int d = params.dim();
  const int nodes = params.grid().node_count();
  Vector theta(nodes * (d * d + d));
  Eigen::Index at = 0;
  for (int k = 0; k < nodes; ++k) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) theta[at++] = params.w[k](i, j);
    }
  }
  for (int k = 0; k < nodes; ++k) {
    for (int i = 0; i < d; ++i) theta[at++] = params.b[k][i];
  }
  return theta;
}

LinearNodeParams unflatten(const Vector& theta, const TimeGrid& grid, int d) {
  const int nodes = grid.node_count();
  if (theta.size() != nodes * (d * d + d)) throw ShapeError("flat parameter vector has wrong length");
  std::vector<Matrix> w(nodes, Matrix(d, d));
  std::vector<Vector> b(nodes, Vector(d));
  Eigen::Index at = 0;
  for (int k = 0; k < nodes; ++k) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) w[k](i, j) = theta[at++];
    }
  }
  for (int k = 0; k < nodes; ++k) {
    for (int i = 0; i < d; ++i) b[k][i] = theta[at++];
  }
  return LinearNodeParams(MatrixField(grid, std::move(w)), VectorField(grid, std::move(b)));
}

Vector numerical_gradient(const std::function<double(const LinearNodeParams&)>& f,
                          const LinearNodeParams& params, double step) {
  const int d = params.dim();
  const int nodes = params.grid().node_count();
  LinearNodeParams probe = params;
  Vector grad(nodes * (d * d + d));
  Eigen::Index at = 0;
  // Same ordering as flatten: w nodes row-major, then b nodes.
  auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + step;
    const double up = f(probe);
    slot = saved - step;
    const double down = f(probe);
    slot = saved;
    grad[at++] = (up - down) / (2.0 * step);
  };
  for (int k = 0; k < nodes; ++k) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) central(probe.w[k](i, j));
    }
  }
  for (int k = 0; k < nodes; ++k) {
    for (int i = 0; i < d; ++i) central(probe.b[k][i]);
  }
  return grad;
}

namespace {

GaugeTransformLinear scaled_gauge(const OrbitGenerator& gen, double a) {
  const TimeGrid& grid = gen.dG.grid();
  const auto d = gen.dG[0].rows();
  std::vector<Matrix> g;
  std::vector<Vector> c;
  for (int k = 0; k < grid.node_count(); ++k) {
    g.push_back(Matrix::Identity(d, d) + a * gen.dG[k]);
    c.push_back(a * gen.dc[k]);
  }
  std::optional<MatrixField> g_dot;
  std::optional<VectorField> c_dot;
  if (gen.dG_dot) {
    std::vector<Matrix> v;
    for (const auto& m : gen.dG_dot->values()) v.push_back(a * m);
    g_dot = MatrixField(grid, std::move(v));
  }
  if (gen.dc_dot) {
    std::vector<Vector> v;
    for (const auto& m : gen.dc_dot->values()) v.push_back(a * m);
    c_dot = VectorField(grid, std::move(v));
  }
  return GaugeTransformLinear{MatrixField(grid, std::move(g)), std::move(g_dot),
                              VectorField(grid, std::move(c)), std::move(c_dot)};
}

}  // namespace

Vector orbit_tangent(const LinearNodeParams& params, const OrbitGenerator& generator, double step) {
  const Vector up = flatten(apply_linear_gauge(params, scaled_gauge(generator, step)));
  const Vector down = flatten(apply_linear_gauge(params, scaled_gauge(generator, -step)));
  return (up - down) / (2.0 * step);
}

std::vector<OrbitGenerator> sine_generators(const TimeGrid& grid, int d, int modes) {
  std::vector<OrbitGenerator> out;
  const double T = grid.t_end();
  for (int mode = 1; mode <= modes; ++mode) {
    const double freq = mode * std::numbers::pi / T;
    auto profile = [freq](double t) { return std::sin(freq * t); };
    auto rate = [freq](double t) { return freq * std::cos(freq * t); };
    const VectorField zero_v = VectorField::constant(grid, Vector::Zero(d));
    const MatrixField zero_m = MatrixField::constant(grid, Matrix::Zero(d, d));
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        Matrix e = Matrix::Zero(d, d);
        e(i, j) = 1.0;
        out.push_back(OrbitGenerator{MatrixField::sample(grid, [&](double t) -> Matrix { return profile(t) * e; }),
                                     MatrixField::sample(grid, [&](double t) -> Matrix { return rate(t) * e; }),
                                     zero_v, zero_v});
      }
    }
    for (int i = 0; i < d; ++i) {
      const Vector e = Vector::Unit(d, i);
      out.push_back(OrbitGenerator{zero_m, zero_m,
                                   VectorField::sample(grid, [&](double t) -> Vector { return profile(t) * e; }),
                                   VectorField::sample(grid, [&](double t) -> Vector { return rate(t) * e; })});
    }
  }
  return out;
}

namespace {

// Orthonormal basis (columns) of the span of the tangents at params.
Matrix orbit_basis(const LinearNodeParams& params, const std::vector<OrbitGenerator>& generators) {
  if (generators.empty()) return Matrix();
  Matrix tangents(flatten(params).size(), static_cast<Eigen::Index>(generators.size()));
  for (std::size_t i = 0; i < generators.size(); ++i) {
    tangents.col(static_cast<Eigen::Index>(i)) = orbit_tangent(params, generators[i]);
  }
  const Eigen::HouseholderQR<Matrix> qr(tangents);
  return qr.householderQ() * Matrix::Identity(tangents.rows(), tangents.cols());
}

}  // namespace

TrainResult train(const LinearNodeParams& params0, const Dataset& data, const TrainConfig& tcfg,
                  const RegularizerConfig& rcfg) {
  if (!(tcfg.learning_rate > 0.0) || tcfg.iterations < 0 || !(tcfg.fd_step > 0.0)) {
    throw ConfigError("train needs learning_rate > 0, iterations >= 0, fd_step > 0");
  }
  if (rcfg.strength < 0.0) throw ConfigError("regularizer strength must be >= 0");
  const TimeGrid& grid = params0.grid();
  const int d = params0.dim();
  const RegularizerConfig unit{1.0};
  auto objective = [&](const LinearNodeParams& p) { return data_loss(p, data) + regularizer(p, rcfg); };
  auto record = [&](const LinearNodeParams& p, double drift) {
    TrainRecord r{data_loss(p, data), regularizer(p, unit), drift};
    if (!std::isfinite(r.loss) || !std::isfinite(r.regularizer)) {
      throw Divergence("objective became non-finite");
    }
    return r;
  };

  const auto generators = sine_generators(grid, d, 1);
  TrainResult result{params0, {}};
  result.history.push_back(record(params0, 0.0));
  Vector theta = flatten(params0);
  for (int it = 0; it < tcfg.iterations; ++it) {
    const LinearNodeParams current = unflatten(theta, grid, d);
    Vector grad;
    try {
      grad = numerical_gradient(objective, current, tcfg.fd_step);
    } catch (const NonFiniteState& e) {
      throw Divergence(std::string("gradient evaluation failed: ") + e.what());
    }
    if (!grad.allFinite()) throw Divergence("gradient is non-finite at iteration " + std::to_string(it));
    const Vector update = -tcfg.learning_rate * grad;
    const Matrix basis = orbit_basis(current, generators);
    const double drift = basis.size() == 0 ? 0.0 : (basis.transpose() * update).norm();
    theta += update;
    LinearNodeParams next = unflatten(theta, grid, d);
    try {
      result.history.push_back(record(next, drift));
    } catch (const NonFiniteState& e) {
      throw Divergence(e.what());
    }
  }
  result.params = unflatten(theta, grid, d);
  return result;
}

}  // namespace gauge_lab
