#include "gauge_lab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gauge_lab/attention.hpp"
#include "gauge_lab/discrete.hpp"
#include "gauge_lab/gauge_fixing.hpp"
#include "gauge_lab/sampling.hpp"
#include "gauge_lab/wilson.hpp"

#ifndef GAUGE_LAB_VERSION
#define GAUGE_LAB_VERSION "0.0.0"
#endif

namespace gauge_lab {

using json = nlohmann::ordered_json;

namespace {

constexpr std::pair<ExperimentKind, std::string_view> kKindNames[] = {
    {ExperimentKind::diffeo_invariance, "diffeo-invariance"},
    {ExperimentKind::wilson_covariance, "wilson-covariance"},
    {ExperimentKind::bridge_diagram, "bridge-diagram"},
    {ExperimentKind::relu_rescale, "relu-rescale"},
    {ExperimentKind::cnn_rescale, "cnn-rescale"},
    {ExperimentKind::attention_gauge, "attention-gauge"},
    {ExperimentKind::attention_node, "attention-node"},
    {ExperimentKind::regularizer_train, "regularizer-train"},
    {ExperimentKind::orbit_orthogonality, "orbit-orthogonality"},
};

struct Defaults {
  int dim;
  std::vector<int> grid_sizes;
  int trials;
  int layers;
  std::map<std::string, double> tolerances;
};

Defaults defaults_for(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::wilson_covariance:
      return {3, {256, 512, 1024, 2048}, 20, 0, {{"covariance", 1e-7}, {"order", 2.0}}};
    case ExperimentKind::diffeo_invariance:
      return {3,
              {2048},
              20,
              0,
              {{"gauge-invariance", 1e-6},
               {"boundary-control", 1e-3},
               {"spatial-diffeo-ratio", 0.5},
               {"time-reparam-ratio", 0.5},
               {"lie-ratio", 0.5}}};
    case ExperimentKind::bridge_diagram:
      return {2,
              {1024, 2048},
              5,
              4,
              {{"layer-deviation", 1e-4}, {"refinement-gain", 3.0}, {"io-deviation", 1e-6}}};
    case ExperimentKind::relu_rescale:
      return {3,
              {},
              20,
              4,
              {{"relu-invariance", 1e-12}, {"relu-power-of-two", 0.0}, {"relu-control", 1e-3}}};
    case ExperimentKind::cnn_rescale:
      return {1, {}, 10, 3, {{"cnn-invariance", 1e-12}}};
    case ExperimentKind::attention_gauge:
      return {3,
              {},
              20,
              0,
              {{"identity-invariance", 1e-12},
               {"relu-invariance", 1e-12},
               {"softmax-control", 1e-3},
               {"qk-invariance", 1e-12}}};
    case ExperimentKind::attention_node:
      return {3,
              {1024},
              10,
              0,
              {{"node-attention", 1e-8},
               {"token-attention", 1e-8},
               {"tensor-oracle", 1e-10},
               {"smoothed-delta-ratio", 0.5}}};
    case ExperimentKind::regularizer_train:
      return {2,
              {16},
              10,
              0,
              {{"analytic-a4", 1e-8}, {"zero-residual", 1e-10}, {"gauge-fixing-ratio", 1.0}}};
    case ExperimentKind::orbit_orthogonality:
      return {2, {1024}, 10, 0, {{"orbit-orthogonality", 1e-6}, {"regularizer-derivative", 1e-3}}};
  }
  throw ConfigError("kind: unhandled experiment kind");
}

Comparison comparison_for(const std::string& label) {
  static const std::map<std::string, Comparison> table = {
      {"order", Comparison::ge},
      {"boundary-control", Comparison::ge},
      {"refinement-gain", Comparison::ge},
      {"relu-control", Comparison::ge},
      {"softmax-control", Comparison::ge},
      {"regularizer-derivative", Comparison::ge},
      {"gauge-fixing-ratio", Comparison::lt},
  };
  const auto it = table.find(label);
  return it == table.end() ? Comparison::le : it->second;
}

bool verdict(double residual, double tolerance, Comparison comparison) {
  switch (comparison) {
    case Comparison::le:
      return residual <= tolerance;
    case Comparison::ge:
      return residual >= tolerance;
    case Comparison::lt:
      return residual < tolerance;
  }
  return false;
}

std::string comparison_name(Comparison c) {
  switch (c) {
    case Comparison::le:
      return "le";
    case Comparison::ge:
      return "ge";
    case Comparison::lt:
      return "lt";
  }
  return "le";
}

Comparison parse_comparison(const std::string& name) {
  if (name == "le") return Comparison::le;
  if (name == "ge") return Comparison::ge;
  if (name == "lt") return Comparison::lt;
  throw ConfigError("comparison: unknown value '" + name + "'");
}

/// Collects the rows of one trial.
class TrialSink {
 public:
  TrialSink(int index, const std::map<std::string, double>& tolerances)
      : index_(index), tolerances_(tolerances) {}

  void add(const std::string& label, double residual) {
    const double tol = tolerances_.at(label);
    const Comparison cmp = comparison_for(label);
    rows_.push_back(TrialResult{index_, label, residual, tol, cmp, verdict(residual, tol, cmp), {}});
  }

  std::vector<TrialResult>& rows() { return rows_; }

 private:
  int index_;
  const std::map<std::string, double>& tolerances_;
  std::vector<TrialResult> rows_;
};

struct Context {
  ExperimentConfig config;
  int dim;
  std::vector<int> grids;
  int layers;
  std::map<std::string, double> tolerances;
};

double relative(const Matrix& a, const Matrix& b) {
  const double scale = b.norm();
  const double diff = (a - b).norm();
  if (scale == 0.0) return diff;
  return diff / scale;
}

double log_uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

/// Least-squares slope of log(residual) against log(step).
double fitted_order(const std::vector<int>& grids, const std::vector<double>& residuals) {
  const auto n = static_cast<double>(grids.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    if (!(residuals[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double x = std::log(1.0 / grids[i]);
    const double y = std::log(residuals[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------- wilson

void wilson_trial(const Context& ctx, Rng& rng, TrialSink& sink) {
  const int d = ctx.dim;
  std::vector<double> residuals;
  const Rng start = rng;
  for (int n : ctx.grids) {
    Rng local = start;
    const TimeGrid grid(1.0, n);
    const LinearNodeParams params = random_smooth_params(local, grid, d);
    const GaugeTransformLinear gauge = random_smooth_gauge(local, grid, d);
    residuals.push_back(wilson_gauge_covariance(params.w, gauge, 0.75, 0.125));
  }
  sink.add("covariance", residuals.back());
  if (ctx.grids.size() >= 2) sink.add("order", fitted_order(ctx.grids, residuals));
}

// ---------------------------------------------------------------- diffeo

double stacked_change(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).squaredNorm();
  return std::sqrt(sum);
}

std::vector<Vector> outputs(const GenericNode& node, const std::vector<Vector>& inputs, const TimeGrid& grid) {
  std::vector<Vector> out;
  for (const auto& x : inputs) out.push_back(integrate(node, x, grid).final_state());
  return out;
}

std::vector<Vector> outputs(const SpacetimeNode& node, const std::vector<Vector>& inputs, const TimeGrid& grid) {
  std::vector<Vector> out;
  for (const auto& x : inputs) {
    out.push_back(integrate_spacetime(node, x, grid).final_state().tail(x.size()));
  }
  return out;
}

template <typename Deform>
void ratio_rows(TrialSink& sink, const std::string& label, const std::vector<Vector>& base, Deform&& deformed) {
  for (double a : {1e-2, 1e-3}) {
    const double full = stacked_change(deformed(a), base);
    const double half = stacked_change(deformed(a / 2.0), base);
    sink.add(label, std::abs(full / half - 4.0));
  }
}

void diffeo_trial(const Context& ctx, Rng& rng, TrialSink& sink) {
  const int d = ctx.dim;
  const TimeGrid grid(1.0, ctx.grids.front());
  const double pi = std::numbers::pi;

  const LinearNodeParams params = random_smooth_params(rng, grid, d);
  const GaugeTransformLinear gauge = random_smooth_gauge(rng, grid, d);
  const auto inputs = normal_inputs(rng, 10, d);
  sink.add("gauge-invariance",
           verify_invariance(params, apply_linear_gauge(params, gauge), inputs, 1.0).max_absolute);
  const GaugeTransformLinear broken = boundary_violating_gauge(rng, grid, d);
  sink.add("boundary-control",
           verify_invariance(params, apply_linear_gauge(params, broken), inputs, 1.0).max_absolute);

  const GenericNode node = random_generic_node(rng, d);
  const DiffeoGenerator spatial = random_diffeo(rng, d, grid.t_end(), false);
  const DiffeoGenerator full = random_diffeo(rng, d, grid.t_end(), true);
  const double u1 = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
  const double u2 = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  const TimeFunction eps0{
      [=](double t) { return u1 * std::sin(pi * t) + u2 * std::sin(2.0 * pi * t); },
      [=](double t) { return pi * (u1 * std::cos(pi * t) + 2.0 * u2 * std::cos(2.0 * pi * t)); }};
  const auto probe = normal_inputs(rng, 10, d);
  const auto base = outputs(node, probe, grid);

  ratio_rows(sink, "spatial-diffeo-ratio", base,
             [&](double a) { return outputs(spatial_diffeo_deform(node, spatial, a), probe, grid); });
  ratio_rows(sink, "time-reparam-ratio", base,
             [&](double a) { return outputs(time_reparam_deform(node, eps0, a), probe, grid); });
  ratio_rows(sink, "lie-ratio", base, [&](double a) { return outputs(lie_deform(node, full, a), probe, grid); });
}

// ---------------------------------------------------------------- bridge

void bridge_trial(const Context& ctx, Rng& rng, TrialSink& sink) {
  const int d = ctx.dim;
  const DiscreteGauge dg = ctx.config.identity_gauge ? DiscreteGauge::identity(ctx.layers, d)
                                                     : random_discrete_gauge(rng, ctx.layers, d);
  const auto probes = normal_inputs(rng, 10, d);
  const Rng start = rng;
  std::vector<double> layer_dev;
  for (std::size_t g = 0; g < ctx.grids.size(); ++g) {
    Rng local = start;
    const TimeGrid grid(1.0, ctx.grids[g]);
    const LinearNodeParams params = random_smooth_params(local, grid, d);
    const DiagramReport report = commuting_diagram_check(params, dg, ctx.layers, probes);
    layer_dev.push_back(std::max(report.max_weight_deviation, report.max_bias_deviation));
    if (g == 0) {
      sink.add("layer-deviation", layer_dev.back());
      sink.add("io-deviation", report.output_deviation);
    }
  }
  // The refinement gain is meaningless for the identity gauge, whose
  // deviation is at roundoff on every grid.
  if (!ctx.config.identity_gauge && layer_dev.size() >= 2) {
    sink.add("refinement-gain", layer_dev[0] / layer_dev[1]);
  }
}

// ---------------------------------------------------------------- relu

void relu_trial(const Context& ctx, Rng& rng, TrialSink& sink) {
  const int d = ctx.dim;
  const ReluNet net = random_relu_net(rng, ctx.layers, d);
  RescaleParams alpha, powers;
  std::uniform_int_distribution<int> exponent(-4, 4);
  for (int n = 0; n + 1 < ctx.layers; ++n) {
    Vector a(d), p(d);
    for (int j = 0; j < d; ++j) {
      a[j] = log_uniform(rng, 0.1, 10.0);
      p[j] = std::ldexp(1.0, exponent(rng));
    }
    alpha.alpha.push_back(a);
    powers.alpha.push_back(p);
  }
  const ReluNet scaled = rescale_relu(net, alpha);
  const ReluNet scaled2 = rescale_relu(net, powers);
  ReluNet uncompensated = net;
  uncompensated.layers[0].weight *= 2.0;
  const auto inputs = normal_inputs(rng, 20, d);
  double worst = 0.0, exact = 0.0, control = 0.0;
  for (const auto& x : inputs) {
    const Vector y = forward_relu(net, x);
    worst = std::max(worst, relative(forward_relu(scaled, x), y));
    exact = std::max(exact, (forward_relu(scaled2, x) - y).cwiseAbs().maxCoeff());
    control = std::max(control, relative(forward_relu(uncompensated, x), y));
  }
  sink.add("relu-invariance", worst);
  sink.add("relu-power-of-two", exact);
  sink.add("relu-control", control);
}

// ---------------------------------------------------------------- cnn

void cnn_trial(const Context&, Rng& rng, TrialSink& sink) {
  // 14x14 -> conv3 -> 12 -> pool2 -> 6 -> conv3 -> 4 -> pool2 -> 2 -> conv2 -> 1
  std::normal_distribution<double> normal(0.0, 1.0);
  auto filter = [&](int f) {
    Matrix h(f, f);
    for (int i = 0; i < f; ++i) {
      for (int j = 0; j < f; ++j) h(i, j) = 0.3 + 0.3 * normal(rng);
    }
    return h;
  };
  const Matrix h1 = filter(3), h2 = filter(3), h3 = filter(2);
  Matrix image(14, 14);
  std::uniform_real_distribution<double> pixel(0.0, 1.0);
  for (int i = 0; i < 14; ++i) {
    for (int j = 0; j < 14; ++j) image(i, j) = pixel(rng);
  }
  const std::vector<double> alpha = {log_uniform(rng, 0.1, 10.0), log_uniform(rng, 0.1, 10.0), 1.0};
  for (double s : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
    ConvNet net;
    net.layers = {ConvLayer{h1}, PoolLayer{s, 2}, ConvLayer{h2}, PoolLayer{s, 2}, ConvLayer{h3}};
    const Matrix y = forward_conv(net, image);
    sink.add("cnn-invariance", relative(forward_conv(rescale_conv(net, alpha), image), y));
  }
}

// ---------------------------------------------------------------- attention

void attention_gauge_trial(const Context& ctx, Rng& rng, TrialSink& sink) {
  const int d = ctx.dim;
  const int tokens = 4;
  const auto eye = Matrix::Identity(d, d);
  const Matrix Wq = normal_matrix(rng, d, d), Wk = normal_matrix(rng, d, d), Wv = normal_matrix(rng, d, d);
  auto well_conditioned = [&] {
    Matrix m = normal_matrix(rng, d, d);
    return Matrix(eye + 0.5 * m / Eigen::JacobiSVD<Matrix>(m).singularValues()[0]);
  };
  const Matrix A = well_conditioned();
  const double alpha = log_uniform(rng, 0.1, 10.0);
  const AttentionGauge gauge{A, alpha * A.inverse(), alpha};
  const AttentionGauge unit{A, A.inverse(), 1.0};
  const double beta = log_uniform(rng, 2.0, 10.0);
  const AttentionGauge control{eye, beta * eye, beta};
  std::vector<Matrix> Xs;
  for (int i = 0; i < 5; ++i) Xs.push_back(normal_matrix(rng, tokens, d));

  for (auto [act, label] : {std::pair{Activation::identity, "identity-invariance"},
                            std::pair{Activation::relu, "relu-invariance"}}) {
    const AttentionLayer layer{Wq, Wk, Wv, act};
    const AttentionLayer moved = apply_attention_gauge(layer, gauge);
    double worst = 0.0;
    for (const auto& X : Xs) worst = std::max(worst, relative(self_attention(moved, X), self_attention(layer, X)));
    sink.add(label, worst);
  }

  const AttentionLayer soft{Wq, Wk, Wv, Activation::softmax};
  const AttentionLayer soft_moved = apply_attention_gauge(soft, control);
  double deviation = 0.0;
  for (const auto& X : Xs) {
    deviation = std::max(deviation, relative(self_attention(soft_moved, X), self_attention(soft, X)));
  }
  sink.add("softmax-control", deviation);

  const AttentionLayer layer{Wq, Wk, Wv, Activation::identity};
  sink.add("qk-invariance", relative(gauge_fix_qk(apply_attention_gauge(layer, unit)), gauge_fix_qk(layer)));
}

/// Jump of the flattened token state under the full rank-structured tensor
/// Lambda^{iI}_{jJ kK lL} = lam^i_j lam~_kl delta_IK delta_JL, contracted
/// term by term.
Vector brute_force_kick(const Matrix& lam, const Matrix& lam_tilde, const Vector& z, int d, int n) {
  const int m = d * n;
  auto idx = [d](int i, int token) { return token * d + i; };
  std::vector<double> tensor(static_cast<std::size_t>(m) * m * m * m, 0.0);
  auto at = [m](int a, int b, int c, int e) {
    return ((static_cast<std::size_t>(a) * m + b) * m + c) * m + e;
  };
  for (int i = 0; i < d; ++i)
    for (int I = 0; I < n; ++I)
      for (int j = 0; j < d; ++j)
        for (int J = 0; J < n; ++J)
          for (int k = 0; k < d; ++k)
            for (int K = 0; K < n; ++K)
              for (int l = 0; l < d; ++l)
                for (int L = 0; L < n; ++L) {
                  if (I != K || J != L) continue;
                  tensor[at(idx(i, I), idx(j, J), idx(k, K), idx(l, L))] = lam(i, j) * lam_tilde(k, l);
                }
  Vector out = Vector::Zero(m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < m; ++c)
        for (int e = 0; e < m; ++e) out[a] += tensor[at(a, b, c, e)] * z[b] * z[c] * z[e];
  return out;
}

void attention_node_trial(const Context& ctx, Rng& rng, TrialSink& sink) {
  const int d = ctx.dim;
  const int n = 2;
  const TimeGrid grid(1.0, ctx.grids.front());
  const Matrix M = normal_matrix(rng, d, d) / std::sqrt(static_cast<double>(d));
  const MatrixField w = build_w_with_unit_holonomy(grid, M);
  std::uniform_int_distribution<int> node_pick(1, grid.n_steps() - 1);
  InstantaneousCubic kick{grid.time(node_pick(rng)), normal_matrix(rng, d, d) / std::sqrt(double(d)),
                          normal_matrix(rng, d, d) / std::sqrt(double(d)), 1e-3};
  const AttentionLayer layer = build_attention_from_node(w, kick);

  double single = 0.0;
  for (const auto& x : normal_inputs(rng, 5, d)) {
    const Vector via_node = integrate_cubic_node(w, kick, x);
    const Matrix tokens = x.transpose();
    const Vector via_attention = (tokens + self_attention(layer, tokens)).transpose();
    single = std::max(single, (via_node - via_attention).norm());
  }
  sink.add("node-attention", single);

  const Matrix X = normal_matrix(rng, n, d);
  const Matrix via_attention = X + self_attention(layer, X);
  sink.add("token-attention", (integrate_cubic_node_tokens(w, kick, X) - via_attention).norm());

  const Matrix to_kick = wilson_line(w, kick.t0, 0.0).matrix;
  const Matrix from_kick = wilson_line(w, grid.t_end(), kick.t0).matrix;
  const Matrix Y = X * to_kick.transpose();
  Vector z(d * n);
  for (int t = 0; t < n; ++t) z.segment(t * d, d) = Y.row(t).transpose();
  const Vector jumped = z + kick.magnitude * brute_force_kick(kick.lam, kick.lam_tilde, z, d, n);
  Matrix brute(n, d);
  for (int t = 0; t < n; ++t) brute.row(t) = (from_kick * jumped.segment(t * d, d)).transpose();
  sink.add("tensor-oracle", (brute - via_attention).norm());

  // Smoothed delta on a flat field: deviation from the kick is second order
  // in the magnitude.
  const TimeGrid fine(1.0, 2048);
  const MatrixField flat = MatrixField::constant(fine, Matrix::Zero(d, d));
  InstantaneousCubic bump{0.5, kick.lam, kick.lam_tilde, 2e-3};
  const Vector x0 = normal_vector(rng, d);
  auto deviation = [&](double magnitude) {
    bump.magnitude = magnitude;
    return (integrate_smoothed_cubic_node(flat, bump, 0.05, x0) - integrate_cubic_node(flat, bump, x0)).norm();
  };
  sink.add("smoothed-delta-ratio", std::abs(deviation(2e-3) / deviation(1e-3) - 4.0));
}

// ---------------------------------------------------------------- gauge fixing

Dataset teacher_dataset(Rng& rng, const TimeGrid& grid, int d, int count) {
  const LinearNodeParams teacher = random_smooth_params(rng, grid, d);
  Dataset data;
  for (const auto& x : normal_inputs(rng, count, d)) {
    data.push_back({x, integrate_linear(teacher, x).final_state()});
  }
  return data;
}

void regularizer_trial(const Context& ctx, Rng& rng, TrialSink& sink) {
  const int d = ctx.dim;
  const RegularizerConfig unit{1.0};

  const double a = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
  const TimeGrid unit_interval(1.0, ctx.grids.front());
  const LinearNodeParams constant(MatrixField::constant(unit_interval, a * Matrix::Identity(1, 1)),
                                  VectorField::constant(unit_interval, Vector::Zero(1)));
  sink.add("analytic-a4", std::abs(regularizer(constant, unit) - a * a * a * a));

  // w = w0 / (1 + w0 t) and b = b0 / (1 + w0 t) solve dw/dt = -w^2 and db/dt = -w b.
  const TimeGrid fine(1.0, 2048);
  const double w0 = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
  const double b0 = normal_vector(rng, 1)[0];
  const LinearNodeParams uniform(
      MatrixField::sample(fine, [&](double t) -> Matrix { return Matrix::Constant(1, 1, w0 / (1.0 + w0 * t)); }),
      VectorField::sample(fine, [&](double t) -> Vector { return Vector::Constant(1, b0 / (1.0 + w0 * t)); }));
  sink.add("zero-residual", regularizer(uniform, unit));

  const TimeGrid grid(1.0, ctx.grids.front());
  const Dataset data = teacher_dataset(rng, grid, d, 8);
  const LinearNodeParams start = random_smooth_params(rng, grid, d, 0.5);
  TrainConfig tcfg;
  tcfg.learning_rate = 0.05;
  tcfg.iterations = 40;
  tcfg.seed = ctx.config.seed;
  const TrainResult plain = train(start, data, tcfg, RegularizerConfig{0.0});
  const TrainResult fixed = train(start, data, tcfg, RegularizerConfig{0.01});
  sink.add("gauge-fixing-ratio", regularizer(fixed.params, unit) / regularizer(plain.params, unit));
}

void orbit_trial(const Context& ctx, Rng& rng, TrialSink& sink) {
  const int d = ctx.dim;
  const TimeGrid grid(1.0, ctx.grids.front());
  const LinearNodeParams params = random_smooth_params(rng, grid, d);
  Dataset data;
  for (int i = 0; i < 8; ++i) data.push_back({normal_vector(rng, d), normal_vector(rng, d)});
  const Vector grad = numerical_gradient([&](const LinearNodeParams& p) { return data_loss(p, data); }, params);
  const Vector theta = flatten(params);
  const RegularizerConfig unit{1.0};
  double worst_cosine = 0.0;
  double weakest = std::numeric_limits<double>::infinity();
  for (const auto& gen : sine_generators(grid, d, 2)) {
    const Vector tau = orbit_tangent(params, gen);
    worst_cosine = std::max(worst_cosine, std::abs(grad.dot(tau)) / (grad.norm() * tau.norm()));
    const double h = 1e-5;
    const double slope = (regularizer(unflatten(theta + h * tau, grid, d), unit) -
                          regularizer(unflatten(theta - h * tau, grid, d), unit)) /
                         (2.0 * h);
    weakest = std::min(weakest, std::abs(slope));
  }
  sink.add("orbit-orthogonality", worst_cosine);
  sink.add("regularizer-derivative", weakest);
}

using TrialFn = void (*)(const Context&, Rng&, TrialSink&);

TrialFn trial_function(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::wilson_covariance:
      return wilson_trial;
    case ExperimentKind::diffeo_invariance:
      return diffeo_trial;
    case ExperimentKind::bridge_diagram:
      return bridge_trial;
    case ExperimentKind::relu_rescale:
      return relu_trial;
    case ExperimentKind::cnn_rescale:
      return cnn_trial;
    case ExperimentKind::attention_gauge:
      return attention_gauge_trial;
    case ExperimentKind::attention_node:
      return attention_node_trial;
    case ExperimentKind::regularizer_train:
      return regularizer_trial;
    case ExperimentKind::orbit_orthogonality:
      return orbit_trial;
  }
  throw ConfigError("kind: unhandled experiment kind");
}

// ---------------------------------------------------------------- config json

template <typename T>
T field(const json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(name) + ": missing or wrong type");
  }
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = to_string(c.kind);
  if (c.dim) j["dim"] = *c.dim;
  j["grid_sizes"] = c.grid_sizes;
  j["seed"] = c.seed;
  if (c.trials) j["trials"] = *c.trials;
  j["tolerances"] = json::object();
  for (const auto& [k, v] : c.tolerances) j["tolerances"][k] = v;
  if (c.layers) j["layers"] = *c.layers;
  j["identity_gauge"] = c.identity_gauge;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  static const std::vector<std::string> known = {"kind",   "dim",    "grid_sizes",     "seed",   "trials",
                                                 "tolerances", "layers", "identity_gauge", "output", "format"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(key + ": unknown field");
    }
  }
  ExperimentConfig c;
  c.kind = parse_kind(field<std::string>(j, "kind"));
  if (j.contains("dim")) c.dim = field<int>(j, "dim");
  if (j.contains("grid_sizes")) c.grid_sizes = field<std::vector<int>>(j, "grid_sizes");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed: must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("trials")) c.trials = field<int>(j, "trials");
  if (j.contains("tolerances")) {
    if (!j.at("tolerances").is_object()) throw ConfigError("tolerances: must be an object");
    for (const auto& [key, value] : j.at("tolerances").items()) {
      if (!value.is_number()) throw ConfigError("tolerances." + key + ": must be a number");
      c.tolerances[key] = value.get<double>();
    }
  }
  if (j.contains("layers")) c.layers = field<int>(j, "layers");
  if (j.contains("identity_gauge")) c.identity_gauge = field<bool>(j, "identity_gauge");
  if (j.contains("output")) c.output = field<std::string>(j, "output");
  if (j.contains("format")) c.format = field<std::string>(j, "format");
  return c;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return std::string(name);
  }
  return "unknown";
}

ExperimentKind parse_kind(std::string_view name) {
  for (const auto& [k, known] : kKindNames) {
    if (known == name) return k;
  }
  throw ConfigError("kind: unknown experiment kind '" + std::string(name) + "'");
}

const std::vector<ExperimentKind>& all_kinds() {
  static const std::vector<ExperimentKind> kinds = [] {
    std::vector<ExperimentKind> out;
    for (const auto& [k, _] : kKindNames) out.push_back(k);
    return out;
  }();
  return kinds;
}

std::map<std::string, double> default_tolerances(ExperimentKind kind) { return defaults_for(kind).tolerances; }

ExperimentConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

ExperimentConfig resolved(const ExperimentConfig& config) {
  const Defaults def = defaults_for(config.kind);
  ExperimentConfig c = config;
  if (!c.dim) c.dim = def.dim;
  if (c.grid_sizes.empty()) c.grid_sizes = def.grid_sizes;
  if (!c.trials) c.trials = def.trials;
  if (!c.layers) c.layers = def.layers;

  if (*c.dim < 1) throw ConfigError("dim: must be at least 1");
  if (*c.trials < 0) throw ConfigError("trials: must be non-negative");
  for (int n : c.grid_sizes) {
    if (n < 1) throw ConfigError("grid_sizes: entries must be positive");
  }
  if (!std::is_sorted(c.grid_sizes.begin(), c.grid_sizes.end())) {
    throw ConfigError("grid_sizes: must be increasing");
  }
  for (const auto& [key, value] : c.tolerances) {
    if (!def.tolerances.contains(key)) throw ConfigError("tolerances." + key + ": unknown check label");
    if (!(value > 0.0)) throw ConfigError("tolerances." + key + ": must be positive");
  }
  if (c.format != "json" && c.format != "csv") throw ConfigError("format: must be json or csv");

  switch (c.kind) {
    case ExperimentKind::wilson_covariance:
      for (int n : c.grid_sizes) {
        if (n % 8 != 0) throw ConfigError("grid_sizes: wilson-covariance needs multiples of 8");
      }
      break;
    case ExperimentKind::bridge_diagram:
      if (*c.layers < 1) throw ConfigError("layers: must be at least 1");
      for (int n : c.grid_sizes) {
        if (n % *c.layers != 0) throw ConfigError("grid_sizes: must be multiples of layers");
      }
      break;
    case ExperimentKind::relu_rescale:
      if (*c.layers < 2) throw ConfigError("layers: relu-rescale needs at least 2 layers");
      break;
    case ExperimentKind::attention_node:
      if (c.grid_sizes.front() % 2 != 0 || c.grid_sizes.front() < 2) {
        throw ConfigError("grid_sizes: attention-node needs an even step count");
      }
      break;
    default:
      break;
  }
  return c;
}

bool Report::passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& c) { return c.passed; });
}

std::string library_version() { return GAUGE_LAB_VERSION; }

int thread_limit() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GAUGE_LAB_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) return static_cast<int>(value);
  }
  return static_cast<int>(hw);
}

Report run(const ExperimentConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = resolved(config);
  Context ctx{cfg, *cfg.dim, cfg.grid_sizes, *cfg.layers, defaults_for(cfg.kind).tolerances};
  for (const auto& [key, value] : cfg.tolerances) ctx.tolerances[key] = value;
  const TrialFn fn = trial_function(cfg.kind);

  const int count = *cfg.trials;
  std::vector<std::vector<TrialResult>> per_trial(count);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      TrialSink sink(i, ctx.tolerances);
      Rng rng = trial_rng(cfg.seed, static_cast<std::uint64_t>(i));
      try {
        fn(ctx, rng, sink);
      } catch (const std::exception& e) {
        sink.rows().push_back(TrialResult{i, "error", std::numeric_limits<double>::quiet_NaN(), 0.0,
                                          Comparison::le, false, e.what()});
      }
      per_trial[i] = std::move(sink.rows());
    }
  };
  const int threads = std::max(1, std::min(thread_limit(), count));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  Report report;
  report.experiment = config;
  report.experiment.output.clear();
  report.experiment.format = "json";
  report.version = library_version();
  report.seed = cfg.seed;
  std::vector<std::string> order;
  std::map<std::string, bool> verdicts;
  for (const auto& [label, _] : ctx.tolerances) {
    order.push_back(label);
    verdicts[label] = true;
  }
  for (auto& rows : per_trial) {
    for (auto& row : rows) {
      if (!verdicts.contains(row.label)) {
        order.push_back(row.label);
        verdicts[row.label] = true;
      }
      verdicts[row.label] = verdicts[row.label] && row.passed;
      report.trials.push_back(std::move(row));
    }
  }
  for (const auto& label : order) report.criteria.push_back({label, verdicts[label]});
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (!config.output.empty()) emit(report, cfg.format, config.output);
  return report;
}

std::string to_json(const Report& report) {
  json j;
  j["experiment"] = config_to_json(report.experiment);
  j["trials"] = json::array();
  for (const auto& t : report.trials) {
    json row;
    row["trial"] = t.index;
    row["label"] = t.label;
    if (std::isfinite(t.residual)) {
      row["residual"] = t.residual;
    } else {
      row["residual"] = nullptr;
    }
    row["tolerance"] = t.tolerance;
    row["comparison"] = comparison_name(t.comparison);
    row["verdict"] = t.passed ? "pass" : "fail";
    if (!t.error.empty()) row["error"] = t.error;
    j["trials"].push_back(row);
  }
  j["criteria"] = json::array();
  for (const auto& c : report.criteria) {
    j["criteria"].push_back(json{{"name", c.name}, {"verdict", c.passed ? "pass" : "fail"}});
  }
  j["passed"] = report.passed();
  j["wall_time"] = report.wall_time;
  j["version"] = report.version;
  j["seed"] = report.seed;
  return j.dump(2) + "\n";
}

Report report_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("report: invalid JSON: ") + e.what());
  }
  Report report;
  try {
    report.experiment = config_from_json(j.at("experiment"));
    for (const auto& row : j.at("trials")) {
      TrialResult t;
      t.index = row.at("trial").get<int>();
      t.label = row.at("label").get<std::string>();
      t.residual = row.at("residual").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                : row.at("residual").get<double>();
      t.tolerance = row.at("tolerance").get<double>();
      t.comparison = parse_comparison(row.at("comparison").get<std::string>());
      t.passed = row.at("verdict").get<std::string>() == "pass";
      if (row.contains("error")) t.error = row.at("error").get<std::string>();
      report.trials.push_back(t);
    }
    for (const auto& c : j.at("criteria")) {
      report.criteria.push_back({c.at("name").get<std::string>(), c.at("verdict").get<std::string>() == "pass"});
    }
    report.wall_time = j.at("wall_time").get<double>();
    report.version = j.at("version").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
  return report;
}

std::string to_csv(const Report& report) {
  std::string out = "trial,residual,tolerance,verdict\n";
  for (const auto& t : report.trials) {
    out += std::to_string(t.index) + "," + format_double(t.residual) + "," + format_double(t.tolerance) + "," +
           (t.passed ? "pass" : "fail") + "\n";
  }
  return out;
}

void emit(const Report& report, const std::string& format, const std::string& path) {
  std::string text;
  if (format == "json") {
    text = to_json(report);
  } else if (format == "csv") {
    text = to_csv(report);
  } else {
    throw ConfigError("format: must be json or csv");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace gauge_lab
