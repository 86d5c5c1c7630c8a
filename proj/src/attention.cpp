#include "gauge_lab/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gauge_lab/wilson.hpp"

namespace gauge_lab {

Matrix self_attention(const AttentionLayer& layer, const Matrix& X) {
  const auto d = layer.Wq.rows();
  for (const Matrix* m : {&layer.Wq, &layer.Wk, &layer.Wv}) {
    if (m->rows() != d || m->cols() != d) throw ShapeError("attention weights must be square of common size");
  }
  if (X.cols() != d) throw ShapeError("token width does not match attention weights");
  const Matrix queries = X * layer.Wq;
  const Matrix keys = X * layer.Wk;
  const Matrix values = X * layer.Wv;
  Matrix scores = queries * keys.transpose();
  switch (layer.activation) {
    case Activation::identity:
      break;
    case Activation::relu:
      scores = scores.cwiseMax(0.0);
      break;
    case Activation::softmax:
      for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const double top = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - top).exp().matrix();
        scores.row(i) /= scores.row(i).sum();
      }
      break;
  }
  return scores * values;
}

AttentionLayer apply_attention_gauge(const AttentionLayer& layer, const AttentionGauge& gauge,
                                     double tolerance) {
  const auto d = layer.Wq.rows();
  if (gauge.A.rows() != d || gauge.A.cols() != d || gauge.B.rows() != d || gauge.B.cols() != d) {
    throw ShapeError("gauge matrices must match the attention width");
  }
  if (!(gauge.alpha > 0.0)) throw ConstraintViolation("alpha must be positive");
  const double defect = (gauge.A * gauge.B - gauge.alpha * Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  if (!(defect <= tolerance * std::max(1.0, gauge.alpha))) {
    throw ConstraintViolation("A B deviates from alpha I by " + std::to_string(defect));
  }
  AttentionLayer out = layer;
  out.Wq = layer.Wq * gauge.A;
  out.Wk = layer.Wk * gauge.B.transpose();
  out.Wv = layer.Wv / gauge.alpha;
  return out;
}

Matrix gauge_fix_qk(const AttentionLayer& layer) { return layer.Wq * layer.Wk.transpose(); }

MatrixField build_w_with_unit_holonomy(const TimeGrid& grid, const Matrix& M) {
  if (grid.n_steps() % 2 != 0) throw GridMismatch("unit-holonomy field needs an even step count");
  const int half = grid.n_steps() / 2;
  std::vector<Matrix> values;
  values.reserve(grid.node_count());
  for (int k = 0; k < grid.node_count(); ++k) {
    if (k < half) {
      values.push_back(M);
    } else if (k == half) {
      values.push_back(Matrix::Zero(M.rows(), M.cols()));
    } else {
      values.push_back(-M);
    }
  }
  return MatrixField(grid, std::move(values));
}

namespace {

int kick_node(const MatrixField& w, const InstantaneousCubic& kick) {
  const auto node = w.grid().node_index(kick.t0);
  if (!node || *node == 0 || *node == w.grid().n_steps()) {
    throw GridMismatch("kick time " + std::to_string(kick.t0) + " is not an interior grid node");
  }
  return *node;
}

}  // namespace

Vector integrate_cubic_node(const MatrixField& w, const InstantaneousCubic& kick, const Vector& x0) {
  return integrate_cubic_node_tokens(w, kick, x0.transpose()).row(0).transpose();
}

Matrix integrate_cubic_node_tokens(const MatrixField& w, const InstantaneousCubic& kick, const Matrix& X) {
  const int node = kick_node(w, kick);
  const double t0 = w.grid().time(node);
  const double t_end = w.grid().t_end();
  const Matrix before = wilson_line(w, t0, 0.0).matrix;
  const Matrix after = wilson_line(w, t_end, t0).matrix;

  // Rows are tokens, so propagators act from the right, transposed.
  const Matrix y = X * before.transpose();
  Matrix kicked = y;
  if (kick.magnitude != 0.0) {
    const Matrix scores = y * kick.lam_tilde * y.transpose();  // (I, J) -> y_I^T lam~ y_J
    const Matrix pushed = y * kick.lam.transpose();            // row J -> (lam y_J)^T
    kicked += kick.magnitude * (scores * pushed);
  }
  const Matrix out = kicked * after.transpose();
  if (!out.allFinite()) throw NonFiniteState("cubic node state is not finite");
  return out;
}

Vector integrate_smoothed_cubic_node(const MatrixField& w, const InstantaneousCubic& kick,
                                     double sigma, const Vector& x0) {
  const double t_end = w.grid().t_end();
  if (!(sigma > 0.0) || kick.t0 - sigma < 0.0 || kick.t0 + sigma > t_end) {
    throw OutOfDomain("bump support must lie inside [0, T]");
  }
  GenericNode node;
  node.dim = static_cast<int>(x0.size());
  node.force = [&w, &kick, sigma](double t, const Vector& x) -> Vector {
    Vector f = w.at(t) * x;
    const double offset = t - kick.t0;
    if (std::abs(offset) < sigma) {
      const double bump = (1.0 + std::cos(std::numbers::pi * offset / sigma)) / (2.0 * sigma);
      f += kick.magnitude * bump * x.dot(kick.lam_tilde * x) * (kick.lam * x);
    }
    return f;
  };
  return integrate(node, x0, w.grid()).final_state();
}

AttentionLayer build_attention_from_node(const MatrixField& w, const InstantaneousCubic& kick,
                                         double holonomy_tolerance) {
  const int node = kick_node(w, kick);
  const double t0 = w.grid().time(node);
  const auto d = w[0].rows();
  const Matrix holonomy = wilson_line(w, w.grid().t_end(), 0.0).matrix;
  const double defect = (holonomy - Matrix::Identity(d, d)).norm();
  if (!(defect <= holonomy_tolerance)) {
    throw HolonomyViolation("|W_{T:0} - I|_F = " + std::to_string(defect));
  }
  const Matrix to_kick = wilson_line(w, t0, 0.0).matrix;
  const Matrix from_kick = wilson_line(w, 0.0, t0).matrix;
  AttentionLayer layer;
  layer.Wq = to_kick.transpose();
  layer.Wk = to_kick.transpose() * kick.lam_tilde.transpose();
  layer.Wv = kick.magnitude * (from_kick * kick.lam * to_kick).transpose();
  layer.activation = Activation::identity;
  return layer;
}

DiffeoAttentionReport verify_diffeo_induces_attention_gauge(const MatrixField& w,
                                                            const InstantaneousCubic& kick,
                                                            const GaugeTransformLinear& G,
                                                            std::span<const Vector> probes,
                                                            double alpha) {
  const int node = kick_node(w, kick);
  const Matrix g = G.G[node];
  const auto lu = g.partialPivLu();

  InstantaneousCubic moved_kick = kick;
  moved_kick.lam = lu.solve(kick.lam * g);
  moved_kick.lam_tilde = g.transpose() * kick.lam_tilde * g;
  const AttentionLayer original = build_attention_from_node(w, kick);
  const AttentionLayer rebuilt = build_attention_from_node(transform_weight(w, G), moved_kick);

  DiffeoAttentionReport report;
  report.induced = AttentionGauge{lu.inverse().transpose(), g.transpose(), 1.0};
  const AttentionLayer expected = apply_attention_gauge(original, report.induced, 1e-9);
  for (const auto& [a, b] : {std::pair{&rebuilt.Wq, &expected.Wq}, std::pair{&rebuilt.Wk, &expected.Wk},
                             std::pair{&rebuilt.Wv, &expected.Wv}}) {
    const double scale = std::max(b->norm(), std::numeric_limits<double>::min());
    report.weight_residual = std::max(report.weight_residual, (*a - *b).norm() / scale);
  }

  InstantaneousCubic split = kick;
  split.lam = kick.lam / alpha;
  split.lam_tilde = kick.lam_tilde * alpha;
  const AttentionLayer resplit = build_attention_from_node(w, split);
  for (const auto& x : probes) {
    const Matrix tokens = x.transpose();
    const Matrix h0 = self_attention(original, tokens);
    const Matrix h1 = self_attention(resplit, tokens);
    const double scale = std::max(h0.norm(), std::numeric_limits<double>::min());
    report.alpha_output_residual = std::max(report.alpha_output_residual, (h1 - h0).norm() / scale);
  }
  return report;
}

}  // namespace gauge_lab
