#pragma once

#include "gauge_lab/gauge.hpp"

namespace gauge_lab {

/// Softmax is carried only as a negative control: it has no rescaling symmetry.
enum class Activation { identity, relu, softmax };

/// h_I = sum_J phi((x_I Wq) . (x_J Wk)) (x_J Wv), unscaled and unnormalized
/// (softmax normalizes over J).
struct AttentionLayer {
  Matrix Wq;
  Matrix Wk;
  Matrix Wv;
  Activation activation = Activation::identity;

  int dim() const { return static_cast<int>(Wq.rows()); }
};

/// A B = alpha I with alpha > 0.
struct AttentionGauge {
  Matrix A;
  Matrix B;
  double alpha = 1.0;
};

/// Rows of X are tokens.
Matrix self_attention(const AttentionLayer& layer, const Matrix& X);

/// Wq -> Wq A, Wk -> Wk B^T, Wv -> Wv / alpha. The weight map is applied for
/// any activation; outputs are preserved only for identity and ReLU.
/// Throws ConstraintViolation if |A B - alpha I| exceeds `tolerance`.
AttentionLayer apply_attention_gauge(const AttentionLayer& layer, const AttentionGauge& gauge,
                                     double tolerance = 1e-12);

/// Wq Wk^T, invariant under the alpha = 1 part of the gauge.
Matrix gauge_fix_qk(const AttentionLayer& layer);

/// w = M on [0, T/2), -M on (T/2, T], 0 at the T/2 node; the holonomy cancels
/// exactly. Throws GridMismatch for an odd step count.
MatrixField build_w_with_unit_holonomy(const TimeGrid& grid, const Matrix& M);

/// Cubic kick delta(t - t0) lam^i_j lam~_kl x^j x^k x^l scaled by magnitude.
struct InstantaneousCubic {
  double t0 = 0.5;
  Matrix lam;
  Matrix lam_tilde;
  double magnitude = 0.0;
};

/// Linear flow to t0, jump x -> x + magnitude (lam x)(x^T lam~ x) using the
/// pre-kick state, linear flow to T. Throws GridMismatch if t0 is not a node.
Vector integrate_cubic_node(const MatrixField& w, const InstantaneousCubic& kick, const Vector& x0);

/// Token version: rows of X evolve under w independently; token I receives
/// magnitude * sum_J (lam x_J)(x_I^T lam~ x_J) at t0.
Matrix integrate_cubic_node_tokens(const MatrixField& w, const InstantaneousCubic& kick, const Matrix& X);

/// Delta replaced by a normalized raised-cosine bump of half-width sigma
/// centred at t0, integrated with RK4 on w's grid. Used to probe the kick's
/// perturbative order.
Vector integrate_smoothed_cubic_node(const MatrixField& w, const InstantaneousCubic& kick,
                                     double sigma, const Vector& x0);

/// Wq = W_{t0:0}^T, Wk = W_{t0:0}^T lam~^T, Wv = magnitude (W_{0:t0} lam W_{t0:0})^T,
/// identity activation. Throws HolonomyViolation if |W_{T:0} - I|_F > holonomy_tolerance.
AttentionLayer build_attention_from_node(const MatrixField& w, const InstantaneousCubic& kick,
                                         double holonomy_tolerance = 1e-6);

struct DiffeoAttentionReport {
  /// Max relative Frobenius deviation between the layer rebuilt from the
  /// transformed node and the gauge-transformed original layer.
  double weight_residual = 0.0;
  /// Relative output deviation when (lam, lam~) -> (lam / alpha, alpha lam~).
  double alpha_output_residual = 0.0;
  AttentionGauge induced;
};

/// Spatial diffeomorphism x -> G(t) x applied to the node (w -> G^-1 w G - G^-1 dG/dt,
/// lam -> G(t0)^-1 lam G(t0), lam~ -> G(t0)^T lam~ G(t0)), compared with the
/// attention gauge A = G(t0)^-T, B = G(t0)^T, alpha = 1.
DiffeoAttentionReport verify_diffeo_induces_attention_gauge(const MatrixField& w,
                                                            const InstantaneousCubic& kick,
                                                            const GaugeTransformLinear& G,
                                                            std::span<const Vector> probes,
                                                            double alpha = 7.0);

}  // namespace gauge_lab
