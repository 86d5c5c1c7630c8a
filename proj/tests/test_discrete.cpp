#include <doctest.h>

#include <cmath>
#include <limits>

#include "gauge_lab/discrete.hpp"
#include "gauge_lab/sampling.hpp"

using namespace gauge_lab;

namespace {

FeedforwardLinearNet scalar_net(std::initializer_list<double> w, std::initializer_list<double> b) {
  FeedforwardLinearNet net;
  auto wi = w.begin();
  for (double bias : b) {
    net.layers.push_back({Matrix::Constant(1, 1, *wi++), Vector::Constant(1, bias)});
  }
  return net;
}

// x(N) = P_{N:0} x0 + sum_n P_{N:n+1} b_n with P_{N:m} = w_{N-1} ... w_m.
Vector closed_form(const FeedforwardLinearNet& net, const Vector& x0) {
  const int n = net.depth();
  auto product = [&](int from) {
    Matrix p = Matrix::Identity(net.dim(), net.dim());
    for (int m = from; m < n; ++m) p = net.layers[m].weight * p;
    return p;
  };
  Vector x = product(0) * x0;
  for (int k = 0; k < n; ++k) x += product(k + 1) * net.layers[k].bias;
  return x;
}

double max_rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace

TEST_CASE("forward pass of a linear net") {
  FeedforwardLinearNet id;
  for (int i = 0; i < 3; ++i) id.layers.push_back({Matrix::Identity(2, 2), Vector::Zero(2)});
  const Vector x(Vector::LinSpaced(2, -1.0, 4.0));
  CHECK(forward_linear(id, x) == x);

  CHECK(forward_linear(scalar_net({2, 3}, {1, 0}), Vector::Ones(1))[0] == 9.0);

  Rng rng = trial_rng(1, 30);
  const auto net = random_linear_net(rng, 5, 3);
  for (const auto& x0 : normal_inputs(rng, 5, 3)) {
    CHECK(max_rel(forward_linear(net, x0), closed_form(net, x0)) <= 1e-10);
  }
}

TEST_CASE("discrete gauge transformations") {
  const auto net = scalar_net({2, 3}, {1, 0});
  const auto same = apply_discrete_gauge(net, DiscreteGauge::identity(2, 1));
  for (int n = 0; n < 2; ++n) {
    CHECK(same.layers[n].weight == net.layers[n].weight);
    CHECK(same.layers[n].bias == net.layers[n].bias);
  }

  // G_1 = 1/2 under w' = G_{n+1}^-1 w G_n.
  auto g = DiscreteGauge::identity(2, 1);
  g.G[1] = Matrix::Constant(1, 1, 0.5);
  const auto moved = apply_discrete_gauge(net, g);
  CHECK(moved.layers[0].weight(0, 0) == 4.0);
  CHECK(moved.layers[1].weight(0, 0) == 1.5);
  CHECK(moved.layers[0].bias[0] == 2.0);
  CHECK(moved.layers[1].bias[0] == 0.0);
  CHECK(forward_linear(moved, Vector::Ones(1))[0] == 9.0);

  Rng rng = trial_rng(2, 30);
  const auto big = random_linear_net(rng, 6, 3);
  const auto dg = random_discrete_gauge(rng, 6, 3);
  CHECK(dg.respects_boundary());
  const auto transformed = apply_discrete_gauge(big, dg);
  for (const auto& x0 : normal_inputs(rng, 10, 3)) {
    CHECK(max_rel(forward_linear(transformed, x0), forward_linear(big, x0)) <= 1e-10);
  }
}

TEST_CASE("boundary-violating discrete gauge changes outputs") {
  Rng rng = trial_rng(3, 30);
  const auto net = random_linear_net(rng, 4, 3);
  auto dg = random_discrete_gauge(rng, 4, 3);
  dg.c.back() = Vector::Ones(3);
  CHECK_FALSE(dg.respects_boundary());
  const Vector x0 = normal_vector(rng, 3);
  CHECK((forward_linear(apply_discrete_gauge(net, dg), x0) - forward_linear(net, x0)).norm() > 1e-3);
}

TEST_CASE("discretization of a linear node") {
  const TimeGrid grid(1.0, 64);
  const auto zero = discretize(LinearNodeParams::zero(grid, 2), 4);
  REQUIRE(zero.depth() == 4);
  for (const auto& layer : zero.layers) {
    CHECK(layer.weight == Matrix::Identity(2, 2));
    CHECK(layer.bias == Vector::Zero(2));
  }

  const LinearNodeParams drift(MatrixField::constant(grid, Matrix::Zero(1, 1)),
                               VectorField::constant(grid, Vector::Ones(1)));
  for (const auto& layer : discretize(drift, 4).layers) {
    CHECK(layer.weight(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(layer.bias[0] - 0.25) <= 1e-12);
  }

  Rng rng = trial_rng(4, 30);
  const TimeGrid fine(1.0, 1024);
  const auto params = random_smooth_params(rng, fine, 2);
  const auto net = discretize(params, 8);
  for (const auto& x0 : normal_inputs(rng, 5, 2)) {
    CHECK((forward_linear(net, x0) - integrate_linear(params, x0).final_state()).norm() <= 1e-6);
  }

  CHECK_THROWS_AS(discretize(params, 3), GridMismatch);
}

TEST_CASE("lifted gauges interpolate the knots exactly") {
  const TimeGrid grid(1.0, 64);
  const auto id = lift_gauge(DiscreteGauge::identity(4, 2), grid);
  for (int k = 0; k < grid.node_count(); ++k) {
    CHECK(id.G[k] == Matrix::Identity(2, 2));
    CHECK(id.c[k] == Vector::Zero(2));
  }

  auto two = DiscreteGauge::identity(2, 2);
  two.G[1] = Vector(Vector::LinSpaced(2, 2.0, 1.0)).asDiagonal();
  const auto lifted = lift_gauge(two, grid);
  CHECK(lifted.G[32] == two.G[1]);
  CHECK(lifted.G[0] == Matrix::Identity(2, 2));
  CHECK(lifted.G[64] == Matrix::Identity(2, 2));

  Rng rng = trial_rng(5, 30);
  const auto dg = random_discrete_gauge(rng, 8, 3);
  const auto smooth = lift_gauge(dg, grid);
  for (int n = 0; n <= 8; ++n) {
    CHECK(smooth.G[8 * n] == dg.G[n]);
    CHECK(smooth.c[8 * n] == dg.c[n]);
  }
  CHECK(smooth.boundary_defect() == 0.0);
  // Knot slopes vanish.
  CHECK((*smooth.G_dot)[8].norm() == doctest::Approx(0.0));
}

TEST_CASE("commuting diagram") {
  Rng rng = trial_rng(6, 30);
  const TimeGrid grid(1.0, 1024);
  const Rng start = rng;
  const auto params = random_smooth_params(rng, grid, 2);

  const auto trivial = commuting_diagram_check(params, DiscreteGauge::identity(4, 2), 4);
  CHECK(trivial.max_weight_deviation <= 1e-12);
  CHECK(trivial.max_bias_deviation <= 1e-12);
  CHECK(trivial.output_deviation <= 1e-12);

  // Same underlying field sampled on a grid twice as fine.
  Rng again = start;
  const auto refined = random_smooth_params(again, grid.refined(2), 2);
  const auto dg = random_discrete_gauge(rng, 4, 2);
  const auto coarse = commuting_diagram_check(params, dg, 4);
  const auto fine = commuting_diagram_check(refined, dg, 4);
  const double dev_coarse = std::max(coarse.max_weight_deviation, coarse.max_bias_deviation);
  const double dev_fine = std::max(fine.max_weight_deviation, fine.max_bias_deviation);
  CHECK(dev_coarse <= 1e-4);
  CHECK(dev_coarse / dev_fine >= 3.0);
}

TEST_CASE("pure gauge of the zero node integrates back to gauge ratios") {
  Rng rng = trial_rng(7, 30);
  const auto dg = random_discrete_gauge(rng, 4, 2);
  const auto report = commuting_diagram_check(LinearNodeParams::zero(TimeGrid(1.0, 65536), 2), dg, 4);
  for (int n = 0; n < 4; ++n) {
    const Matrix expected = dg.G[n + 1].inverse() * dg.G[n];
    CHECK((report.discrete_path.layers[n].weight - expected).norm() <= 1e-12);
    CHECK((report.continuous_path.layers[n].weight - expected).norm() <= 1e-8);
  }
}

TEST_CASE("ReLU nets and their rescaling") {
  ReluNet id;
  for (int i = 0; i < 3; ++i) id.layers.push_back({Matrix::Identity(2, 2), Vector::Zero(2)});
  const Vector positive = Vector::LinSpaced(2, 0.5, 3.0);
  CHECK(forward_relu(id, positive) == positive);

  ReluNet small;
  small.layers = {{Matrix::Ones(1, 1), Vector::Ones(1)}, {Matrix::Ones(1, 1), Vector::Zero(1)}};
  CHECK(forward_relu(small, Vector::Ones(1))[0] == 2.0);

  const ReluNet scaled = rescale_relu(small, RescaleParams{{Vector::Constant(1, 3.0)}});
  CHECK(scaled.layers[0].weight(0, 0) == 3.0);
  CHECK(scaled.layers[0].bias[0] == 3.0);
  CHECK(scaled.layers[1].weight(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(scaled.layers[1].bias[0] == 0.0);
  CHECK(forward_relu(scaled, Vector::Ones(1))[0] == doctest::Approx(2.0).epsilon(1e-15));

  const ReluNet unchanged = rescale_relu(small, RescaleParams{{Vector::Ones(1)}});
  CHECK(unchanged.layers[1].weight == small.layers[1].weight);

  Rng rng = trial_rng(8, 30);
  const auto net = random_relu_net(rng, 4, 3);
  for (const auto& x : normal_inputs(rng, 5, 3)) {
    CHECK((forward_relu(net, -10.0 * x.cwiseAbs()).array() >= 0.0).all());
  }
  CHECK_THROWS_AS(rescale_relu(small, RescaleParams{{Vector::Constant(1, -1.0)}}), NonPositiveAlpha);
  CHECK_THROWS_AS(rescale_relu(small, RescaleParams{{Vector::Zero(1)}}), NonPositiveAlpha);
}

TEST_CASE("uncompensated ReLU rescaling is detected") {
  Rng rng = trial_rng(9, 30);
  const auto net = random_relu_net(rng, 4, 3);
  ReluNet broken = net;
  broken.layers[0].weight *= 2.0;
  double change = 0.0;
  for (const auto& x : normal_inputs(rng, 10, 3)) {
    change = std::max(change, (forward_relu(broken, x) - forward_relu(net, x)).norm());
  }
  CHECK(change > 1e-3);
}

TEST_CASE("pooling and convolution") {
  Matrix tile(2, 2);
  tile << 1, 2, 3, 4;
  ConvNet avg;
  avg.layers = {PoolLayer{1.0, 2}};
  CHECK(forward_conv(avg, tile)(0, 0) == 2.5);
  ConvNet mx;
  mx.layers = {PoolLayer{std::numeric_limits<double>::infinity(), 2}};
  CHECK(forward_conv(mx, tile)(0, 0) == 4.0);
  ConvNet l2;
  l2.layers = {PoolLayer{2.0, 2}};
  CHECK(forward_conv(l2, tile)(0, 0) == doctest::Approx(std::sqrt(30.0 / 4.0)));

  ConvNet unit;
  unit.layers = {ConvLayer{Matrix::Ones(1, 1)}};
  CHECK(forward_conv(unit, tile) == tile);

  // Brute-force valid convolution followed by ReLU.
  Rng rng = trial_rng(10, 30);
  const Matrix image = normal_matrix(rng, 6, 5);
  const Matrix filter = normal_matrix(rng, 3, 2);
  ConvNet one;
  one.layers = {ConvLayer{filter}};
  const Matrix out = forward_conv(one, image);
  REQUIRE(out.rows() == 4);
  REQUIRE(out.cols() == 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double u = 0.0;
      for (int p = 0; p < 3; ++p) {
        for (int q = 0; q < 2; ++q) u += image(i + p, j + q) * filter(p, q);
      }
      CHECK(out(i, j) == doctest::Approx(std::max(u, 0.0)).epsilon(1e-14));
    }
  }
}

TEST_CASE("convolutional rescaling") {
  ConvNet pair;
  pair.layers = {ConvLayer{Matrix::Constant(1, 1, 2.0)}, ConvLayer{Matrix::Constant(1, 1, 3.0)}};
  const std::vector<double> five = {5.0, 1.0};
  const ConvNet scaled = rescale_conv(pair, five);
  CHECK(std::get<ConvLayer>(scaled.layers[0]).filter(0, 0) == 10.0);
  CHECK(std::get<ConvLayer>(scaled.layers[1]).filter(0, 0) == doctest::Approx(0.6));
  CHECK(forward_conv(scaled, Matrix::Ones(1, 1))(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
  CHECK(forward_conv(pair, Matrix::Ones(1, 1))(0, 0) == 6.0);

  const std::vector<double> ones = {1.0, 1.0};
  CHECK(std::get<ConvLayer>(rescale_conv(pair, ones).layers[1]).filter == Matrix::Constant(1, 1, 3.0));

  Rng rng = trial_rng(11, 30);
  ConvNet pipeline;
  pipeline.layers = {ConvLayer{normal_matrix(rng, 3, 3).cwiseAbs()}, PoolLayer{2.0, 2},
                     ConvLayer{normal_matrix(rng, 3, 3).cwiseAbs()}};
  const std::vector<double> alpha = {2.0, 1.0};
  const Matrix image = normal_matrix(rng, 12, 12).cwiseAbs();
  const Matrix a = forward_conv(pipeline, image);
  const Matrix b = forward_conv(rescale_conv(pipeline, alpha), image);
  CHECK((a - b).norm() <= 1e-12 * a.norm());
  CHECK(a.norm() > 0.0);

  const std::vector<double> dangling = {1.0, 2.0};
  CHECK_THROWS_AS(rescale_conv(pipeline, dangling), StructureError);

  ConvNet too_big;
  too_big.layers = {ConvLayer{Matrix::Ones(5, 5)}};
  CHECK_THROWS_AS(forward_conv(too_big, Matrix::Ones(3, 3)), ShapeError);
}
