#include <doctest.h>

#include "gauge_lab/time_grid.hpp"

using namespace gauge_lab;

TEST_CASE("time grid nodes are uniform and end exactly at T") {
  const TimeGrid grid(0.7, 10);
  CHECK(grid.step() == 0.7 / 10);
  CHECK(grid.node_count() == 11);
  CHECK(grid.time(0) == 0.0);
  CHECK(grid.time(10) == 0.7);
  for (int k = 0; k < 10; ++k) CHECK(grid.time(k) < grid.time(k + 1));
}

TEST_CASE("time grid rejects bad sizes") {
  CHECK_THROWS_AS(TimeGrid(0.0, 4), ShapeError);
  CHECK_THROWS_AS(TimeGrid(1.0, 0), ShapeError);
}

TEST_CASE("node lookup and cell location") {
  const TimeGrid grid(1.0, 8);
  CHECK(grid.node_index(0.375) == 3);
  CHECK_FALSE(grid.node_index(0.3).has_value());
  const auto [cell, theta] = grid.locate(0.3);
  CHECK(cell == 2);
  CHECK(theta == doctest::Approx(0.4));
  CHECK(grid.locate(1.0).first == 7);
  CHECK(grid.refined(2).n_steps() == 16);
}

TEST_CASE("fields interpolate linearly and are exact at nodes") {
  const TimeGrid grid(1.0, 4);
  const auto f = ScalarField::sample(grid, [](double t) { return t * t; });
  CHECK(f.at(0.25) == 0.0625);
  CHECK(f.at(0.375) == doctest::Approx(0.5 * (0.0625 + 0.25)));
  CHECK(f.slope(0.3) == doctest::Approx((0.25 - 0.0625) / 0.25));
}

TEST_CASE("node derivatives are exact for quadratics, ends included") {
  const TimeGrid grid(2.0, 8);
  const auto f = ScalarField::sample(grid, [](double t) { return 3.0 * t * t - t + 1.0; });
  for (int k = 0; k < f.size(); ++k) CHECK(f.node_derivative(k) == doctest::Approx(6.0 * grid.time(k) - 1.0));
}

TEST_CASE("fields reject wrong lengths and mixed shapes") {
  const TimeGrid grid(1.0, 2);
  CHECK_THROWS_AS(VectorField(grid, {Vector::Zero(2), Vector::Zero(2)}), ShapeError);
  CHECK_THROWS_AS(VectorField(grid, {Vector::Zero(2), Vector::Zero(3), Vector::Zero(2)}), ShapeError);
}

TEST_CASE("time function rate falls back to finite differences") {
  const TimeFunction f{[](double t) { return std::sin(t); }, nullptr};
  CHECK(f.rate(0.4) == doctest::Approx(std::cos(0.4)).epsilon(1e-8));
}
