#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "instances.hpp"
#include "tiebout/error.hpp"
#include "tiebout/measure.hpp"

using namespace tiebout;

TEST_CASE("grid on the unit interval uses cell midpoints") {
  auto mu = testsupport::unit_interval(4);
  REQUIRE(mu.size() == 4);
  const double expected[] = {0.125, 0.375, 0.625, 0.875};
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(mu.type(0).point(s)[0] == doctest::Approx(expected[s]));
    CHECK(mu.type(0).weights[s] == doctest::Approx(0.25));
  }
}

TEST_CASE("grid on the unit square, two cells per axis") {
  auto mu = testsupport::unit_square(2);
  REQUIRE(mu.size() == 4);
  for (double w : mu.type(0).weights) CHECK(w == doctest::Approx(0.25));
}

TEST_CASE("disk support is normalized and its raw mass matches the area") {
  TypeSpace s;
  s.dimension = 2;
  s.support = ball_support({0.0, 0.0}, 1.0);
  auto mu = build_grid_measure(s, 100);
  CHECK(mu.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  // Box mass is 4; the disk holds pi/4 of it.
  CHECK(std::abs(mu.type(0).raw_mass / 4.0 - std::numbers::pi / 4.0) < 0.01);
}

TEST_CASE("Monte-Carlo samples are seeded") {
  TypeSpace s;
  s.dimension = 1;
  s.support = box_support(Box{{0.0}, {1.0}});
  auto a = build_monte_carlo_measure(s, 1000, 7);
  auto b = build_monte_carlo_measure(s, 1000, 7);
  CHECK(a.type(0).points == b.type(0).points);
  double mean = 0.0;
  for (double x : a.type(0).points) mean += x / 1000.0;
  CHECK(std::abs(mean - 0.5) < 0.05);

  auto one = build_monte_carlo_measure(s, 1, 3);
  REQUIRE(one.size() == 1);
  CHECK(one.type(0).weights[0] == doctest::Approx(1.0));
}

TEST_CASE("measure_of on simple predicates") {
  auto mu = testsupport::unit_square(100);
  CHECK(measure_of(mu, [](std::size_t, PointView) { return true; }) == doctest::Approx(1.0));
  CHECK(measure_of(mu, [](std::size_t, PointView) { return false; }) == 0.0);
  CHECK(std::abs(measure_of(mu, [](std::size_t, PointView x) { return x[0] < 0.5; }) - 0.5) < 1e-9);
}

TEST_CASE("type mass shares") {
  TypeSpace a;
  a.dimension = 1;
  a.support = box_support(Box{{0.0}, {1.0}});
  a.mass_share = 0.3;
  TypeSpace b = a;
  b.type_index = 1;
  b.mass_share = 0.7;
  auto mu = build_grid_measure({a, b}, 10);
  CHECK(mu.type_count() == 2);
  CHECK(measure_of(mu, [](std::size_t t, PointView) { return t == 1; }) == doctest::Approx(0.7));
}

TEST_CASE("piecewise-constant density weights") {
  TypeSpace s;
  s.dimension = 1;
  s.support = box_support(Box{{0.0}, {1.0}});
  s.density.kind = DensitySpec::Kind::piecewise_constant;
  s.density.pieces = {{Box{{0.0}, {0.5}}, 3.0}};
  s.density.background = 1.0;
  auto mu = build_grid_measure(s, 100);
  CHECK(measure_of(mu, [](std::size_t, PointView x) { return x[0] < 0.5; }) ==
        doctest::Approx(0.75));
}

TEST_CASE("empty support is rejected") {
  TypeSpace s;
  s.dimension = 2;
  s.support = box_support(Box{{0.0, 0.0}, {1.0, 1.0}});
  s.support.predicate = [](PointView) { return false; };
  CHECK_THROWS_AS(build_grid_measure(s, 10), Error);
}

TEST_CASE("debug dump columns") {
  auto mu = testsupport::unit_square(2);
  std::ostringstream out;
  write_measure_csv(out, mu);
  CHECK(out.str().rfind("type,j,x_1,x_2,w\n", 0) == 0);
}
