#include <doctest.h>

#include <cmath>

#include "instances.hpp"
#include "oracles.hpp"
#include "tiebout/error.hpp"
#include "tiebout/partition.hpp"

using namespace tiebout;

namespace {

NominalState sizes(double a) { return NominalState::sizes_only({a, 1.0 - a}); }

}  // namespace

TEST_CASE("symmetric one-dimensional split") {
  auto mu = testsupport::unit_interval(10000);
  auto p = assign(testsupport::inst_1d(0.1), mu, sizes(0.5));
  CHECK(p.sizes[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(p.sizes[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(p.sizes[0] + p.sizes[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("asymmetric nominal sizes move the split") {
  auto mu = testsupport::unit_interval(10000);
  const double x = oracle::inst_1d_split(0.1, 0.2);
  CHECK(x == doctest::Approx(0.3125));
  auto f = size_map(testsupport::inst_1d(0.1), mu, sizes(0.2));
  CHECK(std::abs(f[0] - x) < 1e-9);
  CHECK(std::abs(f[1] - (1.0 - x)) < 1e-9);
}

TEST_CASE("fixed points of the size map") {
  auto mu = testsupport::unit_interval(10000);
  const double a = oracle::inst_1d_fixed_points(0.1).front();
  auto f = size_map(testsupport::inst_1d(0.1), mu, sizes(a));
  CHECK(std::abs(f[0] - a) < 1e-6);
  // A small community repels.
  auto small = size_map(testsupport::inst_1d(0.1), mu, sizes(0.05));
  CHECK(small[0] < 0.05);
}

TEST_CASE("two-dimensional split along the bisector") {
  auto mu = testsupport::unit_square(100);
  auto p = assign(testsupport::inst_sq2(0.05), mu, sizes(0.5));
  CHECK(p.sizes[0] == doctest::Approx(0.5));
}

TEST_CASE("realized characteristics") {
  auto mu = testsupport::unit_square(100);
  auto p = assign(testsupport::inst_sq2(0.05), mu, sizes(0.5));
  CharacteristicsSpec spec = CharacteristicsSpec::none(2);
  Characteristic cx;
  cx.kind = Characteristic::Kind::coordinate;
  cx.normalization = Characteristic::Normalization::mean;
  Characteristic one;
  one.kind = Characteristic::Kind::constant;
  Characteristic share;
  share.kind = Characteristic::Kind::type_share;
  share.type = 0;
  spec.per_community = {{cx, one, share}, {cx, one, share}};
  auto v = realized_characteristics(p, spec, mu);
  REQUIRE(v.size() == 6);
  CHECK(v[0] == doctest::Approx(0.25));
  CHECK(v[1] == doctest::Approx(p.sizes[0]));
  CHECK(v[2] == doctest::Approx(p.sizes[0]));
  CHECK(v[3] == doctest::Approx(0.75));
}

TEST_CASE("border of the symmetric square instance") {
  auto mu = testsupport::unit_square(100);
  auto b = extract_border(testsupport::inst_sq2(0.05), mu, sizes(0.5), 0, 1);
  CHECK(std::abs(b.length() - 1.0) < 0.01);
  // Vertex closest to the center of the square.
  double best = 1e9, gap = 0.0;
  for (const auto& chain : b.chains) {
    for (const auto& v : chain) {
      CHECK(std::abs(v.x[0] - 0.5) < 1e-6);
      const double d = std::abs(v.x[1] - 0.5);
      if (d < best) {
        best = d;
        gap = v.gradient_gap;
      }
    }
  }
  CHECK(best < 0.01);
  CHECK(std::abs(gap - 2.0) < 0.01);
}

TEST_CASE("border of the interval instance is one point") {
  auto mu = testsupport::unit_interval(1000);
  auto b = extract_border(testsupport::inst_1d(0.1), mu, sizes(0.5), 0, 1);
  REQUIRE(b.vertex_count() == 1);
  CHECK(b.chains[0][0].x[0] == doctest::Approx(0.5));
  CHECK(b.chains[0][0].arc_weight == doctest::Approx(1.0));
}

TEST_CASE("non-adjacent communities have no border") {
  auto mu = testsupport::unit_interval(1000);
  auto model = metric_fixed_share({{0.0}, {0.5}, {1.0}}, {0.01, 0.01, 0.01});
  try {
    extract_border(model, mu, NominalState::sizes_only({1.0 / 3, 1.0 / 3, 1.0 / 3}), 0, 2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_border);
  }
}

TEST_CASE("indifference loci by price difference") {
  const Point c1{0.25, 0.5}, c2{0.75, 0.5};
  const Box box{{0.0, 0.0}, {1.0, 1.0}};
  auto line = indifference_locus(c1, c2, 0.0, box);
  CHECK(line.kind == IndifferenceLocus::Kind::line);
  REQUIRE_FALSE(line.polylines.empty());
  for (const auto& v : line.polylines[0].vertices) CHECK(std::abs(v[0] - 0.5) < 1e-6);
  CHECK(indifference_locus(c1, c2, 0.3, box).kind == IndifferenceLocus::Kind::hyperbola);
  CHECK(indifference_locus(c1, c2, 0.5, box).kind == IndifferenceLocus::Kind::ray);
  CHECK(indifference_locus(c1, c2, 0.7, box).kind == IndifferenceLocus::Kind::empty);
}
