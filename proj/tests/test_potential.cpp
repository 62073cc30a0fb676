#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "opentunnel/potential.hpp"
#include "oracles.hpp"

using namespace opentunnel;

TEST_CASE("bridge coefficients at T = 0.5 match the published parameters") {
  const auto c = polynomial_coefficients(0.5);
  CHECK(c.a == Catch::Approx(0.875).margin(1e-14));
  CHECK(c.c == Catch::Approx(25.0).margin(1e-14));
  // the magnitudes 8.375 and 21.5 are published; the C^1 constraints force
  // both signs negative (P(2) = 2 fails otherwise)
  CHECK(c.b == Catch::Approx(-8.375).margin(1e-14));
  CHECK(c.d == Catch::Approx(-21.5).margin(1e-14));
}

TEST_CASE("bridge coefficients at T = 0") {
  const auto c = polynomial_coefficients(0.0);
  CHECK(c.a == Catch::Approx(1.0).margin(1e-14));
  CHECK(c.b == Catch::Approx(-9.5).margin(1e-14));
  CHECK(c.c == Catch::Approx(28.0).margin(1e-14));
  CHECK(c.d == Catch::Approx(-24.0).margin(1e-14));
}

TEST_CASE("closed forms agree with the constraint-system solve") {
  for (double T = 0.0; T <= 1.5 + 1e-12; T += 0.05) {
    const auto c = polynomial_coefficients(T);
    const auto ref = oracles::solve_bridge_constraints(T);
    CHECK(c.a == Catch::Approx(ref(0)).margin(1e-11));
    CHECK(c.b == Catch::Approx(ref(1)).margin(1e-11));
    CHECK(c.c == Catch::Approx(ref(2)).margin(1e-11));
    CHECK(c.d == Catch::Approx(ref(3)).margin(1e-11));
  }
}

TEST_CASE("potential evaluation") {
  const auto spec = make_potential(0.5);
  CHECK(evaluate(2.0, spec, Phase::post_quench) == Catch::Approx(2.0).margin(1e-14));
  CHECK(evaluate(10.0, make_potential(0.3), Phase::post_quench) ==
        Catch::Approx(0.3).margin(1e-14));
  // midpoint of the bridge: 0.875*27 - 8.375*9 + 25*3 - 21.5
  CHECK(evaluate(3.0, spec, Phase::post_quench) == Catch::Approx(1.75).margin(1e-12));
  // pre-quench is the plain trap everywhere
  CHECK(evaluate(10.0, spec, Phase::pre_quench) == Catch::Approx(50.0).margin(1e-12));
  CHECK(evaluate(-3.0, spec, Phase::post_quench) == Catch::Approx(4.5).margin(1e-12));
}

TEST_CASE("C1 continuity at both junctions across the threshold sweep") {
  for (double T = 0.0; T <= 1.5 + 1e-12; T += 0.05) {
    const auto c = polynomial_coefficients(T);
    const auto p = [&](double x) { return ((c.a * x + c.b) * x + c.c) * x + c.d; };
    const auto dp = [&](double x) { return (3 * c.a * x + 2 * c.b) * x + c.c; };
    CHECK(std::abs(p(2.0) - 2.0) < 1e-12);
    CHECK(std::abs(dp(2.0) - 2.0) < 1e-12);
    CHECK(std::abs(p(4.0) - T) < 1e-12);
    CHECK(std::abs(dp(4.0)) < 1e-12);
  }
}

TEST_CASE("barrier maximum formula") {
  CHECK(barrier_maximum(0.0) == Catch::Approx(7.0 / 3.0).margin(1e-14));
  CHECK(barrier_maximum(0.5) == Catch::Approx(2.0 + 1.0 / 2.625).margin(1e-14));

  // numeric argmax of the bridge polynomial
  for (double T = 0.0; T <= 1.5 + 1e-12; T += 0.05) {
    const auto spec = make_potential(T);
    const double x_num = oracles::golden_section_max(
        [&](double x) { return evaluate(x, spec, Phase::post_quench); }, 2.0,
        4.0);
    CHECK(spec.x_m == Catch::Approx(x_num).margin(1e-6));
    CHECK(spec.x_m > 2.0);
    CHECK(spec.x_m < 4.0);
  }
}

TEST_CASE("plateau value increases with the threshold") {
  double prev = -1.0;
  for (double T = 0.0; T <= 1.5 + 1e-12; T += 0.05) {
    const double v = evaluate(6.0, make_potential(T), Phase::post_quench);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("thresholds at or above 2 are rejected") {
  CHECK_THROWS_AS(polynomial_coefficients(2.0), config_error);
  CHECK_THROWS_AS(barrier_maximum(2.5), config_error);
}
