// The two-boson reference energy. The relative problem -d2/dr2 + r^2/4 +
// lambda0 delta(r) maps onto the textbook harmonic-trap-plus-delta problem
// (substitute r = sqrt(2) u), whose even levels solve
//   -2 Gamma(3/4 - E/2) / Gamma(1/4 - E/2) = lambda0 / sqrt(2).
// Root-finding that relation gives E_rel(1) = 0.8067455412, so the pair
// energy is 1.3067455412; the finite-difference oracle must land on it.
#include <catch2/catch_amalgamated.hpp>

#include "opentunnel/pair_energy.hpp"

using namespace opentunnel;

TEST_CASE("non-interacting pair: two harmonic quanta") {
  CHECK(exact_pair_energy(0.0) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("lambda0 = 1 matches the transcendental-equation value") {
  CHECK(exact_pair_energy(1.0) == Catch::Approx(1.3067455412).margin(1e-6));
}

TEST_CASE("strong repulsion approaches the fermionization limit from below") {
  const double e30 = exact_pair_energy(30.0);
  CHECK(e30 > 1.85);
  CHECK(e30 < 2.0);

  // monotone in the coupling
  double prev = 0.9;
  for (double lam : {0.0, 0.5, 1.0, 2.0, 5.0, 30.0}) {
    const double e = exact_pair_energy(lam);
    CHECK(e > prev);
    prev = e;
  }
}

TEST_CASE("negative coupling rejected") {
  CHECK_THROWS_AS(exact_pair_energy(-0.1), config_error);
}
