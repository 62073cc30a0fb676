#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "opentunnel/fft.hpp"
#include "opentunnel/grid.hpp"
#include "oracles.hpp"

using namespace opentunnel;
using oracles::cplx;

TEST_CASE("make_grid spacing and momentum lattice") {
  const auto g = make_grid(-8.0, 8.0, 256);
  CHECK(g.dx == Catch::Approx(0.0625).epsilon(1e-14));
  CHECK(g.x_values.front() == Catch::Approx(-8.0));
  CHECK(g.k_values.front() == Catch::Approx(-M_PI / g.dx));
  CHECK(g.k_values.back() == Catch::Approx(M_PI / g.dx - g.dk()));

  const auto g2 = make_grid(-5.0, 27.0, 1024);
  CHECK(g2.dk() == Catch::Approx(2.0 * M_PI / 32.0).epsilon(1e-14));
}

TEST_CASE("make_grid rejects bad inputs") {
  CHECK_THROWS_AS(make_grid(0.0, -1.0, 64), config_error);
  CHECK_THROWS_AS(make_grid(0.0, 1.0, 4), config_error);
  CHECK_THROWS_AS(make_grid(0.0, 1.0, 100), config_error);  // not a power of two
}

TEST_CASE("quadrature: constant, Gaussian, zero") {
  const auto g = make_grid(-8.0, 8.0, 256);
  std::vector<double> ones(g.n_points, 1.0);
  CHECK(integrate(ones, g) == Catch::Approx(16.0).epsilon(1e-12));

  // normalized Gaussian density integrates to 1 (analytic integral)
  std::vector<double> rho(g.n_points);
  for (int i = 0; i < g.n_points; ++i)
    rho[i] = std::exp(-g.x_values[i] * g.x_values[i]) / std::sqrt(M_PI);
  CHECK(integrate(rho, g) == Catch::Approx(1.0).epsilon(1e-10));

  std::vector<double> zero(g.n_points, 0.0);
  CHECK(integrate(zero, g) == 0.0);

  std::vector<double> bad(g.n_points + 1, 0.0);
  CHECK_THROWS_AS(integrate(bad, g), usage_error);
}

TEST_CASE("quadrature is linear") {
  const auto g = make_grid(-4.0, 4.0, 128);
  const auto fa = oracles::random_field(g.n_points, 11);
  const auto fb = oracles::random_field(g.n_points, 12);
  std::vector<double> f(g.n_points), h(g.n_points), combo(g.n_points);
  for (int i = 0; i < g.n_points; ++i) {
    f[i] = fa[i].real();
    h[i] = fb[i].real();
    combo[i] = 2.5 * f[i] - 1.25 * h[i];
  }
  CHECK(integrate(combo, g) ==
        Catch::Approx(2.5 * integrate(f, g) - 1.25 * integrate(h, g))
            .margin(1e-12));
}

TEST_CASE("to_momentum: self-conjugate Gaussian") {
  const auto g = make_grid(-16.0, 16.0, 512);
  ComplexField f;
  f.values.resize(g.n_points);
  const double a = std::pow(M_PI, -0.25);
  for (int i = 0; i < g.n_points; ++i)
    f.values[i] = a * std::exp(-0.5 * g.x_values[i] * g.x_values[i]);

  const auto fk = to_momentum(f, g);
  REQUIRE(fk.representation == Representation::momentum);
  for (int j = 0; j < g.n_points; ++j) {
    const double expected = a * std::exp(-0.5 * g.k_values[j] * g.k_values[j]);
    CHECK(std::abs(fk.values[j] - cplx(expected, 0.0)) < 1e-12);
  }
}

TEST_CASE("to_momentum: plane-wave modulation shifts the peak to k0") {
  const auto g = make_grid(-16.0, 16.0, 512);
  const double k0 = 16 * g.dk();  // on-lattice shift
  ComplexField f;
  f.values.resize(g.n_points);
  const double a = std::pow(M_PI, -0.25);
  for (int i = 0; i < g.n_points; ++i) {
    const double x = g.x_values[i];
    f.values[i] = a * std::exp(-0.5 * x * x) * cplx(std::cos(k0 * x), std::sin(k0 * x));
  }
  const auto fk = to_momentum(f, g);
  int argmax = 0;
  for (int j = 0; j < g.n_points; ++j)
    if (std::abs(fk.values[j]) > std::abs(fk.values[argmax])) argmax = j;
  CHECK(g.k_values[argmax] == Catch::Approx(k0).margin(1e-12));
  for (int j = 0; j < g.n_points; ++j) {
    const double kk = g.k_values[j] - k0;
    const double expected = a * std::exp(-0.5 * kk * kk);
    CHECK(std::abs(std::abs(fk.values[j]) - expected) < 1e-10);
  }
}

TEST_CASE("to_momentum matches the direct Fourier sum") {
  const auto g = make_grid(-3.0, 5.0, 64);
  ComplexField f;
  f.values = oracles::random_field(g.n_points, 7);
  const auto fk = to_momentum(f, g);
  const auto ref = oracles::naive_dft_1d(f.values, g);
  for (int j = 0; j < g.n_points; ++j)
    CHECK(std::abs(fk.values[j] - ref[j]) < 1e-11);
}

TEST_CASE("transform round trip and Parseval") {
  const auto g = make_grid(-8.0, 8.0, 256);
  ComplexField f;
  f.values = oracles::random_field(g.n_points, 3);
  // normalize in quadrature
  double n2 = norm_squared(f, g);
  for (auto& v : f.values) v /= std::sqrt(n2);

  const auto fk = to_momentum(f, g);
  CHECK(norm_squared(fk, g) == Catch::Approx(1.0).epsilon(1e-12));

  const auto back = to_position(fk, g);
  double worst = 0.0;
  for (int i = 0; i < g.n_points; ++i)
    worst = std::max(worst, std::abs(back.values[i] - f.values[i]));
  CHECK(worst < 1e-12);

  CHECK_THROWS_AS(to_momentum(fk, g), usage_error);
  CHECK_THROWS_AS(to_position(f, g), usage_error);
}

TEST_CASE("two-axis transform matches per-axis direct sums") {
  const auto g = make_grid(-2.0, 2.0, 16);
  ComplexField f;
  f.n_axes = 2;
  f.values = oracles::random_field(std::size_t(g.n_points) * g.n_points, 21);

  const auto fk = to_momentum(f, g);

  // reference: transform rows then columns with the naive sum
  const int n = g.n_points;
  std::vector<cplx> rows(f.values.size());
  for (int i = 0; i < n; ++i) {
    std::vector<cplx> row(n);
    for (int j = 0; j < n; ++j) row[j] = f.values[std::size_t(i) * n + j];
    const auto t = oracles::naive_dft_1d(row, g);
    for (int j = 0; j < n; ++j) rows[std::size_t(i) * n + j] = t[j];
  }
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    std::vector<cplx> col(n);
    for (int i = 0; i < n; ++i) col[i] = rows[std::size_t(i) * n + j];
    const auto t = oracles::naive_dft_1d(col, g);
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(fk.values[std::size_t(i) * n + j] - t[i]));
  }
  CHECK(worst < 1e-12);

  const auto back = to_position(fk, g);
  double rt = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i)
    rt = std::max(rt, std::abs(back.values[i] - f.values[i]));
  CHECK(rt < 1e-12);
}
