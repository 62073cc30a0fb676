// Test-only reference implementations, independent of the library's compute
// paths: direct O(n^2) Fourier sums, nested-loop partial traces, a
// golden-section maximizer and the 4x4 linear solve for the bridge
// polynomial. Used to pin expected values; deliberately naive.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "opentunnel/grid.hpp"

namespace oracles {

using cplx = std::complex<double>;

// Direct Riemann sum of the continuum Fourier transform,
// F(k_j) = dx/sqrt(2 pi) * sum_m f(x_m) exp(-i k_j x_m), monotone k order.
inline std::vector<cplx> naive_dft_1d(const std::vector<cplx>& f,
                                      const opentunnel::Grid& g) {
  std::vector<cplx> out(g.n_points);
  const double scale = g.dx / std::sqrt(2.0 * M_PI);
  for (int j = 0; j < g.n_points; ++j) {
    cplx acc = 0.0;
    for (int m = 0; m < g.n_points; ++m) {
      const double phase = -g.k_values[j] * g.x_values[m];
      acc += f[m] * cplx(std::cos(phase), std::sin(phase));
    }
    out[j] = scale * acc;
  }
  return out;
}

// Brute-force reduced one-body kernel, rho1(a,b) = N dx^(N-1) *
// sum_rest psi(a, rest) conj(psi(b, rest)), by nested loops.
inline Eigen::MatrixXcd brute_force_rho1(const std::vector<cplx>& psi, int n,
                                         int N, double dx) {
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
  if (N == 2) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        cplx acc = 0.0;
        for (int y = 0; y < n; ++y)
          acc += psi[std::size_t(a) * n + y] * std::conj(psi[std::size_t(b) * n + y]);
        rho(a, b) = 2.0 * dx * acc;
      }
  } else {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        cplx acc = 0.0;
        for (int y = 0; y < n; ++y)
          for (int z = 0; z < n; ++z)
            acc += psi[(std::size_t(a) * n + y) * n + z] *
                   std::conj(psi[(std::size_t(b) * n + y) * n + z]);
        rho(a, b) = 3.0 * dx * dx * acc;
      }
  }
  return rho;
}

inline double golden_section_max(const std::function<double(double)>& f,
                                 double lo, double hi, double tol = 1e-9) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  while (b - a > tol) {
    if (f(c) > f(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - phi * (b - a);
    d = a + phi * (b - a);
  }
  return 0.5 * (a + b);
}

// The four C^1 matching constraints as a linear system in (A, B, C, D).
inline Eigen::Vector4d solve_bridge_constraints(double T) {
  Eigen::Matrix4d m;
  Eigen::Vector4d rhs;
  const double x1 = 2.0, x2 = 4.0;
  m << x1 * x1 * x1, x1 * x1, x1, 1.0,
       3 * x1 * x1, 2 * x1, 1.0, 0.0,
       x2 * x2 * x2, x2 * x2, x2, 1.0,
       3 * x2 * x2, 2 * x2, 1.0, 0.0;
  rhs << 0.5 * x1 * x1, x1, T, 0.0;
  return m.colPivHouseholderQr().solve(rhs);
}

inline std::vector<cplx> random_field(std::size_t size, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<cplx> f(size);
  for (auto& v : f) v = cplx(dist(rng), dist(rng));
  return f;
}

}  // namespace oracles
