#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include "opentunnel/fft.hpp"
#include "opentunnel/grid.hpp"
#include "opentunnel/wavefunction.hpp"

namespace opentunnel {

using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;

/// Kernel rho1(a, b) of the reduced one-body density matrix in the given
/// representation; trace * spacing = N * (surviving norm).
struct OneBodyDensityMatrix {
  ComplexMatrix matrix;
  Representation representation = Representation::position;
  int N = 0;
  double spacing = 0.0;  // dx or dk of the representation
};

namespace detail {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<std::complex<double>, Eigen::Dynamic,
                                   Eigen::Dynamic, Eigen::RowMajor>>;

inline ComplexField represented(const ManyBodyWavefunction& state,
                                const Grid& grid, Representation rep) {
  if (rep == Representation::position) return state.field;
  return to_momentum(state.field, grid);
}

}  // namespace detail

/// Partial trace over all but one coordinate, times N. For mean-field states
/// the rank-one kernel N phi phi* is used instead (single-orbital ansatz).
inline OneBodyDensityMatrix one_body_density_matrix(
    const ManyBodyWavefunction& state, const Grid& grid,
    Representation rep = Representation::position) {
  const int n = grid.n_points;
  const double w = rep == Representation::position ? grid.dx : grid.dk();

  OneBodyDensityMatrix rho;
  rho.representation = rep;
  rho.N = state.N;
  rho.spacing = w;

  const ComplexField field = detail::represented(state, grid, rep);
  const auto* data = field.values.data();

  if (state.kind == SolverKind::meanfield || state.N == 1) {
    detail::RowMajorMap phi(data, n, 1);
    rho.matrix = double(state.N) * (phi * phi.adjoint());
    return rho;
  }
  if (state.N == 2) {
    detail::RowMajorMap a(data, n, n);
    rho.matrix = (2.0 * w) * (a * a.adjoint());
    return rho;
  }
  detail::RowMajorMap a(data, n, std::size_t(n) * n);
  rho.matrix = (3.0 * w * w) * (a * a.adjoint());
  return rho;
}

/// Diagonal of the reduced one-body density matrix (the density).
inline std::vector<double> density(const OneBodyDensityMatrix& rho) {
  std::vector<double> d(rho.matrix.rows());
  for (Eigen::Index i = 0; i < rho.matrix.rows(); ++i)
    d[i] = std::max(0.0, rho.matrix(i, i).real());
  return d;
}

struct NaturalDecomposition {
  std::vector<double> occupations;  // fractions of N, descending
  std::vector<double> raw;          // operator eigenvalues, descending
  ComplexMatrix orbitals;           // columns, orthonormal under quadrature
};

/// Spectral decomposition of rho1. Occupations are reported as fractions of N
/// (a condensed state gives f1 = surviving fraction).
inline NaturalDecomposition natural_decomposition(
    const OneBodyDensityMatrix& rho, double hermiticity_tol = 1e-9) {
  const auto& m = rho.matrix;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double dev = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (dev > hermiticity_tol * scale)
    throw data_error("natural_decomposition: input not Hermitian within tolerance");

  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(0.5 * (m + m.adjoint()));
  const Eigen::Index n = m.rows();

  NaturalDecomposition out;
  out.occupations.resize(n);
  out.raw.resize(n);
  out.orbitals.resize(n, n);
  const double orbital_scale = 1.0 / std::sqrt(rho.spacing);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = n - 1 - i;  // descending
    out.raw[i] = solver.eigenvalues()(src) * rho.spacing;
    out.occupations[i] = out.raw[i] / rho.N;
    out.orbitals.col(i) = solver.eigenvectors().col(src) * orbital_scale;
  }
  return out;
}

/// Glauber first-order normalized correlation, g1(a,b) = rho1(a,b) /
/// sqrt(rho(a) rho(b)). Entries where the density is below floor_frac times
/// its maximum are undefined and reported as NaN.
inline ComplexMatrix g1(const OneBodyDensityMatrix& rho,
                        double floor_frac = 1e-12) {
  const auto d = density(rho);
  const double floor = floor_frac * *std::max_element(d.begin(), d.end());
  const Eigen::Index n = rho.matrix.rows();
  const auto nan = std::numeric_limits<double>::quiet_NaN();

  ComplexMatrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (d[i] <= floor || d[j] <= floor)
        g(i, j) = std::complex<double>(nan, nan);
      else
        g(i, j) = rho.matrix(i, j) / std::sqrt(d[i] * d[j]);
    }
  return g;
}

/// Diagonal of the reduced two-body density, rho2(a, b); double quadrature
/// equals N(N-1) * norm^2-consistent factor.
struct TwoBodyDiagonal {
  RealMatrix values;
  Representation representation = Representation::position;
  int N = 0;
  double spacing = 0.0;
};

inline TwoBodyDiagonal two_body_diagonal(
    const ManyBodyWavefunction& state, const Grid& grid,
    Representation rep = Representation::position) {
  if (state.N < 2)
    throw usage_error("two_body_diagonal: requires N >= 2");
  const int n = grid.n_points;
  const double w = rep == Representation::position ? grid.dx : grid.dk();

  TwoBodyDiagonal out;
  out.representation = rep;
  out.N = state.N;
  out.spacing = w;
  out.values.resize(n, n);

  const ComplexField field = detail::represented(state, grid, rep);
  const auto& v = field.values;
  const double pairs = double(state.N) * (state.N - 1);

  if (state.kind == SolverKind::meanfield) {
    // single-orbital factorization of the ideal condensate
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out.values(i, j) = pairs * std::norm(v[i]) * std::norm(v[j]);
    return out;
  }
  if (state.N == 2) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out.values(i, j) = pairs * std::norm(v[std::size_t(i) * n + j]);
    return out;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      const std::complex<double>* row = &v[(std::size_t(i) * n + j) * n];
      for (int k = 0; k < n; ++k) s += std::norm(row[k]);
      out.values(i, j) = pairs * w * s;
    }
  return out;
}

/// Diagonal of the second-order normalized correlation,
/// g2(a,b) = rho2(a,b) / (rho(a) rho(b)); NaN below the density floor.
inline RealMatrix g2(const TwoBodyDiagonal& two_body,
                     std::span<const double> density_values,
                     double floor_frac = 1e-12) {
  const Eigen::Index n = two_body.values.rows();
  if (std::size_t(n) != density_values.size())
    throw usage_error("g2: density length does not match rho2");
  double dmax = 0.0;
  for (double d : density_values) dmax = std::max(dmax, d);
  const double floor = floor_frac * dmax;
  const auto nan = std::numeric_limits<double>::quiet_NaN();

  RealMatrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (density_values[i] <= floor || density_values[j] <= floor)
        g(i, j) = nan;
      else
        g(i, j) = two_body.values(i, j) / (density_values[i] * density_values[j]);
    }
  return g;
}

/// Fraction of the one-body density left of the barrier maximum; absorbed
/// flux never appears in the density, so it counts as escaped.
inline double nonescape_probability(std::span<const double> density_values,
                                    const Grid& grid, double x_m, int N) {
  if (!(x_m > grid.x_min) || !(x_m < grid.x_max))
    throw config_error("nonescape_probability: x_m outside the grid");
  if (density_values.size() != std::size_t(grid.n_points))
    throw usage_error("nonescape_probability: density length mismatch");
  double s = 0.0;
  for (int i = 0; i < grid.n_points && grid.x_values[i] < x_m; ++i)
    s += density_values[i];
  return s * grid.dx / N;
}

struct Peak {
  double k = 0.0;
  double height = 0.0;
};

/// Local maxima of the momentum density above k_floor with topographic
/// prominence of at least min_prominence times the regional maximum, sorted
/// by descending k. Peak positions are refined by a three-point parabola.
/// An empty result is a valid outcome (bound system).
inline std::vector<Peak> detect_peaks(std::span<const double> momentum_density,
                                      std::span<const double> k_values,
                                      double k_floor = 0.25,
                                      double min_prominence = 0.05) {
  if (momentum_density.size() != k_values.size())
    throw usage_error("detect_peaks: length mismatch");
  const int n = int(k_values.size());
  int lo = 0;
  while (lo < n && k_values[lo] <= k_floor) ++lo;
  if (n - lo < 3) return {};

  double region_max = 0.0;
  for (int i = lo; i < n; ++i)
    region_max = std::max(region_max, momentum_density[i]);
  if (region_max <= 0.0) return {};
  const double threshold = min_prominence * region_max;

  std::vector<Peak> peaks;
  for (int i = std::max(lo + 1, 1); i + 1 < n; ++i) {
    const double h = momentum_density[i];
    if (!(h > momentum_density[i - 1]) || !(h >= momentum_density[i + 1]))
      continue;
    // valley floors toward the nearest higher terrain (or region edge)
    double left_min = h, right_min = h;
    for (int j = i - 1; j >= lo; --j) {
      if (momentum_density[j] > h) break;
      left_min = std::min(left_min, momentum_density[j]);
    }
    for (int j = i + 1; j < n; ++j) {
      if (momentum_density[j] > h) break;
      right_min = std::min(right_min, momentum_density[j]);
    }
    const double prominence = h - std::max(left_min, right_min);
    if (prominence < threshold) continue;

    const double ym = momentum_density[i - 1], y0 = h, yp = momentum_density[i + 1];
    const double denom = ym - 2.0 * y0 + yp;
    const double shift = denom != 0.0 ? 0.5 * (ym - yp) / denom : 0.0;
    const double dk = k_values[1] - k_values[0];
    peaks.push_back({k_values[i] + shift * dk, h});
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const Peak& a, const Peak& b) { return a.k > b.k; });
  return peaks;
}

/// Leading natural-occupation fractions without forming the full kernel:
/// subspace iteration on the partial-trace operator (GEMV-only). Agrees with
/// natural_decomposition(one_body_density_matrix(...)) to solver precision.
inline std::vector<double> natural_occupations_topk_raw(
    const std::complex<double>* data, int n_axes, int n, int N, double dx,
    int count, int max_iterations = 400, double tol = 1e-12) {
  count = std::min(count, n);
  const int block = std::min(n, count + 2);

  // operator application M v = N dx^(N) * A (A^H v), A the n x n^(N-1) unfolding
  const auto apply = [&](const ComplexMatrix& v) -> ComplexMatrix {
    if (n_axes == 2) {
      detail::RowMajorMap a(data, n, n);
      return (2.0 * dx * dx) * (a * (a.adjoint() * v));
    }
    detail::RowMajorMap a(data, n, std::size_t(n) * n);
    return (3.0 * dx * dx * dx) * (a * (a.adjoint() * v));
  };

  // deterministic start block: low-order cosines over the grid
  ComplexMatrix v(n, block);
  for (int c = 0; c < block; ++c)
    for (int i = 0; i < n; ++i)
      v(i, c) = std::cos(M_PI * c * (i + 0.5) / n);
  v = Eigen::HouseholderQR<ComplexMatrix>(v).householderQ() *
      ComplexMatrix::Identity(n, block);

  Eigen::VectorXd prev = Eigen::VectorXd::Zero(block);
  for (int it = 0; it < max_iterations; ++it) {
    ComplexMatrix w = apply(v);
    ComplexMatrix b = v.adjoint() * w;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> ritz(0.5 * (b + b.adjoint()));
    v = Eigen::HouseholderQR<ComplexMatrix>(w).householderQ() *
        ComplexMatrix::Identity(n, block);
    Eigen::VectorXd vals = ritz.eigenvalues().reverse();
    if ((vals - prev).cwiseAbs().maxCoeff() < tol * std::max(1.0, vals(0)))
      break;
    prev = vals;
  }
  ComplexMatrix b = v.adjoint() * apply(v);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> ritz(0.5 * (b + b.adjoint()));

  std::vector<double> fractions(count);
  for (int i = 0; i < count; ++i)
    fractions[i] = ritz.eigenvalues()(block - 1 - i) / N;
  return fractions;
}

inline std::vector<double> natural_occupations_topk(
    const ManyBodyWavefunction& state, const Grid& grid, int count,
    int max_iterations = 400, double tol = 1e-12) {
  if (state.kind == SolverKind::meanfield || state.N == 1) {
    std::vector<double> f(std::min(count, grid.n_points), 0.0);
    f[0] = norm_squared(state.field, grid);
    return f;
  }
  return natural_occupations_topk_raw(state.field.values.data(),
                                      state.field.n_axes, grid.n_points,
                                      state.N, grid.dx, count, max_iterations,
                                      tol);
}

}  // namespace opentunnel
