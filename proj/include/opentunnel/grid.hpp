#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "opentunnel/errors.hpp"

namespace opentunnel {

enum class Representation { position, momentum };

/// Uniform periodic lattice on [x_min, x_max) together with its conjugate
/// momentum lattice. All fields, quadrature and transforms live on it.
/// Dimensionless units throughout (hbar = m = 1).
struct Grid {
  double x_min = 0.0;
  double x_max = 0.0;
  int n_points = 0;
  double dx = 0.0;
  std::vector<double> x_values;  // x_min + i*dx, i = 0..n-1
  std::vector<double> k_values;  // monotone, [-pi/dx, pi/dx) with spacing dk

  double length() const { return x_max - x_min; }
  double dk() const { return 2.0 * M_PI / (n_points * dx); }
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// n_points must be a power of two >= 8: every transform in the toolkit is a
/// radix-2 FFT and the propagation loops assume it.
inline Grid make_grid(double x_min, double x_max, int n_points) {
  if (!(x_max > x_min))
    throw config_error("make_grid: x_max must exceed x_min");
  if (n_points < 8 || !is_power_of_two(n_points))
    throw config_error("make_grid: n_points must be a power of two >= 8");

  Grid g;
  g.x_min = x_min;
  g.x_max = x_max;
  g.n_points = n_points;
  g.dx = (x_max - x_min) / n_points;
  g.x_values.resize(n_points);
  g.k_values.resize(n_points);
  const double dk = 2.0 * M_PI / (n_points * g.dx);
  for (int i = 0; i < n_points; ++i) {
    g.x_values[i] = x_min + i * g.dx;
    g.k_values[i] = (i - n_points / 2) * dk;
  }
  return g;
}

/// Complex amplitude field over the grid or over its N-fold cartesian product
/// (values.size() == n_points^n_axes, row-major, axis 0 slowest).
struct ComplexField {
  std::vector<std::complex<double>> values;
  Representation representation = Representation::position;
  int n_axes = 1;
};

namespace detail {

inline int infer_axes(std::size_t size, int n_points) {
  std::size_t v = n_points;
  for (int axes = 1; axes <= 3; ++axes, v *= n_points)
    if (size == v) return axes;
  throw usage_error("field length is not n_points^k for k in 1..3");
}

}  // namespace detail

/// Riemann-sum quadrature with the periodic convention (no endpoint weights).
/// Accepts 1..3-axis product fields; the weight is dx per axis.
inline double integrate(std::span<const double> field_values, const Grid& grid) {
  const int axes = detail::infer_axes(field_values.size(), grid.n_points);
  double sum = 0.0;
  for (double v : field_values) sum += v;
  return sum * std::pow(grid.dx, axes);
}

inline double norm_squared(const ComplexField& field, const Grid& grid) {
  const double w = field.representation == Representation::position
                       ? grid.dx
                       : grid.dk();
  double sum = 0.0;
  for (const auto& v : field.values) sum += std::norm(v);
  return sum * std::pow(w, field.n_axes);
}

}  // namespace opentunnel
