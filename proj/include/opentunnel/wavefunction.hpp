#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "opentunnel/grid.hpp"

namespace opentunnel {

enum class SolverKind { exact, meanfield };

/// Many-body state. Exact kind: complex amplitudes over the N-fold product
/// grid with bosonic exchange symmetry. Meanfield kind: a single orbital
/// (n_axes = 1) standing for all N particles.
struct ManyBodyWavefunction {
  int N = 1;
  double lambda0 = 0.0;
  SolverKind kind = SolverKind::exact;
  ComplexField field;
};

namespace detail {

template <typename F>
void for_each_pair_swap2(std::vector<std::complex<double>>& v, int n, F&& f) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) f(v[std::size_t(i) * n + j], v[std::size_t(j) * n + i]);
}

}  // namespace detail

/// Average over coordinate permutations (N <= 3), projecting onto the
/// bosonic sector.
inline void symmetrize(ComplexField& field, const Grid& grid) {
  const int n = grid.n_points;
  auto& v = field.values;
  if (field.n_axes == 1) return;
  if (field.n_axes == 2) {
    detail::for_each_pair_swap2(v, n, [](auto& a, auto& b) {
      const auto m = 0.5 * (a + b);
      a = m;
      b = m;
    });
    return;
  }
  // n_axes == 3: average the six permutations of (i, j, k)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j)
      for (int k = 0; k <= j; ++k) {
        const auto idx = [n](int a, int b, int c) {
          return (std::size_t(a) * n + b) * n + c;
        };
        const std::size_t p[6] = {idx(i, j, k), idx(i, k, j), idx(j, i, k),
                                  idx(j, k, i), idx(k, i, j), idx(k, j, i)};
        std::complex<double> m = 0.0;
        for (auto q : p) m += v[q];
        m /= 6.0;
        for (auto q : p) v[q] = m;
      }
}

inline double max_asymmetry(const ComplexField& field, const Grid& grid) {
  const int n = grid.n_points;
  const auto& v = field.values;
  double worst = 0.0;
  if (field.n_axes == 2) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j)
        worst = std::max(worst, std::abs(v[std::size_t(i) * n + j] -
                                         v[std::size_t(j) * n + i]));
  } else if (field.n_axes == 3) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const auto a = v[(std::size_t(i) * n + j) * n + k];
          const auto b = v[(std::size_t(j) * n + i) * n + k];
          const auto c = v[(std::size_t(i) * n + k) * n + j];
          worst = std::max({worst, std::abs(a - b), std::abs(a - c)});
        }
  }
  return worst;
}

inline void normalize(ComplexField& field, const Grid& grid) {
  const double n2 = norm_squared(field, grid);
  if (!(n2 > 0.0)) throw usage_error("normalize: zero field");
  const double s = 1.0 / std::sqrt(n2);
  for (auto& v : field.values) v *= s;
}

/// Product of unit-width trap Gaussians; the deterministic seed every
/// relaxation starts from.
inline ManyBodyWavefunction gaussian_seed(int N, double lambda0, const Grid& grid,
                                          SolverKind kind = SolverKind::exact) {
  ManyBodyWavefunction state;
  state.N = N;
  state.lambda0 = lambda0;
  state.kind = kind;
  const int axes = kind == SolverKind::exact ? N : 1;
  const int n = grid.n_points;
  std::size_t total = 1;
  for (int a = 0; a < axes; ++a) total *= n;
  state.field.n_axes = axes;
  state.field.representation = Representation::position;
  state.field.values.resize(total);

  std::vector<double> g1d(n);
  for (int i = 0; i < n; ++i) g1d[i] = std::exp(-0.5 * grid.x_values[i] * grid.x_values[i]);

  if (axes == 1) {
    for (int i = 0; i < n; ++i) state.field.values[i] = g1d[i];
  } else if (axes == 2) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        state.field.values[std::size_t(i) * n + j] = g1d[i] * g1d[j];
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          state.field.values[(std::size_t(i) * n + j) * n + k] =
              g1d[i] * g1d[j] * g1d[k];
  }
  normalize(state.field, grid);
  return state;
}

}  // namespace opentunnel
