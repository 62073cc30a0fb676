#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "opentunnel/fft.hpp"
#include "opentunnel/grid.hpp"
#include "opentunnel/observables.hpp"
#include "opentunnel/potential.hpp"
#include "opentunnel/wavefunction.hpp"

namespace opentunnel {

/// Negative-imaginary potential ramp absorbing outgoing flux near the right
/// grid edge; stands in for the asymptotically large open region. Zero below
/// the onset, strength * ((x-onset)/(x_max-onset))^order beyond it.
struct Absorber {
  double onset = 0.0;
  double strength = 0.0;
  int order = 4;

  static Absorber none() { return {0.0, 0.0, 4}; }
  bool active() const { return strength > 0.0; }
};

inline double absorber_profile(double x, const Absorber& a, double x_max) {
  if (!a.active() || x <= a.onset) return 0.0;
  const double s = (x - a.onset) / (x_max - a.onset);
  return a.strength * std::pow(s, a.order);
}

struct Snapshot {
  double t = 0.0;
  double norm = 0.0;  // surviving quadrature norm of |psi|^2
  double pnot = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> density;
  std::vector<double> momentum_density;      // monotone k order; may be empty
  std::vector<double> occupation_fractions;  // filled on analysis snapshots
};

struct Trajectory {
  int N = 0;
  double lambda0 = 0.0;
  double threshold = 0.0;
  double dt = 0.0;
  int snapshot_stride = 1;
  Grid grid;
  std::vector<Snapshot> snapshots;
  ManyBodyWavefunction final_state;
  bool has_final_state = false;
};

struct PropagateOptions {
  enum class Mode { post_quench, pre_quench, free_space };
  Mode mode = Mode::post_quench;
  bool momentum_density = true;
  int analysis_stride = 0;  // occupations every k-th snapshot; 0 disables
  int occupation_count = 4;
  bool keep_final_state = true;
};

struct RelaxOptions {
  double tol = 1e-11;  // convergence: per-step energy change
  int max_steps = 2000;
  int warmup_steps = 300;
  double dtau_coarse = 0.1;
  double dtau_fine = 0.01;
  double precond_sigma = 2.0;    // shift of the kinetic preconditioner
  bool staged = true;            // relax on coarser grids first, then refine
  double boundary_density_tol = 1e-12;
};

struct RelaxResult {
  ManyBodyWavefunction state;
  double energy = 0.0;  // Rayleigh quotient of the grid Hamiltonian
  int total_steps = 0;
};

namespace detail {

// Deterministic parallel reduction: fixed chunk decomposition independent of
// the number of threads, partials combined in chunk order.
template <typename F>
double chunked_sum(std::size_t total, F&& term) {
  constexpr int kChunks = 64;
  double partial[kChunks] = {};
  const std::size_t chunk = (total + kChunks - 1) / kChunks;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < kChunks; ++c) {
    const std::size_t lo = c * chunk;
    const std::size_t hi = std::min(total, lo + chunk);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[c] = s;
  }
  double sum = 0.0;
  for (int c = 0; c < kChunks; ++c) sum += partial[c];
  return sum;
}

inline std::vector<double> one_body_samples(const Grid& grid,
                                            const PotentialSpec& spec,
                                            PropagateOptions::Mode mode) {
  std::vector<double> v(grid.n_points, 0.0);
  if (mode == PropagateOptions::Mode::free_space) return v;
  const Phase phase = mode == PropagateOptions::Mode::pre_quench
                          ? Phase::pre_quench
                          : Phase::post_quench;
  for (int i = 0; i < grid.n_points; ++i)
    v[i] = evaluate(grid.x_values[i], spec, phase);
  return v;
}

inline std::vector<double> damping_samples(const Grid& grid, const Absorber& a) {
  std::vector<double> g(grid.n_points, 0.0);
  if (a.active())
    for (int i = 0; i < grid.n_points; ++i)
      g[i] = absorber_profile(grid.x_values[i], a, grid.x_max);
  return g;
}

// Total potential of the product grid at a coordinate tuple: one-body terms
// plus lambda0/dx per coincident pair (grid regularization of the contact
// interaction).
template <typename Emit>
void for_each_product_point(int axes, int n, Emit&& emit) {
  if (axes == 1) {
    for (int i = 0; i < n; ++i) emit(std::size_t(i), i, i, i);
  } else if (axes == 2) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) emit(std::size_t(i) * n + j, i, j, j);
  } else {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          emit((std::size_t(i) * n + j) * n + k, i, j, k);
  }
}

inline int coincident_pairs(int axes, int i, int j, int k) {
  if (axes < 2) return 0;
  if (axes == 2) return i == j ? 1 : 0;
  return (i == j) + (i == k) + (j == k);
}

struct ProductOperator {
  int axes = 1;
  int n = 0;
  std::size_t total = 0;
  std::vector<double> v1;     // one-body potential samples
  std::vector<double> gamma;  // absorber samples
  double contact = 0.0;       // lambda0/dx

  double potential_at(int i, int j, int k) const {
    double v = v1[i];
    if (axes >= 2) v += v1[j];
    if (axes >= 3) v += v1[k];
    return v + contact * coincident_pairs(axes, i, j, k);
  }
  double damping_at(int i, int j, int k) const {
    double g = gamma[i];
    if (axes >= 2) g += gamma[j];
    if (axes >= 3) g += gamma[k];
    return g;
  }
};

inline ProductOperator make_product_operator(int axes, const Grid& grid,
                                             const PotentialSpec& spec,
                                             PropagateOptions::Mode mode,
                                             const Absorber& absorber,
                                             double lambda0) {
  ProductOperator op;
  op.axes = axes;
  op.n = grid.n_points;
  op.total = 1;
  for (int a = 0; a < axes; ++a) op.total *= grid.n_points;
  op.v1 = one_body_samples(grid, spec, mode);
  op.gamma = damping_samples(grid, absorber);
  op.contact = axes >= 2 ? lambda0 / grid.dx : 0.0;
  return op;
}

// exp(-i dt V - dt Gamma) sampled over the product grid.
inline std::vector<std::complex<double>> phase_factor(const ProductOperator& op,
                                                      double dt) {
  std::vector<std::complex<double>> f(op.total);
  for_each_product_point(op.axes, op.n, [&](std::size_t idx, int i, int j, int k) {
    const double v = op.potential_at(i, j, k);
    const double g = op.damping_at(i, j, k);
    const double amp = std::exp(-dt * g);
    f[idx] = amp * std::complex<double>(std::cos(dt * v), -std::sin(dt * v));
  });
  return f;
}

// exp(-dtau V) for imaginary time (no absorber in relaxation).
inline std::vector<double> decay_factor(const ProductOperator& op, double dtau) {
  std::vector<double> f(op.total);
  for_each_product_point(op.axes, op.n, [&](std::size_t idx, int i, int j, int k) {
    f[idx] = std::exp(-dtau * op.potential_at(i, j, k));
  });
  return f;
}

// Per-axis kinetic factor in FFT order, with the 1/n round-trip share folded in.
template <typename T>
std::vector<T> kinetic_factor_1d(const Grid& grid, double dt, bool imaginary_time);

template <>
inline std::vector<std::complex<double>> kinetic_factor_1d(const Grid& grid,
                                                           double dt, bool) {
  const int n = grid.n_points;
  const double dk = grid.dk();
  std::vector<std::complex<double>> f(n);
  for (int j = 0; j < n; ++j) {
    const double k = (j < n / 2 ? j : j - n) * dk;
    const double phi = -dt * 0.5 * k * k;
    f[j] = std::complex<double>(std::cos(phi), std::sin(phi)) / double(n);
  }
  return f;
}

template <>
inline std::vector<double> kinetic_factor_1d(const Grid& grid, double dtau, bool) {
  const int n = grid.n_points;
  const double dk = grid.dk();
  std::vector<double> f(n);
  for (int j = 0; j < n; ++j) {
    const double k = (j < n / 2 ? j : j - n) * dk;
    f[j] = std::exp(-dtau * 0.5 * k * k) / double(n);
  }
  return f;
}

template <typename Fac>
void apply_pointwise(std::vector<std::complex<double>>& psi,
                     const std::vector<Fac>& factor) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(psi.size()); ++i)
    psi[i] *= factor[i];
}

template <typename Fac>
void apply_kinetic(std::vector<std::complex<double>>& psi,
                   const std::vector<Fac>& kfac, int axes, int n) {
  if (axes == 1) {
    for (int j = 0; j < n; ++j) psi[j] *= kfac[j];
  } else if (axes == 2) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const Fac fi = kfac[i];
      std::complex<double>* row = &psi[std::size_t(i) * n];
      for (int j = 0; j < n; ++j) row[j] *= fi * kfac[j];
    }
  } else {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const Fac fij = kfac[i] * kfac[j];
        std::complex<double>* row = &psi[(std::size_t(i) * n + j) * n];
        for (int k = 0; k < n; ++k) row[k] *= fij * kfac[k];
      }
  }
}

inline std::vector<double> density_marginal(
    const std::vector<std::complex<double>>& psi, int axes, int n, int N,
    double dx) {
  std::vector<double> rho(n, 0.0);
  if (axes == 1) {
    for (int i = 0; i < n; ++i) rho[i] = N * std::norm(psi[i]);
    return rho;
  }
  if (axes == 2) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      const std::complex<double>* row = &psi[std::size_t(i) * n];
      for (int j = 0; j < n; ++j) s += std::norm(row[j]);
      rho[i] = N * dx * s;
    }
    return rho;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    const std::complex<double>* plane = &psi[std::size_t(i) * n * n];
    for (std::size_t q = 0; q < std::size_t(n) * n; ++q) s += std::norm(plane[q]);
    rho[i] = N * dx * dx * s;
  }
  return rho;
}

// Momentum marginal from an unnormalized forward FFT of psi, reordered to the
// monotone k lattice.
inline std::vector<double> momentum_marginal_from_fft(
    const std::vector<std::complex<double>>& psi_fft, int axes, int n, int N,
    double dx, double dk) {
  const double per_axis = dx * dx / (2.0 * M_PI);
  double scale = N;
  for (int a = 0; a < axes; ++a) scale *= per_axis;
  for (int a = 0; a < axes - 1; ++a) scale *= dk;

  std::vector<double> rho_fft(n, 0.0);
  if (axes == 1) {
    for (int i = 0; i < n; ++i) rho_fft[i] = scale * std::norm(psi_fft[i]);
  } else if (axes == 2) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      const std::complex<double>* row = &psi_fft[std::size_t(i) * n];
      for (int j = 0; j < n; ++j) s += std::norm(row[j]);
      rho_fft[i] = scale * s;
    }
  } else {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      const std::complex<double>* plane = &psi_fft[std::size_t(i) * n * n];
      for (std::size_t q = 0; q < std::size_t(n) * n; ++q)
        s += std::norm(plane[q]);
      rho_fft[i] = scale * s;
    }
  }
  std::vector<double> rho(n);
  for (int j = 0; j < n; ++j) rho[j] = rho_fft[fft_index(j, n)];
  return rho;
}

inline std::vector<double> half_k2_table(const Grid& grid) {
  const int n = grid.n_points;
  const double dk = grid.dk();
  std::vector<double> t(n);
  for (int j = 0; j < n; ++j) {
    const double k = (j < n / 2 ? j : j - n) * dk;
    t[j] = 0.5 * k * k;
  }
  return t;
}

// In k space multiply psi by f(sum_axes k2half) * scale, with f either the
// identity (Hamiltonian application) or the shifted inverse (preconditioner).
template <bool Inverse>
void apply_kinetic_sum(std::vector<std::complex<double>>& psi,
                       const std::vector<double>& k2half, int axes, int n,
                       double sigma, double scale) {
  const auto factor = [&](double e) {
    return Inverse ? scale / (e + sigma) : scale * e;
  };
  if (axes == 1) {
    for (int j = 0; j < n; ++j) psi[j] *= factor(k2half[j]);
  } else if (axes == 2) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const double ei = k2half[i];
      std::complex<double>* row = &psi[std::size_t(i) * n];
      for (int j = 0; j < n; ++j) row[j] *= factor(ei + k2half[j]);
    }
  } else {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double eij = k2half[i] + k2half[j];
        std::complex<double>* row = &psi[(std::size_t(i) * n + j) * n];
        for (int k = 0; k < n; ++k) row[k] *= factor(eij + k2half[k]);
      }
  }
}

inline double kinetic_energy_from_fft(
    const std::vector<std::complex<double>>& psi_fft, int axes, int n,
    double dx, double dk) {
  double scale = 1.0;
  for (int a = 0; a < axes; ++a) scale *= dx / n;
  std::vector<double> k2(n);
  for (int j = 0; j < n; ++j) {
    const double k = (j < n / 2 ? j : j - n) * dk;
    k2[j] = 0.5 * k * k;
  }
  const std::size_t total = psi_fft.size();
  return scale * chunked_sum(total, [&](std::size_t idx) {
           std::size_t rest = idx;
           double e = 0.0;
           for (int a = 0; a < axes; ++a) {
             e += k2[rest % n];
             rest /= n;
           }
           return std::norm(psi_fft[idx]) * e;
         });
}

}  // namespace detail

/// Rayleigh quotient of the grid Hamiltonian (kinetic spectral, potential and
/// contact term pointwise). The absorber is not part of the energy.
inline double state_energy(const ManyBodyWavefunction& state, const Grid& grid,
                           const PotentialSpec& spec,
                           PropagateOptions::Mode mode = PropagateOptions::Mode::post_quench) {
  if (state.kind != SolverKind::exact)
    throw usage_error("state_energy: exact-kind state required");
  const int axes = state.field.n_axes;
  const int n = grid.n_points;
  const auto op = detail::make_product_operator(axes, grid, spec, mode,
                                                Absorber::none(), state.lambda0);

  std::vector<std::complex<double>> work = state.field.values;
  fft::BoundTransform plan(work.data(), n, axes);
  plan.forward();
  const double e_kin =
      detail::kinetic_energy_from_fft(work, axes, n, grid.dx, grid.dk());

  double dxn = 1.0;
  for (int a = 0; a < axes; ++a) dxn *= grid.dx;
  const auto& psi = state.field.values;
  const double e_pot =
      dxn * detail::chunked_sum(psi.size(), [&](std::size_t idx) {
        std::size_t rest = idx;
        int c[3] = {0, 0, 0};
        for (int a = axes - 1; a >= 0; --a) {
          c[a] = int(rest % n);
          rest /= n;
        }
        return std::norm(psi[idx]) * op.potential_at(c[0], c[1], c[2]);
      });
  const double n2 = norm_squared(state.field, grid);
  return (e_kin + e_pot) / n2;
}

namespace detail {

// Exact grid-Hamiltonian application, y = H x: spectral kinetic term plus
// pointwise potential and contact terms. No splitting error.
class GroundStateWorkspace {
 public:
  GroundStateWorkspace(const Grid& grid, const ProductOperator& op)
      : op_(&op),
        n_(grid.n_points),
        axes_(op.axes),
        dxn_(std::pow(grid.dx, op.axes)),
        k2_(half_k2_table(grid)),
        work_(op.total),
        plan_(work_.data(), grid.n_points, op.axes) {
    inv_total_ = 1.0;
    for (int a = 0; a < axes_; ++a) inv_total_ /= n_;
    potential_.resize(op.total);
    for_each_product_point(axes_, n_, [&](std::size_t idx, int i, int j, int k) {
      potential_[idx] = op.potential_at(i, j, k);
    });
  }

  void apply_h(const std::vector<std::complex<double>>& x,
               std::vector<std::complex<double>>& y) {
    std::copy(x.begin(), x.end(), work_.begin());
    plan_.forward();
    apply_kinetic_sum<false>(work_, k2_, axes_, n_, 0.0, inv_total_);
    plan_.backward();
    y.resize(x.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(x.size()); ++i)
      y[i] = work_[i] + potential_[i] * x[i];
  }

  // y = (K + sigma)^-1 x, the kinetic-shift preconditioner
  void precondition(const std::vector<std::complex<double>>& x,
                    std::vector<std::complex<double>>& y, double sigma) {
    std::copy(x.begin(), x.end(), work_.begin());
    plan_.forward();
    apply_kinetic_sum<true>(work_, k2_, axes_, n_, sigma, inv_total_);
    plan_.backward();
    y = work_;
  }

  double dot_real(const std::vector<std::complex<double>>& a,
                  const std::vector<std::complex<double>>& b) const {
    return dxn_ * chunked_sum(a.size(), [&](std::size_t i) {
             return a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
           });
  }

  double dxn() const { return dxn_; }

 private:
  const ProductOperator* op_;
  int n_;
  int axes_;
  double dxn_;
  double inv_total_;
  std::vector<double> k2_;
  std::vector<double> potential_;
  std::vector<std::complex<double>> work_;
  fft::BoundTransform plan_;
};

}  // namespace detail

/// Trapped ground state for N = 1..3 on the N-fold product grid, from the
/// deterministic Gaussian seed. A short imaginary-time warmup (split steps
/// with renormalization) is followed by locally-optimal preconditioned
/// conjugate-gradient descent of the Rayleigh quotient with the exact grid
/// Hamiltonian, iterated until the energy change per step drops below tol.
/// The energy sequence is monotone non-increasing throughout. The descent
/// stage avoids the split-step bias of the bare imaginary-time flow, which
/// grows as dtau^2 (lambda0/dx)^3 and would otherwise dominate on fine grids.
/// Coarser power-of-two stages are solved first and Fourier-interpolated up.
inline RelaxResult relax_ground_state(int N, double lambda0, const Grid& grid,
                                      const RelaxOptions& options = {}) {
  if (N < 1 || N > 3)
    throw config_error("relax_ground_state: N must be 1, 2 or 3");
  if (lambda0 < 0.0)
    throw config_error("relax_ground_state: lambda0 must be non-negative");

  const PotentialSpec trap = make_potential(0.0);  // pre-quench: plain trap

  std::vector<int> stage_points;
  if (options.staged) {
    for (int m = 256; m < grid.n_points; m *= 4) stage_points.push_back(m);
  }
  stage_points.push_back(grid.n_points);

  int total_steps = 0;
  std::vector<std::complex<double>> psi;
  using Cvec = std::vector<std::complex<double>>;

  for (std::size_t s = 0; s < stage_points.size(); ++s) {
    const bool final_stage = s + 1 == stage_points.size();
    const Grid g = stage_points[s] == grid.n_points
                       ? grid
                       : make_grid(grid.x_min, grid.x_max, stage_points[s]);
    const int n = g.n_points;
    const auto op = detail::make_product_operator(
        N, g, trap, PropagateOptions::Mode::pre_quench, Absorber::none(), lambda0);

    if (s == 0) {
      psi = gaussian_seed(N, lambda0, g).field.values;
    } else {
      // Fourier zero-pad interpolation from the previous stage
      const int nc = stage_points[s - 1];
      fft::BoundTransform coarse_plan(psi.data(), nc, N);
      coarse_plan.forward();
      std::size_t fine_total = 1;
      for (int a = 0; a < N; ++a) fine_total *= n;
      Cvec fine(fine_total, 0.0);
      const double scale = std::pow(1.0 / nc, N);
      const auto map_idx = [&](int jc) {
        const int f = jc < nc / 2 ? jc : jc - nc;
        return (f + n) % n;
      };
      if (N == 1) {
        for (int i = 0; i < nc; ++i) fine[map_idx(i)] = psi[i] * scale;
      } else if (N == 2) {
        for (int i = 0; i < nc; ++i)
          for (int j = 0; j < nc; ++j)
            fine[std::size_t(map_idx(i)) * n + map_idx(j)] =
                psi[std::size_t(i) * nc + j] * scale;
      } else {
        for (int i = 0; i < nc; ++i)
          for (int j = 0; j < nc; ++j)
            for (int k = 0; k < nc; ++k)
              fine[(std::size_t(map_idx(i)) * n + map_idx(j)) * n + map_idx(k)] =
                  psi[(std::size_t(i) * nc + j) * nc + k] * scale;
      }
      fft::BoundTransform fine_plan(fine.data(), n, N);
      fine_plan.backward();
      psi = std::move(fine);
    }

    // imaginary-time warmup on the coarsest stage only; finer stages start
    // from the interpolated converged state
    if (s == 0 && options.warmup_steps > 0) {
      fft::BoundTransform plan(psi.data(), n, N);
      const double dtau = options.dtau_fine;
      const auto half_v = detail::decay_factor(op, 0.5 * dtau);
      const auto kin = detail::kinetic_factor_1d<double>(g, dtau, true);
      double dxn = std::pow(g.dx, N);
      double prev_estimate = std::numeric_limits<double>::infinity();
      for (int step = 0; step < options.warmup_steps; ++step) {
        detail::apply_pointwise(psi, half_v);
        plan.forward();
        detail::apply_kinetic(psi, kin, N, n);
        plan.backward();
        detail::apply_pointwise(psi, half_v);
        const double n2 = dxn * detail::chunked_sum(psi.size(), [&](std::size_t i) {
                            return std::norm(psi[i]);
                          });
        const double estimate = -0.5 * std::log(n2) / dtau;
        const double inv = 1.0 / std::sqrt(n2);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(psi.size()); ++i)
          psi[i] *= inv;
        ++total_steps;
        if (std::abs(estimate - prev_estimate) < 1e-9) break;
        prev_estimate = estimate;
      }
    }

    // Rayleigh-quotient descent over span{x, preconditioned residual, previous
    // direction}; H images of the basis are tracked through every linear
    // combination so each iteration costs one H application and one
    // preconditioner application.
    detail::GroundStateWorkspace ws(g, op);
    const std::size_t total = psi.size();
    const double stage_tol = final_stage ? options.tol : 100.0 * options.tol;

    Cvec x = std::move(psi), hx;
    {
      const double inv = 1.0 / std::sqrt(ws.dot_real(x, x));
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(total); ++i) x[i] *= inv;
    }
    ws.apply_h(x, hx);
    Cvec p, hp, r, w, hw;
    double energy = ws.dot_real(x, hx);
    bool converged = false;

    for (int it = 0; it < options.max_steps && !converged; ++it) {
      r.resize(total);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(total); ++i)
        r[i] = hx[i] - energy * x[i];
      ws.precondition(r, w, options.precond_sigma);
      ws.apply_h(w, hw);

      // basis {x, w, p} with tracked H images
      std::vector<Cvec*> basis = {&x, &w};
      std::vector<Cvec*> h_basis = {&hx, &hw};
      if (!p.empty()) {
        basis.push_back(&p);
        h_basis.push_back(&hp);
      }
      // modified Gram-Schmidt in the quadrature inner product
      std::vector<int> kept;
      for (std::size_t b = 0; b < basis.size(); ++b) {
        for (int kb : kept) {
          const auto& u = *basis[kb];
          const auto& hu = *h_basis[kb];
          auto& v = *basis[b];
          auto& hv = *h_basis[b];
          const double cr = ws.dot_real(u, v);
          double ci = 0.0;
          {
            // imaginary part of <u, v>
            ci = ws.dxn() * detail::chunked_sum(total, [&](std::size_t i) {
                   return u[i].real() * v[i].imag() - u[i].imag() * v[i].real();
                 });
          }
          const std::complex<double> c(cr, ci);
#pragma omp parallel for schedule(static)
          for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(total); ++i) {
            v[i] -= c * u[i];
            hv[i] -= c * hu[i];
          }
        }
        const double nv = std::sqrt(ws.dot_real(*basis[b], *basis[b]));
        if (nv > 1e-10) {
          const double inv = 1.0 / nv;
          auto& v = *basis[b];
          auto& hv = *h_basis[b];
#pragma omp parallel for schedule(static)
          for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(total); ++i) {
            v[i] *= inv;
            hv[i] *= inv;
          }
          kept.push_back(int(b));
        }
      }

      const int m = int(kept.size());
      Eigen::MatrixXcd hm(m, m);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
          const auto& u = *basis[kept[a]];
          const auto& hv = *h_basis[kept[b]];
          const double re = ws.dot_real(u, hv);
          const double im = ws.dxn() * detail::chunked_sum(total, [&](std::size_t i) {
                              return u[i].real() * hv[i].imag() -
                                     u[i].imag() * hv[i].real();
                            });
          hm(a, b) = std::complex<double>(re, im);
        }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ritz(
          0.5 * (hm + hm.adjoint()));
      const Eigen::VectorXcd coef = ritz.eigenvectors().col(0);
      const double new_energy = ritz.eigenvalues()(0);

      Cvec x_new(total, 0.0), hx_new(total, 0.0);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(total); ++i) {
        std::complex<double> xv = 0.0, hv = 0.0;
        for (int a = 0; a < m; ++a) {
          xv += coef(a) * (*basis[kept[a]])[i];
          hv += coef(a) * (*h_basis[kept[a]])[i];
        }
        x_new[i] = xv;
        hx_new[i] = hv;
      }
      // new direction: the part of x_new outside the old x
      const double overlap_r = ws.dot_real(x, x_new);
      const double overlap_i = ws.dxn() * detail::chunked_sum(total, [&](std::size_t i) {
                                 return x[i].real() * x_new[i].imag() -
                                        x[i].imag() * x_new[i].real();
                               });
      const std::complex<double> overlap(overlap_r, overlap_i);
      p.resize(total);
      hp.resize(total);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(total); ++i) {
        p[i] = x_new[i] - overlap * x[i];
        hp[i] = hx_new[i] - overlap * hx[i];
      }
      x = std::move(x_new);
      hx = std::move(hx_new);
      ++total_steps;
      if (std::abs(new_energy - energy) < stage_tol) converged = true;
      energy = new_energy;
    }
    if (!converged && final_stage) {
      char msg[160];
      std::snprintf(msg, sizeof(msg),
                    "relax_ground_state: no convergence within %d descent steps "
                    "(last energy %.12g)",
                    options.max_steps, energy);
      throw convergence_error(msg);
    }
    psi = std::move(x);
  }

  RelaxResult result;
  result.state.N = N;
  result.state.lambda0 = lambda0;
  result.state.kind = SolverKind::exact;
  result.state.field.values = std::move(psi);
  result.state.field.representation = Representation::position;
  result.state.field.n_axes = N;
  symmetrize(result.state.field, grid);
  normalize(result.state.field, grid);
  result.total_steps = total_steps;
  result.energy = state_energy(result.state, grid, trap,
                               PropagateOptions::Mode::pre_quench);

  const auto rho = detail::density_marginal(result.state.field.values, N,
                                            grid.n_points, N, grid.dx);
  const double edge = std::max(rho.front(), rho.back());
  if (edge > options.boundary_density_tol) {
    char msg[128];
    std::snprintf(msg, sizeof(msg),
                  "relax_ground_state: boundary density %.3e exceeds %.1e; "
                  "grid too narrow",
                  edge, options.boundary_density_tol);
    throw config_error(msg);
  }
  return result;
}

/// Real-time split-step propagation (Strang order 2) of an exact-kind state.
/// The kinetic factor is applied exactly in momentum space, the potential,
/// contact and absorber factors pointwise in position space, so the scheme is
/// unconditionally stable; accuracy requires the phase advance per step of the
/// occupied band to stay small, guarded here by dt * (max(2,|T|) + strength)
/// <= 0.5.
inline Trajectory propagate(const ManyBodyWavefunction& state, const Grid& grid,
                            const PotentialSpec& spec, double dt, double t_final,
                            const Absorber& absorber, int snapshot_stride,
                            const PropagateOptions& options = {}) {
  if (state.kind != SolverKind::exact)
    throw usage_error("propagate: exact-kind state required (mean-field states "
                      "enter the model through energies only)");
  if (!(dt > 0.0) || !(t_final > 0.0))
    throw config_error("propagate: dt and t_final must be positive");
  if (snapshot_stride < 1)
    throw config_error("propagate: snapshot_stride must be >= 1");
  const double guard = dt * (std::max(2.0, std::abs(spec.threshold)) +
                             absorber.strength);
  if (guard > 0.5)
    throw config_error(
        "propagate: dt too large for the configured energy scale "
        "(dt * (max(2,|T|) + absorber strength) must be <= 0.5)");
  if (absorber.active()) {
    if (!(absorber.onset > spec.x_c2) || !(absorber.onset < grid.x_max))
      throw config_error(
          "propagate: absorber onset must lie inside the grid beyond x_c2");
    if (absorber.order < 2)
      throw config_error("propagate: absorber order must be >= 2");
  }

  const int axes = state.field.n_axes;
  const int n = grid.n_points;
  std::size_t expected = 1;
  for (int a = 0; a < axes; ++a) expected *= n;
  if (axes != state.N || state.field.values.size() != expected)
    throw usage_error("propagate: state does not live on the N-fold product grid");
  const int n_steps = int(std::llround(t_final / dt));
  if (n_steps < 1) throw config_error("propagate: t_final shorter than one step");

  const auto op = detail::make_product_operator(axes, grid, spec, options.mode,
                                                absorber, state.lambda0);
  const auto half_v = detail::phase_factor(op, 0.5 * dt);
  std::vector<std::complex<double>> full_v(half_v.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(half_v.size()); ++i)
    full_v[i] = half_v[i] * half_v[i];
  const auto kin = detail::kinetic_factor_1d<std::complex<double>>(grid, dt, false);

  std::vector<std::complex<double>> psi = state.field.values;
  fft::BoundTransform plan(psi.data(), n, axes);
  std::vector<std::complex<double>> scratch;
  std::optional<fft::BoundTransform> scratch_plan;
  if (options.momentum_density) {
    scratch.resize(psi.size());
    scratch_plan.emplace(scratch.data(), n, axes);
  }

  Trajectory traj;
  traj.N = state.N;
  traj.lambda0 = state.lambda0;
  traj.threshold = spec.threshold;
  traj.dt = dt;
  traj.snapshot_stride = snapshot_stride;
  traj.grid = grid;

  const bool post = options.mode == PropagateOptions::Mode::post_quench;
  const double x_m = post ? spec.x_m : 0.0;
  double dxn = 1.0;
  for (int a = 0; a < axes; ++a) dxn *= grid.dx;
  double prev_norm = std::numeric_limits<double>::infinity();
  int snapshot_index = 0;

  const auto record = [&](double t) {
    Snapshot snap;
    snap.t = t;
    const double n2 =
        dxn * detail::chunked_sum(psi.size(),
                                  [&](std::size_t i) { return std::norm(psi[i]); });
    if (!std::isfinite(n2)) {
      char msg[96];
      std::snprintf(msg, sizeof(msg), "propagate: NaN detected at t = %.6g", t);
      throw instability_error(msg);
    }
    if (n2 > prev_norm * (1.0 + 1e-8)) {
      char msg[128];
      std::snprintf(msg, sizeof(msg),
                    "propagate: norm grew from %.12g to %.12g at t = %.6g",
                    prev_norm, n2, t);
      throw instability_error(msg);
    }
    prev_norm = std::max(n2, 1e-300);
    snap.norm = n2;
    snap.density =
        detail::density_marginal(psi, axes, n, state.N, grid.dx);
    if (post)
      snap.pnot = nonescape_probability(snap.density, grid, x_m, state.N);
    if (options.momentum_density) {
      std::copy(psi.begin(), psi.end(), scratch.begin());
      scratch_plan->forward();
      snap.momentum_density = detail::momentum_marginal_from_fft(
          scratch, axes, n, state.N, grid.dx, grid.dk());
    }
    if (options.analysis_stride > 0 && axes >= 2 &&
        snapshot_index % options.analysis_stride == 0) {
      snap.occupation_fractions = natural_occupations_topk_raw(
          psi.data(), axes, n, state.N, grid.dx, options.occupation_count);
    }
    ++snapshot_index;
    traj.snapshots.push_back(std::move(snap));
  };

  record(0.0);

  detail::apply_pointwise(psi, half_v);
  for (int step = 1; step <= n_steps; ++step) {
    plan.forward();
    detail::apply_kinetic(psi, kin, axes, n);
    plan.backward();
    const bool boundary = step == n_steps || step % snapshot_stride == 0;
    if (boundary) {
      detail::apply_pointwise(psi, half_v);
      record(step * dt);
      if (step != n_steps) detail::apply_pointwise(psi, half_v);
    } else {
      detail::apply_pointwise(psi, full_v);
    }
  }

  if (options.keep_final_state) {
    traj.final_state.N = state.N;
    traj.final_state.lambda0 = state.lambda0;
    traj.final_state.kind = SolverKind::exact;
    traj.final_state.field.values = std::move(psi);
    traj.final_state.field.n_axes = axes;
    traj.final_state.field.representation = Representation::position;
    traj.has_final_state = true;
  }
  return traj;
}

struct MeanFieldResult {
  ManyBodyWavefunction state;  // meanfield kind, single orbital
  double energy = 0.0;
  int total_steps = 0;
};

/// Single-orbital (Gross-Pitaevskii-like) ground energy: minimizes
///   E[phi] = N <phi| -d^2/2dx^2 + V |phi> + lambda0 N(N-1)/2 int |phi|^4
/// by imaginary time on the effective nonlinear operator. Stands in for the
/// exact E_HO(N, lambda0) at large N.
inline MeanFieldResult gp_relax(int N, double lambda0, const Grid& grid,
                                const RelaxOptions& options = {}) {
  if (N < 1) throw config_error("gp_relax: N must be positive");
  if (lambda0 < 0.0) throw config_error("gp_relax: lambda0 must be non-negative");

  const PotentialSpec trap = make_potential(0.0);
  const int n = grid.n_points;
  const double g = lambda0 * (N - 1);

  std::vector<double> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = evaluate(grid.x_values[i], trap, Phase::pre_quench);

  auto seed = gaussian_seed(1, lambda0, grid);
  std::vector<std::complex<double>> phi = std::move(seed.field.values);
  fft::BoundTransform plan(phi.data(), n, 1);

  int total_steps = 0;
  for (int phase = 0; phase < 2; ++phase) {
    const double dtau = phase == 0 ? options.dtau_coarse : options.dtau_fine;
    const double tol = phase == 0 ? std::max(1e-8, options.tol) : options.tol;
    const auto kin = detail::kinetic_factor_1d<double>(grid, dtau, true);
    std::vector<double> half_v(n);

    double prev_estimate = std::numeric_limits<double>::infinity();
    bool converged = false;
    for (int step = 0; step < options.max_steps; ++step) {
      for (int i = 0; i < n; ++i)
        half_v[i] = std::exp(-0.5 * dtau * (v[i] + g * std::norm(phi[i])));
      for (int i = 0; i < n; ++i) phi[i] *= half_v[i];
      plan.forward();
      for (int i = 0; i < n; ++i) phi[i] *= kin[i];
      plan.backward();
      for (int i = 0; i < n; ++i) phi[i] *= half_v[i];

      double n2 = 0.0;
      for (int i = 0; i < n; ++i) n2 += std::norm(phi[i]);
      n2 *= grid.dx;
      const double estimate = -0.5 * std::log(n2) / dtau;
      const double inv = 1.0 / std::sqrt(n2);
      for (int i = 0; i < n; ++i) phi[i] *= inv;

      ++total_steps;
      if (std::abs(estimate - prev_estimate) < tol) {
        converged = true;
        break;
      }
      prev_estimate = estimate;
    }
    if (!converged && phase == 1)
      throw convergence_error("gp_relax: no convergence within step budget");
  }

  // energy functional of the converged orbital
  std::vector<std::complex<double>> work = phi;
  fft::BoundTransform wplan(work.data(), n, 1);
  wplan.forward();
  const double e_kin = detail::kinetic_energy_from_fft(work, 1, n, grid.dx, grid.dk());
  double e_pot = 0.0, quartic = 0.0;
  for (int i = 0; i < n; ++i) {
    e_pot += v[i] * std::norm(phi[i]);
    quartic += std::norm(phi[i]) * std::norm(phi[i]);
  }
  e_pot *= grid.dx;
  quartic *= grid.dx;

  MeanFieldResult result;
  result.energy = N * (e_kin + e_pot) + 0.5 * lambda0 * N * (N - 1) * quartic;
  result.total_steps = total_steps;
  result.state.N = N;
  result.state.lambda0 = lambda0;
  result.state.kind = SolverKind::meanfield;
  result.state.field.values = std::move(phi);
  result.state.field.n_axes = 1;
  result.state.field.representation = Representation::position;
  return result;
}

inline double gp_ground_energy(int N, double lambda0, const Grid& grid,
                               const RelaxOptions& options = {}) {
  if (N == 0) return 0.0;
  return gp_relax(N, lambda0, grid, options).energy;
}

}  // namespace opentunnel
