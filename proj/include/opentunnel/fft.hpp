#pragma once

#include <fftw3.h>
#include <omp.h>

#include <complex>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "opentunnel/grid.hpp"

namespace opentunnel {

// Transform convention (per axis):
//   forward:  F(k_j) = dx/sqrt(2*pi) * sum_m f(x_m) exp(-i k_j x_m)
//   inverse:  f(x_m) = dk/sqrt(2*pi) * sum_j F(k_j) exp(+i k_j x_m)
// i.e. the Riemann sum of the symmetric continuum Fourier pair, so quadrature
// Parseval holds in both representations without extra bookkeeping. Public
// momentum-space fields are ordered monotonically, matching Grid::k_values.
//
// Plans are created with FFTW_ESTIMATE only: measured plans differ between
// runs and would break the bit-identical-output guarantee of the pipeline.

namespace fft {

inline void ensure_threads_initialized() {
  static std::once_flag once;
  std::call_once(once, [] {
    fftw_init_threads();
    int n = omp_get_max_threads();
    fftw_plan_with_nthreads(n > 2 ? 2 : n);
  });
}

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// In-place unnormalized c2c transforms bound to a caller-owned buffer.
/// The buffer must outlive the plan and must not be reallocated.
class BoundTransform {
 public:
  BoundTransform(std::complex<double>* data, int n_per_axis, int rank) {
    ensure_threads_initialized();
    std::vector<int> dims(rank, n_per_axis);
    auto* p = reinterpret_cast<fftw_complex*>(data);
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_dft(rank, dims.data(), p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft(rank, dims.data(), p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~BoundTransform() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  BoundTransform(const BoundTransform&) = delete;
  BoundTransform& operator=(const BoundTransform&) = delete;

  void forward() const { fftw_execute(fwd_); }
  void backward() const { fftw_execute(bwd_); }

 private:
  fftw_plan fwd_;
  fftw_plan bwd_;
};

}  // namespace fft

namespace detail {

// fftshift index map: monotone index j (k = (j - n/2)*dk) <-> FFT-order index.
inline int fft_index(int monotone_j, int n) { return (monotone_j + n / 2) % n; }

struct AxisWeights {
  std::vector<std::complex<double>> forward;   // dx/sqrt(2pi) * exp(-i k x_min)
  std::vector<std::complex<double>> backward;  // dk/sqrt(2pi) * exp(+i k x_min)
};

inline AxisWeights make_axis_weights(const Grid& g) {
  AxisWeights w;
  const int n = g.n_points;
  const double fs = g.dx / std::sqrt(2.0 * M_PI);
  const double bs = g.dk() / std::sqrt(2.0 * M_PI);
  w.forward.resize(n);
  w.backward.resize(n);
  for (int j = 0; j < n; ++j) {
    const double phase = g.k_values[j] * g.x_min;
    w.forward[j] = fs * std::complex<double>(std::cos(phase), -std::sin(phase));
    w.backward[j] = bs * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return w;
}

// Apply the separable per-axis reorder+weight, out[monotone] = prod_w * in[fft].
template <bool Forward>
inline void reorder_and_weight(const std::vector<std::complex<double>>& in,
                               std::vector<std::complex<double>>& out,
                               const AxisWeights& w, int n, int rank) {
  const auto& weights = Forward ? w.forward : w.backward;
  if (rank == 1) {
    for (int j = 0; j < n; ++j) {
      if constexpr (Forward)
        out[j] = in[fft_index(j, n)] * weights[j];
      else
        out[fft_index(j, n)] = in[j] * weights[j];
    }
    return;
  }
  if (rank == 2) {
#pragma omp parallel for schedule(static)
    for (int a = 0; a < n; ++a) {
      const int fa = fft_index(a, n);
      for (int b = 0; b < n; ++b) {
        const int fb = fft_index(b, n);
        if constexpr (Forward)
          out[std::size_t(a) * n + b] =
              in[std::size_t(fa) * n + fb] * (weights[a] * weights[b]);
        else
          out[std::size_t(fa) * n + fb] =
              in[std::size_t(a) * n + b] * (weights[a] * weights[b]);
      }
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (int a = 0; a < n; ++a) {
    const int fa = fft_index(a, n);
    for (int b = 0; b < n; ++b) {
      const int fb = fft_index(b, n);
      const std::complex<double> wab = weights[a] * weights[b];
      for (int c = 0; c < n; ++c) {
        const int fc = fft_index(c, n);
        if constexpr (Forward)
          out[(std::size_t(a) * n + b) * n + c] =
              in[(std::size_t(fa) * n + fb) * n + fc] * (wab * weights[c]);
        else
          out[(std::size_t(fa) * n + fb) * n + fc] =
              in[(std::size_t(a) * n + b) * n + c] * (wab * weights[c]);
      }
    }
  }
}

}  // namespace detail

/// Unitary (quadrature-Parseval) transform to the momentum representation.
inline ComplexField to_momentum(const ComplexField& field, const Grid& grid) {
  if (field.representation != Representation::position)
    throw usage_error("to_momentum: field is not in position representation");
  const int n = grid.n_points;
  const int rank = detail::infer_axes(field.values.size(), n);

  std::vector<std::complex<double>> work = field.values;
  fft::BoundTransform plan(work.data(), n, rank);
  plan.forward();

  ComplexField out;
  out.values.resize(work.size());
  out.representation = Representation::momentum;
  out.n_axes = rank;
  const auto weights = detail::make_axis_weights(grid);
  detail::reorder_and_weight<true>(work, out.values, weights, n, rank);
  return out;
}

/// Inverse of to_momentum (exact round trip up to rounding).
inline ComplexField to_position(const ComplexField& field, const Grid& grid) {
  if (field.representation != Representation::momentum)
    throw usage_error("to_position: field is not in momentum representation");
  const int n = grid.n_points;
  const int rank = detail::infer_axes(field.values.size(), n);

  std::vector<std::complex<double>> work(field.values.size());
  const auto weights = detail::make_axis_weights(grid);
  detail::reorder_and_weight<false>(field.values, work, weights, n, rank);

  fft::BoundTransform plan(work.data(), n, rank);
  plan.backward();

  ComplexField out;
  out.values = std::move(work);
  out.representation = Representation::position;
  out.n_axes = rank;
  return out;
}

}  // namespace opentunnel
