#pragma once

#include <cmath>
#include <fstream>
#include <string>

#include "opentunnel/errors.hpp"

namespace opentunnel {

enum class Phase { pre_quench, post_quench };

struct PolynomialCoefficients {
  double a, b, c, d;  // P(x) = a x^3 + b x^2 + c x + d
};

/// Coefficients of the cubic bridging the harmonic trap at x_c1 = 2 to the
/// flat threshold T at x_c2 = 4, from the four C^1 matching constraints
/// P(2) = 2, P'(2) = 2, P(4) = T, P'(4) = 0. Closed forms:
///   a = 1 - T/4, b = (9/4) T - 19/2, c = -6 T + 28, d = 5 T - 24.
/// Note b and d are negative for every admissible T; published tabulations
/// sometimes quote their magnitudes.
inline PolynomialCoefficients polynomial_coefficients(double threshold) {
  if (!(threshold < 2.0))
    throw config_error(
        "polynomial_coefficients: threshold must be below 2 (the barrier "
        "degenerates at the trap edge otherwise)");
  return {1.0 - threshold / 4.0, 2.25 * threshold - 9.5, -6.0 * threshold + 28.0,
          5.0 * threshold - 24.0};
}

/// x_m(T) = 2 + 1/(3 - 3T/4), the position of the barrier maximum.
inline double barrier_maximum(double threshold) {
  if (!(threshold < 2.0))
    throw config_error("barrier_maximum: threshold must be below 2");
  return 2.0 + 1.0 / (3.0 - 0.75 * threshold);
}

/// Trap-with-threshold potential. Pre-quench it is the plain harmonic trap;
/// the quench at t = 0 switches instantaneously to the open form.
struct PotentialSpec {
  double threshold = 0.0;
  double x_c1 = 2.0;
  double x_c2 = 4.0;
  PolynomialCoefficients coefficients{};
  double x_m = 0.0;
};

inline PotentialSpec make_potential(double threshold) {
  PotentialSpec spec;
  spec.threshold = threshold;
  spec.coefficients = polynomial_coefficients(threshold);
  spec.x_m = barrier_maximum(threshold);
  return spec;
}

inline double evaluate(double x, const PotentialSpec& spec, Phase phase) {
  if (phase == Phase::pre_quench || x <= spec.x_c1) return 0.5 * x * x;
  if (x >= spec.x_c2) return spec.threshold;
  const auto& p = spec.coefficients;
  return ((p.a * x + p.b) * x + p.c) * x + p.d;
}

/// Two-column CSV (x, V(x)) for plotting.
inline void write_potential_csv(const std::string& path, const PotentialSpec& spec,
                                double x_lo, double x_hi, int samples,
                                Phase phase = Phase::post_quench) {
  std::ofstream out(path);
  out << "x,V\n";
  char line[64];
  for (int i = 0; i < samples; ++i) {
    const double x = x_lo + (x_hi - x_lo) * i / (samples - 1);
    std::snprintf(line, sizeof(line), "%.12g,%.12g\n", x,
                  evaluate(x, spec, phase));
    out << line;
  }
}

}  // namespace opentunnel
