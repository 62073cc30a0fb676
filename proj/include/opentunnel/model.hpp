#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "opentunnel/errors.hpp"
#include "opentunnel/grid.hpp"
#include "opentunnel/pair_energy.hpp"
#include "opentunnel/solver.hpp"

namespace opentunnel::model {

enum class EnergySource { exact, oracle, meanfield };

inline const char* to_string(EnergySource s) {
  switch (s) {
    case EnergySource::exact: return "exact";
    case EnergySource::oracle: return "oracle";
    default: return "meanfield";
  }
}

/// Trapped ground-state energies E_HO(n, lambda0) for n = 0..N, with the
/// provenance of each entry. E_HO(0) = 0 and E_HO(1) = 1/2 always.
struct EnergyTable {
  double lambda0 = 0.0;
  EnergySource source = EnergySource::exact;
  std::map<int, double> energy;

  double at(int n) const {
    const auto it = energy.find(n);
    if (it == energy.end())
      throw data_error("EnergyTable: no entry for n = " + std::to_string(n));
    return it->second;
  }
  int max_n() const { return energy.empty() ? -1 : energy.rbegin()->first; }
};

/// mu_i = E_HO(N-i+1) - E_HO(N-i): energy released when the i-th boson leaves
/// the trap (i = 1 is the first emission, from the full N-boson system).
inline double chemical_potential(int i, int N, const EnergyTable& table) {
  if (i < 1 || i > N)
    throw usage_error("chemical_potential: process index out of 1..N");
  return table.at(N - i + 1) - table.at(N - i);
}

/// k_i^T = sqrt(2 (mu - T)) when the process is open (mu > T); nullopt when
/// the threshold closes it.
inline std::optional<double> emission_momentum(double mu, double threshold) {
  if (mu <= threshold) return std::nullopt;
  return std::sqrt(2.0 * (mu - threshold));
}

/// E_TOT(N_IN, N_OUT) = E_HO(N_IN, lambda0) + N_OUT * T.
inline double total_energy(int n_in, int n_out, double threshold,
                           const EnergyTable& table) {
  if (n_in < 0 || n_out < 0) throw usage_error("total_energy: negative counts");
  return table.at(n_in) + n_out * threshold;
}

struct FinalState {
  int n_in = 0;
  int n_out = 0;
  double e_tot = 0.0;
  bool available = true;
};

/// The counting statistics the dynamics settles into: among final states
/// reachable from the initial trapped energy (E_TOT <= E_HO(N), non-strict),
/// the energetically lowest one; exact ties go to the more bound state
/// (larger N_IN).
inline FinalState predict_final_state(int N, double threshold,
                                      const EnergyTable& table) {
  const double initial = table.at(N);
  FinalState best{N, 0, initial, true};
  for (int n_in = N - 1; n_in >= 0; --n_in) {
    const double e = total_energy(n_in, N - n_in, threshold, table);
    if (e <= initial && e < best.e_tot) best = {n_in, N - n_in, e, true};
  }
  return best;
}

struct EmissionLine {
  int process = 0;  // i = 1..N
  double mu = 0.0;
  std::optional<double> k;  // nullopt: switched off by the threshold
};

inline std::vector<EmissionLine> emission_spectrum(int N, double threshold,
                                                   const EnergyTable& table) {
  std::vector<EmissionLine> lines;
  lines.reserve(N);
  for (int i = 1; i <= N; ++i) {
    const double mu = chemical_potential(i, N, table);
    lines.push_back({i, mu, emission_momentum(mu, threshold)});
  }
  return lines;
}

struct Crossing {
  int a_in = 0;  // N_IN of the two final states whose ordering flips
  int b_in = 0;
  double parameter = 0.0;
};

enum class SweepParameter { threshold, interaction };

struct SweepSpec {
  SweepParameter parameter = SweepParameter::threshold;
  double fixed = 0.0;   // the non-swept control (lambda0 or T)
  double lo = 0.0;
  double hi = 1.0;
  int resolution = 256;
  double tol = 1e-9;  // bisection tolerance in the swept parameter
};

/// All parameter values where the ordering of two E_TOT curves flips, located
/// by bisection on the pairwise differences. For threshold sweeps the curves
/// are affine in T and the table is computed once; for interaction sweeps the
/// supplied family is evaluated per point (callers typically pass an
/// interpolating family over precomputed tables).
inline std::vector<Crossing> critical_points(
    int N, const std::function<EnergyTable(double)>& table_family,
    const SweepSpec& sweep) {
  if (sweep.resolution < 2 || !(sweep.hi > sweep.lo))
    throw usage_error("critical_points: bad sweep range");

  const bool sweep_T = sweep.parameter == SweepParameter::threshold;
  const EnergyTable fixed_table =
      sweep_T ? table_family(sweep.fixed) : EnergyTable{};

  const auto e_tot = [&](int n_in, double p) {
    if (sweep_T) return total_energy(n_in, N - n_in, p, fixed_table);
    return total_energy(n_in, N - n_in, sweep.fixed, table_family(p));
  };

  std::vector<Crossing> crossings;
  for (int a = 0; a < N + 1; ++a)
    for (int b = a + 1; b < N + 1; ++b) {
      const auto diff = [&](double p) { return e_tot(a, p) - e_tot(b, p); };
      double prev_p = sweep.lo;
      double prev_d = diff(prev_p);
      for (int s = 1; s < sweep.resolution; ++s) {
        const double p = sweep.lo + (sweep.hi - sweep.lo) * s /
                                        (sweep.resolution - 1);
        const double d = diff(p);
        if ((prev_d < 0.0 && d > 0.0) || (prev_d > 0.0 && d < 0.0)) {
          double lo = prev_p, hi = p, dlo = prev_d;
          while (hi - lo > sweep.tol) {
            const double mid = 0.5 * (lo + hi);
            const double dm = diff(mid);
            if ((dlo < 0.0) == (dm < 0.0)) {
              lo = mid;
              dlo = dm;
            } else {
              hi = mid;
            }
          }
          crossings.push_back({a, b, 0.5 * (lo + hi)});
        }
        prev_p = p;
        prev_d = d;
      }
    }
  std::sort(crossings.begin(), crossings.end(),
            [](const Crossing& x, const Crossing& y) {
              return x.parameter < y.parameter;
            });
  return crossings;
}

/// Exact-diagonalization-backed table for N <= 3 (imaginary-time relaxation on
/// the product grid).
inline EnergyTable exact_energy_table(int N, double lambda0, const Grid& grid,
                                      const RelaxOptions& options = {}) {
  if (N < 1 || N > 3)
    throw config_error("exact_energy_table: exact solver covers N = 1..3");
  EnergyTable table;
  table.lambda0 = lambda0;
  table.source = EnergySource::exact;
  table.energy[0] = 0.0;
  table.energy[1] = 0.5;
  for (int n = 2; n <= N; ++n)
    table.energy[n] = relax_ground_state(n, lambda0, grid, options).energy;
  return table;
}

/// Pair-reduction-oracle table (N = 2 only); the independent cross-check route.
inline EnergyTable oracle_energy_table(double lambda0) {
  EnergyTable table;
  table.lambda0 = lambda0;
  table.source = EnergySource::oracle;
  table.energy[0] = 0.0;
  table.energy[1] = 0.5;
  table.energy[2] = exact_pair_energy(lambda0);
  return table;
}

/// Mean-field table for large N; every entry carries the meanfield tag.
inline EnergyTable meanfield_energy_table(int N, double lambda0, const Grid& grid,
                                          const RelaxOptions& options = {}) {
  EnergyTable table;
  table.lambda0 = lambda0;
  table.source = EnergySource::meanfield;
  table.energy[0] = 0.0;
  table.energy[1] = 0.5;
  for (int n = 2; n <= N; ++n)
    table.energy[n] = gp_ground_energy(n, lambda0, grid, options);
  return table;
}

/// Piecewise-linear interpolation between tables precomputed on a lambda grid;
/// the family handed to critical_points for interaction sweeps.
inline std::function<EnergyTable(double)> make_interpolating_family(
    std::vector<double> lambdas, std::vector<EnergyTable> tables) {
  if (lambdas.size() != tables.size() || lambdas.size() < 2)
    throw usage_error("make_interpolating_family: need >= 2 matching nodes");
  return [lambdas = std::move(lambdas),
          tables = std::move(tables)](double lambda) {
    if (lambda <= lambdas.front()) return tables.front();
    if (lambda >= lambdas.back()) return tables.back();
    std::size_t hi = 1;
    while (lambdas[hi] < lambda) ++hi;
    const double w = (lambda - lambdas[hi - 1]) / (lambdas[hi] - lambdas[hi - 1]);
    EnergyTable out = tables[hi - 1];
    out.lambda0 = lambda;
    for (auto& [n, e] : out.energy)
      e = (1.0 - w) * e + w * tables[hi].energy.at(n);
    return out;
  };
}

}  // namespace opentunnel::model
