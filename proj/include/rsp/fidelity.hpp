#pragma once

// Error budget of the adiabatic preparation: incoherent loss during the sweep
// against singlets that fail to form because the sweep outruns them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "rsp/errors.hpp"
#include "rsp/flow.hpp"
#include "rsp/grid.hpp"

namespace rsp {

struct FidelityParams {
  double cooperativity = 1e4;
  double j0 = 1.0;
  double p_fill = 0.3;
  double interaction_range = 5.0;
  double threshold = 1.0;  ///< a bond forms if J_eff > threshold * omega

  void validate() const {
    if (!(cooperativity > 0.0)) throw InvalidParameter("cooperativity must be positive");
    if (!(j0 > 0.0)) throw InvalidParameter("J0 must be positive");
    if (!(p_fill > 0.0 && p_fill < 1.0)) throw InvalidParameter("filling must lie in (0, 1)");
    if (!(interaction_range > 0.0)) throw InvalidParameter("interaction range must be positive");
    if (!(threshold > 0.0)) throw InvalidParameter("threshold constant must be positive");
  }
};

/// Sweep duration T = pi / (2 omega).
inline double sweep_time(double omega) { return std::numbers::pi / (2.0 * omega); }

inline double p_inc(double omega, const FidelityParams& p) {
  if (!(omega > 0.0)) throw InvalidParameter("omega must be positive");
  if (std::isinf(omega)) return 0.0;
  return std::min(1.0, p.j0 * sweep_time(omega) / std::sqrt(p.cooperativity));
}

/// Cutoff reached before the sweep outruns the couplings, in units of L.
/// Negative when omega is above the strongest coupling.
inline double cutoff_for(double omega, const FidelityParams& p) {
  return std::log(p.j0 / (p.threshold * omega));
}

inline double f_unpaired(double omega, const FidelityParams& p, const SurvivalCurve& curve) {
  if (!(omega > 0.0)) throw InvalidParameter("omega must be positive");
  if (curve.empty()) throw DependencyError("f_unpaired needs a survival curve");
  const double x = cutoff_for(omega, p);
  return x <= curve.lm_over_l.front() ? curve.survival.front() : curve.at(x);
}

inline double f_paired(double omega, const FidelityParams& p, const SurvivalCurve& curve) {
  return (1.0 - f_unpaired(omega, p, curve)) * (1.0 - p_inc(omega, p));
}

struct FidelityPoint {
  double omega = 0.0, p_inc = 0.0, f_unpaired = 0.0, f_paired = 0.0;
};

struct FidelityOptimum {
  double omega_star = 0.0;
  double f_paired_star = 0.0;
  std::size_t index = 0;
  std::vector<FidelityPoint> table;
  std::size_t unimodality_violations = 0;  ///< interior local maxima besides the optimum
};

inline std::vector<FidelityPoint> fidelity_table(const FidelityParams& p, const SurvivalCurve& curve,
                                                 const std::vector<double>& omega_grid) {
  std::vector<FidelityPoint> t;
  t.reserve(omega_grid.size());
  for (double w : omega_grid) {
    FidelityPoint pt{w, p_inc(w, p), f_unpaired(w, p, curve), 0.0};
    pt.f_paired = (1.0 - pt.f_unpaired) * (1.0 - pt.p_inc);
    t.push_back(pt);
  }
  return t;
}

inline FidelityOptimum optimize_f_paired(const FidelityParams& p, const SurvivalCurve& curve,
                                         const std::vector<double>& omega_grid) {
  p.validate();
  if (omega_grid.empty()) throw InvalidParameter("empty omega grid");
  if (curve.empty()) throw DependencyError("optimize_f_paired needs a survival curve");
  for (std::size_t k = 1; k < omega_grid.size(); ++k)
    if (!(omega_grid[k] > omega_grid[k - 1])) throw InvalidParameter("omega grid must increase");
  if (!(omega_grid.front() > 0.0) || std::log10(omega_grid.back() / omega_grid.front()) < 4.0 - 1e-9)
    throw InvalidParameter("omega grid must span at least four decades");

  FidelityOptimum out;
  out.table = fidelity_table(p, curve, omega_grid);
  for (std::size_t k = 0; k < out.table.size(); ++k)
    if (out.table[k].f_paired > out.table[out.index].f_paired) out.index = k;
  out.omega_star = out.table[out.index].omega;
  out.f_paired_star = out.table[out.index].f_paired;

  // strict local maxima other than the global one
  const auto& t = out.table;
  for (std::size_t k = 1; k + 1 < t.size(); ++k)
    if (k != out.index && t[k].f_paired > t[k - 1].f_paired && t[k].f_paired > t[k + 1].f_paired)
      ++out.unimodality_violations;
  return out;
}

}  // namespace rsp
