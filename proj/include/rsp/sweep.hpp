#pragma once

// Adiabatic preparation: H(t) = cos(wt) H0 + sin(wt) H_int from t = 0 to
// pi/(2w), starting in the product ground state of the rotating field H0.
//
// Time is integrated in tau = w t on [0, pi/2], where i d psi/d tau =
// (cos tau H0 + sin tau H_int) psi / w. Steps use the fourth-order
// commutator-free Magnus scheme with two Krylov exponentials per step and
// step-doubling error control.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rsp/errors.hpp"
#include "rsp/grid.hpp"
#include "rsp/krylov.hpp"
#include "rsp/lattice.hpp"
#include "rsp/rsrg.hpp"
#include "rsp/spinsim.hpp"

namespace rsp {

struct SweepParams {
  double omega = 0.01;  ///< slew rate, units of J0
  double epsilon0 = 1.0;
  double phi0 = std::numbers::pi / 6.0;
  /// Local error allowed per unit of tau = omega t.
  double tolerance = 1e-6;
  double interaction_range = 5.0;
  double j0 = 1.0;
  std::size_t max_atoms = 14;
  double min_step = 1e-12;  ///< in tau

  void validate() const {
    if (!(omega > 0.0) || !std::isfinite(omega)) throw InvalidParameter("omega must be > 0");
    if (!(phi0 >= 0.0 && phi0 < 2.0 * std::numbers::pi))
      throw InvalidParameter("phi0 must lie in [0, 2 pi)");
    if (!(epsilon0 > 0.0)) throw InvalidParameter("epsilon0 must be > 0");
    if (!(tolerance > 0.0)) throw InvalidParameter("tolerance must be > 0");
    if (!(interaction_range > 0.0) || !(j0 > 0.0))
      throw InvalidParameter("interaction range and J0 must be > 0");
  }
};

/// Both halves of the sweep Hamiltonian in one operator: couplings are H_int,
/// the field terms are H0.
inline XYHamiltonian sweep_hamiltonian(const AtomChain& chain, const SweepParams& p) {
  XYHamiltonian h = XYHamiltonian::interacting(chain, p.interaction_range, p.j0);
  h.field = XYHamiltonian::transverse(chain, p.epsilon0, p.phi0).field;
  return h;
}

struct EvolveStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t krylov_max = 0;
  double norm_drift = 0.0;
};

struct EvolveResult {
  StateVector state;
  EvolveStats stats;
};

namespace detail {

/// Sparse copies of the field part and the coupling part.
struct SplitOperator {
  Eigen::SparseMatrix<cplx> field;
  Eigen::SparseMatrix<cplx> couplings;

  explicit SplitOperator(const XYHamiltonian& h) {
    const auto dim = static_cast<std::uint64_t>(hilbert_dim(h.n));
    std::vector<Eigen::Triplet<cplx>> f, c;
    for (const auto& t : h.field) {
      const std::uint64_t bit = std::uint64_t{1} << t.site;
      const cplx to_down = t.epsilon * std::polar(1.0, t.phi);
      for (std::uint64_t b = 0; b < dim; ++b)
        f.emplace_back(static_cast<int>(b ^ bit), static_cast<int>(b),
                       (b & bit) ? std::conj(to_down) : to_down);
    }
    for (const auto& t : h.couplings) {
      const std::uint64_t mask = (std::uint64_t{1} << t.i) | (std::uint64_t{1} << t.j);
      for (std::uint64_t b = 0; b < dim; ++b) {
        const std::uint64_t pair = b & mask;
        if (pair != 0 && pair != mask)
          c.emplace_back(static_cast<int>(b ^ mask), static_cast<int>(b), cplx(t.value));
      }
    }
    const auto d = static_cast<Eigen::Index>(dim);
    field.resize(d, d);
    couplings.resize(d, d);
    field.setFromTriplets(f.begin(), f.end());
    couplings.setFromTriplets(c.begin(), c.end());
  }
};

struct MagnusStepper {
  const SplitOperator& op;
  double omega;
  double krylov_tol = 0.0;
  std::size_t krylov_max = 0;
  CVector tmp, scratch;
  KrylovWorkspace ws;

  // exp(-i dt (a H0 + b H_int)) v
  bool exponential(double field_coef, double coupling_coef, double dt, const CVector& v,
                   CVector& out) {
    auto apply = [&](const CVector& in, CVector& o) {
      o.noalias() = op.field * in;
      o *= field_coef;
      scratch.noalias() = op.couplings * in;
      o += coupling_coef * scratch;
    };
    const PropagatorResult r = propagate(apply, v, dt, out, krylov_tol, ws);
    krylov_max = std::max(krylov_max, r.krylov_dim);
    return r.converged;
  }

  bool step(double tau, double dtau, const CVector& v, CVector& out) {
    static const double s3 = std::sqrt(3.0);
    const double c1 = 0.5 - s3 / 6.0, c2 = 0.5 + s3 / 6.0;
    const double a1 = (3.0 - 2.0 * s3) / 12.0, a2 = (3.0 + 2.0 * s3) / 12.0;
    const double t1 = tau + c1 * dtau, t2 = tau + c2 * dtau;
    const double dt = dtau / omega;
    if (!exponential(a2 * std::cos(t1) + a1 * std::cos(t2), a2 * std::sin(t1) + a1 * std::sin(t2),
                     dt, v, tmp))
      return false;
    return exponential(a1 * std::cos(t1) + a2 * std::cos(t2),
                       a1 * std::sin(t1) + a2 * std::sin(t2), dt, tmp, out);
  }
};

inline double operator_bound(const XYHamiltonian& h) {
  double s = 0.0;
  for (const auto& c : h.couplings) s += std::abs(c.value);
  for (const auto& f : h.field) s += std::abs(f.epsilon);
  return std::max(s, 1e-300);
}

}  // namespace detail

/// Integrates the sweep for a prepared Hamiltonian and start state.
inline EvolveResult evolve(const XYHamiltonian& h, const StateVector& initial,
                           const SweepParams& p) {
  p.validate();
  h.validate();
  if (h.n > p.max_atoms)
    throw InvalidParameter("evolve refused for " + std::to_string(h.n) + " atoms");
  if (initial.n != h.n) throw DomainError("initial state does not match Hamiltonian");

  const double tau_end = std::numbers::pi / 2.0;
  const detail::SplitOperator split(h);
  detail::MagnusStepper stepper{split, p.omega, 0.0, 0, {}, {}, {}};
  EvolveResult result{initial, {}};
  CVector& psi = result.state.amplitudes;
  const double norm0 = psi.norm();
  CVector full, half, two_halves;

  // about one radian of phase per step to begin with
  double dtau = std::min(tau_end, p.omega / detail::operator_bound(h));
  double tau = 0.0;
  while (tau < tau_end) {
    const bool last = tau + dtau >= tau_end * (1.0 - 1e-14);
    const double step = last ? tau_end - tau : dtau;
    stepper.krylov_tol = 1e-3 * p.tolerance * step;

    bool ok = stepper.step(tau, step, psi, full);
    ok = ok && stepper.step(tau, 0.5 * step, psi, half);
    ok = ok && stepper.step(tau + 0.5 * step, 0.5 * step, half, two_halves);
    const double err = ok ? (two_halves - full).norm() / 15.0 : std::numeric_limits<double>::infinity();
    const double budget = p.tolerance * step;

    if (err <= budget) {
      psi = two_halves;
      tau = last ? tau_end : tau + step;
      ++result.stats.accepted;
    } else {
      ++result.stats.rejected;
    }
    const double factor =
        err > 0.0 ? 0.9 * std::pow(budget / err, 0.25) : 4.0;
    dtau = step * std::clamp(factor, 0.2, 4.0);
    if (dtau < p.min_step && tau < tau_end)
      throw StepSizeError("sweep step underflow at tau = " + std::to_string(tau) +
                          " (omega = " + std::to_string(p.omega) + ")");
  }
  result.stats.krylov_max = stepper.krylov_max;
  result.stats.norm_drift = std::abs(psi.norm() - norm0);
  return result;
}

/// Sweep of a chain from the analytic product ground state of H0.
inline EvolveResult evolve(const AtomChain& chain, const SweepParams& p) {
  p.validate();
  if (chain.size() > p.max_atoms)
    throw InvalidParameter("evolve refused for " + std::to_string(chain.size()) + " atoms");
  const XYHamiltonian h = sweep_hamiltonian(chain, p);
  return evolve(h, transverse_ground_state(h), p);
}

// ---------------------------------------------------------------------------
// Bond-breaking scans

enum class Censoring { None, NeverBroke, AlwaysBroken, BelowGrid };

inline const char* to_string(Censoring c) {
  switch (c) {
    case Censoring::None: return "none";
    case Censoring::NeverBroke: return "never_broke";
    case Censoring::AlwaysBroken: return "always_broken";
    case Censoring::BelowGrid: return "below_grid";
  }
  return "?";
}

struct SweepRecord {
  std::size_t i = 0, j = 0;
  double j_eff = 0.0;
  double omega_break = std::numeric_limits<double>::quiet_NaN();
  Censoring censored = Censoring::None;

  bool uncensored() const { return censored == Censoring::None; }
};

struct ScanOptions {
  double baseline_overlap = 0.99;
  /// Start at the grid point just below factor * (weakest J_eff) instead of
  /// the bottom of the grid; slower sweeps are only run if that baseline
  /// misses the overlap target.
  bool adaptive_baseline = true;
  double baseline_factor = 0.1;
  std::size_t baseline_retreat = 10;  ///< grid cells per retreat
  /// false: a scan whose slowest rate misses the overlap target is flagged in
  /// ScanResult::baseline_ok instead of raising BaselineError
  bool require_baseline = true;
  bool stop_when_all_broken = true;
  double break_threshold = 0.5;
};

struct ScanResult {
  std::vector<SweepRecord> records;
  SingletPairing ground_pairing;
  std::vector<double> omegas;          ///< evaluated slew rates, increasing
  std::vector<double> ground_overlap;  ///< |<gs|psi(T)>|^2 at each omega
  Eigen::MatrixXd fractions;           ///< bond x evaluated omega
  double baseline_omega = 0.0;
  bool baseline_ok = true;
};

/// Sweeps the chain at increasing slew rates and records, for every singlet of
/// the exact H_int ground state, the first rate at which its final singlet
/// fraction falls below the threshold.
inline ScanResult bond_break_scan(const AtomChain& chain, const std::vector<double>& omega_grid,
                                  const SweepParams& params, const ScanOptions& opt = {}) {
  params.validate();
  if (omega_grid.empty()) throw InvalidParameter("empty omega grid");
  for (std::size_t k = 1; k < omega_grid.size(); ++k)
    if (!(omega_grid[k] > omega_grid[k - 1])) throw InvalidParameter("omega grid must increase");
  if (chain.size() < 2) throw InvalidParameter("scan needs at least two atoms");

  ScanResult out;
  const XYHamiltonian h = sweep_hamiltonian(chain, params);
  XYHamiltonian h_int = h;
  h_int.field.clear();
  GroundStateOptions gopt;
  gopt.max_atoms = params.max_atoms;
  const GroundState gs = ground_state(h_int, gopt);
  out.ground_pairing = identify_pairs(gs.state);
  const auto& bonds = out.ground_pairing.report.bonds;
  if (bonds.empty()) throw PairingError("ground state has no singlet above the pairing floor");
  const auto couplings =
      assign_effective_couplings(out.ground_pairing.report, chain, params.interaction_range,
                                 params.j0);

  out.records.resize(bonds.size());
  double weakest = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    out.records[b].i = std::min(bonds[b].left, bonds[b].right);
    out.records[b].j = std::max(bonds[b].left, bonds[b].right);
    out.records[b].j_eff = couplings[b].j_eff;
    weakest = std::min(weakest, couplings[b].j_eff);
  }

  const StateVector initial = transverse_ground_state(h);
  auto run = [&](std::size_t k) {
    SweepParams p = params;
    p.omega = omega_grid[k];
    const EvolveResult r = evolve(h, initial, p);
    std::vector<double> f(bonds.size());
    for (std::size_t b = 0; b < bonds.size(); ++b)
      f[b] = singlet_fraction(rdm2(r.state, bonds[b].left, bonds[b].right));
    return std::pair{std::norm(overlap(gs.state, r.state)), f};
  };

  // Baseline
  std::size_t start = 0;
  if (opt.adaptive_baseline) {
    const double target = opt.baseline_factor * weakest;
    while (start + 1 < omega_grid.size() && omega_grid[start + 1] <= target) ++start;
  }
  auto [base_overlap, base_fractions] = run(start);
  while (base_overlap < opt.baseline_overlap) {
    if (start == 0 && !opt.require_baseline) {
      out.baseline_ok = false;
      break;
    }
    if (start == 0)
      throw BaselineError("no adiabatic baseline: overlap " + std::to_string(base_overlap) +
                          " at the slowest rate " + std::to_string(omega_grid.front()));
    start = start > opt.baseline_retreat ? start - opt.baseline_retreat : 0;
    std::tie(base_overlap, base_fractions) = run(start);
  }
  out.baseline_omega = omega_grid[start];

  std::vector<std::vector<double>> columns{base_fractions};
  out.omegas.push_back(omega_grid[start]);
  out.ground_overlap.push_back(base_overlap);
  std::vector<bool> broken(bonds.size(), false);
  auto record = [&](std::size_t k, const std::vector<double>& f) {
    for (std::size_t b = 0; b < bonds.size(); ++b) {
      if (broken[b] || f[b] >= opt.break_threshold) continue;
      broken[b] = true;
      out.records[b].omega_break = omega_grid[k];
      if (k == start) out.records[b].censored = Censoring::AlwaysBroken;
    }
  };
  record(start, base_fractions);
  for (std::size_t k = start + 1; k < omega_grid.size(); ++k) {
    if (opt.stop_when_all_broken && std::all_of(broken.begin(), broken.end(), [](bool x) { return x; }))
      break;
    auto [ov, f] = run(k);
    out.omegas.push_back(omega_grid[k]);
    out.ground_overlap.push_back(ov);
    columns.push_back(f);
    record(k, f);
  }
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    if (!broken[b]) out.records[b].censored = Censoring::NeverBroke;
    if (out.records[b].j_eff < omega_grid.front()) out.records[b].censored = Censoring::BelowGrid;
  }

  out.fractions.resize(static_cast<Eigen::Index>(bonds.size()),
                       static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (std::size_t b = 0; b < bonds.size(); ++b)
      out.fractions(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) = columns[c][b];
  return out;
}

// ---------------------------------------------------------------------------
// Landau-Zener scaling fit

struct LzFitOptions {
  std::size_t min_records = 10;
  double min_decades = 2.0;  ///< required span of log10 j_eff
};

struct LzFit {
  double slope = 0.0;
  double intercept = 0.0;  ///< natural-log intercept
  double spread = 0.0;     ///< RMS residual of log(omega_break)
  std::size_t count = 0;
  double decades = 0.0;
};

/// Least squares of log(omega_break) on log(j_eff) over uncensored records.
inline LzFit lz_fit(const std::vector<SweepRecord>& records, const LzFitOptions& opt = {}) {
  std::vector<double> x, y;
  for (const auto& r : records) {
    if (!r.uncensored() || !(r.j_eff > 0.0) || !(r.omega_break > 0.0)) continue;
    x.push_back(std::log(r.j_eff));
    y.push_back(std::log(r.omega_break));
  }
  LzFit fit;
  fit.count = x.size();
  if (x.size() < std::max<std::size_t>(opt.min_records, 2))
    throw FitRangeError("lz_fit needs " + std::to_string(opt.min_records) +
                        " uncensored records, got " + std::to_string(x.size()));
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  fit.decades = (*hi - *lo) / std::numbers::ln10;
  if (fit.decades < opt.min_decades)
    throw FitRangeError("lz_fit records span " + std::to_string(fit.decades) +
                        " decades of j_eff, need " + std::to_string(opt.min_decades));

  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = y[k] - (fit.intercept + fit.slope * x[k]);
    ss += r * r;
  }
  fit.spread = std::sqrt(ss / n);
  return fit;
}

}  // namespace rsp
