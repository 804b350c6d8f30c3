#pragma once

// Exact quantum mechanics of small XY chains on the full 2^n space.
//
// Basis convention: amplitude index b, bit i of b is atom i, 0 = up, 1 = down.
// The XY term (J/2)(sx sx + sy sy) swaps |up down> and |down up> with matrix
// element J. The transverse part eps * (cos phi sx + sin phi sy) takes
// |up> -> e^{i phi}|down> and |down> -> e^{-i phi}|up>.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rsp/errors.hpp"
#include "rsp/krylov.hpp"
#include "rsp/lattice.hpp"
#include "rsp/rsrg.hpp"

namespace rsp {

inline constexpr std::size_t kMaxStateAtoms = 24;

inline std::size_t hilbert_dim(std::size_t n_atoms) {
  if (n_atoms > kMaxStateAtoms)
    throw InvalidParameter("state with " + std::to_string(n_atoms) + " atoms is too large");
  return std::size_t{1} << n_atoms;
}

struct StateVector {
  std::size_t n = 0;
  CVector amplitudes;

  StateVector() = default;
  explicit StateVector(std::size_t n_atoms)
      : n(n_atoms), amplitudes(CVector::Zero(static_cast<Eigen::Index>(hilbert_dim(n_atoms)))) {}
  StateVector(std::size_t n_atoms, CVector amps) : n(n_atoms), amplitudes(std::move(amps)) {
    if (static_cast<std::size_t>(amplitudes.size()) != hilbert_dim(n))
      throw DomainError("amplitude count does not match 2^n");
  }

  std::size_t dim() const { return static_cast<std::size_t>(amplitudes.size()); }
  double norm() const { return amplitudes.norm(); }

  static StateVector basis_state(std::size_t n_atoms, std::uint64_t bits) {
    StateVector s(n_atoms);
    if (bits >= s.dim()) throw DomainError("basis index out of range");
    s.amplitudes(static_cast<Eigen::Index>(bits)) = 1.0;
    return s;
  }

  /// Makes the largest-magnitude amplitude real and positive (lowest index
  /// among equal magnitudes within 1e-12).
  void fix_global_phase() {
    Eigen::Index best = 0;
    double mag = -1.0;
    for (Eigen::Index k = 0; k < amplitudes.size(); ++k) {
      const double a = std::abs(amplitudes(k));
      if (a > mag * (1.0 + 1e-12)) {
        mag = a;
        best = k;
      }
    }
    if (mag > 0.0) amplitudes *= std::conj(amplitudes(best)) / mag;
  }
};

inline cplx overlap(const StateVector& a, const StateVector& b) {
  if (a.n != b.n) throw DomainError("overlap of states with different atom counts");
  return a.amplitudes.dot(b.amplitudes);
}

struct FieldTerm {
  std::size_t site = 0;
  double epsilon = 1.0;
  double phi = 0.0;
};

struct XYHamiltonian {
  std::size_t n = 0;
  std::vector<CouplingEntry> couplings;
  std::vector<FieldTerm> field;

  void validate() const {
    for (const auto& c : couplings)
      if (c.i >= n || c.j >= n || c.i == c.j) throw DomainError("bad coupling indices");
    for (const auto& f : field)
      if (f.site >= n) throw DomainError("bad field site");
  }

  bool has_field() const { return !field.empty(); }

  static XYHamiltonian from_positions(const std::vector<double>& positions, double range,
                                      double j0) {
    XYHamiltonian h;
    h.n = positions.size();
    for (std::size_t i = 0; i < h.n; ++i)
      for (std::size_t j = i + 1; j < h.n; ++j)
        h.couplings.push_back({i, j, coupling(j0, range, positions[i] - positions[j])});
    return h;
  }

  static XYHamiltonian interacting(const AtomChain& chain, double range, double j0) {
    return from_positions(std::vector<double>(chain.positions.begin(), chain.positions.end()),
                          range, j0);
  }

  /// Rotating transverse field: atom at site x gets angle x * phi0.
  static XYHamiltonian transverse(const AtomChain& chain, double epsilon0, double phi0) {
    XYHamiltonian h;
    h.n = chain.size();
    for (std::size_t i = 0; i < h.n; ++i)
      h.field.push_back({i, epsilon0, static_cast<double>(chain[i]) * phi0});
    return h;
  }
};

/// out = (coupling_scale * H_xy + field_scale * H_field) in. Matrix-free.
inline void apply_scaled(const XYHamiltonian& h, const CVector& in, CVector& out,
                         double coupling_scale = 1.0, double field_scale = 1.0) {
  const auto dim = static_cast<std::uint64_t>(in.size());
  if (dim != hilbert_dim(h.n)) throw DomainError("state dimension does not match Hamiltonian");
  out.setZero(in.size());
  if (coupling_scale != 0.0) {
    for (const auto& c : h.couplings) {
      const std::uint64_t mask = (std::uint64_t{1} << c.i) | (std::uint64_t{1} << c.j);
      const double amp = coupling_scale * c.value;
      for (std::uint64_t b = 0; b < dim; ++b) {
        const std::uint64_t pair = b & mask;
        if (pair != 0 && pair != mask) out(static_cast<Eigen::Index>(b ^ mask)) += amp * in(static_cast<Eigen::Index>(b));
      }
    }
  }
  if (field_scale != 0.0) {
    for (const auto& f : h.field) {
      const std::uint64_t bit = std::uint64_t{1} << f.site;
      const cplx to_down = field_scale * f.epsilon * std::polar(1.0, f.phi);
      const cplx to_up = std::conj(to_down);
      for (std::uint64_t b = 0; b < dim; ++b) {
        const auto src = static_cast<Eigen::Index>(b);
        const auto dst = static_cast<Eigen::Index>(b ^ bit);
        out(dst) += ((b & bit) ? to_up : to_down) * in(src);
      }
    }
  }
}

inline StateVector apply_h(const XYHamiltonian& h, const StateVector& v) {
  if (v.n != h.n) throw DomainError("state has " + std::to_string(v.n) + " atoms, Hamiltonian " +
                                    std::to_string(h.n));
  StateVector out(h.n);
  apply_scaled(h, v.amplitudes, out.amplitudes);
  return out;
}

inline double expectation(const XYHamiltonian& h, const StateVector& v) {
  return overlap(v, apply_h(h, v)).real();
}

inline Eigen::MatrixXcd dense_matrix(const XYHamiltonian& h, std::size_t max_atoms = 12) {
  if (h.n > max_atoms) throw InvalidParameter("dense matrix refused above " +
                                              std::to_string(max_atoms) + " atoms");
  const auto dim = static_cast<Eigen::Index>(hilbert_dim(h.n));
  Eigen::MatrixXcd m(dim, dim);
  CVector e = CVector::Zero(dim), col(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    e(k) = 1.0;
    apply_scaled(h, e, col);
    m.col(k) = col;
    e(k) = 0.0;
  }
  return m;
}

struct GroundStateOptions {
  std::size_t max_atoms = 14;       ///< resource guard
  std::size_t dense_max_atoms = 10;  ///< dense diagonalization at or below this size
  LanczosOptions lanczos{};
  std::uint64_t seed = 20240601;
};

struct GroundState {
  double energy = 0.0;
  StateVector state;
  double residual = 0.0;
};

inline CVector random_start(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  CVector v(static_cast<Eigen::Index>(dim));
  for (auto& a : v) a = {gauss(rng), gauss(rng)};
  return v.normalized();
}

inline double residual_norm(const XYHamiltonian& h, const StateVector& v, double energy) {
  return (apply_h(h, v).amplitudes - energy * v.amplitudes).norm();
}

inline GroundState lanczos_ground_state(const XYHamiltonian& h,
                                        const GroundStateOptions& opt = {}) {
  h.validate();
  if (h.n > opt.max_atoms)
    throw InvalidParameter("ground state refused for " + std::to_string(h.n) +
                           " atoms (guard " + std::to_string(opt.max_atoms) + ")");
  auto op = [&h](const CVector& in, CVector& out) { apply_scaled(h, in, out); };
  Eigenpair pair = lowest_eigenpair(op, random_start(hilbert_dim(h.n), opt.seed), opt.lanczos);
  GroundState gs{pair.value, StateVector(h.n, std::move(pair.vector)), pair.residual};
  gs.state.fix_global_phase();
  return gs;
}

inline GroundState dense_ground_state(const XYHamiltonian& h,
                                      const GroundStateOptions& opt = {}) {
  h.validate();
  if (h.n > opt.dense_max_atoms)
    throw InvalidParameter("dense diagonalization refused above " +
                           std::to_string(opt.dense_max_atoms) + " atoms");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(dense_matrix(h, opt.dense_max_atoms));
  if (solver.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
  GroundState gs{solver.eigenvalues()(0), StateVector(h.n, solver.eigenvectors().col(0)), 0.0};
  gs.state.fix_global_phase();
  gs.residual = residual_norm(h, gs.state, gs.energy);
  return gs;
}

inline GroundState ground_state(const XYHamiltonian& h, const GroundStateOptions& opt = {}) {
  if (h.n <= opt.dense_max_atoms) return dense_ground_state(h, opt);
  return lanczos_ground_state(h, opt);
}

/// Product of (|up> - e^{i phi}|down>)/sqrt2 over atoms: the ground state of
/// sum_i eps (cos phi_i sx + sin phi_i sy) with energy -sum eps.
inline StateVector transverse_ground_state(const XYHamiltonian& h) {
  if (h.field.size() != h.n) throw DomainError("transverse ground state needs a field on every atom");
  std::vector<cplx> down(h.n);
  for (const auto& f : h.field) down[f.site] = -std::polar(1.0, f.phi);
  StateVector s(h.n);
  const double weight = std::pow(std::numbers::sqrt2 / 2.0, static_cast<double>(h.n));
  for (std::uint64_t b = 0; b < s.dim(); ++b) {
    cplx amp = weight;
    for (std::size_t i = 0; i < h.n; ++i)
      if (b >> i & 1u) amp *= down[i];
    s.amplitudes(static_cast<Eigen::Index>(b)) = amp;
  }
  return s;
}

/// Singlets on the listed pairs, every other atom up.
inline StateVector singlet_product(std::size_t n_atoms,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  std::vector<int> used(n_atoms, 0);
  for (auto [i, j] : pairs) {
    if (i >= n_atoms || j >= n_atoms || i == j) throw DomainError("bad singlet pair");
    if (used[i]++ || used[j]++) throw DomainError("atom used in two singlets");
  }
  StateVector s(n_atoms);
  const double weight = std::pow(std::numbers::sqrt2 / 2.0, static_cast<double>(pairs.size()));
  std::uint64_t pair_mask = 0;
  for (auto [i, j] : pairs) pair_mask |= (std::uint64_t{1} << i) | (std::uint64_t{1} << j);
  for (std::uint64_t b = 0; b < s.dim(); ++b) {
    if (b & ~pair_mask) continue;
    double amp = weight;
    for (auto [i, j] : pairs) {
      const unsigned si = b >> i & 1u, sj = b >> j & 1u;
      if (si == sj) {
        amp = 0.0;
        break;
      }
      if (si == 1u) amp = -amp;  // |down up> carries the minus sign
    }
    s.amplitudes(static_cast<Eigen::Index>(b)) = amp;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Two-atom reduced density matrices

/// Basis {uu, ud, du, dd}, first label atom i.
struct Rdm2 {
  std::size_t i = 0, j = 0;
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();

  double trace() const { return rho.trace().real(); }
};

inline Rdm2 rdm2(const StateVector& v, std::size_t i, std::size_t j) {
  if (i == j) throw DomainError("rdm2 needs two distinct atoms");
  if (i >= v.n || j >= v.n) throw DomainError("atom index out of range");
  Rdm2 r{i, j, Eigen::Matrix4cd::Zero()};
  const std::uint64_t bi = std::uint64_t{1} << i, bj = std::uint64_t{1} << j;
  const std::array<std::uint64_t, 4> offset{0, bj, bi, bi | bj};
  std::array<cplx, 4> a{};
  for (std::uint64_t b = 0; b < v.dim(); ++b) {
    if (b & (bi | bj)) continue;
    for (int k = 0; k < 4; ++k) a[k] = v.amplitudes(static_cast<Eigen::Index>(b | offset[k]));
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q) r.rho(p, q) += a[p] * std::conj(a[q]);
  }
  return r;
}

/// <S|rho|S> with |S> = (|ud> - |du>)/sqrt2.
inline double singlet_fraction(const Rdm2& r) {
  const double f = 0.5 * (r.rho(1, 1) + r.rho(2, 2) - r.rho(1, 2) - r.rho(2, 1)).real();
  return std::clamp(f, 0.0, 1.0);
}

inline Eigen::MatrixXd singlet_fractions(const StateVector& v) {
  const auto n = static_cast<Eigen::Index>(v.n);
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < v.n; ++i)
    for (std::size_t j = i + 1; j < v.n; ++j)
      f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          f(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
              singlet_fraction(rdm2(v, i, j));
  return f;
}

inline constexpr double kPairingFloor = 0.5;

struct SingletPairing {
  PairingReport report;              ///< bonds carry l_m = 0; order = greedy rank
  std::vector<double> bond_fraction;  ///< singlet fraction of each bond
  Eigen::MatrixXd fractions;          ///< all pairs, symmetric
  double floor = kPairingFloor;

  bool complete() const { return report.unpaired.size() <= static_cast<std::size_t>(fractions.rows() % 2); }
};

/// Greedy mutual pairing: repeatedly pair the two free atoms with the largest
/// singlet fraction, as long as it reaches `floor`. Ties go to the lowest
/// (i, j).
inline SingletPairing identify_pairs(const StateVector& v, double floor = kPairingFloor) {
  SingletPairing out;
  out.floor = floor;
  out.fractions = singlet_fractions(v);
  struct Candidate {
    double f;
    std::size_t i, j;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < v.n; ++i)
    for (std::size_t j = i + 1; j < v.n; ++j)
      cands.push_back({out.fractions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), i, j});
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.f > b.f; });
  std::vector<bool> taken(v.n, false);
  for (const auto& c : cands) {
    if (c.f < floor) break;
    if (taken[c.i] || taken[c.j]) continue;
    taken[c.i] = taken[c.j] = true;
    out.report.bonds.push_back({c.i, c.j, 0.0, 0, out.report.bonds.size()});
    out.bond_fraction.push_back(c.f);
  }
  const auto nest = nesting_counts(out.report.bonds);
  for (std::size_t b = 0; b < out.report.bonds.size(); ++b) out.report.bonds[b].nesting = nest[b];
  for (std::size_t k = 0; k < v.n; ++k)
    if (!taken[k]) out.report.unpaired.push_back(k);
  return out;
}

/// Unordered pair sets of two reports agree.
inline bool same_pairing(const PairingReport& a, const PairingReport& b) {
  auto key = [](const PairingReport& r) {
    std::vector<std::pair<std::size_t, std::size_t>> k;
    for (const auto& bond : r.bonds) k.push_back(std::minmax(bond.left, bond.right));
    std::sort(k.begin(), k.end());
    return k;
  };
  return key(a) == key(b);
}

// ---------------------------------------------------------------------------
// Schrieffer-Wolff check on four atoms

struct SwSpectrumCheck {
  std::array<double, 4> effective{};
  std::array<double, 4> exact{};
  double deviation = 0.0;  ///< max_k |eff_k - exact_k| / |exact_k|
  double coupling_ratio = 0.0;  ///< largest coupling touching the pair over J_12
};

/// Freezes the middle pair of a four-atom chain into a singlet and compares
/// the second-order effective spectrum (constant shift plus renormalized
/// outer flip-flop) with the lowest four exact levels.
inline SwSpectrumCheck sw_effective_spectrum_check(const std::vector<double>& positions,
                                                   double range, double j0) {
  if (positions.size() != 4) throw InvalidParameter("spectrum check needs exactly 4 atoms");
  for (std::size_t k = 1; k < 4; ++k)
    if (!(positions[k] > positions[k - 1]))
      throw InvalidParameter("positions must be strictly increasing");
  const double g0 = positions[1] - positions[0], g1 = positions[2] - positions[1],
               g2 = positions[3] - positions[2];
  if (!(g1 < g0 && g1 < g2)) throw InvalidParameter("middle gap must be strictly smallest");

  const Eigen::MatrixXd J = coupling_matrix(positions, range, j0);
  const double j12 = J(1, 2);
  double shift = -j12;
  double strongest = 0.0;
  for (Eigen::Index outer : {0, 3}) {
    const double diff = J(2, outer) - J(1, outer);
    shift -= diff * diff / (2.0 * j12);
    strongest = std::max({strongest, J(1, outer), J(2, outer)});
  }
  const double j_tilde = sw_coupling(J, {1, 2}, 0, 3);

  SwSpectrumCheck out;
  out.effective = {shift - std::abs(j_tilde), shift, shift, shift + std::abs(j_tilde)};
  std::sort(out.effective.begin(), out.effective.end());
  out.coupling_ratio = strongest / j12;

  const XYHamiltonian h = XYHamiltonian::from_positions(positions, range, j0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(dense_matrix(h));
  for (int k = 0; k < 4; ++k) {
    out.exact[static_cast<std::size_t>(k)] = solver.eigenvalues()(k);
    const double e = out.exact[static_cast<std::size_t>(k)];
    out.deviation = std::max(out.deviation,
                             std::abs(out.effective[static_cast<std::size_t>(k)] - e) / std::abs(e));
  }
  return out;
}

inline SwSpectrumCheck sw_effective_spectrum_check(const AtomChain& chain, double range,
                                                   double j0) {
  return sw_effective_spectrum_check(
      std::vector<double>(chain.positions.begin(), chain.positions.end()), range, j0);
}

// ---------------------------------------------------------------------------
// Collective spin

struct CollectiveSpin {
  std::array<double, 3> mean{};      ///< <S_x>, <S_y>, <S_z>
  std::array<double, 3> variance{};  ///< <S^2> - <S>^2
};

/// S_alpha = (1/2) sum_i sigma_alpha^i, hbar = 1.
inline CollectiveSpin collective_spin_stats(const StateVector& v) {
  CollectiveSpin out;
  const auto dim = static_cast<std::uint64_t>(v.dim());
  const double half_n = 0.5 * static_cast<double>(v.n);

  double sz = 0.0, sz2 = 0.0;
  for (std::uint64_t b = 0; b < dim; ++b) {
    const double p = std::norm(v.amplitudes(static_cast<Eigen::Index>(b)));
    const double m = half_n - static_cast<double>(std::popcount(b));
    sz += p * m;
    sz2 += p * m * m;
  }

  CVector sx = CVector::Zero(v.amplitudes.size()), sy = CVector::Zero(v.amplitudes.size());
  for (std::size_t i = 0; i < v.n; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    for (std::uint64_t b = 0; b < dim; ++b) {
      const cplx a = v.amplitudes(static_cast<Eigen::Index>(b));
      const auto dst = static_cast<Eigen::Index>(b ^ bit);
      sx(dst) += 0.5 * a;
      sy(dst) += (b & bit) ? cplx(0.0, -0.5) * a : cplx(0.0, 0.5) * a;
    }
  }
  const double mx = v.amplitudes.dot(sx).real(), my = v.amplitudes.dot(sy).real();
  out.mean = {mx, my, sz};
  out.variance = {sx.squaredNorm() - mx * mx, sy.squaredNorm() - my * my, sz2 - sz * sz};
  return out;
}

}  // namespace rsp
