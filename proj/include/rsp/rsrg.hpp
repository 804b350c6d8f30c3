#pragma once

// Strong-disorder renormalization of the exponentially coupled XY chain.
//
// The chain is kept as a list of active atoms and the effective gaps between
// consecutive ones. Decimating the smallest gap l_m freezes its two atoms into
// a singlet and replaces (l_left, l_m, l_right) by a single gap
// l_left + l_m + l_right - d_eff(l_m). A pair sitting at a chain end is simply
// removed together with its one neighbouring gap.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rsp/errors.hpp"
#include "rsp/lattice.hpp"

namespace rsp {

/// Shrinkage of the distance between the two atoms flanking a decimated pair
/// of effective length l_m. Both arguments in the same length unit.
inline double d_eff(double l_m, double range) {
  if (!(l_m > 0.0) || !(range > 0.0))
    throw DomainError("d_eff requires l_m > 0 and L > 0");
  const double u = std::exp(-l_m / range);
  // 1 - 2u + 2u^2 >= 1/2, so the log is always finite.
  return range * (2.0 * l_m / range + std::log1p(-2.0 * u + 2.0 * u * u));
}

struct Bond {
  std::size_t left = 0;   ///< atom id (index into the chain), left < right
  std::size_t right = 0;
  double l_m = 0.0;       ///< effective length at decimation, units of a
  std::size_t nesting = 0;
  std::size_t order = 0;  ///< decimation step

  bool operator==(const Bond&) const = default;
};

struct PairingReport {
  std::vector<Bond> bonds;
  std::vector<std::size_t> unpaired;

  /// Throws DomainError unless every atom 0..n-1 is in exactly one bond or in
  /// `unpaired`.
  void check_partition(std::size_t n_atoms) const {
    std::vector<int> seen(n_atoms, 0);
    auto mark = [&](std::size_t id) {
      if (id >= n_atoms) throw DomainError("atom id out of range in pairing");
      if (seen[id]++) throw DomainError("atom " + std::to_string(id) + " used twice");
    };
    for (const auto& b : bonds) {
      mark(b.left);
      mark(b.right);
    }
    for (auto id : unpaired) mark(id);
    for (std::size_t k = 0; k < n_atoms; ++k)
      if (!seen[k]) throw DomainError("atom " + std::to_string(k) + " missing from pairing");
  }
};

/// Two bonds cross when exactly one endpoint of one lies strictly inside the
/// other. Returns the first offending pair (indices into `bonds`).
inline std::optional<std::pair<std::size_t, std::size_t>> find_crossing(
    const std::vector<Bond>& bonds) {
  for (std::size_t a = 0; a < bonds.size(); ++a) {
    for (std::size_t b = a + 1; b < bonds.size(); ++b) {
      auto [l1, r1] = std::minmax(bonds[a].left, bonds[a].right);
      auto [l2, r2] = std::minmax(bonds[b].left, bonds[b].right);
      const bool l2_in = l1 < l2 && l2 < r1;
      const bool r2_in = l1 < r2 && r2 < r1;
      if (l2_in != r2_in) return std::make_pair(a, b);
    }
  }
  return std::nullopt;
}

/// Count of bonds whose both endpoints lie strictly inside each bond.
inline std::vector<std::size_t> nesting_counts(const std::vector<Bond>& bonds) {
  std::vector<std::size_t> out(bonds.size(), 0);
  for (std::size_t a = 0; a < bonds.size(); ++a)
    for (std::size_t b = 0; b < bonds.size(); ++b) {
      if (a == b) continue;
      if (bonds[a].left < bonds[b].left && bonds[b].right < bonds[a].right) ++out[a];
    }
  return out;
}

/// Active atoms and the effective gaps between consecutive ones.
class GapList {
 public:
  GapList() = default;

  explicit GapList(const AtomChain& chain) {
    atoms_.resize(chain.size());
    std::iota(atoms_.begin(), atoms_.end(), std::size_t{0});
    for (std::size_t k = 1; k < chain.size(); ++k) {
      const double g = static_cast<double>(chain[k] - chain[k - 1]);
      if (!(g > 0.0)) throw DomainError("chain positions must be strictly increasing");
      gaps_.push_back(g);
    }
    inner_.assign(gaps_.size(), 0);
  }

  GapList(std::vector<std::size_t> atoms, std::vector<double> gaps)
      : atoms_(std::move(atoms)), gaps_(std::move(gaps)), inner_(gaps_.size(), 0) {
    if (!atoms_.empty() && gaps_.size() != atoms_.size() - 1)
      throw DomainError("gap list needs exactly one gap between consecutive atoms");
    for (double g : gaps_)
      if (!(g > 0.0)) throw DomainError("gaps must be positive");
  }

  const std::vector<std::size_t>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& gaps() const noexcept { return gaps_; }
  /// Number of bonds already frozen inside each gap.
  const std::vector<std::size_t>& inner() const noexcept { return inner_; }
  std::size_t active() const noexcept { return atoms_.size(); }
  std::size_t steps() const noexcept { return next_order_; }

  /// Smallest gap; gaps equal within 1e-12 relative resolve to the leftmost.
  std::size_t min_gap_index() const {
    if (gaps_.empty()) throw DomainError("nothing to decimate: fewer than 2 active atoms");
    std::size_t best = 0;
    for (std::size_t k = 1; k < gaps_.size(); ++k)
      if (gaps_[k] < gaps_[best] * (1.0 - 1e-12)) best = k;
    return best;
  }

  /// Freezes atoms k and k+1 (positions in the active list) into a bond.
  Bond decimate_at(std::size_t k, double range) {
    if (k >= gaps_.size()) throw DomainError("nothing to decimate at that gap");
    Bond bond{atoms_[k], atoms_[k + 1], gaps_[k], inner_[k], next_order_++};
    const bool has_left = k > 0;
    const bool has_right = k + 1 < gaps_.size();
    if (has_left && has_right) {
      const double merged = gaps_[k - 1] + gaps_[k] + gaps_[k + 1] - d_eff(gaps_[k], range);
      const std::size_t nested = inner_[k - 1] + inner_[k] + inner_[k + 1] + 1;
      gaps_[k - 1] = merged;
      inner_[k - 1] = nested;
      gaps_.erase(gaps_.begin() + static_cast<std::ptrdiff_t>(k),
                  gaps_.begin() + static_cast<std::ptrdiff_t>(k + 2));
      inner_.erase(inner_.begin() + static_cast<std::ptrdiff_t>(k),
                   inner_.begin() + static_cast<std::ptrdiff_t>(k + 2));
    } else if (has_left) {
      gaps_.erase(gaps_.end() - 2, gaps_.end());
      inner_.erase(inner_.end() - 2, inner_.end());
    } else if (has_right) {
      gaps_.erase(gaps_.begin(), gaps_.begin() + 2);
      inner_.erase(inner_.begin(), inner_.begin() + 2);
    } else {
      gaps_.clear();
      inner_.clear();
    }
    atoms_.erase(atoms_.begin() + static_cast<std::ptrdiff_t>(k),
                 atoms_.begin() + static_cast<std::ptrdiff_t>(k + 2));
    return bond;
  }

 private:
  std::vector<std::size_t> atoms_;
  std::vector<double> gaps_;
  std::vector<std::size_t> inner_;
  std::size_t next_order_ = 0;
};

inline std::pair<GapList, Bond> decimate_step(GapList state, double range) {
  if (state.active() < 2) throw DomainError("nothing to decimate: fewer than 2 active atoms");
  const std::size_t k = state.min_gap_index();
  Bond bond = state.decimate_at(k, range);
  return {std::move(state), bond};
}

/// Full decimation; the returned bonds are in decimation order with
/// non-decreasing l_m.
inline PairingReport run_rsrg(const AtomChain& chain, double range) {
  if (chain.empty()) throw DomainError("run_rsrg needs at least one atom");
  if (!(range > 0.0)) throw DomainError("interaction range must be positive");
  GapList state(chain);
  PairingReport report;
  report.bonds.reserve(chain.size() / 2);
  while (state.active() >= 2) {
    Bond bond = state.decimate_at(state.min_gap_index(), range);
    if (!report.bonds.empty() && bond.l_m < report.bonds.back().l_m * (1.0 - 1e-12))
      throw NumericalError("RG cutoff decreased during decimation");
    report.bonds.push_back(bond);
  }
  report.unpaired = state.atoms();
  return report;
}

/// Greedy pairing of originally adjacent atoms by bare separation, without
/// renormalization: once an atom is paired its other neighbour can never
/// reach across it.
inline PairingReport run_no_rg(const AtomChain& chain) {
  if (chain.empty()) throw DomainError("run_no_rg needs at least one atom");
  const std::size_t n = chain.size();
  std::vector<std::size_t> order(n > 0 ? n - 1 : 0);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto gap = [&](std::size_t k) { return chain[k + 1] - chain[k]; };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gap(a) < gap(b); });
  std::vector<bool> paired(n, false);
  PairingReport report;
  for (std::size_t k : order) {
    if (paired[k] || paired[k + 1]) continue;
    paired[k] = paired[k + 1] = true;
    report.bonds.push_back({k, k + 1, static_cast<double>(gap(k)), 0, report.bonds.size()});
  }
  for (std::size_t k = 0; k < n; ++k)
    if (!paired[k]) report.unpaired.push_back(k);
  return report;
}

/// Symmetric matrix of bare couplings with zero diagonal.
inline Eigen::MatrixXd coupling_matrix(const std::vector<double>& positions, double range,
                                       double j0) {
  const auto n = static_cast<Eigen::Index>(positions.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      J(i, j) = J(j, i) = coupling(j0, range, positions[i] - positions[j]);
  return J;
}

inline Eigen::MatrixXd coupling_matrix(const AtomChain& chain, double range, double j0) {
  return coupling_matrix(std::vector<double>(chain.positions.begin(), chain.positions.end()),
                         range, j0);
}

/// Second-order Schrieffer-Wolff coupling between j and jp after freezing
/// `pair` into a singlet: J_jj' - (J_2j - J_1j)(J_2j' - J_1j') / J_12.
inline double sw_coupling(const Eigen::Ref<const Eigen::MatrixXd>& J,
                          std::pair<std::size_t, std::size_t> pair, std::size_t j,
                          std::size_t jp) {
  const auto [a, b] = pair;
  const auto n = static_cast<std::size_t>(J.rows());
  if (a >= n || b >= n || j >= n || jp >= n) throw DomainError("atom index out of range");
  if (a == b || j == jp || j == a || j == b || jp == a || jp == b)
    throw DomainError("sw_coupling indices must be distinct");
  const auto i1 = static_cast<Eigen::Index>(a), i2 = static_cast<Eigen::Index>(b);
  const auto x = static_cast<Eigen::Index>(j), y = static_cast<Eigen::Index>(jp);
  if (!(J(i1, i2) > 0.0)) throw DomainError("pair coupling must be positive");
  return J(x, y) - (J(i2, x) - J(i1, x)) * (J(i2, y) - J(i1, y)) / J(i1, i2);
}

struct EffectiveCoupling {
  Bond bond;     ///< l_m, nesting and order as replayed
  double j_eff;  ///< J0 exp(-l_m / L)
};

/// Replays the gap merging for a given pairing and returns the renormalized
/// coupling of every bond, in the order of `report.bonds`.
///
/// Replay rule: among bonds whose endpoints are currently adjacent, decimate
/// the one with the smallest current gap (leftmost on ties). For a report
/// produced by run_rsrg this reproduces its own sequence. Crossing bonds, or a
/// bond enclosing an atom that never pairs, raise PairingError.
inline std::vector<EffectiveCoupling> assign_effective_couplings(const PairingReport& report,
                                                                 const AtomChain& chain,
                                                                 double range, double j0) {
  report.check_partition(chain.size());
  if (auto cross = find_crossing(report.bonds)) {
    const auto& a = report.bonds[cross->first];
    const auto& b = report.bonds[cross->second];
    throw PairingError("crossing bonds (" + std::to_string(a.left) + "," +
                       std::to_string(a.right) + ") and (" + std::to_string(b.left) + "," +
                       std::to_string(b.right) + ")");
  }
  std::vector<std::size_t> partner(chain.size(), chain.size());
  std::vector<std::size_t> bond_of(chain.size(), report.bonds.size());
  for (std::size_t b = 0; b < report.bonds.size(); ++b) {
    auto [l, r] = std::minmax(report.bonds[b].left, report.bonds[b].right);
    partner[l] = r;
    bond_of[l] = b;
  }

  GapList state(chain);
  std::vector<EffectiveCoupling> out(report.bonds.size());
  for (std::size_t done = 0; done < report.bonds.size(); ++done) {
    const auto& atoms = state.atoms();
    const auto& gaps = state.gaps();
    std::size_t pick = gaps.size();
    for (std::size_t k = 0; k < gaps.size(); ++k) {
      if (partner[atoms[k]] != atoms[k + 1]) continue;
      if (pick == gaps.size() || gaps[k] < gaps[pick] * (1.0 - 1e-12)) pick = k;
    }
    if (pick == gaps.size()) {
      throw PairingError("pairing is not realizable by decimation: an unpaired atom sits "
                         "inside a bond");
    }
    const std::size_t b = bond_of[atoms[pick]];
    Bond replayed = state.decimate_at(pick, range);
    out[b] = {replayed, j0 * std::exp(-replayed.l_m / range)};
  }
  return out;
}

/// Atoms left unpaired once every bond with l_m <= cutoff is frozen, as a
/// fraction of all atoms.
inline double unpaired_fraction_at(const PairingReport& report, std::size_t n_atoms,
                                   double cutoff) {
  if (n_atoms == 0) return 0.0;
  std::size_t paired = 0;
  for (const auto& b : report.bonds)
    if (b.l_m <= cutoff) paired += 2;
  return 1.0 - static_cast<double>(paired) / static_cast<double>(n_atoms);
}

}  // namespace rsp
