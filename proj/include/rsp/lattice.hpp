#pragma once

// Disorder realizations on a 1D trap lattice and the bare exponential
// coupling J_ij = J0 exp(-|x_i - x_j| / L). Lengths are in units of the
// lattice constant, energies in units of J0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <numeric>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "rsp/errors.hpp"

namespace rsp {

using Site = std::int64_t;

struct FixedCount {
  std::size_t atoms = 12;
};

struct Bernoulli {
  double probability = 0.3;
};

using Filling = std::variant<FixedCount, Bernoulli>;

struct LatticeParams {
  std::size_t n_sites = 100;
  double interaction_range = 5.0;
  double j0 = 1.0;
  Filling filling = FixedCount{12};
  std::uint64_t seed = 0;

  void validate() const {
    if (n_sites == 0) throw InvalidParameter("n_sites must be positive");
    if (!(interaction_range > 0.0))
      throw InvalidParameter("interaction_range must be > 0");
    if (!(j0 > 0.0)) throw InvalidParameter("j0 must be > 0");
    if (const auto* fixed = std::get_if<FixedCount>(&filling)) {
      if (fixed->atoms > n_sites)
        throw InvalidParameter("fixed atom count " + std::to_string(fixed->atoms) +
                               " exceeds n_sites " + std::to_string(n_sites));
    } else {
      const double p = std::get<Bernoulli>(filling).probability;
      if (!(p > 0.0 && p < 1.0))
        throw InvalidParameter("Bernoulli filling must lie in (0,1)");
    }
  }
};

/// Occupied sites, strictly increasing. Atom id k refers to positions[k].
struct AtomChain {
  std::vector<Site> positions;

  std::size_t size() const noexcept { return positions.size(); }
  bool empty() const noexcept { return positions.empty(); }
  Site operator[](std::size_t k) const { return positions[k]; }

  bool operator==(const AtomChain&) const = default;

  /// Throws DomainError unless strictly increasing and inside [0, n_sites).
  void check(std::size_t n_sites) const {
    for (std::size_t k = 0; k < positions.size(); ++k) {
      if (positions[k] < 0 || positions[k] >= static_cast<Site>(n_sites))
        throw DomainError("site " + std::to_string(positions[k]) + " outside lattice");
      if (k > 0 && positions[k] <= positions[k - 1])
        throw DomainError("atom positions must be strictly increasing");
    }
  }
};

/// Draws a chain with its own generator; identical params give identical chains.
inline AtomChain sample_chain(const LatticeParams& params, std::mt19937_64& rng) {
  params.validate();
  AtomChain chain;
  if (const auto* fixed = std::get_if<FixedCount>(&params.filling)) {
    std::vector<Site> sites(params.n_sites);
    std::iota(sites.begin(), sites.end(), Site{0});
    chain.positions.reserve(fixed->atoms);
    std::sample(sites.begin(), sites.end(), std::back_inserter(chain.positions),
                static_cast<std::ptrdiff_t>(fixed->atoms), rng);
    std::sort(chain.positions.begin(), chain.positions.end());
  } else {
    std::bernoulli_distribution occupied(std::get<Bernoulli>(params.filling).probability);
    for (std::size_t s = 0; s < params.n_sites; ++s)
      if (occupied(rng)) chain.positions.push_back(static_cast<Site>(s));
  }
  return chain;
}

inline AtomChain sample_chain(const LatticeParams& params) {
  std::mt19937_64 rng(params.seed);
  return sample_chain(params, rng);
}

inline double coupling(double j0, double range, double separation) {
  return j0 * std::exp(-std::abs(separation) / range);
}

inline double coupling(const LatticeParams& params, Site xi, Site xj) {
  if (xi == xj) throw DomainError("self-coupling is undefined");
  return coupling(params.j0, params.interaction_range, static_cast<double>(xi - xj));
}

struct CouplingEntry {
  std::size_t i;
  std::size_t j;
  double value;
};

/// All unordered pairs (i < j) in lexicographic order.
inline std::vector<CouplingEntry> coupling_list(const AtomChain& chain,
                                                const LatticeParams& params) {
  std::vector<CouplingEntry> out;
  const std::size_t n = chain.size();
  if (n < 2) return out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      out.push_back({i, j, coupling(params, chain[i], chain[j])});
  return out;
}

/// Independent stream for realization `index` of an ensemble seeded by
/// `master`. Does not depend on how realizations are scheduled.
inline std::mt19937_64 realization_rng(std::uint64_t master, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x5eedu};
  return std::mt19937_64(seq);
}

}  // namespace rsp
