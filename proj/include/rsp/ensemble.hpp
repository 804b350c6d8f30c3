#pragma once

// Disorder ensembles: a small thread pool over realization indices and the
// Monte Carlo counterparts of the flow-equation curves.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

#include "rsp/errors.hpp"
#include "rsp/lattice.hpp"
#include "rsp/rsrg.hpp"

namespace rsp {

inline std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// results[k] = fn(k) for k < count. Indices are handed out dynamically, so
/// the output never depends on the worker count. The exception of the lowest
/// failing index is rethrown.
template <class Fn>
auto parallel_map(std::size_t count, std::size_t workers, Fn&& fn)
    -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<R> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < count; k = next++) {
      try {
        results[k] = fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(resolve_workers(workers), std::max<std::size_t>(count, 1));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

struct McParams {
  LatticeParams lattice{100, 5.0, 1.0, FixedCount{30}, 0};
  std::size_t realizations = 10000;
  std::size_t workers = 0;
  double lm_max = 10.0;       ///< in units of L
  std::size_t points = 200;   ///< survival curve samples in (0, lm_max]
  std::size_t n_max = 8;      ///< nesting channels; deeper bonds pooled in the last
  double bin_width = 0.25;    ///< nesting histogram bins in l_m / L

  void validate() const {
    lattice.validate();
    if (realizations == 0) throw InvalidParameter("need at least one realization");
    if (!(lm_max > 0.0) || points == 0) throw InvalidParameter("bad survival grid");
    if (!(bin_width > 0.0)) throw InvalidParameter("bin width must be positive");
  }
};

struct McCurves {
  std::vector<double> lm_over_l;
  std::vector<double> rg_survival;
  std::vector<double> norg_survival;
  std::vector<double> bin_centers;
  /// bonds per (bin, nesting) summed over realizations; column n_max pools deeper nesting
  std::vector<std::vector<std::size_t>> nesting_counts;
  double mean_atoms = 0.0;
  std::size_t realizations = 0;

  std::vector<double> nesting_fractions(std::size_t bin) const {
    const auto& c = nesting_counts.at(bin);
    std::size_t total = 0;
    for (auto v : c) total += v;
    std::vector<double> f(c.size(), 0.0);
    if (total == 0) return f;
    for (std::size_t n = 0; n < c.size(); ++n)
      f[n] = static_cast<double>(c[n]) / static_cast<double>(total);
    return f;
  }
};

struct RealizationOutcome {
  std::size_t atoms = 0;
  PairingReport rg, norg;
};

inline RealizationOutcome simulate_realization(const McParams& p, std::size_t index) {
  auto rng = realization_rng(p.lattice.seed, index);
  const AtomChain chain = sample_chain(p.lattice, rng);
  RealizationOutcome o;
  o.atoms = chain.size();
  if (chain.empty()) return o;
  o.rg = run_rsrg(chain, p.lattice.interaction_range);
  o.norg = run_no_rg(chain);
  return o;
}

/// Ensemble-averaged unpaired fractions (atom weighted) on a uniform l_m/L
/// grid and nesting histograms of decimated bonds.
inline McCurves rsrg_ensemble(const McParams& p) {
  p.validate();
  const auto outcomes = parallel_map(p.realizations, p.workers,
                                     [&](std::size_t k) { return simulate_realization(p, k); });

  McCurves c;
  c.realizations = p.realizations;
  const double range = p.lattice.interaction_range;
  for (std::size_t k = 1; k <= p.points; ++k)
    c.lm_over_l.push_back(p.lm_max * static_cast<double>(k) / static_cast<double>(p.points));
  const auto bins = static_cast<std::size_t>(std::ceil(p.lm_max / p.bin_width - 1e-12));
  for (std::size_t b = 0; b < bins; ++b) c.bin_centers.push_back((b + 0.5) * p.bin_width);
  c.nesting_counts.assign(bins, std::vector<std::size_t>(p.n_max + 1, 0));

  // paired atoms at each grid point, by cumulative counts of sorted bond lengths
  std::vector<double> rg_paired(p.points, 0.0), norg_paired(p.points, 0.0);
  auto accumulate = [&](const PairingReport& r, std::vector<double>& paired) {
    std::vector<double> lengths;
    lengths.reserve(r.bonds.size());
    for (const auto& b : r.bonds) lengths.push_back(b.l_m / range);
    std::sort(lengths.begin(), lengths.end());
    std::size_t j = 0;
    for (std::size_t k = 0; k < p.points; ++k) {
      while (j < lengths.size() && lengths[j] <= c.lm_over_l[k]) ++j;
      paired[k] += 2.0 * static_cast<double>(j);
    }
  };
  double atoms = 0.0;
  for (const auto& o : outcomes) {
    atoms += static_cast<double>(o.atoms);
    accumulate(o.rg, rg_paired);
    accumulate(o.norg, norg_paired);
    for (const auto& b : o.rg.bonds) {
      const double x = b.l_m / range;
      if (x >= p.lm_max) continue;
      const auto bin = std::min(bins - 1, static_cast<std::size_t>(x / p.bin_width));
      ++c.nesting_counts[bin][std::min(b.nesting, p.n_max)];
    }
  }
  if (atoms == 0.0) throw NumericalError("ensemble contains no atoms");
  c.mean_atoms = atoms / static_cast<double>(p.realizations);
  for (std::size_t k = 0; k < p.points; ++k) {
    c.rg_survival.push_back(1.0 - rg_paired[k] / atoms);
    c.norg_survival.push_back(1.0 - norg_paired[k] / atoms);
  }
  return c;
}

}  // namespace rsp
