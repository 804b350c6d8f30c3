#pragma once

// RG flow of the bond-length distribution Q(lambda, l_m), lambda = l/l_m - 1,
// with all lengths in units of the interaction range L. In s = ln l_m:
//
//   dQ/ds = Q + (lambda + 1) dQ/dlambda
//           + Q(0) * int_0^{lambda+g} Q(x) Q(lambda + g - x) dx
//
// and the nesting-resolved version where the production into channel n
// collects (n0, nx, ny) with n0 + nx + ny + 1 = n.
//
// The unpaired fraction follows from bonds ~ active atoms: every decimation
// removes two atoms, so dN/N = -2 Q(0) ds.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>

#include "rsp/errors.hpp"

namespace rsp {

/// l_m g(l_m) = ln[1 - 2 e^{-l_m} (1 - e^{-l_m})], l_m in units of L.
inline double g_of_lm(double lm) {
  if (!(lm > 0.0)) throw DomainError("g(l_m) requires l_m > 0");
  const double u = std::exp(-lm);
  return std::log1p(-2.0 * u * (1.0 - u)) / lm;
}

enum class AdvectionScheme { SemiLagrangian, Upwind };

struct FlowSettings {
  double lambda_max = 60.0;
  std::size_t n_lambda = 6000;
  double dlnlm = 1e-3;
  AdvectionScheme scheme = AdvectionScheme::SemiLagrangian;

  double dlambda() const { return lambda_max / static_cast<double>(n_lambda); }

  void validate() const {
    if (!(lambda_max > 0.0)) throw InvalidParameter("lambda_max must be positive");
    if (n_lambda < 16) throw InvalidParameter("n_lambda must be at least 16");
    if (!(dlnlm > 0.0)) throw InvalidParameter("dlnlm must be positive");
  }

  /// Explicit upwinding is stable only below this step in ln l_m.
  double cfl_limit() const { return 0.5 * dlambda() / (lambda_max + 1.0); }
};

struct FlowGrid {
  double lambda_max = 60.0;
  /// Cell averages of Q on n uniform cells covering [0, lambda_max].
  std::vector<double> q;
  double l_m = 0.2;       ///< current cutoff, units of L
  double p_fill = 0.3;
  double survival = 1.0;  ///< N(l_m)/N
  /// Q(0, l_m): density of bonds reaching the cutoff, measured as the mass
  /// leaving through lambda = 0 per unit ln l_m over the last step.
  double q0 = 0.0;

  std::size_t n_lambda() const { return q.size(); }
  double dlambda() const { return lambda_max / static_cast<double>(q.size()); }
  double lambda(std::size_t i) const { return (static_cast<double>(i) + 0.5) * dlambda(); }
  double normalization() const {
    return std::accumulate(q.begin(), q.end(), 0.0) * dlambda();
  }
  double boundary() const { return q0; }
};

/// Exponential density Q = -ln(1-P) (1-P)^lambda at l_m = lm0 (= a/L),
/// stored as exact cell averages.
inline FlowGrid init_q(double p_fill, double lm0, const FlowSettings& settings = {}) {
  if (!(p_fill > 0.0 && p_fill < 1.0)) throw InvalidParameter("filling P must lie in (0,1)");
  if (!(lm0 > 0.0)) throw InvalidParameter("initial cutoff must be positive");
  settings.validate();
  FlowGrid grid;
  grid.lambda_max = settings.lambda_max;
  grid.l_m = lm0;
  grid.p_fill = p_fill;
  grid.survival = 1.0;
  grid.q.resize(settings.n_lambda);
  const double rate = -std::log1p(-p_fill);
  const double h = grid.dlambda();
  for (std::size_t i = 0; i < grid.q.size(); ++i) {
    const double a = static_cast<double>(i) * h;
    grid.q[i] = (std::exp(-rate * a) - std::exp(-rate * (a + h))) / h;
  }
  grid.q0 = rate;
  return grid;
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Midpoint-rule convolutions of cell averages via zero-padded real FFTs:
/// out[k] = h sum_{j<=k} a_j b_{k-j} approximates C((k+1) h).
class Convolver {
 public:
  explicit Convolver(std::size_t n, double h) : n_(n), m_(2 * n), h_(h) {
    real_ = fftw_alloc_real(m_);
    spec_ = fftw_alloc_complex(m_ / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(m_), real_, spec_, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(m_), spec_, real_, FFTW_ESTIMATE);
  }
  Convolver(const Convolver&) = delete;
  Convolver& operator=(const Convolver&) = delete;
  ~Convolver() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  std::size_t spectrum_size() const { return m_ / 2 + 1; }

  void transform(std::span<const double> f, std::vector<std::complex<double>>& out) {
    std::fill(real_, real_ + m_, 0.0);
    std::copy(f.begin(), f.end(), real_);
    fftw_execute(forward_);
    out.resize(spectrum_size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = {spec_[k][0], spec_[k][1]};
  }

  void inverse(const std::vector<std::complex<double>>& spectrum, std::vector<double>& out) {
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      spec_[k][0] = spectrum[k].real();
      spec_[k][1] = spectrum[k].imag();
    }
    fftw_execute(backward_);
    out.resize(n_);
    const double scale = h_ / static_cast<double>(m_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = real_[i] * scale;
  }

 private:
  std::size_t n_, m_;
  double h_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

/// Convolution value at mu from samples conv[k] ~ C((k+1) h), with C(0) = 0.
inline double conv_at(std::span<const double> conv, double mu, double h) {
  if (mu <= 0.0) return 0.0;
  const double x = mu / h - 1.0;  // fractional index into conv
  if (x < 0.0) return conv[0] * (mu / h);
  const double last = static_cast<double>(conv.size() - 1);
  if (x >= last) return 0.0;
  const auto k = static_cast<std::size_t>(x);
  const double t = x - static_cast<double>(k);
  return conv[k] * (1.0 - t) + conv[k + 1] * t;
}

/// Piecewise-constant reconstruction of cell averages. Being linear in the
/// data, transport commutes with summing channels.
class Reconstruction {
 public:
  Reconstruction(std::span<const double> avg, double h) : avg_(avg), h_(h) {
    prefix_.resize(avg.size() + 1, 0.0);
    for (std::size_t i = 0; i < avg.size(); ++i) prefix_[i + 1] = prefix_[i] + avg[i] * h;
  }

  /// Mass in [0, x].
  double cumulative(double x) const {
    if (x <= 0.0) return 0.0;
    const double cells = x / h_;
    if (cells >= static_cast<double>(avg_.size())) return prefix_.back();
    const auto k = static_cast<std::size_t>(cells);
    return prefix_[k] + avg_[k] * (x - static_cast<double>(k) * h_);
  }

 private:
  std::span<const double> avg_;
  double h_;
  std::vector<double> prefix_;
};

/// Exact transport along dlambda/ds = -(lambda + 1) (which also carries the
/// linear growth term): the new mass of each cell is the old mass of its
/// preimage. Returns the mass pushed through lambda = 0.
inline double remap_characteristics(std::span<const double> avg, double h, double ds,
                                    std::span<double> out) {
  const Reconstruction rec(avg, h);
  const double e = std::exp(ds);
  auto preimage = [&](double lam) { return (lam + 1.0) * e - 1.0; };
  double lo = rec.cumulative(preimage(0.0));
  const double outflow = lo;
  for (std::size_t i = 0; i < avg.size(); ++i) {
    const double hi = rec.cumulative(preimage(static_cast<double>(i + 1) * h));
    out[i] = (hi - lo) / h;
    lo = hi;
  }
  return outflow;
}

/// Flux-form first-order upwind operator; the flux (lambda + 1) Q points
/// toward lambda = -1, so each interface takes the value of the cell on its
/// right. Returns the outflow rate through lambda = 0.
inline double upwind_rhs(std::span<const double> avg, double h, std::span<double> out) {
  const std::size_t n = avg.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double flux_right =
        i + 1 < n ? (static_cast<double>(i + 1) * h + 1.0) * avg[i + 1] : 0.0;
    const double flux_left = (static_cast<double>(i) * h + 1.0) * avg[i];
    out[i] = (flux_right - flux_left) / h;
  }
  return avg[0];
}

/// Advances the linear part over ds. Returns the decimated mass.
inline double transport(std::span<const double> avg, double h, double ds,
                        AdvectionScheme scheme, std::span<double> out,
                        std::vector<double>& work) {
  if (scheme == AdvectionScheme::SemiLagrangian) return remap_characteristics(avg, h, ds, out);
  const std::size_t n = avg.size();
  work.resize(2 * n);
  std::span<double> rhs(work.data(), n), stage(work.data() + n, n);
  const double r0 = upwind_rhs(avg, h, rhs);
  for (std::size_t i = 0; i < n; ++i) stage[i] = avg[i] + ds * rhs[i];
  const double r1 = upwind_rhs(stage, h, rhs);
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.5 * (avg[i] + stage[i] + ds * rhs[i]);
  return 0.5 * ds * (r0 + r1);
}

inline void check_and_clamp(std::vector<double>& q, const char* what) {
  for (double& v : q) {
    if (!std::isfinite(v)) throw InstabilityError(std::string(what) + ": non-finite density");
    if (v < 0.0) {
      if (v < -1e-9)
        throw InstabilityError(std::string(what) + ": density went negative (" +
                               std::to_string(v) + ")");
      v = 0.0;
    }
  }
}

}  // namespace detail

/// Stepper for the scalar flow. Keeps FFT workspace across steps.
///
/// Each step transports Q along its characteristics, measures the mass that
/// crossed lambda = 0 (the decimated bonds), and re-injects it as newly formed
/// bonds with the shape Q(0) C(lambda + g). The source is averaged between the
/// shape at the start and at the end of the step. Mass is conserved exactly
/// by the discrete update.
class ScalarFlowSolver {
 public:
  explicit ScalarFlowSolver(const FlowSettings& settings)
      : settings_(settings), conv_(settings.n_lambda, settings.lambda_max /
                                                          static_cast<double>(settings.n_lambda)) {
    settings_.validate();
  }

  const FlowSettings& settings() const { return settings_; }

  /// Cell values of C(lambda + g(l_m)), unnormalized.
  void production_shape(std::span<const double> q, double lm, std::vector<double>& out) {
    const double h = settings_.lambda_max / static_cast<double>(q.size());
    conv_.transform(q, spec_);
    for (auto& c : spec_) c *= c;
    conv_.inverse(spec_, conv_vals_);
    const double g = g_of_lm(lm);
    out.assign(q.size(), 0.0);
    for (std::size_t i = 0; i < q.size(); ++i)
      out[i] = detail::conv_at(conv_vals_, (static_cast<double>(i) + 0.5) * h + g, h);
  }

  FlowGrid step(const FlowGrid& grid, double dlnlm) {
    if (!(dlnlm > 0.0)) throw StepSizeError("dlnlm must be positive");
    if (grid.q.size() != settings_.n_lambda) throw InvalidParameter("grid size mismatch");
    if (settings_.scheme == AdvectionScheme::Upwind && dlnlm > settings_.cfl_limit())
      throw StepSizeError("upwind step " + std::to_string(dlnlm) + " exceeds CFL limit " +
                          std::to_string(settings_.cfl_limit()));
    const double h = grid.dlambda();
    const std::size_t n = grid.q.size();
    FlowGrid next = grid;
    const double lm1 = grid.l_m * std::exp(dlnlm);

    const double outflow = detail::transport(grid.q, h, dlnlm, settings_.scheme, next.q, work_);
    production_shape(grid.q, grid.l_m, shape0_);
    moved_.resize(n);
    detail::transport(shape0_, h, dlnlm, settings_.scheme, moved_, work_);
    production_shape(next.q, lm1, shape1_);
    const double m0 = std::accumulate(moved_.begin(), moved_.end(), 0.0) * h;
    const double m1 = std::accumulate(shape1_.begin(), shape1_.end(), 0.0) * h;
    if (outflow > 0.0 && m0 > 0.0 && m1 > 0.0) {
      for (std::size_t i = 0; i < n; ++i)
        next.q[i] += 0.5 * outflow * (moved_[i] / m0 + shape1_[i] / m1);
    }
    detail::check_and_clamp(next.q, "step_flow");
    next.l_m = lm1;
    next.q0 = outflow / dlnlm;
    next.survival = grid.survival * std::exp(-2.0 * outflow);
    return next;
  }

 private:
  FlowSettings settings_;
  detail::Convolver conv_;
  std::vector<std::complex<double>> spec_;
  std::vector<double> conv_vals_, shape0_, shape1_, moved_, work_;
};

inline FlowGrid step_flow(const FlowGrid& grid, double dlnlm, const FlowSettings& settings) {
  FlowSettings s = settings;
  s.n_lambda = grid.q.size();
  s.lambda_max = grid.lambda_max;
  ScalarFlowSolver solver(s);
  return solver.step(grid, dlnlm);
}

// ---------------------------------------------------------------------------
// Nesting-resolved flow

struct JointFlowGrid {
  double lambda_max = 60.0;
  std::size_t n_max = 8;
  /// q[n] for n = 0..n_max, plus q[n_max + 1] collecting every higher order.
  std::vector<std::vector<double>> q;
  /// Per-channel Q(n, 0, l_m), measured like FlowGrid::q0.
  std::vector<double> q0;
  double l_m = 0.2;
  double p_fill = 0.3;
  double survival = 1.0;
  /// Unpaired fraction when only n = 0 decimations form pairs.
  double survival_unnested = 1.0;

  std::size_t channels() const { return q.size(); }
  std::size_t n_lambda() const { return q.front().size(); }
  double dlambda() const { return lambda_max / static_cast<double>(n_lambda()); }

  std::vector<double> total() const {
    std::vector<double> t(n_lambda(), 0.0);
    for (const auto& ch : q)
      for (std::size_t i = 0; i < t.size(); ++i) t[i] += ch[i];
    return t;
  }
  double normalization() const {
    double s = 0.0;
    for (const auto& ch : q) s += std::accumulate(ch.begin(), ch.end(), 0.0);
    return s * dlambda();
  }
  double boundary() const { return std::accumulate(q0.begin(), q0.end(), 0.0); }
};

inline JointFlowGrid init_joint_q(double p_fill, double lm0, const FlowSettings& settings = {},
                                  std::size_t n_max = 8) {
  if (n_max < 1) throw InvalidParameter("n_max must be at least 1");
  FlowGrid base = init_q(p_fill, lm0, settings);
  JointFlowGrid grid;
  grid.lambda_max = base.lambda_max;
  grid.n_max = n_max;
  grid.l_m = base.l_m;
  grid.p_fill = p_fill;
  grid.q.assign(n_max + 2, std::vector<double>(base.q.size(), 0.0));
  grid.q0.assign(n_max + 2, 0.0);
  grid.q0[0] = base.q0;
  grid.q[0] = std::move(base.q);
  return grid;
}

/// Stepper for the nesting-resolved flow. The bonds decimated from channel n0
/// join the two neighbouring bonds (nx, ny) into channel n0 + nx + ny + 1;
/// anything above n_max lands in the overflow channel, so channel sums
/// reproduce the scalar flow.
class JointFlowSolver {
 public:
  explicit JointFlowSolver(const FlowSettings& settings)
      : settings_(settings), conv_(settings.n_lambda, settings.lambda_max /
                                                          static_cast<double>(settings.n_lambda)) {
    settings_.validate();
  }

  /// Per-target-channel production for unit decimated mass in each source
  /// channel weighted by `weights` (the outflow per channel), normalized so the
  /// total injected mass equals sum(weights).
  void production(const std::vector<std::vector<double>>& q, std::span<const double> weights,
                  double lm, std::vector<std::vector<double>>& out) {
    const std::size_t channels = q.size();
    const std::size_t n_max = channels - 2;
    const std::size_t n = q.front().size();
    const double h = settings_.lambda_max / static_cast<double>(n);
    const double g = g_of_lm(lm);

    total_.assign(n, 0.0);
    for (const auto& ch : q)
      for (std::size_t i = 0; i < n; ++i) total_[i] += ch[i];

    specs_.resize(n_max);
    for (std::size_t c = 0; c < n_max; ++c) conv_.transform(q[c], specs_[c]);
    conv_.transform(total_, acc_);
    for (auto& v : acc_) v *= v;
    conv_.inverse(acc_, conv_total_);

    // C_k = sum_{a+b=k} q_a * q_b for k < n_max
    convs_.resize(n_max);
    for (std::size_t k = 0; k < n_max; ++k) {
      acc_.assign(conv_.spectrum_size(), {0.0, 0.0});
      for (std::size_t a = 0; a <= k; ++a)
        for (std::size_t f = 0; f < acc_.size(); ++f) acc_[f] += specs_[a][f] * specs_[k - a][f];
      conv_.inverse(acc_, convs_[k]);
    }

    const double w_total = std::accumulate(weights.begin(), weights.end(), 0.0);
    out.assign(channels, std::vector<double>(n, 0.0));
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double mu = (static_cast<double>(i) + 0.5) * h + g;
      if (mu <= 0.0) continue;
      const double all = w_total * detail::conv_at(conv_total_, mu, h);
      double tracked = 0.0;
      for (std::size_t target = 1; target <= n_max; ++target) {
        double p = 0.0;
        for (std::size_t n0 = 0; n0 < target; ++n0)
          p += weights[n0] * detail::conv_at(convs_[target - 1 - n0], mu, h);
        out[target][i] = p;
        tracked += p;
      }
      out[n_max + 1][i] = std::max(0.0, all - tracked);
      mass += all;
    }
    mass *= h;
    if (mass > 0.0) {
      const double scale = w_total / mass;
      for (auto& ch : out)
        for (double& v : ch) v *= scale;
    }
  }

  JointFlowGrid step(const JointFlowGrid& grid, double dlnlm) {
    if (!(dlnlm > 0.0)) throw StepSizeError("dlnlm must be positive");
    if (grid.n_lambda() != settings_.n_lambda) throw InvalidParameter("grid size mismatch");
    if (settings_.scheme == AdvectionScheme::Upwind && dlnlm > settings_.cfl_limit())
      throw StepSizeError("upwind step " + std::to_string(dlnlm) + " exceeds CFL limit " +
                          std::to_string(settings_.cfl_limit()));
    const double h = grid.dlambda();
    const std::size_t n = grid.n_lambda();
    const std::size_t channels = grid.channels();
    JointFlowGrid next = grid;
    const double lm1 = grid.l_m * std::exp(dlnlm);

    outflow_.assign(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c)
      outflow_[c] = detail::transport(grid.q[c], h, dlnlm, settings_.scheme, next.q[c], work_);

    production(grid.q, outflow_, grid.l_m, p0_);
    production(next.q, outflow_, lm1, p1_);
    // renormalize after transport, as the scalar solver does
    moved_.assign(channels, std::vector<double>(n, 0.0));
    double moved_mass = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      detail::transport(p0_[c], h, dlnlm, settings_.scheme, moved_[c], work_);
      moved_mass += std::accumulate(moved_[c].begin(), moved_[c].end(), 0.0) * h;
    }
    const double w_total = std::accumulate(outflow_.begin(), outflow_.end(), 0.0);
    const double rescale = moved_mass > 0.0 ? w_total / moved_mass : 0.0;
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < n; ++i)
        next.q[c][i] += 0.5 * (rescale * moved_[c][i] + p1_[c][i]);
    for (auto& ch : next.q) detail::check_and_clamp(ch, "step_joint_flow");
    const double decimated = std::accumulate(outflow_.begin(), outflow_.end(), 0.0);
    next.l_m = lm1;
    for (std::size_t c = 0; c < channels; ++c) next.q0[c] = outflow_[c] / dlnlm;
    next.survival = grid.survival * std::exp(-2.0 * decimated);
    next.survival_unnested = grid.survival_unnested * std::exp(-2.0 * outflow_[0]);
    return next;
  }

 private:
  FlowSettings settings_;
  detail::Convolver conv_;
  std::vector<std::vector<std::complex<double>>> specs_;
  std::vector<std::complex<double>> acc_;
  std::vector<double> total_, conv_total_, outflow_, work_;
  std::vector<std::vector<double>> convs_, p0_, p1_, moved_;
};

inline JointFlowGrid step_joint_flow(const JointFlowGrid& grid, double dlnlm,
                                     const FlowSettings& settings) {
  FlowSettings s = settings;
  s.n_lambda = grid.n_lambda();
  s.lambda_max = grid.lambda_max;
  JointFlowSolver solver(s);
  return solver.step(grid, dlnlm);
}

/// Composition of the bonds being decimated at the current cutoff:
/// f_n = Q(n, 0) / sum_m Q(m, 0), overflow last.
inline std::vector<double> nesting_fractions(const JointFlowGrid& grid) {
  const double total = grid.boundary();
  if (!(total > 0.0)) throw NumericalError("nesting fractions undefined: zero boundary density");
  std::vector<double> f(grid.channels());
  for (std::size_t c = 0; c < f.size(); ++c) f[c] = grid.q0[c] / total;
  return f;
}

// ---------------------------------------------------------------------------
// Whole runs

struct FlowSample {
  double lm_over_l = 0.0;
  double survival = 1.0;
  double q0 = 0.0;
  double normalization = 1.0;
  std::vector<double> fractions;  ///< empty for the scalar flow
  double survival_unnested = 1.0;
};

using FlowHistory = std::vector<FlowSample>;

struct FlowRun {
  double p_fill = 0.3;
  double lm0 = 0.2;       ///< a / L
  double lm_final = 10.0;
  std::size_t record_every = 10;
  std::size_t n_max = 8;
  FlowSettings settings;
};

inline FlowSample sample_of(const FlowGrid& g) {
  return {g.l_m, g.survival, g.boundary(), g.normalization(), {}, 1.0};
}

inline FlowSample sample_of(const JointFlowGrid& g) {
  return {g.l_m, g.survival, g.boundary(), g.normalization(), nesting_fractions(g),
          g.survival_unnested};
}

namespace detail {
template <class Grid, class Solver>
FlowHistory integrate(Grid grid, Solver& solver, const FlowRun& run) {
  FlowHistory history{sample_of(grid)};
  const double ds = run.settings.dlnlm;
  const auto steps = static_cast<std::size_t>(std::ceil(std::log(run.lm_final / run.lm0) / ds - 1e-9));
  for (std::size_t k = 1; k <= steps; ++k) {
    grid = solver.step(grid, ds);
    if (k % run.record_every == 0 || k == steps) history.push_back(sample_of(grid));
  }
  return history;
}
}  // namespace detail

inline FlowHistory solve_flow(const FlowRun& run) {
  ScalarFlowSolver solver(run.settings);
  return detail::integrate(init_q(run.p_fill, run.lm0, run.settings), solver, run);
}

inline FlowHistory solve_joint_flow(const FlowRun& run) {
  JointFlowSolver solver(run.settings);
  return detail::integrate(init_joint_q(run.p_fill, run.lm0, run.settings, run.n_max), solver,
                           run);
}

/// (l_m / L, N(l_m)/N) pairs; starts at 1 and never increases.
struct SurvivalCurve {
  std::vector<double> lm_over_l;
  std::vector<double> survival;

  bool empty() const { return lm_over_l.empty(); }

  /// Linear interpolation, clamped to the first and last sample.
  double at(double x) const {
    if (empty()) throw DependencyError("empty survival curve");
    if (x <= lm_over_l.front()) return survival.front();
    if (x >= lm_over_l.back()) return survival.back();
    auto it = std::upper_bound(lm_over_l.begin(), lm_over_l.end(), x);
    const auto k = static_cast<std::size_t>(it - lm_over_l.begin());
    const double t = (x - lm_over_l[k - 1]) / (lm_over_l[k] - lm_over_l[k - 1]);
    return survival[k - 1] * (1.0 - t) + survival[k] * t;
  }
};

inline SurvivalCurve unpaired_fraction(const FlowHistory& history) {
  SurvivalCurve c;
  for (const auto& s : history) {
    c.lm_over_l.push_back(s.lm_over_l);
    c.survival.push_back(s.survival);
  }
  return c;
}

inline SurvivalCurve unnested_unpaired_fraction(const FlowHistory& history) {
  SurvivalCurve c;
  for (const auto& s : history) {
    c.lm_over_l.push_back(s.lm_over_l);
    c.survival.push_back(s.survival_unnested);
  }
  return c;
}

/// Asymptotic unpaired fraction when only unnested decimations pair atoms.
inline double no_rg_unpaired(const FlowHistory& joint_history) {
  if (joint_history.empty() || joint_history.back().fractions.empty())
    throw DependencyError("no_rg_unpaired needs a joint-flow history");
  if (joint_history.back().lm_over_l < 10.0 - 1e-9)
    throw InvalidParameter("joint flow must reach l_m/L >= 10 for the asymptote");
  return joint_history.back().survival_unnested;
}

}  // namespace rsp
