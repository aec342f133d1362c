/*
   Copyright 2026 The ufmkit Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ufm/field.hpp"
#include "ufm/kernels.hpp"
#include "ufm/parallel.hpp"
#include "ufm/transport.hpp"

namespace ufm {

/// Which contraction the Picard iteration applies.
///   J       loss and gain integrated along characteristics (contraction 2/a)
///   J_plus  loss absorbed in an exponential integrating factor (contraction 1/a)
enum class Mapping { J, J_plus };

inline const char* to_string(Mapping m) { return m == Mapping::J ? "J" : "J_plus"; }
inline Mapping mapping_from_string(const std::string& s) {
  if (s == "J") return Mapping::J;
  if (s == "J_plus" || s == "J+") return Mapping::J_plus;
  throw ArgumentError("unknown mapping '" + s + "' (expected J or J_plus)");
}

/// Smallest admissible weight rate (exclusive) for each mapping.
inline double rate_threshold(Mapping m) { return m == Mapping::J ? 2.0 : 1.0; }
/// Contraction constant of the mapping in the weighted norm.
inline double contraction_bound(Mapping m, double a) {
  return m == Mapping::J ? 2.0 / a : 1.0 / a;
}
inline double default_rate(Mapping m) { return m == Mapping::J ? 4.0 : 2.0; }

/// Exponential weight rate a and the radius A of the invariant ball.
/// A = (a/2)|f0|_1 for J and A = a|f0|_1 for J_plus.
struct WeightedNormParams {
  double a = 2.0;
  double A = 0.0;
};

inline WeightedNormParams make_norm_params(Mapping m, double a, double f0_mass) {
  return {a, m == Mapping::J ? 0.5 * a * f0_mass : a * f0_mass};
}

/// Slack allowed on contraction ratios at desk-scale resolutions.
inline constexpr double kRatioTolerance = 0.05;

/// Quadrature tolerance of a run: (dt^2/12 + max h_x^2/8) times the scale of f0,
/// where the scale is max(|f0|_1, max f0). The two terms are the leading error
/// constants of the composite trapezoid rule in time and of linear interpolation
/// in space; every discrete identity used by the checks is second order in both.
inline double quadrature_tolerance(const PhaseSpaceGrid& g, std::span<const double> f0) {
  double h2 = 0.0;
  for (const Axis& a : g.x_axes()) h2 = std::max(h2, a.spacing() * a.spacing());
  double peak = 0.0;
  for (double v : f0) peak = std::max(peak, std::abs(v));
  return (g.dt() * g.dt() / 12.0 + h2 / 8.0) * std::max(g.l1_norm(f0), peak);
}

/// sup over time nodes of exp(-a t) |f(t)|_1.
inline double weighted_norm(const DistributionField& f, double a) {
  if (!(a > 0.0)) throw ArgumentError("weighted_norm: a must be positive");
  double best = 0.0;
  for (int k = 0; k < f.nt(); ++k)
    best = std::max(best, std::exp(-a * f.grid().time(k)) * f.l1_norm(k));
  return best;
}

/// ||f - g||_a without materializing the difference.
inline double weighted_distance(const DistributionField& f, const DistributionField& g, double a) {
  const PhaseSpaceGrid& grid = f.grid();
  std::vector<double> diff(grid.slice_size());
  double best = 0.0;
  for (int k = 0; k < f.nt(); ++k) {
    const auto fs = f.slice(k), gs = g.slice(k);
    for (std::size_t n = 0; n < diff.size(); ++n) diff[n] = fs[n] - gs[n];
    best = std::max(best, std::exp(-a * grid.time(k)) * grid.l1_norm(diff));
  }
  return best;
}

/// eta(x, xi) * sum_xi1 w(xi1) Gamma(x, xi1) P(-xi . xi1) f(x, xi1) at every node.
inline Slice gain_term(std::span<const double> f, std::span<const double> eta,
                       std::span<const double> gamma, std::span<const double> p_rows,
                       const PhaseSpaceGrid& g) {
  const std::size_t nx = g.nx_total(), nv = g.nv_total();
  if (f.size() != g.slice_size() || eta.size() != f.size() || gamma.size() != f.size() ||
      p_rows.size() != nv * nv)
    throw ArgumentError("gain_term: shape mismatch");
  const auto w = g.v_weights();
  Slice weighted(f.size());
  std::vector<char> live(nv, 0);
  for (std::size_t j1 = 0; j1 < nv; ++j1)
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t n = j1 * nx + i;
      weighted[n] = w[j1] * gamma[n] * f[n];
      if (weighted[n] != 0.0) live[j1] = 1;
    }
  Slice out(f.size(), 0.0);
  parallel_for(nv, [&](std::size_t j) {
    double* o = out.data() + j * nx;
    const double* prow = p_rows.data() + j * nv;
    for (std::size_t j1 = 0; j1 < nv; ++j1) {
      if (!live[j1] || prow[j1] == 0.0) continue;
      const double p = prow[j1];
      const double* src = weighted.data() + j1 * nx;
      for (std::size_t i = 0; i < nx; ++i) o[i] += p * src[i];
    }
    const double* e = eta.data() + j * nx;
    for (std::size_t i = 0; i < nx; ++i) o[i] *= e[i];
  });
  return out;
}

namespace detail {

/// Shift stencils for every (velocity node, time lag) pair; lags may be negative.
class LagStencils {
 public:
  explicit LagStencils(const PhaseSpaceGrid& g) : nt_(g.nt()), nv_(g.nv_total()) {
    table_.resize(nv_ * (2 * nt_ - 1));
    for (std::size_t j = 0; j < nv_; ++j)
      for (int lag = -(nt_ - 1); lag <= nt_ - 1; ++lag)
        table_[j * (2 * nt_ - 1) + (lag + nt_ - 1)] =
            make_shift(g.x_axes(), displacement(g, j, lag * g.dt()));
  }
  const ShiftStencil& at(std::size_t j, int lag) const {
    return table_[j * (2 * nt_ - 1) + (lag + nt_ - 1)];
  }

 private:
  int nt_;
  std::size_t nv_;
  std::vector<ShiftStencil> table_;
};

/// Composite trapezoid weight of node m on [t_lo, t_hi] (node indices).
inline double trapezoid_weight(int m, int lo, int hi, double dt) {
  if (hi == lo || m < lo || m > hi) return 0.0;
  return (m == lo || m == hi) ? 0.5 * dt : dt;
}

inline bool row_is_zero(std::span<const double> row) {
  return std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; });
}

inline bool row_is_uniform(std::span<const double> row) {
  return std::all_of(row.begin(), row.end(), [&](double v) { return v == row.front(); });
}

/// Per-velocity-row scratch for walking characteristics backwards in time.
///
/// For the characteristic through (t_k, x_i) it tracks the attenuation
/// exp(-int_{sigma}^{t_k} Gamma dtau), accumulated by the trapezoid rule on
/// Gamma sampled along the characteristic, as sigma steps down node by node.
class AttenuationWalk {
 public:
  AttenuationWalk(const SampledModel& m, const LagStencils& st, std::size_t j)
      : m_(m), st_(st), j_(j), nx_(m.grid().nx_total()), factor_(nx_), prev_(nx_), cur_(nx_),
        scratch_(nx_) {}

  /// Starts at sigma = t_k (no attenuation yet).
  void reset(int k) {
    k_ = k;
    m_idx_ = k;
    std::fill(factor_.begin(), factor_.end(), 1.0);
    load_gamma(k, prev_, prev_uniform_);
  }

  /// Steps sigma from node m+1 to node m.
  void step_down() {
    const int m = --m_idx_;
    bool cur_uniform = false;
    load_gamma(m, cur_, cur_uniform);
    const double h = 0.5 * m_.grid().dt();
    if (prev_uniform_ && cur_uniform) {
      const double f = std::exp(-h * (prev_[0] + cur_[0]));
      for (double& v : factor_) v *= f;
    } else {
      for (std::size_t i = 0; i < nx_; ++i) factor_[i] *= std::exp(-h * (prev_[i] + cur_[i]));
    }
    std::swap(prev_, cur_);
    prev_uniform_ = cur_uniform;
  }

  std::span<const double> factor() const { return factor_; }

 private:
  void load_gamma(int m, std::vector<double>& dst, bool& uniform) {
    const auto row = m_.gamma(m).subspan(j_ * nx_, nx_);
    uniform = row_is_uniform(row);
    if (uniform) {
      std::fill(dst.begin(), dst.end(), row.front());
      return;
    }
    shift_row(row, dst, m_.grid().x_axes(), st_.at(j_, k_ - m), Extension::clamp, scratch_);
  }

  const SampledModel& m_;
  const LagStencils& st_;
  std::size_t j_;
  std::size_t nx_;
  int k_ = 0, m_idx_ = 0;
  std::vector<double> factor_, prev_, cur_, scratch_;
  bool prev_uniform_ = false;
};

inline void check_finite(const DistributionField& f, const char* what) {
  for (int k = 0; k < f.nt(); ++k)
    for (double v : f.slice(k))
      if (!std::isfinite(v))
        throw NumericalBlowupError(std::string(what) + ": non-finite value at time node " +
                                       std::to_string(k),
                                   k);
}

inline void check_finite(const std::vector<Slice>& slices, const char* what) {
  for (std::size_t k = 0; k < slices.size(); ++k)
    for (double v : slices[k])
      if (!std::isfinite(v))
        throw NumericalBlowupError(std::string(what) + ": non-finite value at time node " +
                                       std::to_string(k),
                                   static_cast<int>(k));
}

/// gain - Gamma f at every time node.
inline std::vector<Slice> collision_sources(const DistributionField& f, const SampledModel& m) {
  const PhaseSpaceGrid& g = m.grid();
  std::vector<Slice> q(g.nt());
  for (int k = 0; k < g.nt(); ++k) {
    q[k] = gain_term(f.slice(k), m.eta(k), m.gamma(k), m.p_rows(), g);
    const auto gam = m.gamma(k);
    const auto fs = f.slice(k);
    for (std::size_t n = 0; n < q[k].size(); ++n) q[k][n] -= gam[n] * fs[n];
  }
  check_finite(q, "collision term");
  return q;
}

/// out(t_k) = free_stream(f0, t_k) + sum_m W_k(m) shift(src_m, t_k - t_m), where W_k are
/// trapezoid weights on [0, t_k] (or on [0, T] when `full_horizon`).
inline DistributionField integrate_along_characteristics(const SampledModel& m,
                                                         const std::vector<Slice>& src,
                                                         bool full_horizon) {
  const PhaseSpaceGrid& g = m.grid();
  const std::size_t nx = g.nx_total(), nv = g.nv_total();
  const int nt = g.nt();
  const LagStencils st(g);
  std::vector<char> zero(static_cast<std::size_t>(nt) * nv);
  for (int k = 0; k < nt; ++k)
    for (std::size_t j = 0; j < nv; ++j)
      zero[k * nv + j] = row_is_zero(std::span<const double>(src[k]).subspan(j * nx, nx));
  DistributionField out(m.grid_ptr());
  const auto f0 = m.f0();
  parallel_for(nv, [&](std::size_t j) {
    std::vector<double> acc(nx), buf(nx), scratch(nx);
    for (int k = 0; k < nt; ++k) {
      shift_row(f0.subspan(j * nx, nx), acc, g.x_axes(), st.at(j, k), Extension::zero, scratch);
      const int hi = full_horizon ? nt - 1 : k;
      for (int mm = 0; mm <= hi; ++mm) {
        const double w = trapezoid_weight(mm, 0, hi, g.dt());
        if (w == 0.0 || zero[mm * nv + j]) continue;
        shift_row(std::span<const double>(src[mm]).subspan(j * nx, nx), buf, g.x_axes(),
                  st.at(j, k - mm), Extension::zero, scratch);
        for (std::size_t i = 0; i < nx; ++i) acc[i] += w * buf[i];
      }
      std::copy(acc.begin(), acc.end(), out.row(k, j).begin());
    }
  });
  return out;
}

}  // namespace detail

/// J(f)(t) = f0(x - t xi) + int_0^t [gain - Gamma f](sigma, x + (sigma - t) xi) dsigma,
/// with the time integral by the composite trapezoid rule on the time nodes.
inline DistributionField apply_J(const DistributionField& f, const SampledModel& m) {
  if (f.grid().slice_size() != m.grid().slice_size() || f.nt() != m.grid().nt())
    throw ArgumentError("apply_J: field and model grids differ");
  const auto q = detail::collision_sources(f, m);
  auto out = detail::integrate_along_characteristics(m, q, false);
  detail::check_finite(out, "apply_J");
  return out;
}

/// J+(f)(t) = e^{-int_0^t Gamma#} f0(x - t xi)
///            + int_0^t gain#(sigma) e^{-int_sigma^t Gamma#} dsigma,
/// evaluated along the characteristic through (t, x). Non-negative whenever f is.
inline DistributionField apply_J_plus(const DistributionField& f, const SampledModel& m) {
  const PhaseSpaceGrid& g = m.grid();
  if (f.grid().slice_size() != g.slice_size() || f.nt() != g.nt())
    throw ArgumentError("apply_J_plus: field and model grids differ");
  const std::size_t nx = g.nx_total(), nv = g.nv_total();
  const int nt = g.nt();
  std::vector<Slice> gain(nt);
  for (int k = 0; k < nt; ++k) gain[k] = gain_term(f.slice(k), m.eta(k), m.gamma(k), m.p_rows(), g);
  detail::check_finite(gain, "gain term");
  std::vector<char> zero(static_cast<std::size_t>(nt) * nv);
  for (int k = 0; k < nt; ++k)
    for (std::size_t j = 0; j < nv; ++j)
      zero[k * nv + j] = detail::row_is_zero(std::span<const double>(gain[k]).subspan(j * nx, nx));

  const detail::LagStencils st(g);
  DistributionField out(m.grid_ptr());
  const auto f0 = m.f0();
  parallel_for(nv, [&](std::size_t j) {
    detail::AttenuationWalk walk(m, st, j);
    std::vector<double> acc(nx), buf(nx), scratch(nx);
    for (int k = 0; k < nt; ++k) {
      std::fill(acc.begin(), acc.end(), 0.0);
      walk.reset(k);
      for (int mm = k; mm >= 0; --mm) {
        if (mm < k) walk.step_down();
        const double w = detail::trapezoid_weight(mm, 0, k, g.dt());
        if (w == 0.0 || zero[mm * nv + j]) continue;
        shift_row(std::span<const double>(gain[mm]).subspan(j * nx, nx), buf, g.x_axes(),
                  st.at(j, k - mm), Extension::zero, scratch);
        const auto fac = walk.factor();
        for (std::size_t i = 0; i < nx; ++i) acc[i] += w * buf[i] * fac[i];
      }
      shift_row(f0.subspan(j * nx, nx), buf, g.x_axes(), st.at(j, k), Extension::zero, scratch);
      const auto fac = walk.factor();
      auto dst = out.row(k, j);
      for (std::size_t i = 0; i < nx; ++i) dst[i] = fac[i] * buf[i] + acc[i];
    }
  });
  detail::check_finite(out, "apply_J_plus");
  return out;
}

inline DistributionField apply_mapping(Mapping mapping, const DistributionField& f,
                                       const SampledModel& m) {
  return mapping == Mapping::J ? apply_J(f, m) : apply_J_plus(f, m);
}

/// Per-iteration record of a Picard run.
struct IterationDiagnostics {
  Mapping mapping = Mapping::J_plus;
  double a = 0.0;
  double tol = 0.0;
  std::vector<double> residual_history;   // ||f_{k+1} - f_k||_a
  std::vector<double> contraction_ratios; // residual[k+1] / residual[k]
  std::vector<double> iterate_min;        // min value of each produced iterate
  std::vector<double> wall_seconds;       // per iteration; not reproducible
  int iterations = 0;
  bool converged = false;
  double theoretical_ratio = 0.0;
  double f0_mass = 0.0;
  // Both ball radii are reported; the iteration runs in the one of its mapping.
  double ball_radius_J = 0.0;      // (a/2)|f0|_1
  double ball_radius_J_plus = 0.0; // a|f0|_1
  double solution_norm = 0.0;      // ||f*||_a
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, IterationDiagnostics diag)
      : Error(what), diagnostics_(std::move(diag)) {}
  const char* kind() const noexcept override { return "non-convergence"; }
  const IterationDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  IterationDiagnostics diagnostics_;
};

struct PicardOptions {
  Mapping mapping = Mapping::J_plus;
  std::optional<double> a;  // default_rate(mapping) when unset
  double tol = 1e-10;
  int max_iter = 200;
};

struct PicardResult {
  DistributionField solution;
  IterationDiagnostics diagnostics;
};

/// Banach fixed-point iteration f_{k+1} = mapping(f_k) from the free-streamed f0,
/// stopping when ||f_{k+1} - f_k||_a < tol.
inline PicardResult picard_solve(const SampledModel& m, const PicardOptions& opt) {
  const double a = opt.a.value_or(default_rate(opt.mapping));
  if (!(a > rate_threshold(opt.mapping)))
    throw ArgumentError(std::string("picard_solve: mapping ") + to_string(opt.mapping) +
                        " needs a > " + std::to_string(rate_threshold(opt.mapping)));
  if (!(opt.tol > 0.0) || opt.max_iter < 1)
    throw ArgumentError("picard_solve: tol must be positive and max_iter >= 1");

  IterationDiagnostics diag;
  diag.mapping = opt.mapping;
  diag.a = a;
  diag.tol = opt.tol;
  diag.theoretical_ratio = contraction_bound(opt.mapping, a);
  diag.f0_mass = m.grid().l1_norm(m.f0());
  diag.ball_radius_J = make_norm_params(Mapping::J, a, diag.f0_mass).A;
  diag.ball_radius_J_plus = make_norm_params(Mapping::J_plus, a, diag.f0_mass).A;

  if (detail::row_is_zero(m.f0())) {
    diag.iterations = 1;
    diag.converged = true;
    diag.residual_history.push_back(0.0);
    diag.iterate_min.push_back(0.0);
    diag.wall_seconds.push_back(0.0);
    return {DistributionField(m.grid_ptr()), diag};
  }

  DistributionField f = free_stream_field(m.grid_ptr(), m.f0());
  for (int it = 0; it < opt.max_iter; ++it) {
    const auto start = std::chrono::steady_clock::now();
    DistributionField next = apply_mapping(opt.mapping, f, m);
    const double r = weighted_distance(next, f, a);
    diag.wall_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    diag.iterate_min.push_back(next.min_value());
    if (!diag.residual_history.empty() && diag.residual_history.back() > 0.0)
      diag.contraction_ratios.push_back(r / diag.residual_history.back());
    diag.residual_history.push_back(r);
    diag.iterations = it + 1;
    f = std::move(next);
    if (r < opt.tol) {
      diag.converged = true;
      break;
    }
  }
  diag.solution_norm = weighted_norm(f, a);
  if (!diag.converged)
    throw NonConvergenceError("picard_solve: no convergence after " +
                                  std::to_string(opt.max_iter) + " iterations",
                              diag);
  return {std::move(f), diag};
}

struct LocalContractionResult {
  double ratio = 0.0;
  double bound = 0.0;  // 2 T0
  bool within_bound = false;
};

/// max_{t<=T0} |J(f) - J(h)|_1 / max_{t<=T0} |f - h|_1, compared against 2 T0.
inline LocalContractionResult local_contraction_check(const DistributionField& f,
                                                      const DistributionField& h,
                                                      const SampledModel& m, double T0,
                                                      double tolerance = kRatioTolerance) {
  if (!(T0 >= 0.0 && T0 < 0.5)) throw ArgumentError("local_contraction_check: need 0 <= T0 < 1/2");
  const PhaseSpaceGrid& g = m.grid();
  const int last = std::min(g.nt() - 1, static_cast<int>(std::floor(T0 / g.dt() + 1e-9)));
  double denom = 0.0;
  std::vector<double> diff(g.slice_size());
  for (int k = 0; k <= last; ++k) {
    const auto a = f.slice(k), b = h.slice(k);
    for (std::size_t n = 0; n < diff.size(); ++n) diff[n] = a[n] - b[n];
    denom = std::max(denom, g.l1_norm(diff));
  }
  if (denom == 0.0) throw ArgumentError("local_contraction_check: f equals h, ratio undefined");
  const auto jf = apply_J(f, m), jh = apply_J(h, m);
  double numer = 0.0;
  for (int k = 0; k <= last; ++k) {
    const auto a = jf.slice(k), b = jh.slice(k);
    for (std::size_t n = 0; n < diff.size(); ++n) diff[n] = a[n] - b[n];
    numer = std::max(numer, g.l1_norm(diff));
  }
  LocalContractionResult r;
  r.ratio = numer / denom;
  r.bound = 2.0 * T0;
  r.within_bound = r.ratio <= r.bound + tolerance;
  return r;
}

/// Max over nodes of the mismatch in
///   f#(t) - f#(s) e^{-[F#(t)-F#(s)]} = int_s^t gain#(sigma) e^{-[F#(t)-F#(sigma)]} dsigma,
/// with F# = int Gamma#, on the characteristics that pass through the nodes at time t.
inline double duhamel_consistency(const DistributionField& f, const SampledModel& m, double s,
                                  double t) {
  const PhaseSpaceGrid& g = m.grid();
  const int ks = g.time_index(s), kt = g.time_index(t);
  if (ks > kt) throw ArgumentError("duhamel_consistency: need s <= t");
  if (ks == kt) return 0.0;
  const std::size_t nx = g.nx_total(), nv = g.nv_total();
  std::vector<Slice> gain(kt + 1);
  for (int k = ks; k <= kt; ++k) gain[k] = gain_term(f.slice(k), m.eta(k), m.gamma(k), m.p_rows(), g);
  const detail::LagStencils st(g);
  std::vector<double> worst(nv, 0.0);
  parallel_for(nv, [&](std::size_t j) {
    detail::AttenuationWalk walk(m, st, j);
    std::vector<double> acc(nx, 0.0), buf(nx), scratch(nx);
    walk.reset(kt);
    for (int mm = kt; mm >= ks; --mm) {
      if (mm < kt) walk.step_down();
      const double w = detail::trapezoid_weight(mm, ks, kt, g.dt());
      shift_row(std::span<const double>(gain[mm]).subspan(j * nx, nx), buf, g.x_axes(),
                st.at(j, kt - mm), Extension::zero, scratch);
      const auto fac = walk.factor();
      for (std::size_t i = 0; i < nx; ++i) acc[i] += w * buf[i] * fac[i];
    }
    shift_row(f.row(ks, j), buf, g.x_axes(), st.at(j, kt - ks), Extension::zero, scratch);
    const auto fac = walk.factor();
    const auto ft = f.row(kt, j);
    double wmax = 0.0;
    for (std::size_t i = 0; i < nx; ++i)
      wmax = std::max(wmax, std::abs(ft[i] - buf[i] * fac[i] - acc[i]));
    worst[j] = wmax;
  });
  return *std::max_element(worst.begin(), worst.end());
}

}  // namespace ufm
