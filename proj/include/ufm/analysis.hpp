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
#include <cmath>
#include <limits>
#include <vector>

#include "ufm/field.hpp"
#include "ufm/kernels.hpp"
#include "ufm/picard.hpp"

namespace ufm {

/// Mass M(t), Gamma-weighted mass and the slacks of the two mass inequalities.
///
/// ineq01_slack[k] = -( [M(t_{k+1}) - M(t_k)]/dt + (1-delta) * avg(Gf over [t_k, t_{k+1}]) )
/// ineq02_slack[k] = M(0) + (delta-1) * int_0^{t_k} Gf - M(t_k)
/// Each inequality holds when its slack is >= -eps.
struct MassTrace {
  std::vector<double> times;
  std::vector<double> mass;
  std::vector<double> gamma_weighted_mass;
  std::vector<double> ineq01_slack;  // one per interval (nt - 1 entries)
  std::vector<double> ineq02_slack;  // one per node
  double delta = 0.0;
  double eps = 0.0;

  bool ineq01_holds() const {
    return std::all_of(ineq01_slack.begin(), ineq01_slack.end(),
                       [&](double s) { return s >= -eps; });
  }
  bool ineq02_holds() const {
    return std::all_of(ineq02_slack.begin(), ineq02_slack.end(),
                       [&](double s) { return s >= -eps; });
  }
};

inline MassTrace mass_trace(const DistributionField& f, const SampledModel& m, double delta,
                            double eps) {
  const PhaseSpaceGrid& g = m.grid();
  if (f.min_value() < -eps)
    throw ValidityError("mass_trace: field has values below -eps (min " +
                        std::to_string(f.min_value()) + ")");
  MassTrace tr;
  tr.delta = delta;
  tr.eps = eps;
  Slice gf(g.slice_size());
  for (int k = 0; k < g.nt(); ++k) {
    tr.times.push_back(g.time(k));
    tr.mass.push_back(g.integrate(f.slice(k)));
    const auto gam = m.gamma(k);
    const auto fs = f.slice(k);
    for (std::size_t n = 0; n < gf.size(); ++n) gf[n] = gam[n] * fs[n];
    tr.gamma_weighted_mass.push_back(g.integrate(gf));
  }
  const double dt = g.dt();
  double cum = 0.0;
  for (int k = 0; k < g.nt(); ++k) {
    if (k > 0) cum += 0.5 * dt * (tr.gamma_weighted_mass[k - 1] + tr.gamma_weighted_mass[k]);
    tr.ineq02_slack.push_back(tr.mass[0] + (delta - 1.0) * cum - tr.mass[k]);
    if (k + 1 < g.nt()) {
      const double dm = (tr.mass[k + 1] - tr.mass[k]) / dt;
      const double sink = 0.5 * (tr.gamma_weighted_mass[k] + tr.gamma_weighted_mass[k + 1]);
      tr.ineq01_slack.push_back(-(dm + (1.0 - delta) * sink));
    }
  }
  return tr;
}

/// Free-streaming limit with the infinite time integrals truncated at T_final.
struct FreeMotionLimit {
  DistributionField field;
  /// Estimate of the discarded tail (1+delta) Gf(T) / ((1-delta) min positive Gamma).
  double tail_allowance = 0.0;
};

inline FreeMotionLimit free_motion_limit(const DistributionField& f, const SampledModel& m,
                                         double delta) {
  const PhaseSpaceGrid& g = m.grid();
  const auto q = detail::collision_sources(f, m);
  FreeMotionLimit out{detail::integrate_along_characteristics(m, q, true), 0.0};

  const int last = g.nt() - 1;
  Slice gf(g.slice_size());
  const auto gam = m.gamma(last);
  const auto fs = f.slice(last);
  for (std::size_t n = 0; n < gf.size(); ++n) gf[n] = gam[n] * fs[n];
  const double gf_end = g.integrate(gf);
  double min_pos = std::numeric_limits<double>::infinity();
  for (int k = 0; k < g.nt(); ++k)
    for (double v : m.gamma(k))
      if (v > 0.0) min_pos = std::min(min_pos, v);
  if (gf_end == 0.0 || !std::isfinite(min_pos))
    out.tail_allowance = 0.0;
  else if (delta >= 1.0)
    out.tail_allowance = std::numeric_limits<double>::infinity();
  else
    out.tail_allowance = (1.0 + delta) * gf_end / ((1.0 - delta) * min_pos);
  return out;
}

struct AsymptoticBound {
  double t = 0.0;
  double lhs = 0.0;  // |f(t) - f_inf(t)|_1
  double rhs = 0.0;  // (1+delta) int_t^T Gf + tail
  bool holds = false;
};

/// L1 distance to the free-motion limit against its bound at node t.
inline AsymptoticBound asymptotic_bound_check(const DistributionField& f,
                                              const FreeMotionLimit& limit, const MassTrace& trace,
                                              double t) {
  const PhaseSpaceGrid& g = f.grid();
  const int k = g.time_index(t);
  AsymptoticBound b;
  b.t = g.time(k);
  Slice diff(g.slice_size());
  const auto a = f.slice(k), c = limit.field.slice(k);
  for (std::size_t n = 0; n < diff.size(); ++n) diff[n] = a[n] - c[n];
  b.lhs = g.l1_norm(diff);
  double tail_int = 0.0;
  for (int mm = k; mm < g.nt() - 1; ++mm)
    tail_int +=
        0.5 * g.dt() * (trace.gamma_weighted_mass[mm] + trace.gamma_weighted_mass[mm + 1]);
  b.rhs = (1.0 + trace.delta) * tail_int + limit.tail_allowance;
  b.holds = b.lhs <= b.rhs + trace.eps;
  return b;
}

/// Whether a sequence is non-increasing up to eps.
inline bool non_increasing(const std::vector<double>& v, double eps) {
  for (std::size_t n = 1; n < v.size(); ++n)
    if (v[n] > v[n - 1] + eps) return false;
  return true;
}

/// Smooth compactly supported test function phi(t, x, xi) built from (1 - s^2)^3 bumps.
struct BumpTestFunction {
  double t_center = 0.0;
  double t_radius = 1.0;
  Point x_center{};
  double x_radius = 1.0;
  Point v_center{};
  double v_radius = 1.0;

  static double bump(double s) { return poly_bump(s); }
  static double bump_prime(double s) {
    const double q = 1.0 - s * s;
    return q > 0.0 ? -6.0 * s * q * q : 0.0;
  }

  double value(double t, const Point& x, const Point& v, int d) const {
    double r = bump((t - t_center) / t_radius);
    for (int a = 0; a < d && r != 0.0; ++a)
      r *= bump((x[a] - x_center[a]) / x_radius) * bump((v[a] - v_center[a]) / v_radius);
    return r;
  }

  /// d/dt phi + c . grad_x phi.
  double transport_derivative(double t, const Point& x, const Point& v, const Point& c,
                              int d) const {
    const double st = (t - t_center) / t_radius;
    double space = 1.0;
    std::array<double, kMaxDim> bx{}, dbx{};
    for (int a = 0; a < d; ++a) {
      const double s = (x[a] - x_center[a]) / x_radius;
      bx[a] = bump(s);
      dbx[a] = bump_prime(s) / x_radius;
      space *= bx[a] * bump((v[a] - v_center[a]) / v_radius);
    }
    double result = bump_prime(st) / t_radius * space;
    const double bt = bump(st);
    if (bt == 0.0) return result;
    for (int a = 0; a < d; ++a) {
      double prod = bt * dbx[a];
      for (int b = 0; b < d; ++b) {
        if (b != a) prod *= bx[b];
        prod *= bump((v[b] - v_center[b]) / v_radius);
      }
      result += c[a] * prod;
    }
    return result;
  }
};

/// The three test functions shipped with the weak-form check: centered in the box,
/// at small, medium and large support.
inline std::vector<BumpTestFunction> shipped_test_functions(const PhaseSpaceGrid& g) {
  const double T = g.t_final();
  const std::array<double, 3> t_center{0.0, 0.3 * T, 0.25 * T};
  const std::array<double, 3> t_radius{0.3 * T, 0.25 * T, 0.6 * T};
  const std::array<double, 3> x_frac{0.25, 0.45, 0.7};
  const std::array<double, 3> v_frac{0.5, 0.7, 0.9};
  std::vector<BumpTestFunction> out;
  for (int n = 0; n < 3; ++n) {
    BumpTestFunction phi;
    phi.t_center = t_center[n];
    phi.t_radius = t_radius[n];
    double xr = std::numeric_limits<double>::infinity(), vr = xr;
    for (int a = 0; a < g.dim(); ++a) {
      const Axis &ax = g.x_axes()[a], &av = g.v_axes()[a];
      phi.x_center[a] = 0.5 * (ax.lo + ax.hi);
      phi.v_center[a] = 0.5 * (av.lo + av.hi);
      xr = std::min(xr, 0.5 * ax.length());
      vr = std::min(vr, 0.5 * av.length());
    }
    phi.x_radius = x_frac[n] * xr;
    phi.v_radius = v_frac[n] * vr;
    out.push_back(phi);
  }
  return out;
}

/// |int f (phi_t + xi . grad_x phi) + int Q[f] phi + int f0 phi(0)| by quadrature,
/// with Q[f] = gain - Gamma f. Vanishes (to quadrature error) for solutions.
inline double weak_residual(const DistributionField& f, const SampledModel& m,
                            const BumpTestFunction& phi) {
  const PhaseSpaceGrid& g = m.grid();
  const int d = g.dim();
  for (int a = 0; a < d; ++a) {
    const Axis &ax = g.x_axes()[a], &av = g.v_axes()[a];
    if (phi.x_center[a] - phi.x_radius <= ax.lo || phi.x_center[a] + phi.x_radius >= ax.hi ||
        phi.v_center[a] - phi.v_radius <= av.lo || phi.v_center[a] + phi.v_radius >= av.hi)
      throw ArgumentError("weak_residual: test function support touches the phase-space boundary");
  }
  if (!(phi.t_radius > 0.0) || phi.t_center + phi.t_radius >= g.t_final())
    throw ArgumentError("weak_residual: test function support reaches the final time");
  if (!(phi.x_radius > 0.0) || !(phi.v_radius > 0.0))
    throw ArgumentError("weak_residual: radii must be positive");

  const auto q = detail::collision_sources(f, m);
  const std::size_t nx = g.nx_total(), nv = g.nv_total();
  const auto wx = g.x_weights(), wv = g.v_weights();
  double total = 0.0;
  for (int k = 0; k < g.nt(); ++k) {
    const double wt = (k == 0 || k == g.nt() - 1) ? 0.5 * g.dt() : g.dt();
    const double t = g.time(k);
    if (std::abs(t - phi.t_center) >= phi.t_radius) continue;
    const auto fs = f.slice(k);
    double slice_sum = 0.0;
    for (std::size_t j = 0; j < nv; ++j) {
      double row = 0.0;
      for (std::size_t i = 0; i < nx; ++i) {
        const std::size_t n = j * nx + i;
        const Point& x = g.x_coord(i);
        const Point& v = g.v_coord(j);
        row += wx[i] * (fs[n] * phi.transport_derivative(t, x, v, g.advection(j), d) +
                        q[k][n] * phi.value(t, x, v, d));
      }
      slice_sum += wv[j] * row;
    }
    total += wt * slice_sum;
  }
  const auto f0 = m.f0();
  double initial = 0.0;
  for (std::size_t j = 0; j < nv; ++j)
    for (std::size_t i = 0; i < nx; ++i)
      initial += wv[j] * wx[i] * f0[j * nx + i] * phi.value(0.0, g.x_coord(i), g.v_coord(j), d);
  return std::abs(total + initial);
}

}  // namespace ufm
