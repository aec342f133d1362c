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

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "ufm/field.hpp"
#include "ufm/grid.hpp"

namespace ufm {

/// What a row looks like beyond the spatial box.
enum class Extension {
  zero,   // mass outside the box is gone
  clamp,  // nearest boundary value (used for model coefficients)
};

/// Linear-interpolation shift along one axis: out[i] = (1-frac) in[i+offset] + frac in[i+offset+1].
struct AxisShift {
  int offset = 0;
  double frac = 0.0;
};

/// Stencil realizing out(x) = in(x - displacement) on a uniform grid.
struct ShiftStencil {
  std::array<AxisShift, kMaxDim> axis{};
};

inline ShiftStencil make_shift(const std::vector<Axis>& axes, const Point& displacement) {
  ShiftStencil s;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    const double pos = -displacement[a] / axes[a].spacing();
    double base = std::floor(pos);
    double frac = pos - base;
    // Snap rounding noise so exact node shifts stay exact.
    if (frac < 1e-13) frac = 0.0;
    if (frac > 1.0 - 1e-13) {
      frac = 0.0;
      base += 1.0;
    }
    s.axis[a] = {static_cast<int>(base), frac};
  }
  return s;
}

namespace detail {

inline double tap(std::span<const double> in, std::size_t stride, int n, int idx, std::size_t base,
                  Extension ext) {
  if (idx < 0 || idx >= n) {
    if (ext == Extension::zero) return 0.0;
    idx = idx < 0 ? 0 : n - 1;
  }
  return in[base + static_cast<std::size_t>(idx) * stride];
}

// One-axis pass over a flat row laid out with axis 0 fastest.
inline void shift_axis(std::span<const double> in, std::span<double> out,
                       const std::vector<Axis>& axes, std::size_t a, AxisShift sh, Extension ext) {
  std::size_t stride = 1;
  for (std::size_t b = 0; b < a; ++b) stride *= axes[b].n;
  const int n = axes[a].n;
  const std::size_t outer = in.size() / (stride * n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < stride; ++s) {
      const std::size_t base = o * stride * n + s;
      for (int i = 0; i < n; ++i) {
        const int idx = i + sh.offset;
        double v = (1.0 - sh.frac) * tap(in, stride, n, idx, base, ext);
        if (sh.frac != 0.0) v += sh.frac * tap(in, stride, n, idx + 1, base, ext);
        out[base + static_cast<std::size_t>(i) * stride] = v;
      }
    }
  }
}

}  // namespace detail

/// Evaluates out(x_i) = in(x_i - displacement) by multilinear interpolation.
/// `scratch` must have the row's length when the grid has more than one axis.
inline void shift_row(std::span<const double> in, std::span<double> out,
                      const std::vector<Axis>& axes, const ShiftStencil& stencil, Extension ext,
                      std::span<double> scratch = {}) {
  if (axes.size() == 1) {
    const int n = axes[0].n;
    const AxisShift sh = stencil.axis[0];
    if (ext == Extension::zero) {
      // Interior range where both taps are in bounds; edges handled by tap().
      const int lo = std::max(0, -sh.offset);
      const int hi = std::min(n, n - 1 - sh.offset);
      for (int i = 0; i < std::min(lo, n); ++i)
        out[i] = (1.0 - sh.frac) * detail::tap(in, 1, n, i + sh.offset, 0, ext) +
                 sh.frac * detail::tap(in, 1, n, i + sh.offset + 1, 0, ext);
      for (int i = lo; i < hi; ++i)
        out[i] = (1.0 - sh.frac) * in[i + sh.offset] + sh.frac * in[i + sh.offset + 1];
      for (int i = std::max(hi, lo); i < n; ++i)
        out[i] = (1.0 - sh.frac) * detail::tap(in, 1, n, i + sh.offset, 0, ext) +
                 sh.frac * detail::tap(in, 1, n, i + sh.offset + 1, 0, ext);
      return;
    }
    detail::shift_axis(in, out, axes, 0, sh, ext);
    return;
  }
  // Multilinear interpolation is the composition of per-axis linear passes.
  std::vector<double> local;
  if (scratch.size() < in.size()) {
    local.resize(in.size());
    scratch = local;
  }
  std::span<const double> src = in;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    const bool to_out = (axes.size() - a) % 2 == 1;
    std::span<double> dst = to_out ? out : scratch.subspan(0, in.size());
    detail::shift_axis(src, dst, axes, a, stencil.axis[a], ext);
    src = dst;
  }
}

/// Multilinear interpolation of one velocity row at an arbitrary spatial point.
inline double interpolate_row(std::span<const double> row, const std::vector<Axis>& axes,
                              const Point& x, Extension ext) {
  const std::size_t d = axes.size();
  std::array<int, kMaxDim> base{};
  std::array<double, kMaxDim> frac{};
  for (std::size_t a = 0; a < d; ++a) {
    const double pos = (x[a] - axes[a].lo) / axes[a].spacing();
    const double fl = std::floor(pos);
    base[a] = static_cast<int>(fl);
    frac[a] = pos - fl;
  }
  double value = 0.0;
  for (int corner = 0; corner < (1 << d); ++corner) {
    double w = 1.0;
    std::size_t flat = 0, stride = 1;
    bool outside = false;
    for (std::size_t a = 0; a < d; ++a) {
      const int bit = (corner >> a) & 1;
      w *= bit ? frac[a] : 1.0 - frac[a];
      int idx = base[a] + bit;
      if (idx < 0 || idx >= axes[a].n) {
        if (ext == Extension::zero) outside = true;
        idx = std::clamp(idx, 0, axes[a].n - 1);
      }
      flat += static_cast<std::size_t>(idx) * stride;
      stride *= axes[a].n;
    }
    if (w == 0.0 || outside) continue;
    value += w * row[flat];
  }
  return value;
}

/// Displacement travelled at velocity node j over a time span.
inline Point displacement(const PhaseSpaceGrid& grid, std::size_t j, double span) {
  Point disp{};
  for (int a = 0; a < grid.dim(); ++a) disp[a] = span * grid.advection(j)[a];
  return disp;
}

/// f0(x - t xi, xi) on the grid, with zero extension outside the spatial box.
inline Slice free_stream(const PhaseSpaceGrid& grid, std::span<const double> f0, double t) {
  if (f0.size() != grid.slice_size()) throw ArgumentError("free_stream: slice size mismatch");
  if (!std::isfinite(t)) throw ArgumentError("free_stream: time must be finite");
  Slice out(f0.size());
  const std::size_t nx = grid.nx_total();
  std::vector<double> scratch(nx);
  for (std::size_t j = 0; j < grid.nv_total(); ++j) {
    const auto stencil = make_shift(grid.x_axes(), displacement(grid, j, t));
    shift_row(f0.subspan(j * nx, nx), std::span(out).subspan(j * nx, nx), grid.x_axes(), stencil,
              Extension::zero, scratch);
  }
  return out;
}

/// Field whose slice k is free_stream(f0, t_k).
inline DistributionField free_stream_field(std::shared_ptr<const PhaseSpaceGrid> grid,
                                           std::span<const double> f0) {
  DistributionField out(grid);
  for (int k = 0; k < grid->nt(); ++k) {
    const Slice s = free_stream(*grid, f0, grid->time(k));
    std::copy(s.begin(), s.end(), out.slice(k).begin());
  }
  return out;
}

/// h#(t, x, xi_j) = h(t, x + t xi_j, xi_j). Linear in t between time nodes.
inline double restrict_to_characteristics(const DistributionField& h, double t, const Point& x,
                                          std::size_t j) {
  const PhaseSpaceGrid& grid = h.grid();
  if (!(t >= 0.0) || t > grid.t_final() * (1.0 + 1e-12))
    throw ArgumentError("restrict_to_characteristics: t outside the time grid");
  if (j >= grid.nv_total()) throw ArgumentError("restrict_to_characteristics: bad velocity node");
  Point at = x;
  for (int a = 0; a < grid.dim(); ++a) at[a] += t * grid.advection(j)[a];
  const double pos = std::min(t / grid.dt(), static_cast<double>(grid.nt() - 1));
  const int k0 = std::min(static_cast<int>(std::floor(pos)), grid.nt() - 2);
  const double w = pos - k0;
  const double v0 = interpolate_row(h.row(k0, j), grid.x_axes(), at, Extension::zero);
  if (w == 0.0) return v0;
  const double v1 = interpolate_row(h.row(k0 + 1, j), grid.x_axes(), at, Extension::zero);
  return (1.0 - w) * v0 + w * v1;
}

}  // namespace ufm
