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
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ufm/error.hpp"

namespace ufm {

inline constexpr int kMaxDim = 3;
using Point = std::array<double, kMaxDim>;

/// Uniform closed interval [lo, hi] sampled at n nodes.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  int n = 2;

  double spacing() const { return (hi - lo) / (n - 1); }
  double node(int i) const { return i == n - 1 ? hi : lo + i * spacing(); }
  double length() const { return hi - lo; }
};

enum class VelocityMode { classical, relativistic };

/// p / sqrt(1 + |p|^2), applied to the first `d` components.
inline Point relativistic_velocity_map(const Point& p, int d) {
  double norm2 = 0.0;
  for (int a = 0; a < d; ++a) norm2 += p[a] * p[a];
  const double scale = 1.0 / std::sqrt(1.0 + norm2);
  Point xi{};
  for (int a = 0; a < d; ++a) xi[a] = p[a] * scale;
  return xi;
}

/// Trapezoid weights on one axis.
inline std::vector<double> trapezoid_weights(const Axis& axis) {
  std::vector<double> w(axis.n, axis.spacing());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

/// Tensor-product trapezoid weights over a flat index with axis 0 fastest.
inline std::vector<double> tensor_weights(std::span<const Axis> axes) {
  std::vector<double> w{1.0};
  for (const Axis& axis : axes) {
    const auto w1 = trapezoid_weights(axis);
    std::vector<double> next(w.size() * w1.size());
    for (std::size_t b = 0; b < w1.size(); ++b)
      for (std::size_t a = 0; a < w.size(); ++a) next[b * w.size() + a] = w[a] * w1[b];
    w = std::move(next);
  }
  return w;
}

/// Weighted sum of `values` with `weights`.
inline double quadrature(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size())
    throw ArgumentError("quadrature: values and weights differ in length (" +
                        std::to_string(values.size()) + " vs " +
                        std::to_string(weights.size()) + ")");
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) sum += values[i] * weights[i];
  return sum;
}

/// Truncated uniform grid over time x space x velocity.
///
/// Spatial and velocity nodes use a flat index with axis 0 fastest. A field
/// slice at one time node is stored velocity-major: slice[j * nx_total + i]
/// holds the value at spatial node i and velocity node j, so every velocity
/// row is contiguous in x.
///
/// In relativistic mode the velocity coordinate is the momentum p and the
/// advection speed is p / sqrt(1 + |p|^2).
class PhaseSpaceGrid {
 public:
  PhaseSpaceGrid(int d, std::vector<Axis> x_axes, std::vector<Axis> v_axes, double dt,
                 int nt, VelocityMode mode = VelocityMode::classical)
      : d_(d), x_axes_(std::move(x_axes)), v_axes_(std::move(v_axes)), dt_(dt), nt_(nt),
        mode_(mode) {
    if (d_ < 1 || d_ > kMaxDim) throw ArgumentError("grid: dimension must be 1, 2 or 3");
    if (static_cast<int>(x_axes_.size()) != d_ || static_cast<int>(v_axes_.size()) != d_)
      throw ArgumentError("grid: need exactly d spatial and d velocity axes");
    for (const auto* axes : {&x_axes_, &v_axes_})
      for (const Axis& a : *axes) {
        if (a.n < 2) throw ArgumentError("grid: every axis needs at least 2 nodes");
        if (!(a.hi > a.lo) || !std::isfinite(a.lo) || !std::isfinite(a.hi))
          throw ArgumentError("grid: every box interval must have positive length");
      }
    if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw ArgumentError("grid: dt must be positive");
    if (nt_ < 2) throw ArgumentError("grid: nt must be at least 2");

    x_weights_ = tensor_weights(x_axes_);
    v_weights_ = tensor_weights(v_axes_);
    nx_ = x_weights_.size();
    nv_ = v_weights_.size();
    x_coords_ = flat_coords(x_axes_);
    v_coords_ = flat_coords(v_axes_);
    advection_.resize(nv_);
    for (std::size_t j = 0; j < nv_; ++j)
      advection_[j] = mode_ == VelocityMode::relativistic
                          ? relativistic_velocity_map(v_coords_[j], d_)
                          : v_coords_[j];
  }

  int dim() const { return d_; }
  const std::vector<Axis>& x_axes() const { return x_axes_; }
  const std::vector<Axis>& v_axes() const { return v_axes_; }
  double dt() const { return dt_; }
  int nt() const { return nt_; }
  VelocityMode mode() const { return mode_; }
  double time(int k) const { return k * dt_; }
  double t_final() const { return (nt_ - 1) * dt_; }

  std::size_t nx_total() const { return nx_; }
  std::size_t nv_total() const { return nv_; }
  std::size_t slice_size() const { return nx_ * nv_; }

  std::span<const double> x_weights() const { return x_weights_; }
  std::span<const double> v_weights() const { return v_weights_; }
  const Point& x_coord(std::size_t i) const { return x_coords_[i]; }
  /// Velocity-box coordinate (momentum in relativistic mode).
  const Point& v_coord(std::size_t j) const { return v_coords_[j]; }
  /// Speed at which mass at velocity node j is transported in x.
  const Point& advection(std::size_t j) const { return advection_[j]; }

  double x_volume() const { return volume(x_axes_); }
  double v_volume() const { return volume(v_axes_); }

  /// Returns the time node index of t, or throws if t is not (close to) a node.
  int time_index(double t) const {
    const double k = t / dt_;
    const double kr = std::round(k);
    if (!(t >= -1e-12) || kr > nt_ - 1 || std::abs(k - kr) > 1e-9)
      throw ArgumentError("time " + std::to_string(t) + " is not a node of the time grid");
    return static_cast<int>(kr);
  }

  /// L1 norm of a slice by tensor trapezoid quadrature.
  double l1_norm(std::span<const double> slice) const {
    double sum = 0.0;
    for (std::size_t j = 0; j < nv_; ++j) {
      double row = 0.0;
      for (std::size_t i = 0; i < nx_; ++i) row += x_weights_[i] * std::abs(slice[j * nx_ + i]);
      sum += v_weights_[j] * row;
    }
    return sum;
  }

  /// Quadrature of a slice over (x, xi) without taking absolute values.
  double integrate(std::span<const double> slice) const {
    double sum = 0.0;
    for (std::size_t j = 0; j < nv_; ++j) {
      double row = 0.0;
      for (std::size_t i = 0; i < nx_; ++i) row += x_weights_[i] * slice[j * nx_ + i];
      sum += v_weights_[j] * row;
    }
    return sum;
  }

  bool inside_x(const Point& x) const {
    for (int a = 0; a < d_; ++a)
      if (x[a] < x_axes_[a].lo || x[a] > x_axes_[a].hi) return false;
    return true;
  }

 private:
  static double volume(const std::vector<Axis>& axes) {
    double v = 1.0;
    for (const Axis& a : axes) v *= a.length();
    return v;
  }

  std::vector<Point> flat_coords(const std::vector<Axis>& axes) const {
    std::size_t total = 1;
    for (const Axis& a : axes) total *= a.n;
    std::vector<Point> coords(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      for (int a = 0; a < d_; ++a) {
        coords[flat][a] = axes[a].node(static_cast<int>(rem % axes[a].n));
        rem /= axes[a].n;
      }
    }
    return coords;
  }

  int d_;
  std::vector<Axis> x_axes_, v_axes_;
  double dt_;
  int nt_;
  VelocityMode mode_;
  std::size_t nx_ = 0, nv_ = 0;
  std::vector<double> x_weights_, v_weights_;
  std::vector<Point> x_coords_, v_coords_, advection_;
};

}  // namespace ufm
