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
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ufm/field.hpp"
#include "ufm/kernels.hpp"
#include "ufm/parallel.hpp"

namespace ufm {

/// Counter-based generator: every draw is a hash of (seed, stream, counter), so
/// a particle's random numbers do not depend on which worker handles it.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream))) {}

  std::uint64_t at(std::uint64_t counter) const {
    return mix(key_ + counter * 0x9E3779B97F4A7C15ULL);
  }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(at(counter) >> 11) * 0x1.0p-53;
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
};

struct Particle {
  double weight = 0.0;
  Point x{};
  Point v{};
  bool alive = true;
};

/// Weighted particles standing in for f. Removed particles keep their slot.
struct ParticleEnsemble {
  std::vector<Particle> particles;
  std::uint64_t seed = 0;
  double t = 0.0;
  std::uint64_t step = 0;
  double outflow = 0.0;  // weight that left the spatial box
};

namespace detail {

// Draws per step reserved for one particle; counters never collide across steps.
inline constexpr std::uint64_t kDrawsPerStep = 1 << 16;

/// Uniform point in the dual cell of node `idx` (clipped to the axis).
inline double jitter(const Axis& ax, int idx, double u) {
  const double h = ax.spacing();
  const double lo = std::max(ax.lo, ax.node(idx) - 0.5 * h);
  const double hi = std::min(ax.hi, ax.node(idx) + 0.5 * h);
  return lo + u * (hi - lo);
}

inline std::size_t sample_cdf(std::span<const double> cdf, double u) {
  const double target = u * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  std::size_t n = static_cast<std::size_t>(it - cdf.begin());
  n = std::min(n, cdf.size() - 1);
  // Skip zero-probability cells that upper_bound can land on at the edges.
  while (n > 0 && cdf[n] == cdf[n - 1]) --n;
  return n;
}

}  // namespace detail

/// Samples positions and velocities from f0 / |f0|_1 by inverse CDF over grid
/// nodes followed by a uniform jitter inside each node's dual cell.
inline ParticleEnsemble init_ensemble(const PhaseSpaceGrid& g, std::span<const double> f0,
                                      std::size_t n_particles, std::uint64_t seed) {
  if (n_particles < 1) throw ArgumentError("init_ensemble: need at least one particle");
  if (f0.size() != g.slice_size()) throw ArgumentError("init_ensemble: slice size mismatch");
  const std::size_t nx = g.nx_total();
  const auto wx = g.x_weights(), wv = g.v_weights();
  std::vector<double> cdf(f0.size());
  double total = 0.0;
  for (std::size_t n = 0; n < f0.size(); ++n) {
    if (f0[n] < 0.0) throw ArgumentError("init_ensemble: f0 must be non-negative");
    total += wv[n / nx] * wx[n % nx] * f0[n];
    cdf[n] = total;
  }
  if (!(total > 0.0)) throw ArgumentError("init_ensemble: f0 has zero total mass");

  ParticleEnsemble ens;
  ens.seed = seed;
  ens.particles.resize(n_particles);
  const int d = g.dim();
  const double w = total / static_cast<double>(n_particles);
  parallel_for(n_particles, [&](std::size_t p) {
    const CounterRng rng(seed, p);
    const std::size_t node = detail::sample_cdf(cdf, rng.uniform(0));
    std::size_t ri = node % nx, rj = node / nx;
    Particle& q = ens.particles[p];
    q.weight = w;
    for (int a = 0; a < d; ++a) {
      const Axis &ax = g.x_axes()[a], &av = g.v_axes()[a];
      q.x[a] = detail::jitter(ax, static_cast<int>(ri % ax.n), rng.uniform(1 + a));
      q.v[a] = detail::jitter(av, static_cast<int>(rj % av.n), rng.uniform(1 + d + a));
      ri /= ax.n;
      rj /= av.n;
    }
  });
  return ens;
}

/// Velocity resampling from the same grid rows of P the deterministic solver uses.
class VelocitySampler {
 public:
  VelocitySampler(const PhaseSpaceGrid& g, std::span<const double> p_rows) : g_(g) {
    const std::size_t nv = g.nv_total();
    if (p_rows.size() != nv * nv) throw ArgumentError("VelocitySampler: P shape mismatch");
    cdf_.resize(nv * nv);
    const auto w = g.v_weights();
    for (std::size_t j = 0; j < nv; ++j) {
      double acc = 0.0;
      for (std::size_t j1 = 0; j1 < nv; ++j1) {
        acc += w[j1] * std::max(0.0, p_rows[j * nv + j1]);
        cdf_[j * nv + j1] = acc;
      }
      if (!(acc > 0.0)) throw ArgumentError("VelocitySampler: P row without mass");
    }
  }

  std::size_t nearest_node(const Point& v) const {
    std::size_t flat = 0, stride = 1;
    for (int a = 0; a < g_.dim(); ++a) {
      const Axis& av = g_.v_axes()[a];
      const int idx = std::clamp(static_cast<int>(std::lround((v[a] - av.lo) / av.spacing())), 0,
                                 av.n - 1);
      flat += static_cast<std::size_t>(idx) * stride;
      stride *= av.n;
    }
    return flat;
  }

  /// New velocity after an explosion of a fragment moving at v; consumes d+1 draws.
  Point draw(const Point& v, const CounterRng& rng, std::uint64_t counter) const {
    const std::size_t nv = g_.nv_total();
    const std::size_t row = nearest_node(v);
    std::size_t j1 = detail::sample_cdf(std::span<const double>(cdf_).subspan(row * nv, nv),
                                        rng.uniform(counter));
    Point out{};
    for (int a = 0; a < g_.dim(); ++a) {
      const Axis& av = g_.v_axes()[a];
      out[a] = detail::jitter(av, static_cast<int>(j1 % av.n), rng.uniform(counter + 1 + a));
      j1 /= av.n;
    }
    return out;
  }

 private:
  const PhaseSpaceGrid& g_;
  std::vector<double> cdf_;
};

inline constexpr double kMaxExplosionStep = 0.1;

/// One step of length dt. Explosion times are exponential with rate Gamma, which
/// is frozen at the step start time; a particle moves in straight lines between
/// explosions, leaves the ensemble when it exits the spatial box, and at each
/// explosion redraws its velocity and multiplies its weight by eta at the new velocity.
inline void step_ensemble(ParticleEnsemble& ens, const KernelSet& ks, const PhaseSpaceGrid& g,
                          const VelocitySampler& sampler, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("step_ensemble: dt must be positive");
  if (g.mode() != VelocityMode::classical)
    throw ArgumentError("step_ensemble: the particle oracle is non-relativistic only");
  const int d = g.dim();
  const std::size_t n = ens.particles.size();
  const double t0 = ens.t;
  std::vector<double> gamma(n, 0.0);
  parallel_for(n, [&](std::size_t p) {
    const Particle& q = ens.particles[p];
    if (q.alive) gamma[p] = ks.gamma(t0, q.x, q.v, d);
  });
  double gmax = 0.0;
  for (double v : gamma) {
    if (!std::isfinite(v)) throw ModelError("step_ensemble: Gamma is not finite at a particle");
    gmax = std::max(gmax, v);
  }
  if (gmax * dt > kMaxExplosionStep + 1e-12)
    throw ArgumentError("step_ensemble: max Gamma * dt = " + std::to_string(gmax * dt) +
                        " exceeds " + std::to_string(kMaxExplosionStep));

  std::vector<double> lost(n, 0.0);
  const std::uint64_t base = (ens.step + 1) * detail::kDrawsPerStep;
  std::vector<std::string> failures(n);
  parallel_for(n, [&](std::size_t p) {
    Particle& q = ens.particles[p];
    if (!q.alive) return;
    const CounterRng rng(ens.seed, p);
    std::uint64_t counter = base;
    double rate = gamma[p];
    double remaining = dt;
    for (;;) {
      double wait = std::numeric_limits<double>::infinity();
      if (rate > 0.0) wait = -std::log1p(-rng.uniform(counter++)) / rate;
      const double move = std::min(wait, remaining);
      for (int a = 0; a < d; ++a) q.x[a] += q.v[a] * move;
      if (!g.inside_x(q.x)) {
        q.alive = false;
        lost[p] = q.weight;
        q.weight = 0.0;
        return;
      }
      if (wait >= remaining) return;
      remaining -= wait;
      q.v = sampler.draw(q.v, rng, counter);
      counter += static_cast<std::uint64_t>(d) + 1;
      q.weight *= ks.eta(t0 + dt - remaining, q.x, q.v, d);
      rate = ks.gamma(t0, q.x, q.v, d);
      if (counter + d + 2 > base + detail::kDrawsPerStep) {
        failures[p] = "step_ensemble: too many explosions of one particle in a step";
        return;
      }
    }
  });
  for (const auto& msg : failures)
    if (!msg.empty()) throw ArgumentError(msg);
  for (double w : lost) ens.outflow += w;
  ens.t += dt;
  ++ens.step;
}

/// Weighted estimators with batch-means standard errors.
struct Tally {
  double t = 0.0;
  std::size_t alive = 0;
  double mass = 0.0;
  Point mean_v{};    // sum w v / sum w, per axis
  Point second_v{};  // sum w v^2 / sum w, per axis
  double mass_se = 0.0;
  Point mean_v_se{};
  Point second_v_se{};
  bool infinite_relative_error = false;
};

inline constexpr std::size_t kBatches = 10;

inline Tally tally(const ParticleEnsemble& ens, int d) {
  Tally out;
  out.t = ens.t;
  const std::size_t n = ens.particles.size();
  const std::size_t nb = std::min(kBatches, n);
  struct Acc {
    double w = 0.0;
    Point wv{}, wv2{};
  };
  std::vector<Acc> batch(std::max<std::size_t>(nb, 1));
  Acc all;
  for (std::size_t p = 0; p < n; ++p) {
    const Particle& q = ens.particles[p];
    if (!q.alive) continue;
    ++out.alive;
    Acc& b = batch[p * nb / n];
    b.w += q.weight;
    for (int a = 0; a < d; ++a) {
      b.wv[a] += q.weight * q.v[a];
      b.wv2[a] += q.weight * q.v[a] * q.v[a];
    }
  }
  for (const Acc& b : batch) {
    all.w += b.w;
    for (int a = 0; a < d; ++a) {
      all.wv[a] += b.wv[a];
      all.wv2[a] += b.wv2[a];
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  if (!(all.w > 0.0)) {
    out.infinite_relative_error = true;
    out.mass_se = inf;
    out.mean_v_se.fill(inf);
    out.second_v_se.fill(inf);
    return out;
  }
  out.mass = all.w;
  for (int a = 0; a < d; ++a) {
    out.mean_v[a] = all.wv[a] / all.w;
    out.second_v[a] = all.wv2[a] / all.w;
  }
  auto standard_error = [](const std::vector<double>& xs) {
    if (xs.size() < 2) return std::numeric_limits<double>::infinity();
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    return std::sqrt(var / static_cast<double>(xs.size()));
  };
  std::vector<double> masses;
  for (const Acc& b : batch) masses.push_back(static_cast<double>(nb) * b.w);
  out.mass_se = standard_error(masses);
  for (int a = 0; a < d; ++a) {
    std::vector<double> m1, m2;
    for (const Acc& b : batch)
      if (b.w > 0.0) {
        m1.push_back(b.wv[a] / b.w);
        m2.push_back(b.wv2[a] / b.w);
      }
    out.mean_v_se[a] = standard_error(m1);
    out.second_v_se[a] = standard_error(m2);
  }
  return out;
}

/// Particle density on grid nodes (nearest node, divided by the node's cell
/// volume), with a batch-means standard error per node.
struct HistogramTally {
  Slice density;
  Slice se;
  double l1_stat_error = 0.0;  // quadrature of se
};

inline HistogramTally histogram(const ParticleEnsemble& ens, const PhaseSpaceGrid& g) {
  const std::size_t nx = g.nx_total(), size = g.slice_size();
  const std::size_t n = ens.particles.size();
  const std::size_t nb = std::min(kBatches, std::max<std::size_t>(n, 1));
  const auto wx = g.x_weights(), wv = g.v_weights();
  std::vector<Slice> batch(nb, Slice(size, 0.0));
  auto nearest_x = [&](const Point& x) {
    std::size_t flat = 0, stride = 1;
    for (int a = 0; a < g.dim(); ++a) {
      const Axis& ax = g.x_axes()[a];
      const int idx =
          std::clamp(static_cast<int>(std::lround((x[a] - ax.lo) / ax.spacing())), 0, ax.n - 1);
      flat += static_cast<std::size_t>(idx) * stride;
      stride *= ax.n;
    }
    return flat;
  };
  for (std::size_t p = 0; p < n; ++p) {
    const Particle& q = ens.particles[p];
    if (!q.alive) continue;
    std::size_t vflat = 0, stride = 1;
    for (int a = 0; a < g.dim(); ++a) {
      const Axis& av = g.v_axes()[a];
      const int idx =
          std::clamp(static_cast<int>(std::lround((q.v[a] - av.lo) / av.spacing())), 0, av.n - 1);
      vflat += static_cast<std::size_t>(idx) * stride;
      stride *= av.n;
    }
    const std::size_t xi = nearest_x(q.x);
    batch[p * nb / n][vflat * nx + xi] += q.weight / (wx[xi] * wv[vflat]);
  }
  HistogramTally h;
  h.density.assign(size, 0.0);
  h.se.assign(size, 0.0);
  for (std::size_t c = 0; c < size; ++c) {
    double mean = 0.0;
    for (const Slice& b : batch) mean += static_cast<double>(nb) * b[c];
    mean /= static_cast<double>(nb);
    double var = 0.0;
    for (const Slice& b : batch) var += std::pow(static_cast<double>(nb) * b[c] - mean, 2);
    h.density[c] = mean;
    h.se[c] = nb > 1 ? std::sqrt(var / static_cast<double>(nb - 1) / static_cast<double>(nb))
                     : std::numeric_limits<double>::infinity();
  }
  h.l1_stat_error = g.integrate(h.se);
  return h;
}

/// Mass and velocity moments of a deterministic slice, in the units of Tally.
inline Tally field_observables(const PhaseSpaceGrid& g, std::span<const double> slice, double t) {
  Tally out;
  out.t = t;
  const std::size_t nx = g.nx_total();
  const auto wx = g.x_weights(), wv = g.v_weights();
  Point m1{}, m2{};
  for (std::size_t j = 0; j < g.nv_total(); ++j) {
    double row = 0.0;
    for (std::size_t i = 0; i < nx; ++i) row += wx[i] * slice[j * nx + i];
    row *= wv[j];
    out.mass += row;
    for (int a = 0; a < g.dim(); ++a) {
      m1[a] += row * g.v_coord(j)[a];
      m2[a] += row * g.v_coord(j)[a] * g.v_coord(j)[a];
    }
  }
  for (int a = 0; a < g.dim(); ++a) {
    out.mean_v[a] = out.mass != 0.0 ? m1[a] / out.mass : 0.0;
    out.second_v[a] = out.mass != 0.0 ? m2[a] / out.mass : 0.0;
  }
  return out;
}

struct McOptions {
  std::size_t n_particles = 100000;
  std::uint64_t seed = 20260101;
  double dt = 1.0 / 64.0;
};

/// Runs the particle oracle and tallies at each requested time (multiples of dt).
inline std::vector<Tally> simulate(const KernelSet& ks, const SampledModel& m,
                                   const McOptions& opt, const std::vector<double>& checkpoints,
                                   ParticleEnsemble* final_state = nullptr) {
  const PhaseSpaceGrid& g = m.grid();
  std::vector<std::uint64_t> steps;
  for (double t : checkpoints) {
    const double s = t / opt.dt;
    if (!(t >= 0.0) || std::abs(s - std::round(s)) > 1e-9)
      throw ArgumentError("simulate: checkpoint " + std::to_string(t) +
                          " is not a multiple of the particle step");
    steps.push_back(static_cast<std::uint64_t>(std::llround(s)));
  }
  if (!std::is_sorted(steps.begin(), steps.end()))
    throw ArgumentError("simulate: checkpoints must be increasing");
  ParticleEnsemble ens = init_ensemble(g, m.f0(), opt.n_particles, opt.seed);
  const VelocitySampler sampler(g, m.p_rows());
  std::vector<Tally> out;
  for (std::uint64_t target : steps) {
    while (ens.step < target) {
      step_ensemble(ens, ks, g, sampler, opt.dt);
      // Accumulated floating error in t would drift from the node times.
      ens.t = static_cast<double>(ens.step) * opt.dt;
    }
    out.push_back(tally(ens, g.dim()));
  }
  if (final_state) *final_state = std::move(ens);
  return out;
}

}  // namespace ufm
