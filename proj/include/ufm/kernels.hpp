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
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ufm/field.hpp"
#include "ufm/grid.hpp"

namespace ufm {

enum class FamilyKind { constant, separable_product, gaussian_bump, tabulated };
enum class NormalizationMode { analytic, per_row_numeric };

inline const char* to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::constant: return "constant";
    case FamilyKind::separable_product: return "separable-product";
    case FamilyKind::gaussian_bump: return "gaussian-bump";
    case FamilyKind::tabulated: return "tabulated";
  }
  return "?";
}

inline FamilyKind family_from_string(const std::string& s) {
  if (s == "constant") return FamilyKind::constant;
  if (s == "separable-product") return FamilyKind::separable_product;
  if (s == "gaussian-bump") return FamilyKind::gaussian_bump;
  if (s == "tabulated") return FamilyKind::tabulated;
  throw ArgumentError("unknown kernel family '" + s + "'");
}

/// Values on a tensor grid of coordinates, read from CSV.
///
/// CSV layout: one header line naming the coordinate columns followed by a
/// final `value` column; one row per tensor node in any order. Scalar fields
/// use columns x0..x{d-1}, v0..v{d-1}; the redistribution kernel uses `s`.
/// Evaluation is multilinear and clamps to the table's extent.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> axes;
  std::vector<double> values;  // axis 0 fastest

  double eval(std::span<const double> coords) const {
    const std::size_t d = axes.size();
    std::vector<int> base(d);
    std::vector<double> frac(d);
    for (std::size_t a = 0; a < d; ++a) {
      const auto& ax = axes[a];
      if (ax.size() == 1) {
        base[a] = 0;
        frac[a] = 0.0;
        continue;
      }
      const double c = std::clamp(coords[a], ax.front(), ax.back());
      auto it = std::upper_bound(ax.begin(), ax.end(), c);
      int i = static_cast<int>(it - ax.begin()) - 1;
      i = std::clamp(i, 0, static_cast<int>(ax.size()) - 2);
      base[a] = i;
      frac[a] = (c - ax[i]) / (ax[i + 1] - ax[i]);
    }
    double v = 0.0;
    for (std::size_t corner = 0; corner < (std::size_t{1} << d); ++corner) {
      double w = 1.0;
      std::size_t flat = 0, stride = 1;
      for (std::size_t a = 0; a < d; ++a) {
        const int bit = static_cast<int>((corner >> a) & 1);
        if (axes[a].size() == 1 && bit) {
          w = 0.0;
          break;
        }
        w *= bit ? frac[a] : 1.0 - frac[a];
        flat += static_cast<std::size_t>(base[a] + bit) * stride;
        stride *= axes[a].size();
      }
      if (w != 0.0) v += w * values[flat];
    }
    return v;
  }
};

inline Table parse_table_csv(std::istream& in, const std::vector<std::string>& expected_coords,
                             const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError(origin + ": empty table");
  Table t;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) {
      col.erase(std::remove_if(col.begin(), col.end(), ::isspace), col.end());
      t.columns.push_back(col);
    }
  }
  std::vector<std::string> want = expected_coords;
  want.push_back("value");
  if (t.columns != want) {
    std::string w;
    for (const auto& c : want) w += (w.empty() ? "" : ",") + c;
    throw ArgumentError(origin + ": header must be '" + w + "'");
  }
  const std::size_t nc = expected_coords.size();
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != nc + 1) throw ArgumentError(origin + ": row with wrong column count");
    rows.push_back(std::move(row));
  }
  t.axes.resize(nc);
  for (std::size_t a = 0; a < nc; ++a) {
    for (const auto& r : rows) t.axes[a].push_back(r[a]);
    std::sort(t.axes[a].begin(), t.axes[a].end());
    t.axes[a].erase(std::unique(t.axes[a].begin(), t.axes[a].end()), t.axes[a].end());
  }
  std::size_t total = 1;
  for (const auto& ax : t.axes) total *= ax.size();
  if (total != rows.size()) throw ArgumentError(origin + ": rows do not form a tensor grid");
  t.values.assign(total, std::numeric_limits<double>::quiet_NaN());
  for (const auto& r : rows) {
    std::size_t flat = 0, stride = 1;
    for (std::size_t a = 0; a < nc; ++a) {
      const auto& ax = t.axes[a];
      flat += static_cast<std::size_t>(std::lower_bound(ax.begin(), ax.end(), r[a]) - ax.begin()) *
              stride;
      stride *= ax.size();
    }
    t.values[flat] = r[nc];
  }
  return t;
}

inline std::shared_ptr<const Table> load_table_csv(const std::string& path,
                                                   const std::vector<std::string>& coords) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open table '" + path + "'");
  return std::make_shared<const Table>(parse_table_csv(in, coords, path));
}

inline std::vector<std::string> phase_space_columns(int d) {
  std::vector<std::string> c;
  for (int a = 0; a < d; ++a) c.push_back("x" + std::to_string(a));
  for (int a = 0; a < d; ++a) c.push_back("v" + std::to_string(a));
  return c;
}

/// (1 - s^2)^3 on |s| < 1, zero outside.
inline double poly_bump(double s) {
  const double q = 1.0 - s * s;
  return q > 0.0 ? q * q * q : 0.0;
}

/// Parametric scalar field over (t, x, xi); used for eta, Gamma and f0.
///
///   constant           value
///   separable-product  value * exp(-time_rate t) * prod_a bump((x_a - xc_a)/x_width)
///                                               * prod_a bump((v_a - vc_a)/v_width)
///   gaussian-bump      base + amplitude * exp(-time_rate t)
///                             * exp(-|x - xc|^2 / 2x_width^2 - |v - vc|^2 / 2v_width^2)
///   tabulated          multilinear table over (x, v), time-independent
///
/// A non-positive width drops that factor.
struct ScalarFamily {
  FamilyKind kind = FamilyKind::constant;
  double value = 0.0;
  double base = 0.0;
  double amplitude = 0.0;
  double time_rate = 0.0;
  Point x_center{};
  Point v_center{};
  double x_width = 0.0;
  double v_width = 0.0;
  std::shared_ptr<const Table> table;

  static ScalarFamily constant(double c) {
    ScalarFamily f;
    f.value = c;
    return f;
  }

  static ScalarFamily gaussian(double amplitude, Point xc, double xw, Point vc, double vw) {
    ScalarFamily f;
    f.kind = FamilyKind::gaussian_bump;
    f.amplitude = amplitude;
    f.x_center = xc;
    f.x_width = xw;
    f.v_center = vc;
    f.v_width = vw;
    return f;
  }

  bool time_dependent() const {
    return (kind == FamilyKind::separable_product || kind == FamilyKind::gaussian_bump) &&
           time_rate != 0.0;
  }

  double operator()(double t, const Point& x, const Point& v, int d) const {
    switch (kind) {
      case FamilyKind::constant:
        return value;
      case FamilyKind::separable_product: {
        double r = value * std::exp(-time_rate * t);
        for (int a = 0; a < d; ++a) {
          if (x_width > 0.0) r *= poly_bump((x[a] - x_center[a]) / x_width);
          if (v_width > 0.0) r *= poly_bump((v[a] - v_center[a]) / v_width);
        }
        return r;
      }
      case FamilyKind::gaussian_bump: {
        double e = 0.0;
        for (int a = 0; a < d; ++a) {
          if (x_width > 0.0) e += std::pow(x[a] - x_center[a], 2) / (2.0 * x_width * x_width);
          if (v_width > 0.0) e += std::pow(v[a] - v_center[a], 2) / (2.0 * v_width * v_width);
        }
        return base + amplitude * std::exp(-time_rate * t - e);
      }
      case FamilyKind::tabulated: {
        if (!table) throw ModelError("tabulated family without a table");
        std::vector<double> c(2 * d);
        for (int a = 0; a < d; ++a) {
          c[a] = x[a];
          c[d + a] = v[a];
        }
        return table->eval(c);
      }
    }
    return 0.0;
  }
};

/// Redistribution density P as a function of s = -xi . xi1.
///
///   constant           value, or 1 / |velocity box| when no value is given
///   separable-product  value * exp(kappa s)   (factorizes over velocity axes)
///   gaussian-bump      base + value * exp(-(s - center)^2 / 2 width^2)
///   tabulated          piecewise linear in s, clamped
///
/// In per-row-numeric mode each sampled row is divided by its quadrature.
struct DotKernel {
  FamilyKind kind = FamilyKind::constant;
  NormalizationMode mode = NormalizationMode::analytic;
  std::optional<double> value;
  double kappa = 0.0;
  double center = 0.0;
  double width = 1.0;
  double base = 0.0;
  std::shared_ptr<const Table> table;

  double operator()(double s, double v_volume) const {
    switch (kind) {
      case FamilyKind::constant:
        return value.value_or(1.0 / v_volume);
      case FamilyKind::separable_product:
        return value.value_or(1.0) * std::exp(kappa * s);
      case FamilyKind::gaussian_bump:
        return base + value.value_or(1.0) * std::exp(-std::pow(s - center, 2) / (2.0 * width * width));
      case FamilyKind::tabulated: {
        if (!table) throw ModelError("tabulated P without a table");
        const double c[1] = {s};
        return table->eval(c);
      }
    }
    return 0.0;
  }
};

/// Model inputs eta, Gamma, P and the initial density f0.
struct KernelSet {
  ScalarFamily eta = ScalarFamily::constant(0.5);
  ScalarFamily gamma = ScalarFamily::constant(1.0);
  DotKernel p;
  ScalarFamily f0;
};

/// Kernel samples on the nodes of a grid at one time.
struct KernelSample {
  Slice eta;
  Slice gamma;
  std::vector<double> p_rows;  // [j * nv + j1] = P(-xi_j . xi1_j1), normalized per mode
  Slice f0;
};

namespace detail {

inline std::string node_label(const PhaseSpaceGrid& g, double t, std::size_t i, std::size_t j) {
  std::ostringstream os;
  os << "t=" << t << " x=(";
  for (int a = 0; a < g.dim(); ++a) os << (a ? "," : "") << g.x_coord(i)[a];
  os << ") v=(";
  for (int a = 0; a < g.dim(); ++a) os << (a ? "," : "") << g.v_coord(j)[a];
  os << ")";
  return os.str();
}

inline Slice sample_scalar(const ScalarFamily& fam, const char* name, double t,
                           const PhaseSpaceGrid& g) {
  const std::size_t nx = g.nx_total();
  Slice out(g.slice_size());
  for (std::size_t j = 0; j < g.nv_total(); ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const double v = fam(t, g.x_coord(i), g.v_coord(j), g.dim());
      if (!std::isfinite(v))
        throw ModelError(std::string(name) + " is not finite at " + node_label(g, t, i, j));
      out[j * nx + i] = v;
    }
  return out;
}

inline double dot(const Point& a, const Point& b, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += a[k] * b[k];
  return s;
}

}  // namespace detail

/// Raw P samples, before any row normalization.
inline std::vector<double> sample_p_raw(const DotKernel& p, const PhaseSpaceGrid& g) {
  const std::size_t nv = g.nv_total();
  std::vector<double> rows(nv * nv);
  for (std::size_t j = 0; j < nv; ++j)
    for (std::size_t j1 = 0; j1 < nv; ++j1) {
      const double v = p(-detail::dot(g.v_coord(j), g.v_coord(j1), g.dim()), g.v_volume());
      if (!std::isfinite(v)) throw ModelError("P is not finite at row " + std::to_string(j));
      rows[j * nv + j1] = v;
    }
  return rows;
}

/// P rows as used by the solvers: raw in analytic mode, each row rescaled to
/// unit quadrature in per-row-numeric mode.
inline std::vector<double> sample_p_rows(const DotKernel& p, const PhaseSpaceGrid& g) {
  auto rows = sample_p_raw(p, g);
  if (p.mode == NormalizationMode::per_row_numeric) {
    const std::size_t nv = g.nv_total();
    const auto w = g.v_weights();
    for (std::size_t j = 0; j < nv; ++j) {
      double q = 0.0;
      for (std::size_t j1 = 0; j1 < nv; ++j1) q += w[j1] * rows[j * nv + j1];
      if (!(q > 0.0)) throw ModelError("P row " + std::to_string(j) + " has no positive mass");
      for (std::size_t j1 = 0; j1 < nv; ++j1) rows[j * nv + j1] /= q;
    }
  }
  return rows;
}

inline KernelSample eval_kernels(const KernelSet& ks, double t, const PhaseSpaceGrid& g) {
  if (!(t >= 0.0)) throw ArgumentError("eval_kernels: t must be non-negative");
  KernelSample s;
  s.eta = detail::sample_scalar(ks.eta, "eta", t, g);
  s.gamma = detail::sample_scalar(ks.gamma, "gamma", t, g);
  s.p_rows = sample_p_rows(ks.p, g);
  s.f0 = detail::sample_scalar(ks.f0, "f0", 0.0, g);
  return s;
}

/// All kernel samples a solver needs over the whole time grid. Time-independent
/// coefficients keep a single slice.
class SampledModel {
 public:
  SampledModel(const KernelSet& ks, std::shared_ptr<const PhaseSpaceGrid> grid)
      : grid_(std::move(grid)) {
    const PhaseSpaceGrid& g = *grid_;
    const int n_eta = ks.eta.time_dependent() ? g.nt() : 1;
    const int n_gamma = ks.gamma.time_dependent() ? g.nt() : 1;
    for (int k = 0; k < n_eta; ++k) eta_.push_back(detail::sample_scalar(ks.eta, "eta", g.time(k), g));
    for (int k = 0; k < n_gamma; ++k)
      gamma_.push_back(detail::sample_scalar(ks.gamma, "gamma", g.time(k), g));
    p_rows_ = sample_p_rows(ks.p, g);
    f0_ = detail::sample_scalar(ks.f0, "f0", 0.0, g);
  }

  /// Builds a model from explicit samples (used for synthetic inputs).
  SampledModel(std::shared_ptr<const PhaseSpaceGrid> grid, std::vector<Slice> eta,
               std::vector<Slice> gamma, std::vector<double> p_rows, Slice f0)
      : grid_(std::move(grid)), eta_(std::move(eta)), gamma_(std::move(gamma)),
        p_rows_(std::move(p_rows)), f0_(std::move(f0)) {}

  const PhaseSpaceGrid& grid() const { return *grid_; }
  const std::shared_ptr<const PhaseSpaceGrid>& grid_ptr() const { return grid_; }
  std::span<const double> eta(int k) const { return eta_[std::min<std::size_t>(k, eta_.size() - 1)]; }
  std::span<const double> gamma(int k) const {
    return gamma_[std::min<std::size_t>(k, gamma_.size() - 1)];
  }
  std::span<const double> p_rows() const { return p_rows_; }
  std::span<const double> f0() const { return f0_; }

  /// Same coefficients with a different initial density.
  SampledModel with_f0(Slice f0) const {
    SampledModel m = *this;
    m.f0_ = std::move(f0);
    return m;
  }

  bool gamma_identically_zero() const {
    for (const auto& s : gamma_)
      for (double v : s)
        if (v != 0.0) return false;
    return true;
  }

 private:
  std::shared_ptr<const PhaseSpaceGrid> grid_;
  std::vector<Slice> eta_, gamma_;
  std::vector<double> p_rows_;
  Slice f0_;
};

/// One line of an admissibility report.
struct ConditionResult {
  std::string name;
  bool passed = true;
  double worst_value = 0.0;  // the offending (or most extreme) sampled value
  std::string location;
  std::string detail;
};

struct AdmissibilityReport {
  std::vector<ConditionResult> conditions;

  bool all_passed() const {
    return std::all_of(conditions.begin(), conditions.end(),
                       [](const ConditionResult& c) { return c.passed; });
  }
  const ConditionResult& get(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return c;
    throw ArgumentError("no condition named " + name);
  }
};

inline constexpr double kRowNormalizationTolerance = 1e-9;

namespace detail {

inline ConditionResult unit_interval_check(const std::string& name, const ScalarFamily& fam,
                                           const PhaseSpaceGrid& g) {
  ConditionResult r{name, true, 0.0, "", ""};
  double worst_excess = -1.0;
  const int nts = fam.time_dependent() ? g.nt() : 1;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int k = 0; k < nts; ++k) {
    const Slice s = sample_scalar(fam, name.c_str(), g.time(k), g);
    for (std::size_t n = 0; n < s.size(); ++n) {
      lo = std::min(lo, s[n]);
      hi = std::max(hi, s[n]);
      const double excess = std::max(-s[n], s[n] - 1.0);
      if (excess > worst_excess) {
        worst_excess = excess;
        r.worst_value = s[n];
        r.location = node_label(g, g.time(k), n % g.nx_total(), n / g.nx_total());
      }
    }
  }
  r.passed = worst_excess <= 0.0;
  std::ostringstream os;
  os << "range [" << lo << ", " << hi << "] must lie in [0, 1]";
  r.detail = os.str();
  return r;
}

}  // namespace detail

/// Checks 0<=eta<=1, 0<=Gamma<=1, P>=0, unit row quadrature of P, f0>=0 with finite mass.
/// Violations are report entries, never exceptions.
inline AdmissibilityReport check_admissibility(const KernelSet& ks, const PhaseSpaceGrid& g) {
  AdmissibilityReport rep;
  rep.conditions.push_back(detail::unit_interval_check("eta_bounds", ks.eta, g));
  rep.conditions.push_back(detail::unit_interval_check("gamma_bounds", ks.gamma, g));

  const std::size_t nv = g.nv_total();
  const auto rows = sample_p_rows(ks.p, g);
  {
    ConditionResult r{"p_nonnegative", true, 0.0, "", "P must be >= 0"};
    std::size_t at = 0;
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < rows.size(); ++n)
      if (rows[n] < lo) {
        lo = rows[n];
        at = n;
      }
    r.worst_value = lo;
    r.passed = lo >= 0.0;
    r.location = "row " + std::to_string(at / nv) + " col " + std::to_string(at % nv);
    rep.conditions.push_back(r);
  }
  {
    ConditionResult r{"p_row_normalization", true, 1.0, "", ""};
    double worst = -1.0;
    std::size_t worst_row = 0;
    const auto w = g.v_weights();
    for (std::size_t j = 0; j < nv; ++j) {
      double q = 0.0;
      for (std::size_t j1 = 0; j1 < nv; ++j1) q += w[j1] * rows[j * nv + j1];
      if (std::abs(q - 1.0) > worst) {
        worst = std::abs(q - 1.0);
        worst_row = j;
        r.worst_value = q;
      }
    }
    r.passed = worst <= kRowNormalizationTolerance;
    r.location = "row " + std::to_string(worst_row);
    std::ostringstream os;
    os << "row quadrature " << r.worst_value << ", deficit " << 1.0 - r.worst_value;
    r.detail = os.str();
    rep.conditions.push_back(r);
  }
  const Slice f0 = detail::sample_scalar(ks.f0, "f0", 0.0, g);
  {
    ConditionResult r{"f0_nonnegative", true, 0.0, "", "f0 must be >= 0"};
    const auto it = std::min_element(f0.begin(), f0.end());
    const std::size_t n = static_cast<std::size_t>(it - f0.begin());
    r.worst_value = *it;
    r.passed = *it >= 0.0;
    r.location = detail::node_label(g, 0.0, n % g.nx_total(), n / g.nx_total());
    rep.conditions.push_back(r);
  }
  {
    const double mass = g.l1_norm(f0);
    ConditionResult r{"f0_finite_mass", std::isfinite(mass), mass, "", "quadrature of |f0|"};
    rep.conditions.push_back(r);
  }
  return rep;
}

struct DeltaEstimate {
  double delta = 0.0;
  bool delta_below_one = false;  // delta < 1
  double t_worst = 0.0;
  std::size_t x_worst = 0;
  std::size_t xi1_worst = 0;
};

/// delta < 1 is required with a margin so that a bound attained exactly is not
/// accepted through rounding.
inline constexpr double kDeltaMargin = 1e-9;

/// max over (t, x, xi1) of sum_xi w(xi) eta(t, x, xi) P(-xi . xi1).
inline DeltaEstimate estimate_delta(const KernelSet& ks, const PhaseSpaceGrid& g,
                                    std::span<const double> t_samples) {
  if (t_samples.empty()) throw ArgumentError("estimate_delta: no time samples");
  const std::size_t nx = g.nx_total(), nv = g.nv_total();
  const auto rows = sample_p_rows(ks.p, g);
  const auto w = g.v_weights();
  DeltaEstimate est;
  est.delta = -std::numeric_limits<double>::infinity();
  std::vector<double> acc(nv);
  for (double t : t_samples) {
    const Slice eta = detail::sample_scalar(ks.eta, "eta", t, g);
    for (std::size_t i = 0; i < nx; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j < nv; ++j) {
        const double we = w[j] * eta[j * nx + i];
        if (we == 0.0) continue;
        const double* row = rows.data() + j * nv;
        for (std::size_t j1 = 0; j1 < nv; ++j1) acc[j1] += we * row[j1];
      }
      for (std::size_t j1 = 0; j1 < nv; ++j1)
        if (acc[j1] > est.delta) {
          est.delta = acc[j1];
          est.t_worst = t;
          est.x_worst = i;
          est.xi1_worst = j1;
        }
    }
  }
  est.delta_below_one = est.delta < 1.0 - kDeltaMargin;
  return est;
}

/// delta sampled on every node of the grid's time axis.
inline DeltaEstimate estimate_delta(const KernelSet& ks, const PhaseSpaceGrid& g) {
  std::vector<double> ts;
  const int n = ks.eta.time_dependent() ? g.nt() : 1;
  for (int k = 0; k < n; ++k) ts.push_back(g.time(k));
  return estimate_delta(ks, g, ts);
}

}  // namespace ufm
