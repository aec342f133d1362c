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

// Scenario files: JSON with comments. Sections and defaults:
//
//   grid          d (1), x_box, nx, v_box, nv (required), dt (1/32), nt (129)
//   relativistic  false
//   kernels       eta, gamma, f0: scalar families; p: redistribution kernel
//                 defaults: eta constant 0.5, gamma constant 1, p constant
//                 (1/|velocity box|), f0 gaussian-bump amplitude 1 at the box
//                 center with x_width 1 and v_width 0.5
//   solver        mapping ("J_plus"), a (mapping default), tol (1e-10), max_iter (200)
//   mc            n_particles (100000), seed (20260101), dt (grid dt),
//                 checkpoints (five evenly spaced time nodes)
//   output        dir ("ufm_out"), snapshot_every (ceil(nt/10)), csv (true), binary (true)
//
// Per-axis entries (boxes, counts, centers) accept a scalar for every axis.
// Unknown keys are errors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ufm/error.hpp"
#include "ufm/grid.hpp"
#include "ufm/io.hpp"
#include "ufm/kernels.hpp"
#include "ufm/picard.hpp"

namespace ufm {

using Json = nlohmann::ordered_json;

struct GridSpec {
  int d = 1;
  std::vector<Axis> x_axes, v_axes;
  double dt = 1.0 / 32.0;
  int nt = 129;
};

struct SolverSpec {
  Mapping mapping = Mapping::J_plus;
  std::optional<double> a;
  double tol = 1e-10;
  int max_iter = 200;
};

struct McSpec {
  std::size_t n_particles = 100000;
  std::uint64_t seed = 20260101;
  std::optional<double> dt;         // grid dt when unset
  std::vector<double> checkpoints;  // five evenly spaced nodes when empty
};

struct OutputSpec {
  std::string dir = "ufm_out";
  int snapshot_every = 0;  // ceil(nt / 10) when 0
  bool csv = true;
  bool binary = true;
};

struct ScenarioConfig {
  GridSpec grid;
  bool relativistic = false;
  KernelSet kernels;
  Json kernels_json;  // resolved kernel specs, for the run record
  SolverSpec solver;
  McSpec mc;
  OutputSpec output;

  std::shared_ptr<const PhaseSpaceGrid> make_grid() const {
    return std::make_shared<const PhaseSpaceGrid>(
        grid.d, grid.x_axes, grid.v_axes, grid.dt, grid.nt,
        relativistic ? VelocityMode::relativistic : VelocityMode::classical);
  }
  int snapshot_stride() const {
    return output.snapshot_every > 0 ? output.snapshot_every : (grid.nt + 9) / 10;
  }
  double mc_dt() const { return mc.dt.value_or(grid.dt); }
  std::vector<double> mc_checkpoints() const {
    if (!mc.checkpoints.empty()) return mc.checkpoints;
    std::vector<double> out;
    for (int n = 1; n <= 5; ++n)
      out.push_back(grid.dt * static_cast<double>(std::lround(n * (grid.nt - 1) / 5.0)));
    return out;
  }
};

namespace detail {

/// 1-based line of a byte offset.
inline int line_of(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

/// Best-effort line of a JSON pointer: finds each object key in turn.
inline int line_of_pointer(const std::string& text, const std::string& pointer) {
  if (text.empty() || pointer.empty()) return 0;
  std::size_t pos = 0;
  bool found = false;
  std::stringstream ss(pointer.substr(1));
  std::string part;
  while (std::getline(ss, part, '/')) {
    if (!part.empty() && std::all_of(part.begin(), part.end(), ::isdigit)) continue;
    const std::size_t at = text.find("\"" + part + "\"", pos);
    if (at == std::string::npos) break;
    pos = at;
    found = true;
  }
  return found ? line_of(text, pos) : 0;
}

class Section {
 public:
  Section(const Json& j, std::string pointer, const std::string& text)
      : j_(j), ptr_(std::move(pointer)), text_(text) {
    if (!j_.is_object()) fail("", "must be an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const std::string field = key.empty() ? ptr_ : ptr_ + "/" + key;
    throw ConfigError((field.empty() ? "/" : field) + ": " + msg, field,
                      line_of_pointer(text_, field));
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const Json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, std::optional<double> def = std::nullopt) {
    if (!has(key)) {
      if (!def) fail(key, "is required");
      return *def;
    }
    const Json& v = j_.at(key);
    if (!v.is_number()) fail(key, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
  }
  long long integer(const std::string& key, std::optional<long long> def = std::nullopt) {
    if (!has(key)) {
      if (!def) fail(key, "is required");
      return *def;
    }
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) fail(key, "must be an integer");
    return v.get<long long>();
  }
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    if (!has(key)) return def;
    const Json& v = j_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return v.get<std::uint64_t>();
    fail(key, "must be a non-negative integer");
  }
  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) fail(key, "must be true or false");
    return j_.at(key).get<bool>();
  }
  std::string string(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    if (!j_.at(key).is_string()) fail(key, "must be a string");
    return j_.at(key).get<std::string>();
  }
  /// Per-axis numbers; a scalar applies to every axis.
  std::vector<double> per_axis(const std::string& key, int d,
                               std::optional<std::vector<double>> def = std::nullopt) {
    if (!has(key)) {
      if (!def) fail(key, "is required");
      return *def;
    }
    const Json& v = j_.at(key);
    if (v.is_number()) return std::vector<double>(d, v.get<double>());
    if (!v.is_array() || static_cast<int>(v.size()) != d)
      fail(key, "must be a number or an array of " + std::to_string(d));
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "entries must be numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<std::pair<double, double>> boxes(const std::string& key, int d) {
    if (!has(key)) fail(key, "is required");
    const Json& v = j_.at(key);
    auto pair_of = [&](const Json& e) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        fail(key, "intervals are [lo, hi] pairs");
      return std::pair{e[0].get<double>(), e[1].get<double>()};
    };
    if (v.is_array() && v.size() == 2 && v[0].is_number())
      return std::vector<std::pair<double, double>>(d, pair_of(v));
    if (!v.is_array() || static_cast<int>(v.size()) != d)
      fail(key, "must be one [lo, hi] or an array of " + std::to_string(d));
    std::vector<std::pair<double, double>> out;
    for (const auto& e : v) out.push_back(pair_of(e));
    return out;
  }
  const std::string& pointer() const { return ptr_; }
  const std::string& text() const { return text_; }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) fail(it.key(), "unknown key");
  }

 private:
  const Json& j_;
  std::string ptr_;
  const std::string& text_;
  std::set<std::string> used_;
};

inline Point to_point(const std::vector<double>& v) {
  Point p{};
  for (std::size_t a = 0; a < v.size() && a < p.size(); ++a) p[a] = v[a];
  return p;
}

inline Json point_json(const Point& p, int d) {
  Json a = Json::array();
  for (int k = 0; k < d; ++k) a.push_back(p[k]);
  return a;
}

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

inline ScalarFamily parse_scalar(Section s, int d, double default_value, const Point& x_mid,
                                 const std::filesystem::path& base, Json& resolved) {
  ScalarFamily f;
  const std::string name = s.string("family", "constant");
  try {
    f.kind = family_from_string(name);
  } catch (const ArgumentError&) {
    s.fail("family", "unknown family '" + name + "'");
  }
  resolved = Json{{"family", name}};
  switch (f.kind) {
    case FamilyKind::constant:
      f.value = s.number("value", default_value);
      resolved["value"] = f.value;
      break;
    case FamilyKind::separable_product:
    case FamilyKind::gaussian_bump: {
      const bool sp = f.kind == FamilyKind::separable_product;
      if (sp) {
        f.value = s.number("value", 1.0);
        resolved["value"] = f.value;
      } else {
        f.base = s.number("base", 0.0);
        f.amplitude = s.number("amplitude", 1.0);
        resolved["base"] = f.base;
        resolved["amplitude"] = f.amplitude;
      }
      f.time_rate = s.number("time_rate", 0.0);
      std::vector<double> xm(x_mid.begin(), x_mid.begin() + d);
      f.x_center = to_point(s.per_axis("x_center", d, xm));
      f.x_width = s.number("x_width", 1.0);
      f.v_center = to_point(s.per_axis("v_center", d, std::vector<double>(d, 0.0)));
      f.v_width = s.number("v_width", 1.0);
      resolved["time_rate"] = f.time_rate;
      resolved["x_center"] = point_json(f.x_center, d);
      resolved["x_width"] = f.x_width;
      resolved["v_center"] = point_json(f.v_center, d);
      resolved["v_width"] = f.v_width;
      break;
    }
    case FamilyKind::tabulated: {
      const std::string path = resolve_path(base, s.string("table", ""));
      if (!s.has("table")) s.fail("table", "is required for a tabulated family");
      try {
        f.table = load_table_csv(path, phase_space_columns(d));
      } catch (const ArgumentError& e) {
        s.fail("table", e.what());
      }
      resolved["table"] = path;
      break;
    }
  }
  s.reject_unknown();
  return f;
}

inline DotKernel parse_dot(Section s, const std::filesystem::path& base, Json& resolved) {
  DotKernel p;
  const std::string name = s.string("family", "constant");
  try {
    p.kind = family_from_string(name);
  } catch (const ArgumentError&) {
    s.fail("family", "unknown family '" + name + "'");
  }
  const std::string norm = s.string("normalization", "analytic");
  if (norm == "analytic")
    p.mode = NormalizationMode::analytic;
  else if (norm == "per-row-numeric")
    p.mode = NormalizationMode::per_row_numeric;
  else
    s.fail("normalization", "must be 'analytic' or 'per-row-numeric'");
  resolved = Json{{"family", name}, {"normalization", norm}};
  switch (p.kind) {
    case FamilyKind::constant:
      if (s.has("value")) p.value = s.number("value");
      resolved["value"] = p.value ? Json(*p.value) : Json("1/|velocity box|");
      break;
    case FamilyKind::separable_product:
      p.value = s.number("value", 1.0);
      p.kappa = s.number("kappa", 0.0);
      resolved["value"] = *p.value;
      resolved["kappa"] = p.kappa;
      break;
    case FamilyKind::gaussian_bump:
      p.base = s.number("base", 0.0);
      p.value = s.number("value", 1.0);
      p.center = s.number("center", 0.0);
      p.width = s.number("width", 1.0);
      if (!(p.width > 0.0)) s.fail("width", "must be positive");
      resolved["base"] = p.base;
      resolved["value"] = *p.value;
      resolved["center"] = p.center;
      resolved["width"] = p.width;
      break;
    case FamilyKind::tabulated: {
      if (!s.has("table")) s.fail("table", "is required for a tabulated kernel");
      const std::string path = resolve_path(base, s.string("table", ""));
      try {
        p.table = load_table_csv(path, {"s"});
      } catch (const ArgumentError& e) {
        s.fail("table", e.what());
      }
      resolved["table"] = path;
      break;
    }
  }
  s.reject_unknown();
  return p;
}

inline const Json& empty_object() {
  static const Json e = Json::object();
  return e;
}

}  // namespace detail

/// Applies KEY=VALUE, where KEY is a dotted path (array positions as numbers)
/// and VALUE is JSON, or a bare string when it does not parse as JSON.
inline void apply_override(Json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' must look like KEY=VALUE", assignment);
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component", key);
    parts.push_back(part);
  }
  Json* node = &root;
  for (std::size_t n = 0; n < parts.size(); ++n) {
    const bool last = n + 1 == parts.size();
    const std::string& p = parts[n];
    if (node->is_array() && std::all_of(p.begin(), p.end(), ::isdigit)) {
      const std::size_t idx = std::stoul(p);
      if (idx >= node->size())
        throw ConfigError("override '" + key + "': index " + p + " out of range", key);
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = Json::object();
      if (!node->is_object())
        throw ConfigError("override '" + key + "': '" + p + "' is not inside an object", key);
      node = &(*node)[p];
    }
    if (last) *node = value;
  }
}

/// Parses and validates a scenario. `base_dir` anchors relative table paths.
inline ScenarioConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                                   const std::filesystem::path& base_dir = ".") {
  Json root;
  try {
    root = Json::parse(text, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what(), "",
                      detail::line_of(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  if (!root.is_object()) throw ConfigError("scenario must be a JSON object", "", 1);
  for (const auto& o : overrides) apply_override(root, o);

  ScenarioConfig cfg;
  detail::Section top(root, "", text);

  {
    detail::Section g(top.has("grid") ? top.raw("grid") : detail::empty_object(), "/grid", text);
    const long long d = g.integer("d", 1);
    if (d < 1 || d > kMaxDim) g.fail("d", "must be 1, 2 or 3");
    cfg.grid.d = static_cast<int>(d);
    const auto xb = g.boxes("x_box", cfg.grid.d), vb = g.boxes("v_box", cfg.grid.d);
    const auto nx = g.per_axis("nx", cfg.grid.d), nv = g.per_axis("nv", cfg.grid.d);
    for (int a = 0; a < cfg.grid.d; ++a) {
      if (nx[a] != std::floor(nx[a]) || nx[a] < 2) g.fail("nx", "counts must be integers >= 2");
      if (nv[a] != std::floor(nv[a]) || nv[a] < 2) g.fail("nv", "counts must be integers >= 2");
      if (!(xb[a].second > xb[a].first)) g.fail("x_box", "intervals need lo < hi");
      if (!(vb[a].second > vb[a].first)) g.fail("v_box", "intervals need lo < hi");
      cfg.grid.x_axes.push_back({xb[a].first, xb[a].second, static_cast<int>(nx[a])});
      cfg.grid.v_axes.push_back({vb[a].first, vb[a].second, static_cast<int>(nv[a])});
    }
    cfg.grid.dt = g.number("dt", 1.0 / 32.0);
    if (!(cfg.grid.dt > 0.0)) g.fail("dt", "must be positive");
    const long long nt = g.integer("nt", 129);
    if (nt < 2) g.fail("nt", "must be at least 2");
    cfg.grid.nt = static_cast<int>(nt);
    g.reject_unknown();
  }
  cfg.relativistic = top.boolean("relativistic", false);

  {
    detail::Section k(top.has("kernels") ? top.raw("kernels") : detail::empty_object(), "/kernels",
                      text);
    Point mid{};
    for (int a = 0; a < cfg.grid.d; ++a)
      mid[a] = 0.5 * (cfg.grid.x_axes[a].lo + cfg.grid.x_axes[a].hi);
    const int d = cfg.grid.d;
    auto sub = [&](const char* name) {
      return detail::Section(k.has(name) ? k.raw(name) : detail::empty_object(),
                             std::string("/kernels/") + name, text);
    };
    Json r_eta, r_gamma, r_p, r_f0;
    cfg.kernels.eta = detail::parse_scalar(sub("eta"), d, 0.5, mid, base_dir, r_eta);
    cfg.kernels.gamma = detail::parse_scalar(sub("gamma"), d, 1.0, mid, base_dir, r_gamma);
    cfg.kernels.p = detail::parse_dot(sub("p"), base_dir, r_p);
    if (k.has("f0")) {
      cfg.kernels.f0 = detail::parse_scalar(sub("f0"), d, 1.0, mid, base_dir, r_f0);
    } else {
      cfg.kernels.f0 = ScalarFamily::gaussian(1.0, mid, 1.0, Point{}, 0.5);
      r_f0 = Json{{"family", "gaussian-bump"}, {"base", 0.0},        {"amplitude", 1.0},
                  {"time_rate", 0.0},          {"x_center", detail::point_json(mid, d)},
                  {"x_width", 1.0},            {"v_center", detail::point_json(Point{}, d)},
                  {"v_width", 0.5}};
    }
    if (cfg.kernels.f0.time_dependent())
      throw ConfigError("/kernels/f0/time_rate: the initial density cannot depend on time",
                        "/kernels/f0/time_rate",
                        detail::line_of_pointer(text, "/kernels/f0/time_rate"));
    cfg.kernels_json = Json{{"eta", r_eta}, {"gamma", r_gamma}, {"p", r_p}, {"f0", r_f0}};
    k.reject_unknown();
  }

  {
    detail::Section s(top.has("solver") ? top.raw("solver") : detail::empty_object(), "/solver",
                      text);
    const std::string m = s.string("mapping", "J_plus");
    try {
      cfg.solver.mapping = mapping_from_string(m);
    } catch (const ArgumentError&) {
      s.fail("mapping", "must be 'J' or 'J_plus'");
    }
    if (s.has("a")) {
      cfg.solver.a = s.number("a");
      if (!(*cfg.solver.a > rate_threshold(cfg.solver.mapping)))
        s.fail("a", "must exceed " + format_double(rate_threshold(cfg.solver.mapping)) +
                        " for mapping " + to_string(cfg.solver.mapping));
    }
    cfg.solver.tol = s.number("tol", 1e-10);
    if (!(cfg.solver.tol > 0.0)) s.fail("tol", "must be positive");
    const long long mi = s.integer("max_iter", 200);
    if (mi < 1) s.fail("max_iter", "must be at least 1");
    cfg.solver.max_iter = static_cast<int>(mi);
    s.reject_unknown();
  }

  {
    detail::Section s(top.has("mc") ? top.raw("mc") : detail::empty_object(), "/mc", text);
    const long long n = s.integer("n_particles", 100000);
    if (n < 1) s.fail("n_particles", "must be at least 1");
    cfg.mc.n_particles = static_cast<std::size_t>(n);
    cfg.mc.seed = s.unsigned_integer("seed", 20260101);
    if (s.has("dt")) {
      cfg.mc.dt = s.number("dt");
      const double ratio = cfg.grid.dt / *cfg.mc.dt;
      if (!(*cfg.mc.dt > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 0.5)
        s.fail("dt", "must divide the grid time step");
    }
    if (s.has("checkpoints")) {
      const Json& c = s.raw("checkpoints");
      if (!c.is_array() || c.empty()) s.fail("checkpoints", "must be a non-empty array of times");
      for (const auto& t : c) {
        if (!t.is_number()) s.fail("checkpoints", "entries must be numbers");
        cfg.mc.checkpoints.push_back(t.get<double>());
      }
    }
    s.reject_unknown();
  }

  {
    detail::Section s(top.has("output") ? top.raw("output") : detail::empty_object(), "/output",
                      text);
    cfg.output.dir = s.string("dir", "ufm_out");
    const long long every = s.integer("snapshot_every", 0);
    if (every < 0) s.fail("snapshot_every", "must be >= 0");
    cfg.output.snapshot_every = static_cast<int>(every);
    cfg.output.csv = s.boolean("csv", true);
    cfg.output.binary = s.boolean("binary", true);
    s.reject_unknown();
  }
  top.reject_unknown();

  try {
    (void)cfg.make_grid();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("/grid: ") + e.what(), "/grid",
                      detail::line_of_pointer(text, "/grid"));
  }
  for (double t : cfg.mc_checkpoints()) {
    const double k = t / cfg.grid.dt;
    if (t < 0.0 || std::abs(k - std::round(k)) > 1e-9 || std::round(k) > cfg.grid.nt - 1)
      throw ConfigError("/mc/checkpoints: " + format_double(t) + " is not a time node",
                        "/mc/checkpoints", detail::line_of_pointer(text, "/mc/checkpoints"));
  }
  return cfg;
}

inline ScenarioConfig load_config(const std::filesystem::path& path,
                                  const std::vector<std::string>& overrides = {}) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, overrides, path.parent_path().empty() ? "." : path.parent_path());
}

/// Fully resolved configuration (every default made explicit). The output
/// directory is left out so that runs into different directories compare equal.
inline Json config_snapshot(const ScenarioConfig& c) {
  Json grid{{"d", c.grid.d}};
  Json xb = Json::array(), vb = Json::array(), nx = Json::array(), nv = Json::array();
  for (int a = 0; a < c.grid.d; ++a) {
    xb.push_back({c.grid.x_axes[a].lo, c.grid.x_axes[a].hi});
    vb.push_back({c.grid.v_axes[a].lo, c.grid.v_axes[a].hi});
    nx.push_back(c.grid.x_axes[a].n);
    nv.push_back(c.grid.v_axes[a].n);
  }
  grid["x_box"] = xb;
  grid["nx"] = nx;
  grid["v_box"] = vb;
  grid["nv"] = nv;
  grid["dt"] = c.grid.dt;
  grid["nt"] = c.grid.nt;
  Json solver{{"mapping", to_string(c.solver.mapping)},
              {"a", c.solver.a.value_or(default_rate(c.solver.mapping))},
              {"tol", c.solver.tol},
              {"max_iter", c.solver.max_iter}};
  Json mc{{"n_particles", c.mc.n_particles},
          {"seed", c.mc.seed},
          {"dt", c.mc_dt()},
          {"checkpoints", c.mc_checkpoints()}};
  Json output{{"snapshot_every", c.snapshot_stride()}, {"csv", c.output.csv},
              {"binary", c.output.binary}};
  return Json{{"grid", grid},     {"relativistic", c.relativistic}, {"kernels", c.kernels_json},
              {"solver", solver}, {"mc", mc},                       {"output", output}};
}

}  // namespace ufm
