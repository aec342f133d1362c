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

// Field snapshot formats.
//
// CSV: header `x0,..,x{d-1},v0,..,v{d-1},value`, one row per phase-space node in
// storage order (velocity-major, spatial axis 0 fastest). Numbers use the
// shortest representation that parses back to the same double.
//
// Binary: `<stem>.bin` holds the slice as raw little-endian float64 in the same
// order; `<stem>.json` describes it (shape, boxes, velocity mode, time).

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ufm/error.hpp"
#include "ufm/field.hpp"
#include "ufm/grid.hpp"

namespace ufm {

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(const std::string& s, const std::string& origin) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw ArgumentError(origin + ": cannot parse number '" + s + "'");
  return v;
}

inline std::vector<std::string> snapshot_columns(int d) {
  std::vector<std::string> c;
  for (int a = 0; a < d; ++a) c.push_back("x" + std::to_string(a));
  for (int a = 0; a < d; ++a) c.push_back("v" + std::to_string(a));
  c.push_back("value");
  return c;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ArgumentError("write failed for '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string snapshot_csv(const PhaseSpaceGrid& g, std::span<const double> slice) {
  if (slice.size() != g.slice_size()) throw ArgumentError("snapshot_csv: slice size mismatch");
  const int d = g.dim();
  std::string out;
  const auto cols = snapshot_columns(d);
  for (std::size_t c = 0; c < cols.size(); ++c) out += (c ? "," : "") + cols[c];
  out += '\n';
  const std::size_t nx = g.nx_total();
  for (std::size_t j = 0; j < g.nv_total(); ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      for (int a = 0; a < d; ++a) out += format_double(g.x_coord(i)[a]) + ',';
      for (int a = 0; a < d; ++a) out += format_double(g.v_coord(j)[a]) + ',';
      out += format_double(slice[j * nx + i]);
      out += '\n';
    }
  return out;
}

/// Reads a CSV snapshot written for grid g; coordinates must match the grid's nodes.
inline Slice parse_snapshot_csv(const std::string& text, const PhaseSpaceGrid& g,
                                const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  const int d = g.dim();
  const auto cols = snapshot_columns(d);
  std::string header;
  for (std::size_t c = 0; c < cols.size(); ++c) header += (c ? "," : "") + cols[c];
  if (!std::getline(in, line) || line != header)
    throw ArgumentError(origin + ": header must be '" + header + "'");
  Slice out(g.slice_size());
  const std::size_t nx = g.nx_total();
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (n >= out.size()) throw ArgumentError(origin + ": too many rows");
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(parse_double(cell, origin));
    if (cells.size() != cols.size()) throw ArgumentError(origin + ": wrong column count");
    const std::size_t i = n % nx, j = n / nx;
    for (int a = 0; a < d; ++a) {
      const double hx = g.x_axes()[a].spacing(), hv = g.v_axes()[a].spacing();
      if (std::abs(cells[a] - g.x_coord(i)[a]) > 1e-9 * hx ||
          std::abs(cells[d + a] - g.v_coord(j)[a]) > 1e-9 * hv)
        throw ArgumentError(origin + ": row " + std::to_string(n + 2) +
                            " does not match the grid node");
    }
    out[n++] = cells.back();
  }
  if (n != out.size()) throw ArgumentError(origin + ": expected " +
                                           std::to_string(out.size()) + " rows, got " +
                                           std::to_string(n));
  return out;
}

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xFF) << (8 * (7 - b));
    return r;
  }
}

inline nlohmann::json boxes_json(const std::vector<Axis>& axes) {
  nlohmann::json box = nlohmann::json::array(), n = nlohmann::json::array();
  for (const Axis& a : axes) {
    box.push_back({a.lo, a.hi});
    n.push_back(a.n);
  }
  return {{"box", box}, {"n", n}};
}

}  // namespace detail

inline std::string snapshot_binary(std::span<const double> slice) {
  std::string out(slice.size() * 8, '\0');
  for (std::size_t n = 0; n < slice.size(); ++n) {
    const std::uint64_t le = detail::to_little_endian(std::bit_cast<std::uint64_t>(slice[n]));
    std::memcpy(out.data() + 8 * n, &le, 8);
  }
  return out;
}

inline nlohmann::json snapshot_sidecar(const PhaseSpaceGrid& g, int time_index,
                                       const std::string& bin_name) {
  const auto xs = detail::boxes_json(g.x_axes()), vs = detail::boxes_json(g.v_axes());
  return {{"format", "ufm-field-slice"},
          {"version", 1},
          {"data", bin_name},
          {"dtype", "float64"},
          {"endianness", "little"},
          {"layout", "index = j * nx_total + i; axis 0 fastest within x and within v"},
          {"d", g.dim()},
          {"x_box", xs["box"]},
          {"nx", xs["n"]},
          {"v_box", vs["box"]},
          {"nv", vs["n"]},
          {"velocity_mode", g.mode() == VelocityMode::relativistic ? "relativistic" : "classical"},
          {"time_index", time_index},
          {"t", g.time(time_index)},
          {"count", g.slice_size()}};
}

/// Decodes the binary payload described by a sidecar.
inline Slice parse_snapshot_binary(const std::string& bytes, const nlohmann::json& sidecar,
                                   const std::string& origin) {
  if (sidecar.value("format", "") != "ufm-field-slice" || sidecar.value("dtype", "") != "float64" ||
      sidecar.value("endianness", "") != "little")
    throw ArgumentError(origin + ": unsupported sidecar");
  const std::size_t count = sidecar.at("count").get<std::size_t>();
  if (bytes.size() != 8 * count)
    throw ArgumentError(origin + ": payload has " + std::to_string(bytes.size()) +
                        " bytes, expected " + std::to_string(8 * count));
  Slice out(count);
  for (std::size_t n = 0; n < count; ++n) {
    std::uint64_t le = 0;
    std::memcpy(&le, bytes.data() + 8 * n, 8);
    out[n] = std::bit_cast<double>(detail::to_little_endian(le));
  }
  return out;
}

/// Writes `<stem>.csv`, `<stem>.bin` and `<stem>.json` into dir; returns the file names.
inline std::vector<std::string> write_snapshot(const std::filesystem::path& dir,
                                               const std::string& stem, const PhaseSpaceGrid& g,
                                               std::span<const double> slice, int time_index,
                                               bool csv, bool binary) {
  std::vector<std::string> files;
  if (csv) {
    write_text(dir / (stem + ".csv"), snapshot_csv(g, slice));
    files.push_back(stem + ".csv");
  }
  if (binary) {
    write_text(dir / (stem + ".bin"), snapshot_binary(slice));
    write_text(dir / (stem + ".json"), snapshot_sidecar(g, time_index, stem + ".bin").dump(2) + "\n");
    files.push_back(stem + ".bin");
    files.push_back(stem + ".json");
  }
  return files;
}

/// Reads a binary snapshot through its sidecar path.
inline Slice read_snapshot_binary(const std::filesystem::path& sidecar_path) {
  const auto meta = nlohmann::json::parse(read_text(sidecar_path));
  const auto bin = sidecar_path.parent_path() / meta.at("data").get<std::string>();
  return parse_snapshot_binary(read_text(bin), meta, sidecar_path.string());
}

}  // namespace ufm
