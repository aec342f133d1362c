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


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "test_support.hpp"
#include "ufm/io.hpp"

namespace ufm {
namespace {

using testing::grid_1d;

TEST(FormatDouble, RoundTripsExactly) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int n = 0; n < 1000; ++n) {
    const double v = u(rng) * std::pow(10.0, n % 40 - 20);
    EXPECT_EQ(parse_double(format_double(v), "t"), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(parse_double(format_double(std::numeric_limits<double>::denorm_min()), "t"),
            std::numeric_limits<double>::denorm_min());
}

TEST(ParseDouble, RejectsTrailingGarbage) {
  EXPECT_THROW(parse_double("1.5x", "t"), ArgumentError);
  EXPECT_THROW(parse_double("", "t"), ArgumentError);
}

Slice random_slice(const PhaseSpaceGrid& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Slice s(g.slice_size());
  for (double& v : s) v = u(rng) / 3.0;
  return s;
}

TEST(SnapshotCsv, RoundTripIsBitExact) {
  auto g = grid_1d(-1, 1, 7, -2, 2, 5, 0.1, 3);
  const Slice s = random_slice(*g, 1);
  const std::string text = snapshot_csv(*g, s);
  EXPECT_EQ(text.substr(0, text.find('\n')), "x0,v0,value");
  EXPECT_EQ(parse_snapshot_csv(text, *g, "t"), s);
}

TEST(SnapshotCsv, TwoDimensionalHeaderAndRoundTrip) {
  auto g = std::make_shared<const PhaseSpaceGrid>(2, std::vector<Axis>{{-1, 1, 3}, {0, 1, 4}},
                                                  std::vector<Axis>{{-1, 1, 3}, {-1, 1, 2}}, 0.1, 2);
  const Slice s = random_slice(*g, 2);
  const std::string text = snapshot_csv(*g, s);
  EXPECT_EQ(text.substr(0, text.find('\n')), "x0,x1,v0,v1,value");
  EXPECT_EQ(parse_snapshot_csv(text, *g, "t"), s);
}

TEST(SnapshotCsv, RejectsMalformedInput) {
  auto g = grid_1d(-1, 1, 3, -1, 1, 3, 0.1, 2);
  const std::string good = snapshot_csv(*g, random_slice(*g, 3));
  EXPECT_THROW(parse_snapshot_csv("x,v,value\n" + good.substr(good.find('\n') + 1), *g, "t"),
               ArgumentError);
  // Drop the last row.
  const std::string short_text = good.substr(0, good.rfind('\n', good.size() - 2) + 1);
  EXPECT_THROW(parse_snapshot_csv(short_text, *g, "t"), ArgumentError);
  EXPECT_THROW(parse_snapshot_csv(good + "0,0,0\n", *g, "t"), ArgumentError);
  // A coordinate that is not a grid node.
  std::string moved = good;
  moved.replace(moved.find('\n') + 1, 2, "-2");
  EXPECT_THROW(parse_snapshot_csv(moved, *g, "t"), ArgumentError);
  // Slice of the wrong size.
  EXPECT_THROW(snapshot_csv(*g, Slice(4)), ArgumentError);
}

TEST(SnapshotBinary, LittleEndianLayout) {
  const std::string bytes = snapshot_binary(Slice{1.0});
  ASSERT_EQ(bytes.size(), 8u);
  // 1.0 = 0x3FF0000000000000
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0x3F);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 0xF0);
  for (int b = 0; b < 6; ++b) EXPECT_EQ(bytes[b], 0);
}

TEST(SnapshotBinary, WriteAndReadBack) {
  auto g = grid_1d(-1, 1, 9, -1, 1, 4, 0.25, 5);
  const Slice s = random_slice(*g, 4);
  const auto dir = std::filesystem::temp_directory_path() / "ufm_io_test";
  std::filesystem::create_directories(dir);
  const auto files = write_snapshot(dir, "f_00003", *g, s, 3, true, true);
  EXPECT_EQ(files, (std::vector<std::string>{"f_00003.csv", "f_00003.bin", "f_00003.json"}));
  EXPECT_EQ(read_snapshot_binary(dir / "f_00003.json"), s);
  EXPECT_EQ(parse_snapshot_csv(read_text(dir / "f_00003.csv"), *g, "t"), s);
  const auto meta = nlohmann::json::parse(read_text(dir / "f_00003.json"));
  EXPECT_EQ(meta["time_index"], 3);
  EXPECT_DOUBLE_EQ(meta["t"].get<double>(), 0.75);
  EXPECT_EQ(meta["count"], 36);
  EXPECT_EQ(meta["velocity_mode"], "classical");
  std::filesystem::remove_all(dir);
}

TEST(SnapshotBinary, RejectsTruncatedPayload) {
  auto g = grid_1d(-1, 1, 3, -1, 1, 3, 0.1, 2);
  const auto meta = snapshot_sidecar(*g, 0, "x.bin");
  EXPECT_THROW(parse_snapshot_binary(std::string(71, '\0'), meta, "t"), ArgumentError);
  auto bad = meta;
  bad["dtype"] = "float32";
  EXPECT_THROW(parse_snapshot_binary(std::string(72, '\0'), bad, "t"), ArgumentError);
}

}  // namespace
}  // namespace ufm
