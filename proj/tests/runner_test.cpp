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

#include <filesystem>
#include <sstream>

#include "ufm/runner.hpp"
#include "ufm/transport.hpp"

namespace ufm {
namespace {

namespace fs = std::filesystem;

// Small enough for a unit test: 33 x 9 nodes, 17 time nodes.
const std::string kScenario = R"({
  "grid": {"x_box": [[-6, 6]], "nx": [33], "v_box": [[-1, 1]], "nv": [9],
           "dt": 0.0625, "nt": 17},
  "kernels": {"eta": {"family": "constant", "value": 0.5},
              "gamma": {"family": "constant", "value": 1.0}},
  "mc": {"n_particles": 20000, "seed": 3}
})";

class RunnerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("ufm_runner_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  RunOptions opt(const std::string& sub = "") const { return {root_ / sub}; }
  Json read_json(const fs::path& p) const { return Json::parse(read_text(p)); }

  fs::path root_;
  std::ostringstream log_;
};

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(RunnerTest, CheckPassesAndFails) {
  const auto good = cmd_check(parse_config(kScenario, {}), opt(), log_);
  EXPECT_EQ(good.exit_code, kExitOk);
  EXPECT_TRUE(fs::exists(root_ / "check" / "check.json"));
  const auto bad = cmd_check(parse_config(kScenario, {"kernels.eta.value=1.5"}), opt(), log_);
  EXPECT_EQ(bad.exit_code, kExitCondition);
  EXPECT_FALSE(bad.summary["all_passed"].get<bool>());
}

TEST_F(RunnerTest, SolveWritesManifestMatchingFiles) {
  const auto r = cmd_solve(parse_config(kScenario, {}), opt(), log_);
  ASSERT_EQ(r.exit_code, kExitOk);
  const fs::path dir = root_ / "solve";
  const Json manifest = read_json(dir / "manifest.json");
  int hashed = 0;
  for (const auto& e : manifest["files"]) {
    const std::string name = e["file"];
    ASSERT_TRUE(fs::exists(dir / name)) << name;
    if (e["sha256"].is_null()) {
      EXPECT_EQ(name, "timing.csv");
      continue;
    }
    const std::string text = read_text(dir / name);
    EXPECT_EQ(e["sha256"], sha256_hex(text)) << name;
    EXPECT_EQ(e["bytes"], text.size()) << name;
    ++hashed;
  }
  // diagnostics, run record, and csv/bin/json for time nodes 0, 2, ..., 16
  EXPECT_EQ(hashed, 2 + 3 * 9);
  const Json record = read_json(dir / "run_record.json");
  EXPECT_TRUE(record["diagnostics"]["converged"].get<bool>());
  EXPECT_TRUE(record.contains("local_contraction") == (16 * 0.0625 < 0.5));
  EXPECT_EQ(read_text(dir / "diagnostics.csv").substr(0, 26), "iteration,residual,ratio\n1");
}

TEST_F(RunnerTest, SolveWithoutLossReproducesFreeStreaming) {
  const auto cfg = parse_config(kScenario, {"kernels.gamma.value=0", "output.csv=false"});
  ASSERT_EQ(cmd_solve(cfg, opt(), log_).exit_code, kExitOk);
  const auto g = cfg.make_grid();
  const SampledModel m(cfg.kernels, g);
  for (int k : {0, 8, 16}) {
    char stem[16];
    std::snprintf(stem, sizeof stem, "f_%05d", k);
    EXPECT_EQ(read_snapshot_binary(root_ / "solve" / (std::string(stem) + ".json")),
              free_stream(*g, m.f0(), g->time(k)))
        << k;
  }
  EXPECT_FALSE(fs::exists(root_ / "solve" / "f_00000.csv"));
}

TEST_F(RunnerTest, SolveReportsNonConvergence) {
  const auto r = cmd_solve(parse_config(kScenario, {"solver.max_iter=2"}), opt(), log_);
  EXPECT_EQ(r.exit_code, kExitNonConvergence);
}

TEST_F(RunnerTest, SolveRefusesInadmissibleModel) {
  const auto r = cmd_solve(parse_config(kScenario, {"kernels.gamma.value=2"}), opt(), log_);
  EXPECT_EQ(r.exit_code, kExitCondition);
}

TEST_F(RunnerTest, MonteCarloOutputs) {
  const auto r = cmd_mc(parse_config(kScenario, {}), opt(), log_);
  ASSERT_EQ(r.exit_code, kExitOk);
  EXPECT_FALSE(r.summary["low_power"].get<bool>());
  const std::string csv = read_text(root_ / "mc" / "mc.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 5);
  EXPECT_TRUE(fs::exists(root_ / "mc" / "histogram_final.csv"));
}

TEST_F(RunnerTest, CompareAgreesAndFlagsLowPower) {
  const auto r = cmd_compare(parse_config(kScenario, {}), opt("a"), log_);
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_LE(r.summary["max_abs_z"].get<double>(), 3.0);
  const auto small = cmd_compare(parse_config(kScenario, {"mc.n_particles=100"}), opt("b"), log_);
  EXPECT_TRUE(small.summary["low_power"].get<bool>());
}

TEST_F(RunnerTest, AsymptoticsPassesOnAdmissibleModel) {
  const auto r = cmd_asymptotics(parse_config(kScenario, {}), opt(), log_);
  EXPECT_EQ(r.exit_code, kExitOk);
  const std::string csv = read_text(root_ / "asymptotics" / "analysis.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "t,mass,gamma_weighted_mass,l1_dist_to_f_inf,bound_rhs,ineq01_slack,ineq02_slack");
}

TEST_F(RunnerTest, AsymptoticsNeedsDeltaBelowOne) {
  const auto r = cmd_asymptotics(parse_config(kScenario, {"kernels.eta.value=1"}), opt(), log_);
  EXPECT_EQ(r.exit_code, kExitCondition);
}

TEST_F(RunnerTest, RerunIsByteIdentical) {
  const auto cfg = parse_config(kScenario, {});
  cmd_solve(cfg, opt("a"), log_);
  cmd_solve(cfg, opt("b"), log_);
  EXPECT_EQ(read_text(root_ / "a" / "solve" / "manifest.json"),
            read_text(root_ / "b" / "solve" / "manifest.json"));
}

TEST(ZScore, EdgeCases) {
  EXPECT_DOUBLE_EQ(z_score(1.2, 1.0, 0.1), 2.0);
  EXPECT_EQ(z_score(1.0, 1.0, 0.0), 0.0);
  EXPECT_EQ(z_score(2.0, 1.0, 0.0), std::numeric_limits<double>::infinity());
  EXPECT_EQ(z_score(2.0, 1.0, std::numeric_limits<double>::infinity()), 0.0);
}

TEST(ErrorMapping, ExitCodesAndJson) {
  EXPECT_EQ(exit_code_for(ConfigError("x", "/grid/nt", 4)), kExitConfig);
  EXPECT_EQ(exit_code_for(ArgumentError("x")), kExitConfig);
  EXPECT_EQ(exit_code_for(ModelError("x")), kExitCondition);
  EXPECT_EQ(exit_code_for(NumericalBlowupError("x", 3)), kExitNonConvergence);
  EXPECT_EQ(exit_code_for(ValidityError("x")), kExitInequality);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), kExitFailure);

  const Json c = error_json(ConfigError("bad", "/grid/nt", 4))["error"];
  EXPECT_EQ(c["kind"], "config");
  EXPECT_EQ(c["field"], "/grid/nt");
  EXPECT_EQ(c["line"], 4);
  EXPECT_EQ(c["exit_code"], 2);
  EXPECT_EQ(error_json(NumericalBlowupError("x", 7))["error"]["time_node"], 7);
  EXPECT_EQ(error_json(std::logic_error("x"))["error"]["kind"], "internal");
}

}  // namespace
}  // namespace ufm
