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
#include <sstream>

#include "test_support.hpp"
#include "ufm/kernels.hpp"

namespace ufm {
namespace {

using testing::constant_kernels;
using testing::gaussian_f0;
using testing::grid_1d;

// Independent row quadrature: trapezoid sums written out here, not via the library.
double row_quadrature(const std::vector<double>& rows, std::size_t j, const Axis& v) {
  const std::size_t n = static_cast<std::size_t>(v.n);
  const double h = (v.hi - v.lo) / (v.n - 1);
  double s = 0.0;
  for (std::size_t j1 = 0; j1 < n; ++j1)
    s += (j1 == 0 || j1 == n - 1 ? 0.5 : 1.0) * h * rows[j * n + j1];
  return s;
}

TEST(EvalKernels, ConstantEtaOneGammaZero) {
  auto g = grid_1d(-1, 1, 9, -1, 1, 5, 0.1, 3);
  const auto s = eval_kernels(constant_kernels(1.0, 0.0, gaussian_f0()), 0.0, *g);
  for (double v : s.eta) EXPECT_EQ(v, 1.0);
  for (double v : s.gamma) EXPECT_EQ(v, 0.0);
}

TEST(EvalKernels, ConstantPIsInverseBoxVolume) {
  auto g = grid_1d(-1, 1, 5, -2, 2, 17, 0.1, 3);
  const auto s = eval_kernels(constant_kernels(0.5, 0.5, gaussian_f0()), 0.0, *g);
  for (double v : s.p_rows) EXPECT_EQ(v, 0.25);
}

TEST(EvalKernels, GaussianRowsNormalizedNumerically) {
  auto g = grid_1d(-1, 1, 5, -2, 2, 64, 0.1, 3);
  KernelSet ks = constant_kernels(0.5, 0.5, gaussian_f0());
  ks.p.kind = FamilyKind::gaussian_bump;
  ks.p.mode = NormalizationMode::per_row_numeric;
  ks.p.width = 0.7;
  ks.p.center = 0.3;
  const auto s = eval_kernels(ks, 0.0, *g);
  for (std::size_t j = 0; j < 64; ++j)
    EXPECT_NEAR(row_quadrature(s.p_rows, j, g->v_axes()[0]), 1.0, 1e-12);
}

TEST(EvalKernels, NonFiniteValueNamesNode) {
  auto g = grid_1d(-1, 1, 5, -1, 1, 5, 0.1, 3);
  KernelSet ks = constant_kernels(0.5, std::nan(""), gaussian_f0());
  try {
    eval_kernels(ks, 0.0, *g);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("x=("), std::string::npos);
  }
}

TEST(EvalKernels, NegativeTimeRejected) {
  auto g = grid_1d(-1, 1, 5, -1, 1, 5, 0.1, 3);
  EXPECT_THROW(eval_kernels(constant_kernels(0.5, 0.5, gaussian_f0()), -1.0, *g), ArgumentError);
}

TEST(Admissibility, DefaultModelPasses) {
  auto g = grid_1d(-4, 4, 33, -2, 2, 17, 0.1, 3);
  const auto rep = check_admissibility(constant_kernels(0.5, 0.3, gaussian_f0()), *g);
  EXPECT_TRUE(rep.all_passed());
  EXPECT_EQ(rep.conditions.size(), 6u);
}

TEST(Admissibility, GammaAboveOneReported) {
  auto g = grid_1d(-4, 4, 33, -2, 2, 17, 0.1, 3);
  const auto rep = check_admissibility(constant_kernels(0.5, 1.5, gaussian_f0()), *g);
  EXPECT_FALSE(rep.all_passed());
  EXPECT_FALSE(rep.get("gamma_bounds").passed);
  EXPECT_EQ(rep.get("gamma_bounds").worst_value, 1.5);
  EXPECT_TRUE(rep.get("eta_bounds").passed);
}

TEST(Admissibility, RowDeficitReported) {
  // Analytic constant P at 0.97 / |box|: row quadrature on [-2, 2] is 0.97.
  auto g = grid_1d(-4, 4, 9, -2, 2, 5, 0.1, 3);
  KernelSet ks = constant_kernels(0.5, 0.3, gaussian_f0());
  ks.p.value = 0.97 / 4.0;
  const auto rep = check_admissibility(ks, *g);
  const auto& c = rep.get("p_row_normalization");
  EXPECT_FALSE(c.passed);
  EXPECT_NEAR(1.0 - c.worst_value, 0.03, 1e-12);
  EXPECT_NE(c.detail.find("deficit"), std::string::npos);
}

TEST(Admissibility, EachCorruptionFailsItsCondition) {
  auto g = grid_1d(-4, 4, 33, -2, 2, 17, 0.1, 3);
  const KernelSet good = constant_kernels(0.5, 0.3, gaussian_f0());
  {
    KernelSet ks = good;
    ks.eta = ScalarFamily::constant(-0.1);
    EXPECT_FALSE(check_admissibility(ks, *g).get("eta_bounds").passed);
  }
  {
    KernelSet ks = good;
    ks.p.kind = FamilyKind::gaussian_bump;
    ks.p.base = -1.0;
    EXPECT_FALSE(check_admissibility(ks, *g).get("p_nonnegative").passed);
  }
  {
    KernelSet ks = good;
    ks.f0 = gaussian_f0(0, 1, 0, 0.5, -1.0);
    const auto rep = check_admissibility(ks, *g);
    EXPECT_FALSE(rep.get("f0_nonnegative").passed);
    EXPECT_TRUE(rep.get("f0_finite_mass").passed);
  }
}

TEST(Admissibility, PerRowNumericFamiliesNormalizeEverywhere) {
  for (int nv : {5, 16, 33}) {
    auto g = grid_1d(-1, 1, 5, -1.5, 2.5, nv, 0.1, 3);
    for (FamilyKind kind :
         {FamilyKind::constant, FamilyKind::separable_product, FamilyKind::gaussian_bump}) {
      KernelSet ks = constant_kernels(0.5, 0.5, gaussian_f0());
      ks.p.kind = kind;
      ks.p.mode = NormalizationMode::per_row_numeric;
      ks.p.kappa = 0.8;
      ks.p.value = 2.0;
      const auto rows = sample_p_rows(ks.p, *g);
      for (std::size_t j = 0; j < static_cast<std::size_t>(nv); ++j)
        EXPECT_NEAR(row_quadrature(rows, j, g->v_axes()[0]), 1.0, 1e-10)
            << to_string(kind) << " nv=" << nv;
      EXPECT_TRUE(check_admissibility(ks, *g).get("p_row_normalization").passed);
    }
  }
}

TEST(Delta, ConstantEtaGivesEta) {
  auto g = grid_1d(-1, 1, 5, -2, 2, 17, 0.1, 3);
  const double ts[] = {0.0};
  const auto est = estimate_delta(constant_kernels(0.37, 0.5, gaussian_f0()), *g, ts);
  EXPECT_NEAR(est.delta, 0.37, 1e-14);
  EXPECT_TRUE(est.delta_below_one);
}

TEST(Delta, ZeroEtaAndBoundary) {
  auto g = grid_1d(-1, 1, 5, -2, 2, 17, 0.1, 3);
  EXPECT_EQ(estimate_delta(constant_kernels(0.0, 0.5, gaussian_f0()), *g).delta, 0.0);
  const auto one = estimate_delta(constant_kernels(1.0, 0.5, gaussian_f0()), *g);
  EXPECT_NEAR(one.delta, 1.0, 1e-14);
  EXPECT_FALSE(one.delta_below_one);
}

TEST(Delta, EmptySamplesRejected) {
  auto g = grid_1d(-1, 1, 5, -2, 2, 17, 0.1, 3);
  EXPECT_THROW(estimate_delta(constant_kernels(0.5, 0.5, gaussian_f0()), *g,
                              std::span<const double>{}),
               ArgumentError);
}

TEST(Delta, ScalesLinearlyInEta) {
  auto g = grid_1d(-2, 2, 9, -2, 2, 21, 0.25, 5);
  KernelSet ks = constant_kernels(0.5, 0.5, gaussian_f0());
  ks.eta = ScalarFamily::gaussian(0.8, {0.3, 0, 0}, 0.7, {-0.2, 0, 0}, 0.6);
  ks.eta.time_rate = 0.4;
  ks.p.kind = FamilyKind::gaussian_bump;
  ks.p.mode = NormalizationMode::per_row_numeric;
  const double base = estimate_delta(ks, *g).delta;
  for (double c : {0.25, 0.5, 0.9}) {
    KernelSet scaled = ks;
    scaled.eta.amplitude *= c;
    EXPECT_NEAR(estimate_delta(scaled, *g).delta, c * base, 1e-14 * base);
  }
}

TEST(Families, SeparableProductAndGaussianValues) {
  ScalarFamily sp;
  sp.kind = FamilyKind::separable_product;
  sp.value = 2.0;
  sp.x_width = 2.0;
  sp.v_width = 1.0;
  sp.time_rate = 0.5;
  // bump(0.5) = 0.75^3, bump(0.5) again for v.
  EXPECT_NEAR(sp(2.0, {1, 0, 0}, {0.5, 0, 0}, 1), 2.0 * std::exp(-1.0) * std::pow(0.75, 6), 1e-15);
  EXPECT_EQ(sp(0.0, {2.5, 0, 0}, {0, 0, 0}, 1), 0.0);
  const ScalarFamily gb = ScalarFamily::gaussian(1.0, {}, 1.0, {}, 1.0);
  EXPECT_NEAR(gb(0.0, {1, 0, 0}, {1, 0, 0}, 1), std::exp(-1.0), 1e-15);
}

TEST(Families, NamesRoundTrip) {
  for (FamilyKind k : {FamilyKind::constant, FamilyKind::separable_product,
                       FamilyKind::gaussian_bump, FamilyKind::tabulated})
    EXPECT_EQ(family_from_string(to_string(k)), k);
  EXPECT_THROW(family_from_string("cubic"), ArgumentError);
}

TEST(Tables, MultilinearInterpolationAndClamp) {
  std::istringstream csv("x0,v0,value\n0,0,0\n1,0,1\n0,1,2\n1,1,3\n");
  const Table t = parse_table_csv(csv, phase_space_columns(1), "inline");
  const double mid[] = {0.5, 0.5};
  EXPECT_NEAR(t.eval(mid), 1.5, 1e-15);
  const double out[] = {5.0, -3.0};
  EXPECT_NEAR(t.eval(out), 1.0, 1e-15);
}

TEST(Tables, HeaderAndShapeValidated) {
  std::istringstream bad_header("x,v,value\n0,0,0\n");
  EXPECT_THROW(parse_table_csv(bad_header, phase_space_columns(1), "inline"), ArgumentError);
  std::istringstream ragged("x0,v0,value\n0,0,0\n1,0,1\n0,1,2\n");
  EXPECT_THROW(parse_table_csv(ragged, phase_space_columns(1), "inline"), ArgumentError);
}

TEST(Tables, TabulatedScalarFamily) {
  std::istringstream csv("x0,v0,value\n-1,-1,0.2\n1,-1,0.2\n-1,1,0.6\n1,1,0.6\n");
  ScalarFamily f;
  f.kind = FamilyKind::tabulated;
  f.table = std::make_shared<const Table>(parse_table_csv(csv, phase_space_columns(1), "inline"));
  EXPECT_NEAR(f(0.0, {0, 0, 0}, {0, 0, 0}, 1), 0.4, 1e-15);
}

TEST(SampledModelTest, TimeIndependentCoefficientsStoredOnce) {
  auto g = grid_1d(-1, 1, 5, -1, 1, 5, 0.1, 4);
  KernelSet ks = constant_kernels(0.5, 0.0, gaussian_f0());
  const SampledModel m(ks, g);
  EXPECT_TRUE(m.gamma_identically_zero());
  EXPECT_EQ(m.eta(3).size(), g->slice_size());
  ks.gamma = ScalarFamily::gaussian(0.5, {}, 1.0, {}, 1.0);
  ks.gamma.time_rate = 1.0;
  const SampledModel m2(ks, g);
  EXPECT_LT(m2.gamma(3)[0], m2.gamma(0)[0]);
}

}  // namespace
}  // namespace ufm
