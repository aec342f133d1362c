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

#include "test_support.hpp"
#include "ufm/analysis.hpp"
#include "ufm/picard.hpp"

namespace ufm {
namespace {

using testing::constant_kernels;
using testing::gaussian_f0;
using testing::grid_1d;

// Compact f0 in a wide box: nothing reaches the boundary before T.
std::shared_ptr<const PhaseSpaceGrid> wide_grid(int nt = 41, double dt = 0.05) {
  return grid_1d(-10, 10, 81, -1, 1, 17, dt, nt);
}

DistributionField solve(const SampledModel& m) {
  return picard_solve(m, {Mapping::J_plus, std::nullopt, 1e-12, 200}).solution;
}

TEST(MassTraceTest, ConservedWithoutExplosions) {
  auto g = wide_grid();
  const SampledModel m(constant_kernels(0.5, 0.0, gaussian_f0(0, 0.5)), g);
  const auto tr = mass_trace(solve(m), m, 0.5, quadrature_tolerance(*g, m.f0()));
  for (double v : tr.mass) EXPECT_NEAR(v, tr.mass[0], 1e-10 * tr.mass[0]);
}

TEST(MassTraceTest, HomogeneousDecayFollowsMassBalance) {
  // dM/dt = -(1 - eta0) gamma M, so M(2) = M0 e^{-1}.
  auto g = wide_grid();
  const SampledModel m(constant_kernels(0.5, 1.0, gaussian_f0(0, 0.5)), g);
  const auto tr = mass_trace(solve(m), m, 0.5, quadrature_tolerance(*g, m.f0()));
  EXPECT_NEAR(tr.mass.back() / tr.mass.front(), std::exp(-1.0), 1e-3);
  EXPECT_TRUE(tr.ineq01_holds());
  EXPECT_TRUE(tr.ineq02_holds());
  EXPECT_TRUE(non_increasing(tr.mass, tr.eps));
}

TEST(MassTraceTest, PureLossHoldsWithNearEquality) {
  auto g = wide_grid();
  const double gamma = 0.5;
  const SampledModel m(constant_kernels(0.0, gamma, gaussian_f0(0, 0.5)), g);
  const auto tr = mass_trace(solve(m), m, 0.0, quadrature_tolerance(*g, m.f0()));
  // Forward difference of M0 e^{-gamma t} against the interval average of gamma M.
  const double dt = g->dt();
  for (std::size_t k = 0; k < tr.ineq01_slack.size(); ++k)
    EXPECT_LT(std::abs(tr.ineq01_slack[k]), gamma * gamma * gamma * dt * dt * tr.mass[0]);
  EXPECT_TRUE(tr.ineq02_holds());
}

TEST(MassTraceTest, NegativeFieldRejected) {
  auto g = wide_grid(3);
  const SampledModel m(constant_kernels(0.5, 0.5, gaussian_f0(0, 0.5)), g);
  DistributionField f(g, 0.0);
  f.slice(1)[5] = -1.0;
  EXPECT_THROW(mass_trace(f, m, 0.5, 1e-6), ValidityError);
}

TEST(FreeMotion, NoExplosionsGiveFreeStream) {
  auto g = wide_grid();
  const SampledModel m(constant_kernels(0.5, 0.0, gaussian_f0(0, 0.5)), g);
  const auto lim = free_motion_limit(solve(m), m, 0.5);
  const auto free = free_stream_field(g, m.f0());
  for (int k = 0; k < g->nt(); ++k)
    for (std::size_t n = 0; n < g->slice_size(); ++n)
      EXPECT_EQ(lim.field.slice(k)[n], free.slice(k)[n]);
  EXPECT_EQ(lim.tail_allowance, 0.0);
}

TEST(FreeMotion, LimitIsConstantAlongCharacteristics) {
  // Node-aligned displacements: restriction to characteristics needs no interpolation.
  auto g = grid_1d(-4, 4, 65, -1, 1, 5, 0.25, 9);
  const SampledModel m(constant_kernels(0.5, 0.5, gaussian_f0(0, 0.4)), g);
  const auto lim = free_motion_limit(solve(m), m, 0.5);
  const double eps = quadrature_tolerance(*g, m.f0());
  double worst = 0.0;
  for (std::size_t j = 0; j < g->nv_total(); ++j)
    for (std::size_t i = 0; i < g->nx_total(); ++i) {
      const Point x0 = g->x_coord(i);
      for (int k = 1; k < g->nt(); ++k) {
        const double t = g->time(k);
        const Point xt{x0[0] + t * g->v_coord(j)[0], 0, 0};
        if (!g->inside_x(xt)) continue;
        const double along = restrict_to_characteristics(lim.field, t, x0, j);
        worst = std::max(worst, std::abs(along - lim.field.row(0, j)[i]));
      }
    }
  EXPECT_LT(worst, eps);
  EXPECT_LT(worst, 1e-13);
}

TEST(FreeMotion, PureLossLimitMatchesClosedForm) {
  auto g = grid_1d(-4, 4, 65, -1, 1, 5, 0.25, 9);
  const double gamma = 0.5, T = 2.0;
  const SampledModel m(constant_kernels(0.0, gamma, gaussian_f0(0, 0.4)), g);
  const auto lim = free_motion_limit(solve(m), m, 0.0);
  double peak = 0.0, worst = 0.0;
  for (std::size_t n = 0; n < g->slice_size(); ++n) {
    peak = std::max(peak, m.f0()[n]);
    worst = std::max(worst, std::abs(lim.field.slice(0)[n] - m.f0()[n] * std::exp(-gamma * T)));
  }
  // Composite trapezoid error of int_0^T gamma e^{-gamma s} ds.
  EXPECT_LT(worst, T * g->dt() * g->dt() / 12.0 * gamma * gamma * gamma * peak);
}

TEST(AsymptoticBoundTest, TrivialCases) {
  auto g = wide_grid();
  const SampledModel m(constant_kernels(0.5, 0.0, gaussian_f0(0, 0.5)), g);
  const auto f = solve(m);
  const double eps = quadrature_tolerance(*g, m.f0());
  const auto tr = mass_trace(f, m, 0.5, eps);
  const auto lim = free_motion_limit(f, m, 0.5);
  const auto b = asymptotic_bound_check(f, lim, tr, 1.0);
  EXPECT_EQ(b.lhs, 0.0);
  EXPECT_EQ(b.rhs, 0.0);
  EXPECT_TRUE(b.holds);

  const SampledModel decay(constant_kernels(0.5, 1.0, gaussian_f0(0, 0.5)), g);
  const auto fd = solve(decay);
  const auto trd = mass_trace(fd, decay, 0.5, eps);
  const auto limd = free_motion_limit(fd, decay, 0.5);
  const auto end = asymptotic_bound_check(fd, limd, trd, g->t_final());
  EXPECT_DOUBLE_EQ(end.rhs, limd.tail_allowance);
  EXPECT_TRUE(end.holds);
}

TEST(AsymptoticBoundTest, DecayScenarioDistanceShrinksBelowBound) {
  auto g = grid_1d(-12, 12, 97, -2, 2, 33, 1.0 / 16.0, 65);
  const SampledModel m(constant_kernels(0.5, 1.0, gaussian_f0(0, 1.0, 0, 0.5)), g);
  const auto f = solve(m);
  const double eps = quadrature_tolerance(*g, m.f0());
  const auto tr = mass_trace(f, m, 0.5, eps);
  const auto lim = free_motion_limit(f, m, 0.5);
  std::vector<double> lhs;
  for (double t : {1.0, 2.0, 4.0}) {
    const auto b = asymptotic_bound_check(f, lim, tr, t);
    EXPECT_TRUE(b.holds) << "t=" << t << " lhs=" << b.lhs << " rhs=" << b.rhs;
    lhs.push_back(b.lhs);
  }
  EXPECT_GT(lhs[0], lhs[1]);
  EXPECT_GT(lhs[1], lhs[2]);
}

TEST(WeakResidual, ZeroFieldAndFreeStreaming) {
  auto g = wide_grid();
  const SampledModel zero(constant_kernels(0.5, 0.5, ScalarFamily::constant(0.0)), g);
  for (const auto& phi : shipped_test_functions(*g))
    EXPECT_EQ(weak_residual(DistributionField(g), zero, phi), 0.0);

  const SampledModel m(constant_kernels(0.5, 0.0, gaussian_f0(0, 1.0)), g);
  const auto f = free_stream_field(g, m.f0());
  const double eps = quadrature_tolerance(*g, m.f0());
  for (const auto& phi : shipped_test_functions(*g)) EXPECT_LT(weak_residual(f, m, phi), eps);
}

TEST(WeakResidual, SolutionSmallAndPerturbationDetected) {
  auto g = wide_grid();
  const SampledModel m(constant_kernels(0.5, 1.0, gaussian_f0(0, 1.0)), g);
  const auto f = solve(m);
  const double eps = quadrature_tolerance(*g, m.f0());
  // A static copy of f0 added after t = 0 does not move with the flow.
  DistributionField bad = f;
  for (int k = 1; k < g->nt(); ++k)
    for (std::size_t n = 0; n < g->slice_size(); ++n) bad.slice(k)[n] += 0.1 * m.f0()[n];
  for (const auto& phi : shipped_test_functions(*g)) {
    const double r = weak_residual(f, m, phi);
    EXPECT_LT(r, 10.0 * eps);
    EXPECT_GT(weak_residual(bad, m, phi), 10.0 * r);
  }
}

TEST(WeakResidual, SupportMustStayInside) {
  auto g = wide_grid();
  const SampledModel m(constant_kernels(0.5, 1.0, gaussian_f0(0, 1.0)), g);
  const DistributionField f(g);
  auto phi = shipped_test_functions(*g)[0];
  phi.x_radius = 10.0;
  EXPECT_THROW(weak_residual(f, m, phi), ArgumentError);
  phi = shipped_test_functions(*g)[0];
  phi.t_radius = 5.0;
  EXPECT_THROW(weak_residual(f, m, phi), ArgumentError);
}

TEST(BumpTest, DerivativeMatchesDifferenceQuotient) {
  BumpTestFunction phi{0.5, 0.4, {0.1, 0, 0}, 1.0, {0.2, 0, 0}, 0.8};
  const double t = 0.6, h = 1e-6, c = 0.7;
  const Point x{0.3, 0, 0}, v{0.1, 0, 0};
  const double fd = (phi.value(t + h, {x[0] + c * h, 0, 0}, v, 1) -
                     phi.value(t - h, {x[0] - c * h, 0, 0}, v, 1)) /
                    (2 * h);
  EXPECT_NEAR(phi.transport_derivative(t, x, v, {c, 0, 0}, 1), fd, 1e-7);
}

TEST(Helpers, NonIncreasing) {
  EXPECT_TRUE(non_increasing({3, 2, 2, 1}, 0.0));
  EXPECT_FALSE(non_increasing({3, 2, 2.5}, 0.1));
  EXPECT_TRUE(non_increasing({3, 2, 2.05}, 0.1));
}

}  // namespace
}  // namespace ufm
