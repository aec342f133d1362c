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


// Solves a scenario with the library API and prints the mass trace next to
// the sliding-window estimate delta from the admissibility check.
//
//   mass_trace <scenario.jsonc> [KEY=VALUE ...]

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "ufm/analysis.hpp"
#include "ufm/config.hpp"
#include "ufm/picard.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <scenario.jsonc> [KEY=VALUE ...]\n", argv[0]);
    return 2;
  }
  try {
    const std::vector<std::string> overrides(argv + 2, argv + argc);
    const ufm::ScenarioConfig cfg = ufm::load_config(argv[1], overrides);
    const auto grid = cfg.make_grid();
    const ufm::SampledModel model(cfg.kernels, grid);
    const auto delta = ufm::estimate_delta(cfg.kernels, *grid);

    const auto res = ufm::picard_solve(
        model, {cfg.solver.mapping, cfg.solver.a, cfg.solver.tol, cfg.solver.max_iter});
    const double eps = ufm::quadrature_tolerance(*grid, model.f0());
    const auto tr = ufm::mass_trace(res.solution, model, delta.delta, eps);

    std::printf("# %zu iterations, delta %.4f, eps %.3g\n",
                res.diagnostics.residual_history.size(), delta.delta, eps);
    std::printf("%8s %14s %14s\n", "t", "mass", "gamma_mass");
    for (std::size_t k = 0; k < tr.times.size(); k += cfg.snapshot_stride())
      std::printf("%8.4f %14.8f %14.8f\n", tr.times[k], tr.mass[k], tr.gamma_weighted_mass[k]);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
