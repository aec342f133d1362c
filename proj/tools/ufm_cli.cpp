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


// Command-line front end: ufm <check|solve|mc|compare|asymptotics> --config FILE ...

#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ufm/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Exploding-cloud kinetic model: solver, particle oracle and checks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "scenario file (JSON with comments)")->required();
  app.add_option("--workers", workers, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "particle seed, replaces mc.seed");
  app.add_option("--out", out_dir, "output directory, replaces output.dir");
  app.add_option("--override", overrides, "KEY=VALUE with a dotted KEY, e.g. solver.tol=1e-8")
      ->allow_extra_args(false);

  const std::vector<std::pair<std::string, std::string>> commands{
      {"check", "admissibility conditions and delta"},
      {"solve", "Picard solve with snapshots and run record"},
      {"mc", "weighted-particle simulation"},
      {"compare", "deterministic solver against the particle simulation"},
      {"asymptotics", "mass inequalities, free-motion limit and weak-form residuals"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) {
      std::cout << ufm::Json{{"error",
                              {{"kind", "usage"}, {"message", e.what()}, {"exit_code", ufm::kExitConfig}}}}
                       .dump()
                << "\n";
      return ufm::kExitConfig;
    }
    return 0;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    ufm::set_worker_count(workers);
    if (seed) overrides.push_back("mc.seed=" + std::to_string(*seed));
    const ufm::ScenarioConfig cfg = ufm::load_config(config_path, overrides);
    const ufm::RunOptions opt{out_dir};
    ufm::CommandResult res;
    if (command == "check") res = ufm::cmd_check(cfg, opt, std::cout);
    else if (command == "solve") res = ufm::cmd_solve(cfg, opt, std::cout);
    else if (command == "mc") res = ufm::cmd_mc(cfg, opt, std::cout);
    else if (command == "compare") res = ufm::cmd_compare(cfg, opt, std::cout);
    else res = ufm::cmd_asymptotics(cfg, opt, std::cout);
    return res.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "ufm " << command << ": " << e.what() << "\n";
    std::cout << ufm::error_json(e).dump() << "\n";
    return ufm::exit_code_for(e);
  }
}
