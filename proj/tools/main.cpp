// mfg: solve | report | check | selftest

#include <CLI11.hpp>
#include <iostream>

#include "mfg/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Common-noise mean-field growth game: neural fictitious play solver"};
  app.require_subcommand(1);

  mfg::RunOptions opt;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;

  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Root seed (overrides the config)");
    sub->add_option("--threads", threads, "Worker threads (default: available cores)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--deterministic", opt.deterministic,
                  "Single-threaded, bit-stable iterations.csv");
  };

  auto* solve = app.add_subcommand("solve", "Run the fixed-point solver");
  solve->add_option("--config", config_path, "TOML configuration")->required();
  add_run_flags(solve);

  std::string solution_dir;
  auto* report = app.add_subcommand("report", "Write figure data for a solved run");
  report->add_option("solution_dir", solution_dir, "Directory written by solve")->required();
  add_run_flags(report);

  auto* check = app.add_subcommand("check", "Evaluate the uniqueness conditions");
  check->add_option("--config", config_path, "TOML configuration")->required();
  check->add_option("--out", out_dir, "Directory for check_report.{txt,csv}");

  auto* selftest = app.add_subcommand("selftest", "Run the built-in property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mfg::kExitConfig;
  }

  if (!out_dir.empty()) opt.out = out_dir;
  for (auto* sub : {solve, report}) {
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--threads")) opt.threads = threads;
  }

  if (*solve) return mfg::cmd_solve(config_path, opt, std::cout, std::cerr);
  if (*report) return mfg::cmd_report(solution_dir, opt, std::cout, std::cerr);
  if (*check) return mfg::cmd_check(config_path, opt, std::cout, std::cerr);
  if (*selftest) return mfg::cmd_selftest(std::cout, std::cerr);
  return mfg::kExitConfig;
}
