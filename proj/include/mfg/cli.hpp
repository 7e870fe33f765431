#pragma once

// Subcommands behind the mfg executable. Each returns a process exit code:
// 0 success, 1 failed check or selftest, 2 configuration or missing
// artifact, 3 numeric abort.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mfg/sim.hpp"

namespace mfg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

struct RunOptions {
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;  // default: available cores
  bool deterministic = false;  // single thread, wall times zeroed in iterations.csv
};

// Trains to the stopping rule or J_max. Writes config.toml, manifest.txt,
// iterations.csv, checkpoints/ and the final weights into the output dir.
int cmd_solve(const std::filesystem::path& config_path, const RunOptions& opt,
              std::ostream& out, std::ostream& err);

// Simulates a fresh evaluation batch under a saved solution and writes the
// figure data as CSV into the solution dir (or --out).
int cmd_report(const std::filesystem::path& solution_dir, const RunOptions& opt,
               std::ostream& out, std::ostream& err);

// Evaluates the condition requested in [analysis]; 1 when it fails.
int cmd_check(const std::filesystem::path& config_path, const RunOptions& opt,
              std::ostream& out, std::ostream& err);

struct SelftestProperty {
  std::string name;
  // Empty string on success, otherwise a description of the failure.
  std::function<std::string()> run;
};

using GradientFn = std::function<ObjectiveGrad(
    const PolicyNet&, const std::vector<Matrix>&, const NoiseBatch&, const ModelParams&,
    const TimeGrid&, const SimOptions&)>;

// Tape gradient of a 2-step, 4-path objective against central differences.
SelftestProperty autodiff_property(GradientFn gradient);
std::vector<SelftestProperty> default_selftest_properties();

int run_selftest(const std::vector<SelftestProperty>& props, std::ostream& out,
                 std::ostream& err);
int cmd_selftest(std::ostream& out, std::ostream& err);

// Equal-width histogram over [min, max] of the values; a degenerate range
// is widened to [v - 0.5, v + 0.5]. Counts sum to values.size().
struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::int64_t> counts;
};
Histogram histogram(const std::vector<double>& values, int bins);

}  // namespace mfg
