#pragma once

// TOML run configuration: [model], [solver], [report], [analysis].
// Unknown keys and type errors raise ParseError with the source location;
// semantic errors raise ConfigError.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfg/analysis.hpp"
#include "mfg/fixedpoint.hpp"
#include "mfg/model.hpp"

namespace mfg {

struct ReportConfig {
  int evaluation_scenarios = 64;
  int evaluation_paths_per_scenario = 16;
  int histogram_bins = 20;
  std::vector<double> times{5, 10, 15, 20, 30, 45};
  std::vector<int> pair{0, 1};  // scenarios written to scenario_pair.csv

  bool operator==(const ReportConfig&) const = default;
};

enum class CheckCondition { kContraction, kMonotonicity, kLambdaBound, kAll };

struct AnalysisConfig {
  CheckCondition condition = CheckCondition::kContraction;
  // Explicit constants; when absent they are derived from the model with
  // the sampled estimator.
  std::optional<LipschitzConstants> lipschitz;
  std::optional<MonotonicityInputs> monotonicity;
  SampleBox box;

  bool operator==(const AnalysisConfig& o) const;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "run";
  ModelParams model = ModelParams::table1();
  SolverConfig solver;
  ReportConfig report;
  std::optional<AnalysisConfig> analysis;

  void validate() const;
  bool operator==(const RunConfig& o) const;
};

RunConfig parse_config(std::string_view text, const std::string& source_name = "config");
RunConfig load_config(const std::filesystem::path& file);
std::string serialize_config(const RunConfig& cfg);

// 16 hex digits of a 64-bit FNV-1a hash of the serialized configuration,
// output_dir excluded.
std::string config_hash(const RunConfig& cfg);
// "seed=<n> config_hash=<h> version=<v>"
std::string manifest_line(const RunConfig& cfg);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace mfg
