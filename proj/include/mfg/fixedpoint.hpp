#pragma once

// Neural fictitious play: alternate policy optimization against the current
// aggregate field, regression of E[phi(k_t) | common noise] on (t, p),
// averaging of the regression history, and the externality stopping rule.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfg/mlp.hpp"
#include "mfg/model.hpp"
#include "mfg/sim.hpp"

namespace mfg {

struct SolverConfig {
  int steps = 90;  // N_T
  int max_outer_iterations = 50;
  int policy_steps = 500;
  // Policy steps in the first outer iteration; 0 means policy_steps.
  int first_policy_steps = 0;
  int regression_steps = 500;
  int scenarios = 64;
  int paths_per_scenario = 16;
  int validation_scenarios = 64;
  int validation_paths_per_scenario = 16;
  int validation_every = 50;
  // Unset means 1e-4 * d * N_T.
  std::optional<double> epsilon;
  double learning_rate = 1e-3;
  double regression_learning_rate = 1e-3;
  bool fictitious = true;
  bool literal_fictitious = false;
  std::vector<int> policy_hidden{20, 20, 20};
  std::vector<int> regression_hidden{20, 20, 20};
  double consumption_margin = 1e-3;
  SimOptions sim;
  std::uint64_t seed = 1;

  // Runtime settings, not part of the configuration file.
  int threads = 1;
  bool deterministic = false;
  std::filesystem::path output_dir;
  std::string manifest;  // written as the first comment line of every CSV

  double effective_epsilon(int d) const { return epsilon.value_or(1e-4 * d * steps); }
  void validate() const;
};

// R^{j} history with b^0 = 0, current networks and their optimizer states.
struct IterationState {
  PolicyNet policy;
  AdamState policy_adam;
  Mlp regression;
  AdamState regression_adam;
  RField history;
  std::vector<Matrix> validation_p;  // externality on the validation noise
  int j = 0;
};

IterationState initial_state(const ModelParams& m, const SolverConfig& cfg);

struct PolicyTrainResult {
  double initial_validation = 0.0;
  double best_validation = 0.0;
  int best_step = 0;  // 0 means the incoming parameters were kept
  int steps = 0;
};

using PolicyObserver = std::function<void(int step, const PolicyNet&)>;

// Adam ascent on the Monte Carlo objective with a fresh noise batch per
// step. Keeps the parameters with the best objective on the validation
// batch, which includes the incoming parameters.
PolicyTrainResult train_policy(const RField& r, IterationState& state,
                               const SolverConfig& cfg, const ModelParams& m,
                               const NoiseBatch& validation, int steps,
                               const PolicyObserver& observer = {});

struct RegressionData {
  Matrix inputs;  // rows (scenario, step i = 1..N_T): t_i / T, p
  Matrix labels;  // within-scenario mean of phi(k_{t_i})
};

RegressionData regression_data(const PathBatch& paths, const ModelParams& m);

struct RegressionResult {
  double initial_mse = 0.0;
  double constant_mse = 0.0;  // best constant predictor
  double best_mse = 0.0;
};

// Full-batch Adam on the squared error. Starts from the better of the
// incoming network and its constant-output variant; returns the best
// recorded parameters in state.regression.
RegressionResult train_regression(const RegressionData& data, IterationState& state,
                                  const SolverConfig& cfg);

// R^j from the regression history: the running average when fictitious
// play is on, otherwise the latest member alone.
RField fictitious_update(const IterationState& state, const SolverConfig& cfg);

struct StopCheck {
  double metric = 0.0;
  bool stop = false;
};

// metric = sum_{i=1..N_T} mean over scenarios of |p_new - p_old|^2
StopCheck check_stop(const std::vector<Matrix>& p_new, const std::vector<Matrix>& p_old,
                     double epsilon);

struct IterationRecord {
  int j = 0;
  double stop_metric = 0.0;
  double validation_objective = 0.0;
  double regression_mse = 0.0;
  double wall_time = 0.0;
};

struct Solution {
  PolicyNet policy;
  RField field;
  std::vector<IterationRecord> trace;
  bool converged = false;  // false: J_max reached
  double epsilon = 0.0;
};

using IterationObserver = std::function<void(const IterationRecord&)>;

Solution solve(const ModelParams& m, const SolverConfig& cfg,
               const IterationObserver& on_iteration = {});

// policy.mfgnet, rfield.txt and one weights file per nonzero member.
void save_solution(const Solution& s, const std::filesystem::path& dir);
// Loads the policy and field written by save_solution.
Solution load_solution(const std::filesystem::path& dir, const ModelParams& m);

void write_iterations_csv(const std::vector<IterationRecord>& trace,
                          const std::filesystem::path& file, const std::string& manifest,
                          bool zero_wall_time);

}  // namespace mfg
