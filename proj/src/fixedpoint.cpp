#include "mfg/fixedpoint.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mfg/errors.hpp"
#include "mfg/random.hpp"

namespace mfg {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double regression_mse(const Mlp& net, const RegressionData& data) {
  const Matrix r = net.evaluate(data.inputs) - data.labels;
  return r.squaredNorm() / static_cast<double>(data.inputs.rows());
}

// Same hidden layers, output fixed at the label mean.
Mlp constant_variant(const Mlp& net, const Matrix& labels) {
  Mlp out = net;
  out.weights.back().setZero();
  out.biases.back() = labels.colwise().mean();
  return out;
}

}  // namespace

void SolverConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("solver.") + name + " must be >= 1");
  };
  positive(steps, "steps");
  positive(max_outer_iterations, "max_outer_iterations");
  if (policy_steps < 0) throw ConfigError("solver.policy_steps must be >= 0");
  if (first_policy_steps < 0) throw ConfigError("solver.first_policy_steps must be >= 0");
  if (regression_steps < 0) throw ConfigError("solver.regression_steps must be >= 0");
  positive(scenarios, "scenarios");
  positive(paths_per_scenario, "paths_per_scenario");
  positive(validation_scenarios, "validation_scenarios");
  positive(validation_paths_per_scenario, "validation_paths_per_scenario");
  positive(validation_every, "validation_every");
  if (epsilon && !(*epsilon > 0.0)) throw ConfigError("solver.epsilon must be > 0");
  if (!(learning_rate > 0.0)) throw ConfigError("solver.learning_rate must be > 0");
  if (!(regression_learning_rate > 0.0))
    throw ConfigError("solver.regression_learning_rate must be > 0");
  if (literal_fictitious && !fictitious)
    throw ConfigError("solver.literal_fictitious requires solver.fictitious");
  for (int h : policy_hidden)
    if (h < 1) throw ConfigError("solver.policy_hidden entries must be >= 1");
  for (int h : regression_hidden)
    if (h < 1) throw ConfigError("solver.regression_hidden entries must be >= 1");
  if (!(consumption_margin > 0.0 && consumption_margin < 1.0))
    throw ConfigError("solver.consumption_margin must be in (0, 1)");
  if (sim.entropy_sign != 1.0 && sim.entropy_sign != -1.0)
    throw ConfigError("solver.entropy_sign must be 1 or -1");
  if (!(sim.k_floor > 0.0)) throw ConfigError("solver.k_floor must be > 0");
  if (!(sim.p_floor >= 0.0)) throw ConfigError("solver.p_floor must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

IterationState initial_state(const ModelParams& m, const SolverConfig& cfg) {
  IterationState s;
  s.policy = PolicyNet::make(m, cfg.policy_hidden, derive_seed(cfg.seed, "policy-init"));
  s.policy.consumption_margin = cfg.consumption_margin;
  s.policy_adam.learning_rate = cfg.learning_rate;
  std::vector<int> dims{1 + m.d};
  dims.insert(dims.end(), cfg.regression_hidden.begin(), cfg.regression_hidden.end());
  dims.push_back(m.d);
  s.regression = Mlp::xavier(dims, derive_seed(cfg.seed, "regression-init"));
  s.regression_adam.learning_rate = cfg.regression_learning_rate;
  s.history = RField(m.d, m.T,
                     cfg.literal_fictitious ? RField::Mode::kLiteral : RField::Mode::kAveraged);
  s.history.push_zero();
  return s;
}

PolicyTrainResult train_policy(const RField& r, IterationState& state,
                               const SolverConfig& cfg, const ModelParams& m,
                               const NoiseBatch& validation, int steps,
                               const PolicyObserver& observer) {
  const TimeGrid grid(m.T, cfg.steps);
  const std::vector<Matrix> p_val = externality_paths(m, grid, r, validation, cfg.sim);
  auto validate_objective = [&](const PolicyNet& pol) {
    try {
      return estimate_objective(simulate(pol, p_val, validation, m, grid, cfg.sim), m, cfg.sim);
    } catch (const SimulationError& e) {
      throw TrainingError(std::string("policy validation: ") + e.what(), validation.seed);
    } catch (const DomainError& e) {
      throw TrainingError(std::string("policy validation: ") + e.what(), validation.seed);
    }
  };

  PolicyTrainResult res;
  res.steps = steps;
  res.initial_validation = validate_objective(state.policy);
  res.best_validation = res.initial_validation;
  if (observer) observer(0, state.policy);
  if (steps == 0) return res;

  PolicyNet best = state.policy;
  const std::uint64_t noise_root = derive_seed(cfg.seed, "noise");
  for (int step = 1; step <= steps; ++step) {
    const std::uint64_t batch_seed =
        derive_seed(noise_root, static_cast<std::uint64_t>(state.j),
                    static_cast<std::uint64_t>(step));
    ObjectiveGrad og;
    try {
      const NoiseBatch noise = sample_noise(grid, cfg.scenarios, cfg.paths_per_scenario,
                                            m.n, m.d, batch_seed);
      const auto p = externality_paths(m, grid, r, noise, cfg.sim);
      og = objective_gradient(state.policy, p, noise, m, grid, cfg.sim, cfg.threads);
    } catch (const SimulationError& e) {
      throw TrainingError(std::string("policy training: ") + e.what(), batch_seed);
    } catch (const DomainError& e) {
      throw TrainingError(std::string("policy training: ") + e.what(), batch_seed);
    }
    bool finite = std::isfinite(og.value);
    for (const auto& g : og.grads) finite = finite && g.allFinite();
    if (!finite) throw TrainingError("policy training: non-finite objective or gradient", batch_seed);
    for (auto& g : og.grads) g = -g;  // ascent
    adam_step(state.policy.net, og.grads, state.policy_adam);
    if (observer) observer(step, state.policy);

    if (step % cfg.validation_every == 0 || step == steps) {
      const double v = validate_objective(state.policy);
      if (!std::isfinite(v)) throw TrainingError("policy validation: non-finite objective", batch_seed);
      if (v > res.best_validation) {
        res.best_validation = v;
        res.best_step = step;
        best = state.policy;
      }
    }
  }
  state.policy = std::move(best);
  return res;
}

RegressionData regression_data(const PathBatch& paths, const ModelParams& m) {
  const int N = paths.grid.steps;
  const int S = paths.scenarios;
  const int Q = paths.paths_per_scenario;
  RegressionData data;
  data.inputs.resize(static_cast<Eigen::Index>(S) * N, 1 + m.d);
  data.labels.resize(static_cast<Eigen::Index>(S) * N, m.d);
  Eigen::Map<const Matrix> Gamma(m.phi_matrix.data(), m.n, m.d);  // column-major view of d x n row-major
  for (int i = 1; i <= N; ++i) {
    const Matrix e = paths.k[i] * Gamma;  // total_paths x d
    for (int s = 0; s < S; ++s) {
      const Eigen::Index row = static_cast<Eigen::Index>(i - 1) * S + s;
      data.inputs(row, 0) = paths.grid.t(i) / paths.grid.T;
      data.inputs.block(row, 1, 1, m.d) = paths.p[i].row(s);
      data.labels.row(row) = e.middleRows(static_cast<Eigen::Index>(s) * Q, Q).colwise().mean();
    }
  }
  return data;
}

RegressionResult train_regression(const RegressionData& data, IterationState& state,
                                  const SolverConfig& cfg) {
  if (data.inputs.rows() == 0) throw ContractViolation("train_regression: no data");
  RegressionResult res;
  const Mlp constant = constant_variant(state.regression, data.labels);
  res.constant_mse = regression_mse(constant, data);
  res.initial_mse = regression_mse(state.regression, data);
  if (res.constant_mse < res.initial_mse) {
    state.regression = constant;
    state.regression_adam = AdamState{};
    state.regression_adam.learning_rate = cfg.regression_learning_rate;
  }
  Mlp best = state.regression;
  res.best_mse = std::min(res.initial_mse, res.constant_mse);

  const double rows = static_cast<double>(data.inputs.rows());
  for (int step = 0; step < cfg.regression_steps; ++step) {
    ad::Tape tape;
    const MlpLeaves leaves = bind(tape, state.regression);
    const ad::Var out = forward(tape, state.regression, leaves, tape.constant(data.inputs));
    const ad::Var err = ad::sub(tape, out, tape.constant(data.labels));
    const ad::Var loss = ad::scale(tape, ad::sum_all(tape, ad::mul(tape, err, err)), 1.0 / rows);
    const double value = tape.value(loss)(0, 0);
    if (!std::isfinite(value))
      throw TrainingError("regression training: non-finite loss", cfg.seed);
    if (value < res.best_mse) {
      res.best_mse = value;
      best = state.regression;
    }
    tape.backward(loss);
    adam_step(state.regression, gradients(tape, leaves), state.regression_adam);
  }
  const double final_mse = regression_mse(state.regression, data);
  if (final_mse < res.best_mse) {
    res.best_mse = final_mse;
    best = state.regression;
  }
  state.regression = std::move(best);
  return res;
}

RField fictitious_update(const IterationState& state, const SolverConfig& cfg) {
  if (state.history.empty()) throw ContractViolation("fictitious_update: empty history");
  if (cfg.fictitious) return state.history;
  RField latest(state.history.dim(), state.history.horizon());
  const auto& last = state.history.members().back();
  if (last) {
    latest.push(*last);
  } else {
    latest.push_zero();
  }
  return latest;
}

StopCheck check_stop(const std::vector<Matrix>& p_new, const std::vector<Matrix>& p_old,
                     double epsilon) {
  if (p_new.size() != p_old.size() || p_new.empty())
    throw ContractViolation("check_stop: path sets differ in length");
  StopCheck out;
  for (std::size_t i = 1; i < p_new.size(); ++i) {
    if (p_new[i].rows() != p_old[i].rows() || p_new[i].cols() != p_old[i].cols())
      throw ContractViolation("check_stop: shape mismatch at step " + std::to_string(i));
    out.metric += (p_new[i] - p_old[i]).squaredNorm() / static_cast<double>(p_new[i].rows());
  }
  out.stop = out.metric < epsilon;
  return out;
}

void write_iterations_csv(const std::vector<IterationRecord>& trace,
                          const std::filesystem::path& file, const std::string& manifest,
                          bool zero_wall_time) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open " + file.string());
  out.precision(17);
  if (!manifest.empty()) out << "# " << manifest << '\n';
  out << "j,stop_metric,validation_objective,wall_time\n";
  for (const auto& r : trace)
    out << r.j << ',' << r.stop_metric << ',' << r.validation_objective << ','
        << (zero_wall_time ? 0.0 : r.wall_time) << '\n';
}

namespace {

void write_timing_csv(const std::vector<IterationRecord>& trace,
                      const std::filesystem::path& file, const std::string& manifest) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open " + file.string());
  if (!manifest.empty()) out << "# " << manifest << '\n';
  out << "j,wall_time,regression_mse\n";
  out.precision(17);
  for (const auto& r : trace) out << r.j << ',' << r.wall_time << ',' << r.regression_mse << '\n';
}

}  // namespace

Solution solve(const ModelParams& m, const SolverConfig& cfg,
               const IterationObserver& on_iteration) {
  m.validate();
  cfg.validate();
  const TimeGrid grid(m.T, cfg.steps);
  const auto start = Clock::now();
  const double eps = cfg.effective_epsilon(m.d);

  const NoiseBatch validation =
      sample_noise(grid, cfg.validation_scenarios, cfg.validation_paths_per_scenario, m.n,
                   m.d, derive_seed(cfg.seed, "validation-noise"));
  const std::uint64_t regression_root = derive_seed(cfg.seed, "regression-noise");

  IterationState state = initial_state(m, cfg);
  RField field = fictitious_update(state, cfg);  // R^0 = 0
  state.validation_p = externality_paths(m, grid, field, validation, cfg.sim);

  const bool write = !cfg.output_dir.empty();
  if (write) std::filesystem::create_directories(cfg.output_dir / "checkpoints");

  Solution sol;
  sol.epsilon = eps;
  for (int j = 1; j <= cfg.max_outer_iterations; ++j) {
    state.j = j;
    const int steps =
        (j == 1 && cfg.first_policy_steps > 0) ? cfg.first_policy_steps : cfg.policy_steps;
    const PolicyTrainResult pr = train_policy(field, state, cfg, m, validation, steps);

    const std::uint64_t reg_seed = derive_seed(regression_root, static_cast<std::uint64_t>(j));
    const NoiseBatch reg_noise =
        sample_noise(grid, cfg.scenarios, cfg.paths_per_scenario, m.n, m.d, reg_seed);
    PathBatch paths;
    try {
      paths = simulate(state.policy, field, reg_noise, m, grid, cfg.sim);
    } catch (const SimulationError& e) {
      throw TrainingError(std::string("regression sample: ") + e.what(), reg_seed);
    }
    const RegressionResult rr = train_regression(regression_data(paths, m), state, cfg);
    state.history.push(state.regression);
    field = fictitious_update(state, cfg);

    std::vector<Matrix> p_new = externality_paths(m, grid, field, validation, cfg.sim);
    const StopCheck sc = check_stop(p_new, state.validation_p, eps);
    state.validation_p = std::move(p_new);

    IterationRecord rec;
    rec.j = j;
    rec.stop_metric = sc.metric;
    rec.validation_objective = pr.best_validation;
    rec.regression_mse = rr.best_mse;
    rec.wall_time = seconds_since(start);
    sol.trace.push_back(rec);
    if (on_iteration) on_iteration(rec);

    if (write) {
      const auto ck = cfg.output_dir / "checkpoints" / ("iter_" + std::to_string(j));
      std::filesystem::create_directories(ck);
      save_weights(state.policy.net, ck / "policy.mfgnet");
      save_weights(state.regression, ck / "regression.mfgnet");
      write_iterations_csv(sol.trace, cfg.output_dir / "iterations.csv", cfg.manifest,
                           cfg.deterministic);
      if (cfg.deterministic)
        write_timing_csv(sol.trace, cfg.output_dir / "timing.csv", cfg.manifest);
    }
    if (sc.stop) {
      sol.converged = true;
      break;
    }
  }
  sol.policy = state.policy;
  sol.field = field;
  if (write) save_solution(sol, cfg.output_dir);
  return sol;
}

// ---- persistence ----------------------------------------------------------

namespace {
constexpr const char* kFieldMagic = "MFGRFIELD v1";
}

void save_solution(const Solution& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "rfield");
  save_weights(s.policy.net, dir / "policy.mfgnet");
  std::ofstream out(dir / "rfield.txt");
  if (!out) throw std::runtime_error("cannot write " + (dir / "rfield.txt").string());
  out << kFieldMagic << '\n';
  out << "mode " << (s.field.mode() == RField::Mode::kLiteral ? "literal" : "averaged") << '\n';
  out.precision(17);
  out << "consumption_margin " << s.policy.consumption_margin << '\n';
  out << "members " << s.field.size() << '\n';
  for (std::size_t i = 0; i < s.field.size(); ++i) {
    const auto& mem = s.field.members()[i];
    if (!mem) {
      out << "zero\n";
      continue;
    }
    const std::string name = "rfield/b_" + std::to_string(i) + ".mfgnet";
    save_weights(*mem, dir / name);
    out << name << '\n';
  }
}

Solution load_solution(const std::filesystem::path& dir, const ModelParams& m) {
  const auto file = dir / "rfield.txt";
  std::ifstream in(file);
  if (!in) throw std::runtime_error("missing " + file.string());
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string {
    if (!std::getline(in, line)) throw ParseError("truncated rfield.txt", line_no + 1, 1);
    ++line_no;
    return line;
  };
  if (next() != kFieldMagic) {
    if (line.rfind("MFGRFIELD v", 0) == 0) throw VersionError("unsupported " + line);
    throw ParseError("missing MFGRFIELD header", 1, 1);
  }
  auto value_of = [&](const std::string& key) {
    const std::string l = next();
    if (l.rfind(key + " ", 0) != 0) throw ParseError("expected '" + key + "'", line_no, 1);
    return l.substr(key.size() + 1);
  };
  const std::string mode = value_of("mode");
  if (mode != "averaged" && mode != "literal")
    throw ParseError("unknown mode '" + mode + "'", line_no, 6);
  Solution s;
  s.policy.net = load_weights(dir / "policy.mfgnet");
  if (s.policy.net.input_dim() != 1 + m.d + m.n || s.policy.net.output_dim() != m.n + 1)
    throw ContractViolation("policy.mfgnet does not match the model dimensions");
  try {
    s.policy.consumption_margin = std::stod(value_of("consumption_margin"));
    s.field = RField(m.d, m.T, mode == "literal" ? RField::Mode::kLiteral
                                                  : RField::Mode::kAveraged);
    const long count = std::stol(value_of("members"));
    for (long i = 0; i < count; ++i) {
      const std::string name = next();
      if (name == "zero") {
        s.field.push_zero();
      } else {
        s.field.push(load_weights(dir / name));
      }
    }
  } catch (const std::invalid_argument&) {
    throw ParseError("bad number in rfield.txt", line_no, 1);
  }
  return s;
}

}  // namespace mfg
