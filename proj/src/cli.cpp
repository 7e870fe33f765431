#include "mfg/cli.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

#include "mfg/analysis.hpp"
#include "mfg/config.hpp"
#include "mfg/errors.hpp"
#include "mfg/fixedpoint.hpp"
#include "mfg/parallel.hpp"
#include "mfg/random.hpp"

namespace fs = std::filesystem;

namespace mfg {
namespace {

// Loads and validates; prints the diagnostic and returns nullopt on failure.
std::optional<RunConfig> read_config(const fs::path& path, std::ostream& err) {
  if (!fs::exists(path)) {
    err << "error: config file not found: " << path.string() << '\n';
    return std::nullopt;
  }
  try {
    return load_config(path);
  } catch (const ParseError& e) {
    err << "error: " << path.string() << ": " << e.what() << '\n';
  } catch (const ConfigError& e) {
    err << "error: " << path.string() << ": " << e.what() << '\n';
  }
  return std::nullopt;
}

std::string versions() {
  std::string s = std::string("mfg ") + kVersion;
  s += "; eigen " + std::to_string(EIGEN_WORLD_VERSION) + "." +
       std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION);
#if defined(__clang__)
  s += "; clang " __clang_version__;
#elif defined(__GNUC__)
  s += "; gcc " __VERSION__;
#endif
  return s;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

std::string fmt_time(double t) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), t);
  return std::string(buf, res.ptr);
}

std::ofstream open_csv(const fs::path& file, const std::string& manifest) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.precision(17);
  out << "# " << manifest << '\n';
  return out;
}

std::string suffixed(const std::string& base, int j, int count) {
  return count == 1 ? base : base + std::to_string(j + 1);
}

}  // namespace

// ---- solve ----------------------------------------------------------------

int cmd_solve(const fs::path& config_path, const RunOptions& opt, std::ostream& out,
              std::ostream& err) {
  auto loaded = read_config(config_path, err);
  if (!loaded) return kExitConfig;
  RunConfig cfg = *loaded;
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.out) cfg.output_dir = opt.out->string();
  cfg.solver.seed = cfg.seed;
  cfg.solver.deterministic = opt.deterministic;
  cfg.solver.threads = opt.deterministic ? 1 : opt.threads.value_or(default_threads());
  if (cfg.solver.threads < 1) {
    err << "error: --threads must be >= 1\n";
    return kExitConfig;
  }
  cfg.solver.output_dir = cfg.output_dir;
  cfg.solver.manifest = manifest_line(cfg);

  try {
    fs::create_directories(cfg.solver.output_dir);
    const std::string text = serialize_config(cfg);
    write_text(cfg.solver.output_dir / "config.toml", text);
    write_text(cfg.solver.output_dir / "manifest.txt",
               cfg.solver.manifest + "\n" + versions() + "\nthreads=" +
                   std::to_string(cfg.solver.threads) + "\n\n" + text);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  out << cfg.solver.manifest << '\n';
  out << "epsilon = " << cfg.solver.effective_epsilon(cfg.model.d) << '\n';
  try {
    const Solution sol = solve(cfg.model, cfg.solver, [&](const IterationRecord& r) {
      out << "iteration " << r.j << ": stop_metric = " << r.stop_metric
          << ", validation_objective = " << r.validation_objective
          << ", regression_mse = " << r.regression_mse << '\n';
      out.flush();
    });
    out << (sol.converged ? "stopped by the externality criterion"
                          : "reached the iteration limit without meeting the criterion")
        << " after " << sol.trace.size() << " iterations\n";
    out << "output: " << cfg.solver.output_dir.string() << '\n';
  } catch (const TrainingError& e) {
    err << "numeric abort: " << e.what() << "\nbatch seed: " << e.batch_seed() << '\n';
    return kExitNumeric;
  } catch (const SimulationError& e) {
    err << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DomainError& e) {
    err << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

// ---- report ---------------------------------------------------------------

Histogram histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw ContractViolation("histogram: bins must be >= 1");
  Histogram h;
  double lo = 0.0, hi = 1.0;
  if (!values.empty()) {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  h.edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * b / bins;
  h.edges[bins] = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[b];
  }
  return h;
}

int cmd_report(const fs::path& solution_dir, const RunOptions& opt, std::ostream& out,
               std::ostream& err) {
  for (const char* f : {"config.toml", "policy.mfgnet", "rfield.txt"}) {
    if (!fs::exists(solution_dir / f)) {
      err << "error: missing artifact " << (solution_dir / f).string() << '\n';
      return kExitConfig;
    }
  }
  auto loaded = read_config(solution_dir / "config.toml", err);
  if (!loaded) return kExitConfig;
  RunConfig cfg = *loaded;
  if (opt.seed) cfg.seed = *opt.seed;
  const ModelParams& m = cfg.model;

  Solution sol;
  try {
    sol = load_solution(solution_dir, m);
  } catch (const std::exception& e) {
    err << "error: cannot load solution: " << e.what() << '\n';
    return kExitConfig;
  }

  const fs::path dir = opt.out.value_or(solution_dir);
  const std::string manifest = manifest_line(cfg);
  const ReportConfig& rc = cfg.report;
  const TimeGrid grid(m.T, cfg.solver.steps);
  const std::uint64_t eval_seed = derive_seed(cfg.seed, "evaluation-noise");

  try {
    fs::create_directories(dir);
    const NoiseBatch noise = sample_noise(grid, rc.evaluation_scenarios,
                                          rc.evaluation_paths_per_scenario, m.n, m.d,
                                          eval_seed);
    const PathBatch paths = simulate(sol.policy, sol.field, noise, m, grid, cfg.solver.sim);
    const int steps = grid.steps;
    const int M = paths.total_paths();
    const int S = paths.scenarios;

    {
      auto f = open_csv(dir / "pollution_quantiles.csv", manifest);
      f << 't';
      for (int j = 0; j < m.d; ++j)
        f << ',' << suffixed("q05", j, m.d) << ',' << suffixed("mean", j, m.d) << ','
          << suffixed("q95", j, m.d);
      f << '\n';
      std::vector<Matrix> q(m.d);
      for (int j = 0; j < m.d; ++j) q[j] = empirical_quantiles(paths.p, {0.05, 0.95}, j);
      for (int i = 0; i <= steps; ++i) {
        f << grid.t(i);
        for (int j = 0; j < m.d; ++j)
          f << ',' << q[j](i, 0) << ',' << paths.p[i].col(j).mean() << ',' << q[j](i, 1);
        f << '\n';
      }
    }

    {
      auto f = open_csv(dir / "scenario_pair.csv", manifest);
      f << "t,scenario";
      for (int j = 0; j < m.d; ++j) f << ',' << suffixed("p", j, m.d);
      for (int i = 0; i < m.n; ++i) f << ",b" << i + 1;
      f << ",mean_production,mean_consumption\n";
      for (int s : rc.pair) {
        for (int i = 0; i <= steps; ++i) {
          Vec p(m.d);
          for (int j = 0; j < m.d; ++j) p[j] = paths.p[i](s, j);
          const Vec b = productivity(m, p);
          double prod = 0.0, cons = 0.0;
          Vec k(m.n);
          for (int q = 0; q < paths.paths_per_scenario; ++q) {
            const int row = s * paths.paths_per_scenario + q;
            for (int l = 0; l < m.n; ++l) k[l] = paths.k[i](row, l);
            prod += production(m, k, p);
            cons += paths.c[i](row, 0);
          }
          f << grid.t(i) << ',' << s;
          for (double v : p) f << ',' << v;
          for (double v : b) f << ',' << v;
          f << ',' << prod / paths.paths_per_scenario << ','
            << cons / paths.paths_per_scenario << '\n';
        }
      }
    }

    {
      auto f = open_csv(dir / "sector_means.csv", manifest);
      f << 't';
      for (int l = 0; l < m.n; ++l) f << ",mean_k" << l + 1;
      for (int l = 0; l < m.n; ++l) f << ",share_k" << l + 1;
      for (int l = 0; l < m.n; ++l) f << ",mean_a" << l + 1;
      f << '\n';
      for (int i = 0; i <= steps; ++i) {
        const Eigen::RowVectorXd mk = paths.k[i].colwise().mean();
        const Eigen::RowVectorXd ma = paths.a[i].colwise().mean();
        // mean over paths of each path's sector share
        const Eigen::VectorXd total = paths.k[i].rowwise().sum();
        f << grid.t(i);
        for (int l = 0; l < m.n; ++l) f << ',' << mk(l);
        for (int l = 0; l < m.n; ++l)
          f << ',' << (paths.k[i].col(l).array() / total.array()).mean();
        for (int l = 0; l < m.n; ++l) f << ',' << ma(l);
        f << '\n';
      }
    }

    for (double t : rc.times) {
      if (t > m.T * (1 + 1e-12)) {
        out << "skipping distribution at t = " << t << " beyond the horizon\n";
        continue;
      }
      const int i = std::clamp(static_cast<int>(std::lround(t / grid.dt())), 0, steps);
      auto f = open_csv(dir / ("distributions_t" + fmt_time(t) + ".csv"), manifest);
      f << "variable,bin_lo,bin_hi,count\n";
      for (const char* var : {"a", "k"}) {
        const Matrix& src = var[0] == 'a' ? paths.a[i] : paths.k[i];
        for (int l = 0; l < m.n; ++l) {
          std::vector<double> vals(src.col(l).data(), src.col(l).data() + M);
          const Histogram h = histogram(vals, rc.histogram_bins);
          for (int b = 0; b < rc.histogram_bins; ++b)
            f << var << l + 1 << ',' << h.edges[b] << ',' << h.edges[b + 1] << ','
              << h.counts[b] << '\n';
        }
      }
    }

    write_paths_csv(paths, dir / "paths.csv", manifest);
    out << manifest << '\n';
    out << "evaluation batch: " << S << " scenarios x " << paths.paths_per_scenario
        << " paths, objective " << estimate_objective(paths, m, cfg.solver.sim) << '\n';
    out << "mean p at T: " << paths.p[steps].colwise().mean() << '\n';
    out << "output: " << dir.string() << '\n';
  } catch (const SimulationError& e) {
    err << "numeric abort: " << e.what() << "\nbatch seed: " << eval_seed << '\n';
    return kExitNumeric;
  } catch (const DomainError& e) {
    err << "numeric abort: " << e.what() << "\nbatch seed: " << eval_seed << '\n';
    return kExitNumeric;
  } catch (const ContractViolation& e) {
    err << "error: solution does not match its configuration: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

// ---- check ----------------------------------------------------------------

int cmd_check(const fs::path& config_path, const RunOptions& opt, std::ostream& out,
              std::ostream& err) {
  auto loaded = read_config(config_path, err);
  if (!loaded) return kExitConfig;
  const RunConfig& cfg = *loaded;
  if (!cfg.analysis) {
    err << "error: " << config_path.string() << " has no [analysis] section\n";
    return kExitConfig;
  }
  const AnalysisConfig& a = *cfg.analysis;
  try {
    const LipschitzConstants lc =
        a.lipschitz ? *a.lipschitz : lipschitz_from_model(cfg.model, a.box);
    const ContractionReport cr = contraction_constants(lc);
    std::optional<MonotonicityReport> mono;
    std::optional<LambdaBoundReport> lambda;
    if (a.monotonicity) {
      mono = check_monotonicity_example(*a.monotonicity);
      lambda = check_lambda_bound(*a.monotonicity, cfg.model.utility);
    }
    const MonotonicityReport* mp = mono ? &*mono : nullptr;
    const LambdaBoundReport* lp = lambda ? &*lambda : nullptr;
    if (!a.lipschitz) out << "constants estimated from the model over the sampling box\n";
    const std::string text = format_report(cr, mp, lp);
    out << text;
    if (opt.out) {
      fs::create_directories(*opt.out);
      write_text(*opt.out / "check_report.txt", "# " + manifest_line(cfg) + "\n" + text);
      write_report_csv(cr, mp, lp, *opt.out / "check_report.csv", manifest_line(cfg));
    }
    bool holds = false;
    switch (a.condition) {
      case CheckCondition::kContraction: holds = cr.verdict; break;
      case CheckCondition::kMonotonicity: holds = mono->verdict; break;
      case CheckCondition::kLambdaBound: holds = lambda->verdict; break;
      case CheckCondition::kAll: holds = cr.verdict && mono->verdict && lambda->verdict; break;
    }
    out << "requested condition: " << (holds ? "HOLDS" : "FAILS") << '\n';
    return holds ? kExitOk : kExitFailed;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::runtime_error& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitConfig;
}

// ---- selftest -------------------------------------------------------------

namespace {

ModelParams selftest_model() {
  ModelParams m = ModelParams::table1();
  m.T = 1.0;
  return m;
}

std::string root_finder_property() {
  const ModelParams m = ModelParams::table1();
  std::mt19937_64 rng(derive_seed(11, "selftest-xi"));
  std::uniform_real_distribution<double> uk(0.05, 2.0), up(0.0, 2.0), uy(0.0, 5.0);
  for (int s = 0; s < 2000; ++s) {
    const Vec k{uk(rng), uk(rng)};
    const Vec p{up(rng)};
    const Vec y{uy(rng), uy(rng)};
    const XiSolution x = solve_xi(m, k, p, y);
    if (!(std::abs(x.residual) <= kXiTolerance && x.xi > 0.0 && x.xi < x.production))
      return "sample " + std::to_string(s) + ": residual " + std::to_string(x.residual);
  }
  return {};
}

std::string adam_property() {
  Matrix w(1, 4);
  w << 0.5, -1.0, 2.0, 0.0;
  Matrix g(1, 4);
  g << 0.3, -2.0, 1e-3, 0.0;
  const Matrix w0 = w;
  AdamState st;
  st.learning_rate = 0.01;
  adam_step({&w}, {g}, st);
  // first step: m_hat = g, v_hat = g^2
  for (int i = 0; i < 4; ++i) {
    const double expect = w0(0, i) - 0.01 * g(0, i) / (std::abs(g(0, i)) + st.epsilon);
    if (std::abs(w(0, i) - expect) > 1e-12)
      return "entry " + std::to_string(i) + " differs from the first-step reference";
  }
  return {};
}

std::string quantile_property() {
  std::vector<Matrix> vals(2, Matrix(11, 1));
  for (int r = 0; r < 11; ++r) {
    vals[0](r, 0) = (r * 7) % 11;  // permutation of 0..10
    vals[1](r, 0) = 3.0;
  }
  const Matrix q = empirical_quantiles(vals, {0.05, 0.25, 0.5, 0.95});
  const double expect[] = {0.5, 2.5, 5.0, 9.5};
  for (int l = 0; l < 4; ++l) {
    if (std::abs(q(0, l) - expect[l]) > 1e-12) return "order statistics interpolation";
    if (q(1, l) != 3.0) return "constant sample";
  }
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::vector<Matrix> rnd(1, Matrix(257, 1));
  for (int r = 0; r < 257; ++r) rnd[0](r, 0) = nd(rng);
  const Matrix qr = empirical_quantiles(rnd, {0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99});
  for (int l = 1; l < qr.cols(); ++l)
    if (qr(0, l) < qr(0, l - 1)) return "quantiles not monotone in the level";
  return {};
}

}  // namespace

SelftestProperty autodiff_property(GradientFn gradient) {
  return {"autodiff.objective_gradient", [gradient]() -> std::string {
            const ModelParams m = selftest_model();
            const TimeGrid grid(m.T, 2);
            const NoiseBatch noise = sample_noise(grid, 2, 2, m.n, m.d, 21);
            const RField zero = [&] {
              RField r(m.d, m.T);
              r.push_zero();
              return r;
            }();
            const std::vector<Matrix> p = externality_paths(m, grid, zero, noise);
            PolicyNet policy = PolicyNet::make(m, {4}, 3);
            const ObjectiveGrad og = gradient(policy, p, noise, m, grid, SimOptions{});
            const auto tensors = policy.net.tensors();
            if (og.grads.size() != tensors.size()) return "gradient tensor count";
            const double h = 1e-6;
            double num = 0.0, den = 0.0;
            for (std::size_t t = 0; t < tensors.size(); ++t) {
              Matrix& w = *tensors[t];
              for (Eigen::Index i = 0; i < w.size(); ++i) {
                const double orig = w.data()[i];
                w.data()[i] = orig + h;
                const double up =
                    estimate_objective(simulate(policy, p, noise, m, grid), m);
                w.data()[i] = orig - h;
                const double dn =
                    estimate_objective(simulate(policy, p, noise, m, grid), m);
                w.data()[i] = orig;
                const double fd = (up - dn) / (2 * h);
                const double ad = og.grads[t].data()[i];
                num += (ad - fd) * (ad - fd);
                den += fd * fd;
              }
            }
            const double rel = std::sqrt(num / std::max(den, 1e-300));
            if (rel > 1e-4) {
              std::ostringstream os;
              os << "relative error " << rel << " against central differences";
              return os.str();
            }
            return {};
          }};
}

std::vector<SelftestProperty> default_selftest_properties() {
  return {
      autodiff_property([](const PolicyNet& pol, const std::vector<Matrix>& p,
                           const NoiseBatch& noise, const ModelParams& m, const TimeGrid& g,
                           const SimOptions& o) {
        return objective_gradient(pol, p, noise, m, g, o);
      }),
      {"root_finder.solve_xi", root_finder_property},
      {"adam.first_step", adam_property},
      {"quantiles.order_statistics", quantile_property},
  };
}

int run_selftest(const std::vector<SelftestProperty>& props, std::ostream& out,
                 std::ostream& err) {
  std::vector<std::string> failed;
  for (const auto& prop : props) {
    std::string msg;
    try {
      msg = prop.run();
    } catch (const std::exception& e) {
      msg = std::string("threw: ") + e.what();
    }
    if (msg.empty()) {
      out << "PASS " << prop.name << '\n';
    } else {
      out << "FAIL " << prop.name << ": " << msg << '\n';
      failed.push_back(prop.name);
    }
  }
  if (failed.empty()) return kExitOk;
  err << "failing properties:";
  for (const auto& n : failed) err << ' ' << n;
  err << '\n';
  return kExitFailed;
}

int cmd_selftest(std::ostream& out, std::ostream& err) {
  return run_selftest(default_selftest_properties(), out, err);
}

}  // namespace mfg
