// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion
// numbers as arguments to run a subset.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mfg/analysis.hpp"
#include "mfg/cli.hpp"
#include "mfg/config.hpp"
#include "mfg/fixedpoint.hpp"
#include "mfg/mlp.hpp"
#include "mfg/model.hpp"
#include "mfg/sim.hpp"

using namespace mfg;
namespace fs = std::filesystem;
using Big = boost::multiprecision::cpp_bin_float_50;
using Clock = std::chrono::steady_clock;

namespace {

// ---- tolerances ------------------------------------------------------------

constexpr int kRootSamples = 10000;
constexpr double kRootResidual = 1e-10;
constexpr double kRootSeconds = 5.0;
constexpr double kFocResidual = 1e-8;
constexpr int kMaximalityPoints = 1000;
constexpr int kMaximalityProbes = 200;
constexpr int kGradientPoints = 1000;
constexpr double kImplicitGradRel = 1e-5;
constexpr double kPipelineGradRel = 1e-4;
constexpr double kAdamAbs = 1e-12;
constexpr double kC1Rel = 1e-12;
constexpr double kExactResidualPerDt = 5.0;
constexpr double kHalvingRatio = 0.6;
constexpr double kTrainedResidual = 0.05;
constexpr double kDpRel = 0.01;
constexpr double kDpSeconds = 300.0;
constexpr double kTable1Seconds = 1800.0;

const fs::path kConfigs = MFG_CONFIG_DIR;
const fs::path kWork = MFG_ACCEPTANCE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double norm(const Vec& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Reference-model root in extended precision by bisection.
long double xi_oracle(const Vec& k, const Vec& p, const Vec& y) {
  using LD = long double;
  const LD b1 = 1.0L / (1.0L + std::exp(0.5L * p[0] - 0.1L));
  const LD F = std::pow(b1 * k[0] + 0.4L * k[1], 0.3L) + 1e-6L;
  auto f = [&](LD xi) {
    const LD up = 0.8L * std::pow(F - xi, -0.2L);
    return xi - std::exp((y[0] - up) / 0.1L - 1.0L) - std::exp((y[1] - up) / 0.1L - 1.0L);
  };
  LD lo = 0.0L, hi = F;
  for (int i = 0; i < 200; ++i) {
    const LD mid = 0.5L * (lo + hi);
    (f(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5L * (lo + hi);
}

struct Point {
  Vec k, p, y;
};

// k log-uniform on [1e-3, 10], p uniform on [0, 5], y uniform on [0, 5]^2.
std::vector<Point> sample_points(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> lk(std::log(1e-3), std::log(10.0)), up(0.0, 5.0);
  std::vector<Point> pts(count);
  for (auto& pt : pts) {
    pt.k = {std::exp(lk(rng)), std::exp(lk(rng))};
    pt.p = {up(rng)};
    pt.y = {up(rng), up(rng)};
  }
  return pts;
}

// n = 1, one sector with b = 1, no noise and no interaction.
ModelParams toy_model() {
  ModelParams m = ModelParams::table1();
  m.n = 1;
  m.T = 1.0;
  m.delta = {0.1};
  m.sigma = {0.0};
  m.gamma = {0.0};
  m.phi_matrix = {0.5};
  m.emission_coeff = {0.0};
  m.k0 = {0.2};
  m.production.sectors = {SectorProductivity{1.0, 0.0, {}, 0.0}};
  return m;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("missing " + file.string());
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
    rows.push_back(f);
  }
  return rows;
}

int column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw std::runtime_error("no column " + name);
}

// ---- 1. root finder ----------------------------------------------------------

Outcome root_finder() {
  const ModelParams m = ModelParams::table1();
  const auto pts = sample_points(kRootSamples, 101);
  const auto t0 = Clock::now();
  double worst = 0.0;
  int bracket_fail = 0;
  for (const auto& pt : pts) {
    const XiSolution s = solve_xi(m, pt.k, pt.p, pt.y);
    worst = std::max(worst, std::abs(xi_residual(m, s.production, pt.y, s.xi)));
    if (!(s.xi > 0.0 && s.xi < s.production)) ++bracket_fail;
  }
  const double secs = seconds_since(t0);
  return {worst <= kRootResidual && bracket_fail == 0 && secs < kRootSeconds,
          "max |f(xi)| = " + fmt(worst) + ", bracket violations " +
              std::to_string(bracket_fail) + ", " + fmt(secs) + " s for " +
              std::to_string(kRootSamples) + " points"};
}

// ---- 2. first-order condition and maximality -----------------------------------

Outcome foc_identity() {
  const ModelParams m = ModelParams::table1();
  const auto pts = sample_points(kRootSamples, 101);
  double worst = 0.0, worst_xi = 0.0;
  for (const auto& pt : pts) {
    const XiSolution s = solve_xi(m, pt.k, pt.p, pt.y);
    const Vec a = feedback_control(m, pt.k, pt.p, pt.y);
    const double c = s.production - s.xi;
    const double c_sum = s.production - (a[0] + a[1]);
    for (int i = 0; i < 2; ++i) {
      worst = std::max(worst, std::abs(pt.y[i] - m.utility.prime(c_sum) -
                                       m.theta * (std::log(a[i]) + 1.0)));
      worst_xi = std::max(worst_xi, std::abs(pt.y[i] - m.utility.prime(c) -
                                             m.theta * (std::log(a[i]) + 1.0)));
    }
  }

  std::mt19937_64 rng(202);
  std::exponential_distribution<double> ex(1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  int violations = 0;
  for (int q = 0; q < kMaximalityPoints; ++q) {
    const Point& pt = pts[q];
    const Vec a = feedback_control(m, pt.k, pt.p, pt.y);
    const double F = production(m, pt.k, pt.p);
    const double h_star = hamiltonian(m, a, pt.k, pt.p, pt.y);
    const double slack = 1e-12 * std::max(1.0, std::abs(h_star));
    for (int r = 0; r < kMaximalityProbes; ++r) {
      Vec b(2);
      if (r % 2 == 0) {
        // uniform on the open simplex {b > 0, b1 + b2 < F}
        const double e0 = ex(rng), e1 = ex(rng), e2 = ex(rng), sum = e0 + e1 + e2;
        b = {F * e0 / sum, F * e1 / sum};
      } else {
        // local perturbation of the optimum
        const double scale = std::pow(10.0, -1.0 - 5.0 * (r % 10) / 10.0);
        b = {a[0] * (1.0 + scale * nd(rng)), a[1] * (1.0 + scale * nd(rng))};
        if (b[0] <= 0.0 || b[1] <= 0.0 || b[0] + b[1] >= F) continue;
      }
      if (hamiltonian(m, b, pt.k, pt.p, pt.y) > h_star + slack) ++violations;
    }
  }
  return {worst <= kFocResidual && violations == 0,
          "max FOC residual = " + fmt(worst) + " with c = F - sum a (" + fmt(worst_xi) +
              " with c = F - xi at the root tolerance), maximality violations " + std::to_string(violations) +
              " over " + std::to_string(kMaximalityPoints) + " points"};
}

// ---- 3. gradient bounds and implicit gradients ----------------------------------

Outcome gradient_bounds() {
  const ModelParams m = ModelParams::table1();
  const auto pts = sample_points(kGradientPoints, 303);
  int bound_fail = 0;
  double worst = 0.0;
  for (const auto& pt : pts) {
    const XiGradient g = xi_gradient(m, pt.k, pt.p, pt.y);
    const ProductionGrad pg = production_grad(m, pt.k, pt.p);
    if (norm(g.dk) > norm(pg.dk) * (1.0 + 1e-12)) ++bound_fail;
    if (norm(g.dp) > norm(pg.dp) * (1.0 + 1e-12)) ++bound_fail;

    auto check = [&](const Vec& analytic, const Vec& base, auto shifted) {
      Vec fd(base.size());
      for (std::size_t i = 0; i < base.size(); ++i) {
        const double h = 1e-5 * std::max(1e-3, std::abs(base[i]));
        fd[i] = static_cast<double>((shifted(i, h) - shifted(i, -h)) / (2.0L * h));
      }
      Vec diff(base.size());
      for (std::size_t i = 0; i < base.size(); ++i) diff[i] = analytic[i] - fd[i];
      if (norm(fd) > 1e-12) worst = std::max(worst, norm(diff) / norm(fd));
    };
    check(g.dk, pt.k, [&](std::size_t i, double h) {
      Vec k = pt.k;
      k[i] += h;
      return xi_oracle(k, pt.p, pt.y);
    });
    check(g.dp, pt.p, [&](std::size_t i, double h) {
      Vec p = pt.p;
      p[i] += h;
      return xi_oracle(pt.k, p, pt.y);
    });
    check(g.dy, pt.y, [&](std::size_t i, double h) {
      Vec y = pt.y;
      y[i] += h;
      return xi_oracle(pt.k, pt.p, y);
    });
  }
  return {bound_fail == 0 && worst <= kImplicitGradRel,
          "bound violations " + std::to_string(bound_fail) + " over " +
              std::to_string(kGradientPoints) + " points, max relative gradient error " +
              fmt(worst)};
}

// ---- 4. pipeline gradient and Adam -----------------------------------------------

Outcome pipeline_gradient() {
  ModelParams m = ModelParams::table1();
  m.T = 1.0;
  const TimeGrid g(m.T, 2);
  const PolicyNet policy = PolicyNet::make(m, {6, 6}, 404);
  const NoiseBatch noise = sample_noise(g, 2, 2, m.n, m.d, 405);
  RField r(m.d, m.T);
  r.push_zero();
  r.push(Mlp::xavier({2, 4, 1}, 406));
  const auto p = externality_paths(m, g, r, noise);
  const ObjectiveGrad og = objective_gradient(policy, p, noise, m, g);

  PolicyNet probe = policy;
  auto tensors = probe.net.tensors();
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (Eigen::Index i = 0; i < tensors[t]->size(); ++i) {
      double& w = tensors[t]->data()[i];
      const double w0 = w;
      const double h = 1e-6;
      w = w0 + h;
      const double up = estimate_objective(simulate(probe, p, noise, m, g), m);
      w = w0 - h;
      const double dn = estimate_objective(simulate(probe, p, noise, m, g), m);
      w = w0;
      const double fd = (up - dn) / (2 * h);
      num += (og.grads[t].data()[i] - fd) * (og.grads[t].data()[i] - fd);
      den += fd * fd;
    }
  }
  const double grad_rel = std::sqrt(num / den);

  // Adam first step: m_hat = g, v_hat = g^2
  const std::vector<double> gv{0.37, -2.5, 1e-3, 0.0, 40.0};
  Matrix x = Matrix::Zero(1, 5), gm(1, 5);
  for (int i = 0; i < 5; ++i) gm(0, i) = gv[i];
  AdamState st;
  adam_step({&x}, {gm}, st);
  double adam_err = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double ref = -1e-3 * gv[i] / (std::abs(gv[i]) + 1e-8);
    adam_err = std::max(adam_err, std::abs(x(0, i) - ref));
  }
  return {grad_rel <= kPipelineGradRel && adam_err <= kAdamAbs,
          "objective gradient relative error " + fmt(grad_rel) +
              " (2 steps, 4 paths), Adam first-step error " + fmt(adam_err)};
}

// ---- 5. contraction constants ------------------------------------------------------

Outcome contraction() {
  LipschitzConstants lc;
  lc.C_Phi_e = 0.3;
  lc.C_phi = 0.5;
  lc.C_Phi_p = 0.1;
  lc.C_gamma = 0.15;
  lc.T = 1.0;
  const double c1 = contraction_constants(lc).C1;
  const Big ref = Big("0.15") * exp(Big("0.5225"));
  const double c1_rel = static_cast<double>(abs((Big(c1) - ref) / ref));

  ModelParams m = ModelParams::table1();
  SampleBox box;
  box.samples = 100;
  LipschitzConstants model_lc = lipschitz_from_model(m, box);
  double small_T = 0.0;
  for (double T : {1e-2, 1e-4, 1e-6, 1e-8}) {
    model_lc.T = T;
    small_T = contraction_constants(model_lc).composite;
  }

  // T e^{rate T} is increasing on (0, 1/|rate|] when rate < 0
  const double rate = model_lc.C_a_p + model_lc.C_a_y + 2 * model_lc.C_a_k +
                      model_lc.C_sigma * model_lc.C_sigma - 2 * model_lc.delta;
  const double t_max = rate < 0 ? std::min(45.0, 1.0 / -rate) : 45.0;
  bool monotone = true;
  std::vector<double> prev;
  for (int i = 1; i <= 100; ++i) {
    model_lc.T = t_max * i / 100.0;
    const ContractionReport r = contraction_constants(model_lc);
    const std::vector<double> c{r.C1, r.squared.C2, r.squared.C3, r.linear.C2,
                                r.linear.C3, r.C4, r.C5};
    if (!prev.empty())
      for (std::size_t q = 0; q < c.size(); ++q) monotone = monotone && c[q] >= prev[q];
    prev = c;
  }
  return {c1_rel <= kC1Rel && small_T <= 1e-6 && monotone,
          "C1 = " + fmt(c1) + " (relative error " + fmt(c1_rel) + "), composite at T = 1e-8: " +
              fmt(small_T) + ", C1..C5 nondecreasing on T in (0, " + fmt(t_max) + "]: " +
              (monotone ? "yes" : "no")};
}

// ---- shared small deterministic instance -----------------------------------------

struct ToyRun {
  ModelParams m;
  Solution sol;
  double train_seconds = 0.0;
};

const ToyRun& toy_run() {
  static std::optional<ToyRun> run;
  if (run) return *run;
  ToyRun r;
  r.m = toy_model();
  SolverConfig c;
  c.steps = 10;
  c.max_outer_iterations = 1;
  c.policy_steps = 4000;
  c.regression_steps = 10;
  c.scenarios = c.paths_per_scenario = 1;
  c.validation_scenarios = c.validation_paths_per_scenario = 1;
  c.validation_every = 20;
  c.learning_rate = 3e-3;
  c.seed = 7;
  const auto t0 = Clock::now();
  r.sol = solve(r.m, c);
  r.train_seconds = seconds_since(t0);
  run = std::move(r);
  return *run;
}

// ---- 6. Pontryagin consistency -----------------------------------------------------

Outcome pontryagin() {
  const ModelParams m = toy_model();
  const PontryaginReference ref = solve_pontryagin_reference(m);
  const PolicyFn exact = ref.policy(m);
  bool ok = true;
  std::string sweep;
  double prev = 0.0;
  for (int N : {10, 20, 40, 80, 160}) {
    const TimeGrid g(m.T, N);
    const double res = deterministic_pontryagin_check(exact, m, g).sup;
    ok = ok && res <= kExactResidualPerDt * g.dt();
    if (prev > 0.0) ok = ok && res <= kHalvingRatio * prev;
    sweep += (sweep.empty() ? "" : ", ") + fmt(res);
    prev = res;
  }
  const ToyRun& run = toy_run();
  const double trained = deterministic_pontryagin_check(policy_fn(run.sol.policy, run.m),
                                                        run.m, TimeGrid(run.m.T, 10))
                             .sup;
  return {ok && trained <= kTrainedResidual,
          "exact-control residuals for N_T = 10..160: " + sweep + "; trained N_T = 10: " +
              fmt(trained)};
}

// ---- 7. dynamic programming oracle -------------------------------------------------

Outcome dp_equivalence() {
  const auto t0 = Clock::now();
  const ToyRun& run = toy_run();
  const DpResult dp = dp_oracle(run.m, 10);
  const TimeGrid g(run.m.T, 10);
  const NoiseBatch noise = sample_noise(g, 1, 1, 1, 1, 1);
  std::vector<Matrix> p_paths(11);
  for (int i = 0; i <= 10; ++i) p_paths[i] = Matrix::Constant(1, 1, dp.p_path[i]);
  const double obj = estimate_objective(simulate(run.sol.policy, p_paths, noise, run.m, g), run.m);
  const double rel = std::abs(obj - dp.value) / std::abs(dp.value);
  const double secs = seconds_since(t0);
  return {rel <= kDpRel && !dp.too_coarse && secs < kDpSeconds,
          "DP value " + fmt(dp.value) + " (refinement change " + fmt(dp.relative_change) +
              "), trained objective " + fmt(obj) + ", relative gap " + fmt(rel) + ", " +
              fmt(secs) + " s"};
}

// ---- shared reference run -------------------------------------------------------------

struct Table1Run {
  int solve_code = -1;
  int report_code = -1;
  double seconds = 0.0;
  fs::path dir;
};

const Table1Run& table1_run() {
  static std::optional<Table1Run> run;
  if (run) return *run;
  Table1Run r;
  r.dir = kWork / "table1_budget";
  fs::remove_all(r.dir);
  fs::create_directories(r.dir);
  std::ofstream log(kWork / "table1_budget.log");
  RunOptions opt;
  opt.out = r.dir;
  opt.deterministic = true;
  const auto t0 = Clock::now();
  r.solve_code = cmd_solve(kConfigs / "table1_budget.toml", opt, log, log);
  if (r.solve_code == kExitOk) r.report_code = cmd_report(r.dir, RunOptions{}, log, log);
  r.seconds = seconds_since(t0);
  run = r;
  return *run;
}

// ---- 8. qualitative figure properties ----------------------------------------------

Outcome figures() {
  const Table1Run& run = table1_run();
  if (run.solve_code != kExitOk || run.report_code != kExitOk)
    return {false, "solve exit " + std::to_string(run.solve_code) + ", report exit " +
                       std::to_string(run.report_code)};
  const RunConfig cfg = load_config(kConfigs / "table1_budget.toml");
  const int N = cfg.solver.steps;

  const auto q = read_csv(run.dir / "pollution_quantiles.csv");
  const int ct = column(q[0], "t"), cq05 = column(q[0], "q05"), cm = column(q[0], "mean"),
            cq95 = column(q[0], "q95");
  auto at = [&](int step, int col) { return std::stod(q.at(1 + step).at(col)); };

  // (a) increasing over [0, T/2] at eighths of the horizon; slower in the final third
  bool increasing = true;
  for (int e = 1; e <= 4; ++e)
    increasing = increasing && at(N * e / 8, cm) > at(N * (e - 1) / 8, cm);
  const int third = N - N / 3;
  const double slope_first = (at(N / 2, cm) - at(0, cm)) / (at(N / 2, ct) - at(0, ct));
  const double slope_last = (at(N, cm) - at(third, cm)) / (at(N, ct) - at(third, ct));
  const bool a_ok = increasing && std::abs(slope_last) < slope_first;

  // (b) mean productivity of the brown sector at T against its initial value
  const auto paths = read_csv(run.dir / "paths.csv");
  const int cs = column(paths[0], "step"), cp = column(paths[0], "p1");
  double b1_sum = 0.0;
  int b1_count = 0;
  for (std::size_t i = 1; i < paths.size(); ++i) {
    if (std::stoi(paths[i][cs]) != N) continue;
    b1_sum += productivity(cfg.model, Vec{std::stod(paths[i][cp])})[0];
    ++b1_count;
  }
  const double b1_T = b1_sum / b1_count;
  const double b1_0 = productivity(cfg.model, cfg.model.p0)[0];
  const bool b_ok = b1_count > 0 && b1_T < b1_0;

  // (c) quantile spread at T against the grid time nearest T/4
  const int quarter = static_cast<int>(std::lround(N / 4.0));
  const double spread_T = at(N, cq95) - at(N, cq05);
  const double spread_q = at(quarter, cq95) - at(quarter, cq05);
  const bool c_ok = spread_T > spread_q;

  // (d) green capital share at t = 45 against t = 5
  const auto s = read_csv(run.dir / "sector_means.csv");
  const int sct = column(s[0], "t"), sg = column(s[0], "share_k2");
  auto share_at = [&](double t) {
    for (std::size_t i = 1; i < s.size(); ++i)
      if (std::abs(std::stod(s[i][sct]) - t) < 1e-9) return std::stod(s[i][sg]);
    throw std::runtime_error("no sector row at t = " + fmt(t));
  };
  const double share5 = share_at(5.0), share45 = share_at(45.0);
  const bool d_ok = share45 > share5;

  const bool time_ok = run.seconds <= kTable1Seconds;
  return {a_ok && b_ok && c_ok && d_ok && time_ok,
          std::string("(a) ") + (a_ok ? "ok" : "FAIL") + ": mean p slope " + fmt(slope_first) +
              " on [0, T/2], " + fmt(slope_last) + " on the final third; (b) " +
              (b_ok ? "ok" : "FAIL") + ": mean b1(p_T) = " + fmt(b1_T) + " < b1(p_0) = " +
              fmt(b1_0) + "; (c) " + (c_ok ? "ok" : "FAIL") + ": q95 - q05 = " +
              fmt(spread_T) + " at T, " + fmt(spread_q) + " at T/4; (d) " +
              (d_ok ? "ok" : "FAIL") + ": green share " + fmt(share5) + " at t = 5, " +
              fmt(share45) + " at t = 45; " + fmt(run.seconds) + " s"};
}

// ---- 9. fixed-point behavior -------------------------------------------------------

Outcome fixed_point() {
  const fs::path dec = kWork / "decoupled";
  fs::remove_all(dec);
  std::ofstream log(kWork / "decoupled.log");
  RunOptions opt;
  opt.out = dec;
  opt.deterministic = true;
  if (cmd_solve(kConfigs / "decoupled.toml", opt, log, log) != kExitOk)
    return {false, "decoupled solve failed"};
  const RunConfig dcfg = load_config(kConfigs / "decoupled.toml");
  const double eps = dcfg.solver.effective_epsilon(dcfg.model.d);
  const auto it = read_csv(dec / "iterations.csv");
  const double metric1 = std::stod(it.at(1).at(column(it[0], "stop_metric")));
  const bool dec_ok = it.size() == 2 && metric1 < eps;

  const Table1Run& run = table1_run();
  if (run.solve_code != kExitOk) return {false, "reference solve failed"};
  const RunConfig cfg = load_config(kConfigs / "table1_budget.toml");
  const double eps_t = cfg.solver.effective_epsilon(cfg.model.d);
  const auto tr = read_csv(run.dir / "iterations.csv");
  const int cj = column(tr[0], "j"), cmet = column(tr[0], "stop_metric");
  bool consecutive = true;
  std::string seq;
  for (std::size_t i = 1; i < tr.size(); ++i) {
    consecutive = consecutive && std::stoi(tr[i][cj]) == static_cast<int>(i);
    seq += (seq.empty() ? "" : ", ") + fmt(std::stod(tr[i][cmet]));
  }
  const int iters = static_cast<int>(tr.size()) - 1;
  const bool stopped = iters > 0 && std::stod(tr.back()[cmet]) < eps_t;
  const bool terminated = stopped || iters == cfg.solver.max_outer_iterations;
  return {dec_ok && consecutive && terminated,
          "decoupled metric at iteration 1 = " + fmt(metric1) + " (epsilon " + fmt(eps) +
              "); reference trace [" + seq + "], " +
              (stopped ? "stopped by the criterion" : "iteration limit") + " after " +
              std::to_string(iters) + " iterations (epsilon " + fmt(eps_t) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, root_finder}, {2, foc_identity}, {3, gradient_bounds},
      {4, pipeline_gradient}, {5, contraction}, {6, pontryagin},
      {7, dp_equivalence}, {8, figures}, {9, fixed_point}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  fs::create_directories(kWork);

  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
