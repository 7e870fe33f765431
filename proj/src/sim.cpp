#include "mfg/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "mfg/errors.hpp"
#include "mfg/parallel.hpp"
#include "mfg/random.hpp"

namespace mfg {
namespace {

constexpr double kAggregateFloor = 1e-12;

// Per-row productivity b_i(p), rows x n.
Matrix productivity_rows(const ModelParams& m, const Matrix& p) {
  Matrix B(p.rows(), m.n);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (int i = 0; i < m.n; ++i) {
      const auto& sec = m.production.sectors[i];
      double z = -sec.shift;
      for (std::size_t j = 0; j < sec.slope.size(); ++j) z += sec.slope[j] * p(r, j);
      B(r, i) = sec.base + sec.amplitude / (1.0 + std::exp(z));
    }
  }
  return B;
}

Matrix production_rows(const ModelParams& m, const Matrix& B, const Matrix& k) {
  const Eigen::ArrayXd s = (k.array() * B.array()).rowwise().sum();
  Matrix F(k.rows(), 1);
  F.col(0) = (s.max(0.0).pow(m.production.beta) + m.production.floor).matrix();
  return F;
}

Matrix network_input(double t_over_T, const Matrix& p, const Matrix& k) {
  Matrix x(p.rows(), 1 + p.cols() + k.cols());
  x.col(0).setConstant(t_over_T);
  x.middleCols(1, p.cols()) = p;
  if (k.cols() > 0) x.rightCols(k.cols()) = k;
  return x;
}

Matrix expand_scenarios(const Matrix& per_scenario, int rows_per, Eigen::Index first_row,
                        Eigen::Index rows) {
  Matrix out(rows, per_scenario.cols());
  for (Eigen::Index r = 0; r < rows; ++r)
    out.row(r) = per_scenario.row((first_row + r) / rows_per);
  return out;
}

void check_grid(const TimeGrid& grid, const NoiseBatch& noise) {
  if (noise.steps() != grid.steps)
    throw ContractViolation("noise batch has " + std::to_string(noise.steps()) +
                            " steps, grid has " + std::to_string(grid.steps));
}

// 1 - delta_i dt per sector.
Eigen::RowVectorXd step_retention(const ModelParams& m, double dt) {
  Eigen::RowVectorXd keep(m.n);
  for (int i = 0; i < m.n; ++i) keep(i) = 1.0 - m.delta[i] * dt;
  return keep;
}

// 1 - delta dt + sigma dW for the given rows.
Matrix capital_multiplier(const Eigen::RowVectorXd& keep, const Eigen::RowVectorXd& sigma,
                          const Matrix& dW, Eigen::Index first, Eigen::Index rows) {
  Matrix out = dW.middleRows(first, rows);
  out.array().rowwise() *= sigma.array();
  out.array().rowwise() += keep.array();
  return out;
}

// ---- fused tape ops -------------------------------------------------------

// F = max(b.k, 0)^beta + floor per row; B constant.
ad::Var production_op(ad::Tape& t, const ModelParams& m, ad::Var k, const Matrix& B) {
  const Matrix& kv = t.value(k);
  const Eigen::ArrayXd s = (kv.array() * B.array()).rowwise().sum();
  const double beta = m.production.beta;
  Matrix F(kv.rows(), 1);
  F.col(0) = (s.max(0.0).pow(beta) + m.production.floor).matrix();
  const Eigen::ArrayXd scale = beta * s.max(kAggregateFloor).pow(beta - 1.0);
  return t.record(std::move(F), t.needs_grad(k),
                  [k, B, scale](ad::Tape& tp, const Matrix& g) {
                    Matrix gk = B;
                    gk.array().colwise() *= scale * g.col(0).array();
                    tp.accumulate(k, gk);
                  });
}

ad::Var utility_op(ad::Tape& t, const Utility& u, ad::Var c) {
  const Matrix& cv = t.value(c);
  Matrix val(cv.rows(), cv.cols());
  Matrix der(cv.rows(), cv.cols());
  for (Eigen::Index i = 0; i < cv.size(); ++i) {
    val(i) = u.value(cv(i));
    der(i) = u.prime(cv(i));
  }
  return t.record(std::move(val), t.needs_grad(c),
                  [c, der](ad::Tape& tp, const Matrix& g) {
                    tp.accumulate(c, g.cwiseProduct(der));
                  });
}

// -sum_i a^i ln a^i per row.
ad::Var entropy_op(ad::Tape& t, ad::Var a) {
  const Matrix& av = t.value(a);
  const Eigen::ArrayXXd la = av.array().log();
  Matrix val(av.rows(), 1);
  val.col(0) = -(av.array() * la).rowwise().sum();
  Matrix der = (-(la + 1.0)).matrix();
  return t.record(std::move(val), t.needs_grad(a),
                  [a, der](ad::Tape& tp, const Matrix& g) {
                    Matrix ga = der;
                    ga.array().colwise() *= g.col(0).array();
                    tp.accumulate(a, ga);
                  });
}

void require_finite_rows(const Matrix& v, int pps, Eigen::Index first_row, int step,
                         const char* what) {
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    if (!v.row(r).allFinite()) {
      const auto row = static_cast<std::size_t>(first_row + r);
      throw SimulationError(std::string("non-finite ") + what, row / pps, row % pps,
                            static_cast<std::size_t>(step));
    }
  }
}

}  // namespace

TimeGrid::TimeGrid(double horizon, int n_steps) : T(horizon), steps(n_steps) {
  if (!(horizon > 0.0)) throw ContractViolation("TimeGrid: T must be > 0");
  if (n_steps < 1) throw ContractViolation("TimeGrid: N_T must be >= 1");
}

NoiseBatch sample_noise(const TimeGrid& grid, int scenarios, int paths_per_scenario,
                        int n, int d, std::uint64_t seed) {
  if (scenarios < 1 || paths_per_scenario < 1 || n < 1 || d < 1)
    throw ContractViolation("sample_noise: counts must be >= 1");
  NoiseBatch nb;
  nb.scenarios = scenarios;
  nb.paths_per_scenario = paths_per_scenario;
  nb.n = n;
  nb.d = d;
  nb.seed = seed;
  const int N = grid.steps;
  const double sdt = std::sqrt(grid.dt());
  const int M = nb.total_paths();
  nb.common.assign(N, Matrix(scenarios, d));
  nb.idio.assign(N, Matrix(M, n));

  const std::uint64_t common_root = derive_seed(seed, "common");
  const std::uint64_t idio_root = derive_seed(seed, "idiosyncratic");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int s = 0; s < scenarios; ++s) {
    std::mt19937_64 rng(derive_seed(common_root, static_cast<std::uint64_t>(s)));
    normal.reset();
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < d; ++j) nb.common[i](s, j) = sdt * normal(rng);
  }
  for (int s = 0; s < scenarios; ++s) {
    for (int q = 0; q < paths_per_scenario; ++q) {
      std::mt19937_64 rng(derive_seed(idio_root, static_cast<std::uint64_t>(s),
                                      static_cast<std::uint64_t>(q)));
      normal.reset();
      const int row = s * paths_per_scenario + q;
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < n; ++j) nb.idio[i](row, j) = sdt * normal(rng);
    }
  }
  return nb;
}

// ---- policy ---------------------------------------------------------------

PolicyNet PolicyNet::make(const ModelParams& m, const std::vector<int>& hidden,
                          std::uint64_t seed) {
  std::vector<int> dims{1 + m.d + m.n};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(m.n + 1);
  return PolicyNet{Mlp::xavier(dims, seed)};
}

void PolicyNet::act(const ModelParams& m, double t_over_T, const Matrix& p,
                    const Matrix& k, Matrix& a, Matrix& c) const {
  const Matrix logits = net.evaluate(network_input(t_over_T, p, k));
  if (logits.cols() != m.n + 1)
    throw ContractViolation("policy network must emit n+1 logits");
  Eigen::ArrayXXd e = logits.array().colwise() - logits.array().rowwise().maxCoeff();
  e = e.exp();
  e.colwise() /= e.rowwise().sum();
  const Matrix F = production_rows(m, productivity_rows(m, p), k);
  const double mu = consumption_margin;
  a = (e.leftCols(m.n).colwise() * ((1.0 - mu) * F.col(0).array())).matrix();
  c = (F.array() * (mu + (1.0 - mu) * e.col(m.n))).matrix();
}

Vec PolicyNet::act(const ModelParams& m, double t_over_T, std::span<const double> p,
                   std::span<const double> k) const {
  Matrix pm(1, m.d), km(1, m.n), a, c;
  for (int j = 0; j < m.d; ++j) pm(0, j) = p[j];
  for (int i = 0; i < m.n; ++i) km(0, i) = k[i];
  act(m, t_over_T, pm, km, a, c);
  return Vec(a.data(), a.data() + m.n);
}

// ---- aggregate field ------------------------------------------------------

RField::RField(int d, double T, Mode mode) : d_(d), T_(T), mode_(mode) {
  if (d < 1 || !(T > 0.0)) throw ContractViolation("RField: need d >= 1 and T > 0");
}

void RField::push_zero() { members_.push_back(nullptr); }

void RField::push(Mlp b) {
  if (b.input_dim() != 1 + d_ || b.output_dim() != d_)
    throw ContractViolation("RField member must map (t, p) in R^{1+d} to R^d");
  members_.push_back(std::make_shared<const Mlp>(std::move(b)));
}

Matrix RField::evaluate_member(std::size_t m, double t, const Matrix& p) const {
  if (m >= members_.size()) throw ContractViolation("RField: member index out of range");
  if (!members_[m]) return Matrix::Zero(p.rows(), d_);
  return members_[m]->evaluate(network_input(t / T_, p, Matrix(p.rows(), 0)));
}

Matrix RField::evaluate(double t, const Matrix& p) const {
  if (members_.empty()) throw ContractViolation("RField: empty history");
  Matrix sum = Matrix::Zero(p.rows(), d_);
  for (std::size_t m = 0; m < members_.size(); ++m)
    if (members_[m]) sum += evaluate_member(m, t, p);
  return sum / static_cast<double>(members_.size());
}

namespace {

// One Euler step of the externality for all scenarios.
Matrix externality_step(const ModelParams& m, const Matrix& P, const Matrix& R,
                        const Matrix& dW0, double dt, double floor) {
  Matrix next(P.rows(), P.cols());
  for (Eigen::Index s = 0; s < P.rows(); ++s) {
    for (int j = 0; j < m.d; ++j) {
      const double p = P(s, j);
      const double drift = m.emission_coeff[j] * R(s, j) - m.decay_coeff[j] * p;
      next(s, j) = std::max(p + drift * dt + m.gamma[j] * p * dW0(s, j), floor);
    }
  }
  return next;
}

Matrix initial_p(const ModelParams& m, int scenarios) {
  Matrix P(scenarios, m.d);
  for (int j = 0; j < m.d; ++j) P.col(j).setConstant(m.p0[j]);
  return P;
}

}  // namespace

std::vector<Matrix> externality_paths(const ModelParams& m, const TimeGrid& grid,
                                      const RField& r, const NoiseBatch& noise,
                                      const SimOptions& opt) {
  check_grid(grid, noise);
  const int N = grid.steps;
  const double dt = grid.dt();
  const int S = noise.scenarios;
  auto run = [&](auto&& field_at) {
    std::vector<Matrix> P(N + 1);
    P[0] = initial_p(m, S);
    for (int i = 0; i < N; ++i) {
      P[i + 1] = externality_step(m, P[i], field_at(i, P[i]), noise.common[i], dt,
                                  opt.p_floor);
      for (Eigen::Index s = 0; s < S; ++s)
        if (!P[i + 1].row(s).allFinite())
          throw SimulationError("non-finite externality", s, 0, i + 1);
    }
    return P;
  };

  if (r.empty()) return run([&](int, const Matrix& P) { return Matrix::Zero(P.rows(), m.d).eval(); });
  if (r.mode() == RField::Mode::kAveraged)
    return run([&](int i, const Matrix& P) { return r.evaluate(grid.t(i), P); });

  // Literal fictitious play: p^l is driven by R^{l-1}, the running average of
  // b^0..b^{l-1} each evaluated on its own path.
  std::vector<Matrix> sum(N, Matrix::Zero(S, m.d));
  const std::size_t J = r.size();
  for (std::size_t l = 0; l < J; ++l) {
    const double w = l == 0 ? 0.0 : 1.0 / static_cast<double>(l);
    auto P = run([&](int i, const Matrix&) { return (w * sum[i]).eval(); });
    for (int i = 0; i < N; ++i) sum[i] += r.evaluate_member(l, grid.t(i), P[i]);
  }
  const double w = 1.0 / static_cast<double>(J);
  return run([&](int i, const Matrix&) { return (w * sum[i]).eval(); });
}

// ---- simulation -----------------------------------------------------------

Matrix PathBatch::p_rows(int step) const {
  return expand_scenarios(p[step], paths_per_scenario, 0, total_paths());
}

PathBatch simulate(const PolicyNet& policy, const std::vector<Matrix>& p_paths,
                   const NoiseBatch& noise, const ModelParams& m, const TimeGrid& grid,
                   const SimOptions& opt) {
  check_grid(grid, noise);
  const int N = grid.steps;
  if (static_cast<int>(p_paths.size()) != N + 1)
    throw ContractViolation("simulate: p_paths must have N_T + 1 entries");
  const int M = noise.total_paths();
  const int pps = noise.paths_per_scenario;
  const double dt = grid.dt();

  PathBatch out;
  out.scenarios = noise.scenarios;
  out.paths_per_scenario = pps;
  out.grid = grid;
  out.p = p_paths;
  out.k.resize(N + 1);
  out.a.resize(N + 1);
  out.c.resize(N + 1);
  out.k[0] = Matrix(M, m.n);
  for (int i = 0; i < m.n; ++i) out.k[0].col(i).setConstant(m.k0[i]);

  const Eigen::RowVectorXd keep = step_retention(m, dt);
  const Eigen::RowVectorXd sigma = Eigen::Map<const Eigen::RowVectorXd>(m.sigma.data(), m.n);
  for (int i = 0; i <= N; ++i) {
    const Matrix P = expand_scenarios(p_paths[i], pps, 0, M);
    policy.act(m, grid.t(i) / grid.T, P, out.k[i], out.a[i], out.c[i]);
    require_finite_rows(out.a[i], pps, 0, i, "investment");
    if (i == N) break;
    Matrix next = out.k[i].cwiseProduct(capital_multiplier(keep, sigma, noise.idio[i], 0, M)) +
                  out.a[i] * dt;
    next = next.cwiseMax(opt.k_floor);
    require_finite_rows(next, pps, 0, i + 1, "capital");
    out.k[i + 1] = std::move(next);
  }
  return out;
}

PathBatch simulate(const PolicyNet& policy, const RField& r, const NoiseBatch& noise,
                   const ModelParams& m, const TimeGrid& grid, const SimOptions& opt) {
  return simulate(policy, externality_paths(m, grid, r, noise, opt), noise, m, grid, opt);
}

double estimate_objective(const PathBatch& paths, const ModelParams& m,
                          const SimOptions& opt) {
  const int M = paths.total_paths();
  if (M < 1 || paths.k.empty()) throw ContractViolation("estimate_objective: empty batch");
  const int N = paths.grid.steps;
  const double dt = paths.grid.dt();
  double running = 0.0;
  Vec a_row(m.n);
  for (int i = 0; i < N; ++i) {
    const Matrix P = paths.p_rows(i);
    Matrix c;
    if (paths.c.size() > static_cast<std::size_t>(i) && paths.c[i].size() == M) {
      c = paths.c[i];
    } else {
      c = production_rows(m, productivity_rows(m, P), paths.k[i]) -
          paths.a[i].rowwise().sum();
    }
    double acc = 0.0;
    for (int r = 0; r < M; ++r) {
      if (!(c(r, 0) > 0.0))
        throw DomainError("estimate_objective: non-positive consumption at step " +
                          std::to_string(i));
      for (int j = 0; j < m.n; ++j) a_row[j] = paths.a[i](r, j);
      acc += m.utility.value(c(r, 0)) + opt.entropy_sign * m.theta * entropic_cost(a_row);
    }
    running += dt * std::exp(-m.rho * paths.grid.t(i)) * acc / M;
  }
  const Matrix P = paths.p_rows(N);
  const Matrix F = production_rows(m, productivity_rows(m, P), paths.k[N]);
  double terminal = 0.0;
  for (int r = 0; r < M; ++r) terminal += m.utility.value(F(r, 0));
  terminal *= std::exp(-m.rho * m.T) / m.rho * std::exp(-m.rho * paths.grid.T) / M;
  return running + terminal;
}

// ---- objective on the tape ------------------------------------------------

namespace {

struct ChunkResult {
  double sum = 0.0;  // un-normalized: sum over rows
  std::vector<Matrix> grads;
};

ChunkResult chunk_objective(const PolicyNet& policy, const std::vector<Matrix>& p_paths,
                            const NoiseBatch& noise, const ModelParams& m,
                            const TimeGrid& grid, const SimOptions& opt,
                            Eigen::Index first, Eigen::Index rows) {
  namespace ad = mfg::ad;
  ad::Tape tape;
  const MlpLeaves leaves = bind(tape, policy.net, true);
  const int N = grid.steps;
  const double dt = grid.dt();
  const int pps = noise.paths_per_scenario;
  const double mu = policy.consumption_margin;

  Matrix k0(rows, m.n);
  for (int i = 0; i < m.n; ++i) k0.col(i).setConstant(m.k0[i]);
  ad::Var k = tape.constant(std::move(k0));
  const Eigen::RowVectorXd keep = step_retention(m, dt);
  const Eigen::RowVectorXd sigma = Eigen::Map<const Eigen::RowVectorXd>(m.sigma.data(), m.n);

  ad::Var total;
  auto add_to_total = [&](ad::Var v) { total = total.valid() ? ad::add(tape, total, v) : v; };

  for (int i = 0; i < N; ++i) {
    const Matrix P = expand_scenarios(p_paths[i], pps, first, rows);
    const Matrix B = productivity_rows(m, P);
    Matrix tp(rows, 1 + m.d);
    tp.col(0).setConstant(grid.t(i) / grid.T);
    tp.rightCols(m.d) = P;
    const ad::Var x = ad::concat_cols(tape, {tape.constant(std::move(tp)), k});
    const ad::Var s = ad::softmax_rows(tape, forward(tape, policy.net, leaves, x));
    const ad::Var F = production_op(tape, m, k, B);
    const ad::Var a = ad::mul(tape, ad::scale(tape, ad::slice_cols(tape, s, 0, m.n), 1.0 - mu), F);
    const ad::Var c = ad::mul(
        tape, F, ad::add_scalar(tape, ad::scale(tape, ad::slice_cols(tape, s, m.n, 1), 1.0 - mu), mu));
    ad::Var reward = utility_op(tape, m.utility, c);
    if (m.theta != 0.0 && opt.entropy_sign != 0.0)
      reward = ad::add(tape, reward,
                       ad::scale(tape, entropy_op(tape, a), opt.entropy_sign * m.theta));
    add_to_total(ad::scale(tape, ad::sum_all(tape, reward), dt * std::exp(-m.rho * grid.t(i))));

    // Euler step for k: k (1 - delta dt + sigma dW) + a dt.
    const ad::Var mult = tape.constant(capital_multiplier(keep, sigma, noise.idio[i], first, rows));
    ad::Var next = ad::add(tape, ad::mul(tape, k, mult), ad::scale(tape, a, dt));
    next = ad::clamp_min(tape, next, opt.k_floor);
    require_finite_rows(tape.value(next), pps, first, i + 1, "capital");
    k = next;
  }
  const Matrix P = expand_scenarios(p_paths[N], pps, first, rows);
  const ad::Var FT = production_op(tape, m, k, productivity_rows(m, P));
  add_to_total(ad::scale(tape, ad::sum_all(tape, utility_op(tape, m.utility, FT)),
                         std::exp(-2.0 * m.rho * m.T) / m.rho));
  tape.backward(total);
  return ChunkResult{tape.value(total)(0, 0), gradients(tape, leaves)};
}

}  // namespace

ObjectiveGrad objective_gradient(const PolicyNet& policy, const std::vector<Matrix>& p_paths,
                                 const NoiseBatch& noise, const ModelParams& m,
                                 const TimeGrid& grid, const SimOptions& opt, int threads) {
  check_grid(grid, noise);
  if (static_cast<int>(p_paths.size()) != grid.steps + 1)
    throw ContractViolation("objective_gradient: p_paths must have N_T + 1 entries");
  const int M = noise.total_paths();
  if (M < 1) throw ContractViolation("objective_gradient: empty batch");
  const std::size_t chunks = (M + kChunkRows - 1) / kChunkRows;
  std::vector<ChunkResult> results(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const Eigen::Index first = static_cast<Eigen::Index>(c) * kChunkRows;
    const Eigen::Index rows = std::min<Eigen::Index>(kChunkRows, M - first);
    results[c] = chunk_objective(policy, p_paths, noise, m, grid, opt, first, rows);
  });
  ObjectiveGrad out;
  out.grads = std::move(results[0].grads);
  out.value = results[0].sum;
  for (std::size_t c = 1; c < chunks; ++c) {
    out.value += results[c].sum;
    for (std::size_t g = 0; g < out.grads.size(); ++g) out.grads[g] += results[c].grads[g];
  }
  out.value /= M;
  for (auto& g : out.grads) g /= M;
  return out;
}

// ---- reporting helpers ----------------------------------------------------

Matrix empirical_quantiles(const std::vector<Matrix>& values,
                           const std::vector<double>& levels, int col) {
  if (values.empty()) throw ContractViolation("empirical_quantiles: empty input");
  for (double q : levels)
    if (!(q > 0.0 && q < 1.0)) throw ContractViolation("quantile levels must be in (0, 1)");
  Matrix out(values.size(), levels.size());
  std::vector<double> buf;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Matrix& v = values[i];
    if (v.rows() == 0) throw ContractViolation("empirical_quantiles: empty time slice");
    buf.assign(v.col(col).data(), v.col(col).data() + v.rows());
    std::sort(buf.begin(), buf.end());
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const double h = levels[l] * static_cast<double>(buf.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(h));
      const std::size_t hi = std::min(lo + 1, buf.size() - 1);
      out(i, l) = buf[lo] + (h - static_cast<double>(lo)) * (buf[hi] - buf[lo]);
    }
  }
  return out;
}

void write_paths_csv(const PathBatch& paths, const std::filesystem::path& file,
                     const std::string& manifest_comment) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open " + file.string());
  out.precision(17);
  if (!manifest_comment.empty()) out << "# " << manifest_comment << '\n';
  const int n = paths.k.empty() ? 0 : static_cast<int>(paths.k[0].cols());
  const int d = paths.p.empty() ? 0 : static_cast<int>(paths.p[0].cols());
  out << "scenario,path,step,t";
  for (int i = 1; i <= n; ++i) out << ",k" << i;
  for (int j = 1; j <= d; ++j) out << ",p" << j;
  for (int i = 1; i <= n; ++i) out << ",a" << i;
  out << '\n';
  for (int row = 0; row < paths.total_paths(); ++row) {
    const int s = paths.scenario_of(row);
    for (int i = 0; i <= paths.grid.steps; ++i) {
      out << s << ',' << row % paths.paths_per_scenario << ',' << i << ','
          << paths.grid.t(i);
      for (int c = 0; c < n; ++c) out << ',' << paths.k[i](row, c);
      for (int c = 0; c < d; ++c) out << ',' << paths.p[i](s, c);
      for (int c = 0; c < n; ++c) out << ',' << paths.a[i](row, c);
      out << '\n';
    }
  }
}

}  // namespace mfg
