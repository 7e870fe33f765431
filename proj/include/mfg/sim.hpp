#pragma once

// Euler-Maruyama simulation of the coupled capital / externality system.
//
// Paths are indexed by row = scenario * paths_per_scenario + path. The
// externality is driven by common noise only, so it is stored per scenario.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mfg/autodiff.hpp"
#include "mfg/mlp.hpp"
#include "mfg/model.hpp"

namespace mfg {

struct TimeGrid {
  double T = 1.0;
  int steps = 1;

  TimeGrid() = default;
  TimeGrid(double horizon, int n_steps);
  double dt() const { return T / steps; }
  double t(int i) const { return i * dt(); }
};

struct NoiseBatch {
  int scenarios = 0;
  int paths_per_scenario = 0;
  int n = 0;
  int d = 0;
  std::uint64_t seed = 0;
  std::vector<Matrix> common;  // per step: scenarios x d
  std::vector<Matrix> idio;    // per step: total_paths x n

  int steps() const { return static_cast<int>(common.size()); }
  int total_paths() const { return scenarios * paths_per_scenario; }
};

// Independent N(0, dt) increments. Each (scenario) common stream and each
// (scenario, path) idiosyncratic stream has its own counter-derived seed.
NoiseBatch sample_noise(const TimeGrid& grid, int scenarios,
                        int paths_per_scenario, int n, int d,
                        std::uint64_t seed);

struct SimOptions {
  double k_floor = 1e-8;
  double p_floor = 0.0;
  // +1: running reward u(c) + theta K(a) with K(a) = -sum a ln a.
  // -1: the opposite sign on the entropic term.
  double entropy_sign = 1.0;
};

// Feasible investment policy. The network maps (t/T, p, k) to n+1 logits;
// with softmax fractions s, a^i = s_i (1 - margin) F(k, p) and consumption
// c = F (margin + (1 - margin) s_c) > 0.
struct PolicyNet {
  Mlp net;
  double consumption_margin = 1e-3;

  static PolicyNet make(const ModelParams& m, const std::vector<int>& hidden,
                        std::uint64_t seed);

  // Batched: p and k have one row per sample. Fills a (rows x n) and
  // c (rows x 1).
  void act(const ModelParams& m, double t_over_T, const Matrix& p,
           const Matrix& k, Matrix& a, Matrix& c) const;
  Vec act(const ModelParams& m, double t_over_T, std::span<const double> p,
          std::span<const double> k) const;
};

// Averaged family of regression networks, R^j = 1/(j+1) sum_m b^m. Each
// member maps (t/T, p) to R^d; an empty member is the zero field.
class RField {
 public:
  enum class Mode {
    kAveraged,  // every member evaluated at the current query (t, p)
    kLiteral,   // member m evaluated along its own iteration's path p^m
  };

  RField() = default;
  RField(int d, double T, Mode mode = Mode::kAveraged);

  int dim() const { return d_; }
  double horizon() const { return T_; }
  Mode mode() const { return mode_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }

  void push_zero();
  void push(Mlp b);
  const std::vector<std::shared_ptr<const Mlp>>& members() const { return members_; }

  // Averaged evaluation at one time for all rows of p. Throws
  // ContractViolation on an empty family.
  Matrix evaluate(double t, const Matrix& p) const;
  // Single member (zero for the empty member).
  Matrix evaluate_member(std::size_t m, double t, const Matrix& p) const;

 private:
  int d_ = 1;
  double T_ = 1.0;
  Mode mode_ = Mode::kAveraged;
  std::vector<std::shared_ptr<const Mlp>> members_;
};

// Externality paths under the field R: per step (steps+1 entries),
// scenarios x d. Depends only on the common noise.
std::vector<Matrix> externality_paths(const ModelParams& m, const TimeGrid& grid,
                                      const RField& r,
                                      const NoiseBatch& noise,
                                      const SimOptions& opt = {});

struct PathBatch {
  int scenarios = 0;
  int paths_per_scenario = 0;
  TimeGrid grid;
  std::vector<Matrix> k;  // steps+1 entries, total_paths x n
  std::vector<Matrix> p;  // steps+1 entries, scenarios x d
  std::vector<Matrix> a;  // steps+1 entries, total_paths x n
  std::vector<Matrix> c;  // steps+1 entries, total_paths x 1

  int total_paths() const { return scenarios * paths_per_scenario; }
  int scenario_of(int row) const { return row / paths_per_scenario; }
  // p expanded to one row per path.
  Matrix p_rows(int step) const;
};

PathBatch simulate(const PolicyNet& policy, const std::vector<Matrix>& p_paths,
                   const NoiseBatch& noise, const ModelParams& m,
                   const TimeGrid& grid, const SimOptions& opt = {});
PathBatch simulate(const PolicyNet& policy, const RField& r,
                   const NoiseBatch& noise, const ModelParams& m,
                   const TimeGrid& grid, const SimOptions& opt = {});

// dt sum_{i<N} mean[(u(c_i) + sign theta K(a_i)) e^{-rho t_i}]
//   + mean[g(k_N, p_N)] e^{-rho T}
double estimate_objective(const PathBatch& paths, const ModelParams& m,
                          const SimOptions& opt = {});

// Same objective recorded on tapes, one per chunk of rows, with the
// gradient with respect to the policy parameters (tensors() order).
struct ObjectiveGrad {
  double value = 0.0;
  std::vector<Matrix> grads;
};

inline constexpr int kChunkRows = 256;

ObjectiveGrad objective_gradient(const PolicyNet& policy,
                                 const std::vector<Matrix>& p_paths,
                                 const NoiseBatch& noise, const ModelParams& m,
                                 const TimeGrid& grid, const SimOptions& opt = {},
                                 int threads = 1);

// Per-step quantiles across rows of values[i] (column col), linear
// interpolation between order statistics. Result: steps x levels.
Matrix empirical_quantiles(const std::vector<Matrix>& values,
                           const std::vector<double>& levels, int col = 0);

// scenario, path, step, t, k1..kn, p1..pd, a1..an
void write_paths_csv(const PathBatch& paths, const std::filesystem::path& file,
                     const std::string& manifest_comment = "");

}  // namespace mfg
