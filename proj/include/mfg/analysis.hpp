#pragma once

// Well-posedness checks (contraction constants, the diagonal monotonicity
// example, the lower bound on lambda) and solver diagnostics: the
// deterministic Pontryagin residual and a dynamic-programming oracle.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mfg/model.hpp"
#include "mfg/sim.hpp"

namespace mfg {

struct LipschitzConstants {
  double C_Phi_e = 0.0;
  double C_Phi_p = 0.0;
  double C_phi = 0.0;
  double C_gamma = 0.0;
  double C_sigma = 0.0;
  double C_grad_g_k = 0.0;
  double C_grad_g_p = 0.0;
  double C_upsilon_k = 0.0;
  double C_upsilon_p = 0.0;
  double C_upsilon_y = 0.0;
  double C_a_k = 0.0;
  double C_a_p = 0.0;
  double C_a_y = 0.0;
  double delta = 0.0;
  double rho = 0.0;
  double T = 1.0;

  void validate() const;
  bool operator==(const LipschitzConstants&) const = default;
};

// (e^{nu T} - 1) / nu, continuous at nu = 0.
double growth_factor(double nu, double T);

struct ContractionVariant {
  double nu = 0.0;
  double C2 = 0.0;
  double C3 = 0.0;
  double composite = 0.0;
  bool holds = false;
};

struct ContractionReport {
  double C1 = 0.0;
  double C4 = 0.0;
  double C5 = 0.0;
  // nu = -2(delta + rho) + C_upsilon_y^2 + C_sigma^2 + C_upsilon_k + C_upsilon_p
  ContractionVariant squared;
  // same with 2 C_upsilon_y in place of C_upsilon_y^2
  ContractionVariant linear;
  double composite = 0.0;  // the larger of the two
  bool verdict = false;    // both variants below 1
};

double composite_of(double C1, double C2, double C3, double C4, double C5);

ContractionReport contraction_constants(const LipschitzConstants& lc);

struct MonotonicityInputs {
  double lambda = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  double epsilon = 0.0;
  double C_Phi_e = 0.0;
  double C_Phi_p = 0.0;
  double delta = 0.0;
  double rho = 0.0;
  double sigma = 0.0;
  double gamma = 0.0;
  double norm_Dap_f = 0.0;
  double norm_Dkp_f = 0.0;
  // Lower bound on lambda.
  double theta = 0.1;
  double T = 1.0;
  double eta0 = 1.0;
  double norm_grad_k_F = 0.0;
  double norm_grad_k_g = 1.0;
  double target_c = 0.0;

  void validate() const;
  bool operator==(const MonotonicityInputs&) const = default;
};

struct MonotonicityReport {
  // lhs - rhs of each strict inequality
  double slack_control = 0.0;
  double slack_capital = 0.0;
  double slack_externality = 0.0;
  bool verdict = false;
};

MonotonicityReport check_monotonicity_example(const MonotonicityInputs& mi);

struct LambdaBoundReport {
  bool verdict = false;
  double c_max = 0.0;  // theta exp(-T u'(eta0) |grad_k F| / theta)
  std::string reason;  // empty when the verdict holds
};

// Needs the model's utility for u'(eta0).
LambdaBoundReport check_lambda_bound(const MonotonicityInputs& mi, const Utility& u);

// Sampling box for the empirical estimator.
struct SampleBox {
  double k_lo = 0.05, k_hi = 2.0;
  double p_lo = 0.0, p_hi = 2.0;
  double y_lo = 0.0, y_hi = 2.0;
  int samples = 200;
  std::uint64_t seed = 7;
};

// Coefficient-level constants are exact. Gradient-level constants are the
// largest finite-difference Jacobian norms over the box: empirical, not
// certified. delta is max_i delta_i.
LipschitzConstants lipschitz_from_model(const ModelParams& m, const SampleBox& box);

std::string format_report(const ContractionReport& c, const MonotonicityReport* mono,
                          const LambdaBoundReport* lambda);
void write_report_csv(const ContractionReport& c, const MonotonicityReport* mono,
                      const LambdaBoundReport* lambda, const std::filesystem::path& file,
                      const std::string& manifest);

// ---- deterministic Pontryagin check ---------------------------------------

// a = policy(t, p, k)
using PolicyFn = std::function<Vec(double t, std::span<const double> p,
                                   std::span<const double> k)>;

PolicyFn policy_fn(const PolicyNet& net, const ModelParams& m);

struct PontryaginResidual {
  double sup = 0.0;   // sup_i |a_i - a*(k_i, p_i, y_i)| / (1 + |a_i|)
  double mean = 0.0;
  std::vector<Vec> k, p, a, y;
};

// Forward Euler with the policy, then y_N = grad_k g and
// y_i = y_{i+1} + grad_k H(a_i, k_i, p_i, y_{i+1}, 0) dt. The externality is
// driven by phi(k) of the representative path. Requires sigma = gamma = 0.
PontryaginResidual deterministic_pontryagin_check(const PolicyFn& policy,
                                                  const ModelParams& m,
                                                  const TimeGrid& grid);

// Continuous-time optimum of the deterministic problem by RK4 and Newton
// shooting on y_0.
struct PontryaginReference {
  TimeGrid grid;
  std::vector<Vec> k, p, y;
  double terminal_mismatch = 0.0;

  Vec y_at(double t) const;  // linear interpolation
  // a = feedback_control(k, p, y*(t))
  PolicyFn policy(const ModelParams& m) const;
};

PontryaginReference solve_pontryagin_reference(const ModelParams& m, int fine_steps = 20000);

// ---- dynamic programming oracle -------------------------------------------

struct DpGridSpec {
  int nodes = 400;
  double k_lo = 1e-3;
  double k_hi = 5.0;
  bool refine_check = true;
  double max_refinement_change = 5e-3;
};

struct DpResult {
  double value = 0.0;
  double refined_value = 0.0;
  double relative_change = 0.0;
  bool too_coarse = false;
  std::vector<double> p_path;
  Vec k_nodes;
  std::vector<Vec> values;  // per step, on k_nodes
};

// Backward induction for n = 1 with sigma = gamma = 0 and no interaction:
// V_i(k) = max_a dt e^{-rho t_i}(u(F - a) + sign theta K(a)) + V_{i+1}(k')
// with V_N = g e^{-rho T}. steps = 0 returns g(k0, p0) at zero horizon.
DpResult dp_oracle(const ModelParams& m, int steps, const DpGridSpec& spec = {},
                   const SimOptions& opt = {});

// Maximizes a unimodal function on [lo, hi].
double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double tol = 1e-10, int max_iter = 200);

}  // namespace mfg
