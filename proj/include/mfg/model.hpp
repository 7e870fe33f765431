#pragma once

// Closed-form primitives of the growth game: utility, production, terminal
// reward, externality maps, the Hamiltonian and the Pontryagin feedback
// control obtained from a scalar root equation.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfg/errors.hpp"

namespace mfg {

using Vec = std::vector<double>;

enum class UtilityKind { kPower, kLog, kLinearStub };

// u(c) = c^exponent (kPower) or ln c (kLog). kLinearStub is u(c) = c with
// u' = 1, u'' = 0; it violates strict concavity and is only reachable from
// test builds.
struct Utility {
  UtilityKind kind = UtilityKind::kPower;
  double exponent = 0.8;

  double value(double c) const;
  double prime(double c) const;
  double second(double c) const;

  static Utility power(double exponent);
  static Utility log();
#ifdef MFG_ENABLE_TEST_STUBS
  static Utility linear_stub() { return Utility{UtilityKind::kLinearStub, 1.0}; }
#endif

  bool operator==(const Utility&) const = default;
};

// b(p) = base + amplitude / (1 + exp(slope . p - shift)).
// Reference parameters: brown sector {0, 1, slope 0.5, shift 0.1}; green sector {0.4, 0}.
struct SectorProductivity {
  double base = 0.0;
  double amplitude = 0.0;
  Vec slope;  // length d; empty means zero
  double shift = 0.0;

  bool operator==(const SectorProductivity&) const = default;
};

// F(k, p) = (sum_i b_i(p) k^i)^beta + floor
struct Production {
  std::vector<SectorProductivity> sectors;
  double beta = 0.3;
  double floor = 1e-6;

  bool operator==(const Production&) const = default;
};

struct ModelParams {
  int n = 2;
  int d = 1;
  double T = 45.0;
  double rho = 0.1;
  Vec delta;  // n
  Vec sigma;  // n, sigma(k) = diag(sigma_i k^i)
  Vec gamma;  // d, gamma(p) = diag(gamma_j p^j)
  double theta = 0.1;
  // Listed alongside the other reference values but read by nothing.
  double sigma0 = 0.1;
  Utility utility;
  Production production;
  // phi(k) = Gamma k, d x n row-major. Also written xi(k); named phi to
  // avoid the clash with total investment.
  Vec phi_matrix;
  // Phi(e, p) = emission_coeff * e - decay_coeff * p, componentwise (d).
  Vec emission_coeff;
  Vec decay_coeff;
  Vec k0;  // initial capital (Dirac initial law)
  Vec p0;  // initial externality

  // Throws ConfigError naming the offending field.
  void validate() const;

  // Reference parameters with the chosen defaults p0 = 0.1, T = 45.
  static ModelParams table1();

  bool operator==(const ModelParams&) const = default;
};

struct ProductionGrad {
  Vec dk;  // n
  Vec dp;  // d
};

Vec productivity(const ModelParams& m, std::span<const double> p);
double production(const ModelParams& m, std::span<const double> k,
                  std::span<const double> p);
ProductionGrad production_grad(const ModelParams& m, std::span<const double> k,
                               std::span<const double> p);

// K(a) = -sum a^i ln a^i
double entropic_cost(std::span<const double> a);

Vec phi(const ModelParams& m, std::span<const double> k);
Vec externality_drift(const ModelParams& m, std::span<const double> e,
                      std::span<const double> p);

// g(k, p) = u(F(k, p)) e^{-rho T} / rho
double terminal_reward(const ModelParams& m, std::span<const double> k,
                       std::span<const double> p);
Vec terminal_grad_k(const ModelParams& m, std::span<const double> k,
                    std::span<const double> p);
Vec terminal_grad_p(const ModelParams& m, std::span<const double> k,
                    std::span<const double> p);

// f[k,p,y](xi) = xi - sum_i exp((y^i - u'(F - xi)) / theta - 1)
double xi_residual(const ModelParams& m, double F, std::span<const double> y,
                   double xi);

struct XiSolution {
  double xi = 0.0;
  double residual = 0.0;
  double production = 0.0;
  int iterations = 0;
};

inline constexpr double kXiTolerance = 1e-10;

// Bracketed Newton with bisection fallback on (0, F). Throws NumericError
// carrying the final bracket when |f| <= tol is not reached.
XiSolution solve_xi(const ModelParams& m, std::span<const double> k,
                    std::span<const double> p, std::span<const double> y,
                    double tol = kXiTolerance);

struct XiGradient {
  Vec dk;  // n
  Vec dp;  // d
  Vec dy;  // n
};

XiGradient xi_gradient(const ModelParams& m, std::span<const double> k,
                       std::span<const double> p, std::span<const double> y);

// a^i = exp((y^i - u'(F - xi)) / theta - 1), the argmax of H over A(k, p).
Vec feedback_control(const ModelParams& m, std::span<const double> k,
                     std::span<const double> p, std::span<const double> y);

// H = (a - (delta + rho) k) . y + u(F - 1.a) - theta sum a ln a
//     + Tr(sigma(k)^T z)
// z is n x n row-major; an empty span means z = 0.
double hamiltonian(const ModelParams& m, std::span<const double> a,
                   std::span<const double> k, std::span<const double> p,
                   std::span<const double> y, std::span<const double> z = {});
Vec grad_k_hamiltonian(const ModelParams& m, std::span<const double> a,
                       std::span<const double> k, std::span<const double> p,
                       std::span<const double> y,
                       std::span<const double> z = {});

}  // namespace mfg
