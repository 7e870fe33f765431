#include "mfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mfg {
namespace {

// Aggregate b.k is floored here before forming s^{beta-1} so gradients stay
// finite at k = 0.
constexpr double kAggregateFloor = 1e-12;
constexpr double kBracketMargin = 1e-12;
constexpr int kMaxXiIterations = 400;

void require_size(std::span<const double> v, int expected, const char* name) {
  if (static_cast<int>(v.size()) != expected) {
    std::ostringstream os;
    os << name << " has length " << v.size() << ", expected " << expected;
    throw ContractViolation(os.str());
  }
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(z)); }

double dot_slope(const SectorProductivity& s, std::span<const double> p) {
  double z = -s.shift;
  for (std::size_t j = 0; j < s.slope.size(); ++j) z += s.slope[j] * p[j];
  return z;
}

double aggregate(const ModelParams& m, std::span<const double> k,
                 std::span<const double> p) {
  double s = 0.0;
  for (int i = 0; i < m.n; ++i) {
    const auto& sec = m.production.sectors[i];
    s += (sec.base + sec.amplitude * logistic(dot_slope(sec, p))) * k[i];
  }
  return s;
}

// Control with a_i = exp((y_i - u'(c)) / theta - 1) for a given c.
double control_component(const ModelParams& m, double yi, double uprime) {
  return std::exp((yi - uprime) / m.theta - 1.0);
}

}  // namespace

double Utility::value(double c) const {
  if (kind == UtilityKind::kLinearStub) return c;
  if (!(c > 0.0)) throw DomainError("utility: consumption must be > 0");
  return kind == UtilityKind::kLog ? std::log(c) : std::pow(c, exponent);
}

double Utility::prime(double c) const {
  if (kind == UtilityKind::kLinearStub) return 1.0;
  if (!(c > 0.0)) throw DomainError("utility_prime: consumption must be > 0");
  return kind == UtilityKind::kLog ? 1.0 / c
                                   : exponent * std::pow(c, exponent - 1.0);
}

double Utility::second(double c) const {
  if (kind == UtilityKind::kLinearStub) return 0.0;
  if (!(c > 0.0)) throw DomainError("utility_second: consumption must be > 0");
  return kind == UtilityKind::kLog
             ? -1.0 / (c * c)
             : exponent * (exponent - 1.0) * std::pow(c, exponent - 2.0);
}

Utility Utility::power(double e) { return Utility{UtilityKind::kPower, e}; }
Utility Utility::log() { return Utility{UtilityKind::kLog, 0.0}; }

void ModelParams::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model: " + msg); };
  if (n < 1) fail("n must be >= 1");
  if (d < 1) fail("d must be >= 1");
  if (!(T > 0.0)) fail("T must be > 0");
  if (!(rho > 0.0)) fail("rho must be > 0 (terminal reward divides by rho)");
  if (!(theta > 0.0)) fail("theta must be > 0");
  auto check_len = [&](const Vec& v, int len, const char* name) {
    if (static_cast<int>(v.size()) != len)
      fail(std::string(name) + " must have length " + std::to_string(len));
  };
  check_len(delta, n, "delta");
  check_len(sigma, n, "sigma");
  check_len(gamma, d, "gamma");
  check_len(k0, n, "k0");
  check_len(p0, d, "p0");
  check_len(emission_coeff, d, "emission_coeff");
  check_len(decay_coeff, d, "decay_coeff");
  check_len(phi_matrix, n * d, "phi_matrix");
  for (double v : delta)
    if (!(v > 0.0)) fail("delta entries must be > 0");
  for (double v : sigma)
    if (!(v >= 0.0)) fail("sigma entries must be >= 0");
  for (double v : gamma)
    if (!(v >= 0.0)) fail("gamma entries must be >= 0");
  for (double v : k0)
    if (!(v > 0.0)) fail("k0 entries must be > 0");
  for (double v : p0)
    if (!(v >= 0.0)) fail("p0 entries must be >= 0");
  if (static_cast<int>(production.sectors.size()) != n)
    fail("production.sectors must have n entries");
  for (const auto& s : production.sectors) {
    if (!s.slope.empty() && static_cast<int>(s.slope.size()) != d)
      fail("production slope must have length d");
    if (s.base < 0.0 || s.amplitude < 0.0 || s.base + s.amplitude <= 0.0)
      fail("productivity coefficients must be non-negative and not both zero");
  }
  if (!(production.beta > 0.0 && production.beta < 1.0))
    fail("production.beta must lie in (0, 1)");
  if (!(production.floor >= 0.0)) fail("production.floor must be >= 0");
  if (utility.kind == UtilityKind::kPower &&
      !(utility.exponent > 0.0 && utility.exponent < 1.0))
    fail("utility exponent must lie in (0, 1)");
}

ModelParams ModelParams::table1() {
  ModelParams m;
  m.n = 2;
  m.d = 1;
  m.T = 45.0;
  m.rho = 0.1;
  m.delta = {0.1, 0.1};
  m.sigma = {0.04, 0.04};
  m.gamma = {0.15};
  m.theta = 0.1;
  m.sigma0 = 0.1;
  m.utility = Utility::power(0.8);
  m.production.beta = 0.3;
  m.production.floor = 1e-6;
  m.production.sectors = {
      SectorProductivity{0.0, 1.0, {0.5}, 0.1},
      SectorProductivity{0.4, 0.0, {}, 0.0},
  };
  m.phi_matrix = {0.5, 0.0};
  m.emission_coeff = {0.3};
  m.decay_coeff = {0.1};
  m.k0 = {0.2, 0.2};
  m.p0 = {0.1};
  return m;
}

Vec productivity(const ModelParams& m, std::span<const double> p) {
  require_size(p, m.d, "p");
  Vec b(m.n);
  for (int i = 0; i < m.n; ++i) {
    const auto& sec = m.production.sectors[i];
    b[i] = sec.base + sec.amplitude * logistic(dot_slope(sec, p));
  }
  return b;
}

double production(const ModelParams& m, std::span<const double> k,
                  std::span<const double> p) {
  require_size(k, m.n, "k");
  require_size(p, m.d, "p");
  const double s = aggregate(m, k, p);
  return std::pow(std::max(s, 0.0), m.production.beta) + m.production.floor;
}

ProductionGrad production_grad(const ModelParams& m, std::span<const double> k,
                               std::span<const double> p) {
  require_size(k, m.n, "k");
  require_size(p, m.d, "p");
  const double beta = m.production.beta;
  const double s = std::max(aggregate(m, k, p), kAggregateFloor);
  const double scale = beta * std::pow(s, beta - 1.0);
  ProductionGrad g{Vec(m.n, 0.0), Vec(m.d, 0.0)};
  for (int i = 0; i < m.n; ++i) {
    const auto& sec = m.production.sectors[i];
    const double L = logistic(dot_slope(sec, p));
    g.dk[i] = scale * (sec.base + sec.amplitude * L);
    // d/dz [1 / (1 + e^z)] = -L (1 - L)
    for (std::size_t j = 0; j < sec.slope.size(); ++j)
      g.dp[j] += scale * k[i] * (-sec.amplitude * L * (1.0 - L) * sec.slope[j]);
  }
  return g;
}

double entropic_cost(std::span<const double> a) {
  double out = 0.0;
  for (double ai : a) {
    if (!(ai > 0.0)) throw DomainError("entropic_cost: investment must be > 0");
    out -= ai * std::log(ai);
  }
  return out;
}

Vec phi(const ModelParams& m, std::span<const double> k) {
  require_size(k, m.n, "k");
  Vec e(m.d, 0.0);
  for (int j = 0; j < m.d; ++j)
    for (int i = 0; i < m.n; ++i) e[j] += m.phi_matrix[j * m.n + i] * k[i];
  return e;
}

Vec externality_drift(const ModelParams& m, std::span<const double> e,
                      std::span<const double> p) {
  require_size(e, m.d, "e");
  require_size(p, m.d, "p");
  Vec out(m.d);
  for (int j = 0; j < m.d; ++j)
    out[j] = m.emission_coeff[j] * e[j] - m.decay_coeff[j] * p[j];
  return out;
}

double terminal_reward(const ModelParams& m, std::span<const double> k,
                       std::span<const double> p) {
  const double F = production(m, k, p);
  if (!(F > 0.0)) throw DomainError("terminal_reward: F(k, p) must be > 0");
  return m.utility.value(F) * std::exp(-m.rho * m.T) / m.rho;
}

Vec terminal_grad_k(const ModelParams& m, std::span<const double> k,
                    std::span<const double> p) {
  const double F = production(m, k, p);
  if (!(F > 0.0)) throw DomainError("terminal_grad_k: F(k, p) must be > 0");
  const double scale = m.utility.prime(F) * std::exp(-m.rho * m.T) / m.rho;
  Vec g = production_grad(m, k, p).dk;
  for (double& v : g) v *= scale;
  return g;
}

Vec terminal_grad_p(const ModelParams& m, std::span<const double> k,
                    std::span<const double> p) {
  const double F = production(m, k, p);
  if (!(F > 0.0)) throw DomainError("terminal_grad_p: F(k, p) must be > 0");
  const double scale = m.utility.prime(F) * std::exp(-m.rho * m.T) / m.rho;
  Vec g = production_grad(m, k, p).dp;
  for (double& v : g) v *= scale;
  return g;
}

double xi_residual(const ModelParams& m, double F, std::span<const double> y,
                   double xi) {
  const double up = m.utility.prime(F - xi);
  double sum = 0.0;
  for (double yi : y) sum += control_component(m, yi, up);
  return xi - sum;
}

XiSolution solve_xi(const ModelParams& m, std::span<const double> k,
                    std::span<const double> p, std::span<const double> y,
                    double tol) {
  require_size(y, m.n, "y");
  if (!(tol > 0.0)) throw ContractViolation("solve_xi: tol must be > 0");
  for (double yi : y)
    if (!std::isfinite(yi)) throw DomainError("solve_xi: y must be finite");
  const double F = production(m, k, p);
  if (!(F > 0.0)) throw DomainError("solve_xi: F(k, p) must be > 0");

  // f and f' = 1 - sum_i a_i u''(c) / theta >= 1
  auto eval = [&](double xi, double& df) {
    const double c = F - xi;
    const double up = m.utility.prime(c);
    const double upp = m.utility.second(c);
    double sum = 0.0;
    for (double yi : y) sum += control_component(m, yi, up);
    df = 1.0 - sum * upp / m.theta;
    return xi - sum;
  };

  double lo = kBracketMargin * std::min(1.0, F);
  double hi = F * (1.0 - kBracketMargin);
  double df = 0.0;
  XiSolution sol;
  sol.production = F;

  const double f_lo = eval(lo, df);
  if (f_lo >= 0.0) {
    // Root sits at or below the lower margin; only acceptable if f is
    // already within tolerance there.
    if (std::abs(f_lo) <= tol) {
      sol.xi = lo;
      sol.residual = f_lo;
      return sol;
    }
    throw NumericError("solve_xi: f >= 0 at lower bracket end", 0.0, lo);
  }
  const double f_hi = eval(hi, df);
  if (f_hi <= 0.0) {
    if (std::abs(f_hi) <= tol) {
      sol.xi = hi;
      sol.residual = f_hi;
      return sol;
    }
    throw NumericError("solve_xi: f <= 0 at upper bracket end", lo, hi);
  }

  double x = 0.5 * (lo + hi);
  double best_x = x;
  double best_f = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= kMaxXiIterations; ++it) {
    const double fx = eval(x, df);
    sol.iterations = it;
    if (std::isfinite(fx) && std::abs(fx) < std::abs(best_f)) {
      best_f = fx;
      best_x = x;
    }
    if (std::isfinite(fx) && std::abs(fx) <= tol) {
      sol.xi = x;
      sol.residual = fx;
      return sol;
    }
    if (!std::isfinite(fx) || fx < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    double next = 0.5 * (lo + hi);
    if (std::isfinite(fx) && std::isfinite(df) && df > 0.0) {
      const double newton = x - fx / df;
      if (newton > lo && newton < hi) next = newton;
    }
    if (next <= lo || next >= hi || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      break;
    }
    x = next;
  }
  if (std::abs(best_f) <= tol) {
    sol.xi = best_x;
    sol.residual = best_f;
    return sol;
  }
  throw NumericError("solve_xi: no convergence to |f| <= tol", lo, hi);
}

XiGradient xi_gradient(const ModelParams& m, std::span<const double> k,
                       std::span<const double> p, std::span<const double> y) {
  const XiSolution sol = solve_xi(m, k, p, y);
  const double c = sol.production - sol.xi;
  const double up = m.utility.prime(c);
  const double upp = m.utility.second(c);
  Vec a(m.n);
  double S = 0.0;  // -sum a_i u''(c) / theta >= 0
  for (int i = 0; i < m.n; ++i) {
    a[i] = control_component(m, y[i], up);
    S -= a[i] * upp / m.theta;
  }
  const double ratio = S / (1.0 + S);
  const ProductionGrad dF = production_grad(m, k, p);
  XiGradient g{Vec(m.n), Vec(m.d), Vec(m.n)};
  for (int i = 0; i < m.n; ++i) g.dk[i] = ratio * dF.dk[i];
  for (int j = 0; j < m.d; ++j) g.dp[j] = ratio * dF.dp[j];
  for (int i = 0; i < m.n; ++i) g.dy[i] = a[i] / m.theta / (1.0 + S);
  return g;
}

Vec feedback_control(const ModelParams& m, std::span<const double> k,
                     std::span<const double> p, std::span<const double> y) {
  const XiSolution sol = solve_xi(m, k, p, y);
  const double F = sol.production;
  // Newton polish so that sum_i a_i matches xi to rounding.
  auto residual = [&](double xi, double& df) {
    const double up = m.utility.prime(F - xi);
    double sum = 0.0;
    for (double yi : y) sum += control_component(m, yi, up);
    df = 1.0 - sum * m.utility.second(F - xi) / m.theta;
    return xi - sum;
  };
  double xi = sol.xi, df = 0.0;
  double f = residual(xi, df);
  for (int it = 0; it < 3 && f != 0.0; ++it) {
    const double next = xi - f / df;
    if (!(next > 0.0 && next < F)) break;
    double dn = 0.0;
    const double fn = residual(next, dn);
    if (!(std::abs(fn) < std::abs(f))) break;
    xi = next;
    f = fn;
    df = dn;
  }
  const double up = m.utility.prime(F - xi);
  Vec a(m.n);
  for (int i = 0; i < m.n; ++i) a[i] = control_component(m, y[i], up);
  // Near small consumption one ulp of xi moves sum_i a_i by far more than
  // an ulp; close the budget on the largest component instead.
  const auto j = static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
  double rest = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (i != j) rest += a[i];
  if (xi - rest > 0.0) a[j] = xi - rest;
  return a;
}

namespace {

double consumption_of(const ModelParams& m, std::span<const double> a,
                      std::span<const double> k, std::span<const double> p) {
  require_size(a, m.n, "a");
  double total = 0.0;
  for (double ai : a) {
    if (!(ai > 0.0)) throw DomainError("hamiltonian: investment must be > 0");
    total += ai;
  }
  const double c = production(m, k, p) - total;
  if (!(c > 0.0)) throw DomainError("hamiltonian: investment exceeds production");
  return c;
}

}  // namespace

double hamiltonian(const ModelParams& m, std::span<const double> a,
                   std::span<const double> k, std::span<const double> p,
                   std::span<const double> y, std::span<const double> z) {
  require_size(y, m.n, "y");
  if (!z.empty()) require_size(z, m.n * m.n, "z");
  const double c = consumption_of(m, a, k, p);
  double h = m.utility.value(c) + m.theta * entropic_cost(a);
  for (int i = 0; i < m.n; ++i) {
    h += (a[i] - (m.delta[i] + m.rho) * k[i]) * y[i];
    if (!z.empty()) h += m.sigma[i] * k[i] * z[i * m.n + i];
  }
  return h;
}

Vec grad_k_hamiltonian(const ModelParams& m, std::span<const double> a,
                       std::span<const double> k, std::span<const double> p,
                       std::span<const double> y, std::span<const double> z) {
  require_size(y, m.n, "y");
  if (!z.empty()) require_size(z, m.n * m.n, "z");
  const double c = consumption_of(m, a, k, p);
  const double up = m.utility.prime(c);
  const ProductionGrad dF = production_grad(m, k, p);
  Vec g(m.n);
  for (int i = 0; i < m.n; ++i) {
    g[i] = -(m.delta[i] + m.rho) * y[i] + up * dF.dk[i];
    if (!z.empty()) g[i] += m.sigma[i] * z[i * m.n + i];
  }
  return g;
}

}  // namespace mfg
