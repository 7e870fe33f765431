#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <random>

#include "mfg/model.hpp"

using namespace mfg;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

Big big_production(const Big& k1, const Big& k2, const Big& p, const Big& floor) {
  const Big b1 = 1 / (1 + exp(Big("0.5") * p - Big("0.1")));
  return pow(b1 * k1 + Big("0.4") * k2, Big("0.3")) + floor;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

// Central difference of f along coordinate i of x.
template <class F>
double central(F f, Vec x, std::size_t i, double h) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const long double up = f(x);
  x[i] = x0 - h;
  const long double dn = f(x);
  return static_cast<double>((up - dn) / (2 * h));
}

// Reference-model root of f in extended precision by bisection,
// independent of the library's Newton iteration.
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

struct Sampler {
  std::mt19937_64 rng{42};
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  Vec k() { return {uniform(0.05, 2.0), uniform(0.05, 2.0)}; }
  Vec p() { return {uniform(0.0, 2.0)}; }
  Vec y() { return {uniform(0.0, 5.0), uniform(0.0, 5.0)}; }
};

// n = 1 with constant marginal utility and b = 1.
ModelParams stub_model() {
  ModelParams m = ModelParams::table1();
  m.n = 1;
  m.delta = {0.1};
  m.sigma = {0.0};
  m.phi_matrix = {0.5};
  m.k0 = {0.2};
  m.theta = 1.0;
  m.utility = Utility::linear_stub();
  m.production.sectors = {SectorProductivity{1.0, 0.0, {}, 0.0}};
  return m;
}

}  // namespace

TEST_CASE("utility values and derivatives") {
  const Utility u = Utility::power(0.8);
  CHECK(u.value(1.0) == 1.0);
  CHECK(u.prime(1.0) == doctest::Approx(0.8).epsilon(1e-15));
  const Big oracle = Big("0.8") * pow(Big("0.5"), Big("-0.2"));
  CHECK(rel_err(u.prime(0.5), oracle.convert_to<double>()) < 1e-15);
  CHECK(rel_err(u.prime(0.5), 0.918958683997628) < 1e-14);
  CHECK(u.second(0.5) < 0.0);
  CHECK(u.prime(1e-12) > 1e2);
  CHECK_THROWS_AS(u.value(0.0), DomainError);
  CHECK_THROWS_AS(u.prime(-1.0), DomainError);
  const Utility l = Utility::log();
  CHECK(l.value(1.0) == 0.0);
  CHECK(l.prime(2.0) == 0.5);
}

TEST_CASE("production at the initial state") {
  ModelParams m = ModelParams::table1();
  const Vec k{0.2, 0.2}, p{0.0};
  const Big oracle = big_production(Big("0.2"), Big("0.2"), Big(0), Big("1e-6"));
  CHECK(rel_err(production(m, k, p), oracle.convert_to<double>()) < 1e-15);
  CHECK(rel_err(production(m, k, p), 0.602766777589744) < 1e-14);

  m.production.floor = 0.0;
  CHECK(rel_err(production(m, k, p), 0.602765777589744) < 1e-14);
  CHECK(production(m, Vec{0.0, 0.0}, Vec{1.3}) == 0.0);
  m.production.floor = 1e-6;
  CHECK(production(m, Vec{0.0, 0.0}, Vec{1.3}) == 1e-6);
}

TEST_CASE("production gradient against central differences") {
  const ModelParams m = ModelParams::table1();
  Sampler s;
  for (int trial = 0; trial < 200; ++trial) {
    const Vec k = s.k(), p = s.p();
    const ProductionGrad g = production_grad(m, k, p);
    for (int i = 0; i < 2; ++i) {
      const double fd = central([&](const Vec& x) { return production(m, x, p); }, k, i, 1e-6);
      CHECK(g.dk[i] >= 0.0);
      CHECK(rel_err(g.dk[i], fd) < 1e-7);
    }
    const double fdp = central([&](const Vec& x) { return production(m, k, x); }, p, 0, 1e-6);
    CHECK(rel_err(g.dp[0], fdp) < 1e-7);
  }
  // finite at zero capital
  const ProductionGrad g0 = production_grad(m, Vec{0.0, 0.0}, Vec{0.1});
  CHECK(std::isfinite(g0.dk[0]));
  CHECK(std::isfinite(g0.dk[1]));
}

TEST_CASE("entropic cost") {
  CHECK(entropic_cost(Vec{1.0, 1.0}) == 0.0);
  const double e1 = std::exp(-1.0);
  CHECK(rel_err(entropic_cost(Vec{e1, e1}), 2 * e1) < 1e-15);
  CHECK(rel_err(entropic_cost(Vec{0.5, 0.5}), 0.6931471805599453) < 1e-15);
  CHECK_THROWS_AS(entropic_cost(Vec{0.5, 0.0}), DomainError);
  CHECK_THROWS_AS(entropic_cost(Vec{-0.1}), DomainError);
}

TEST_CASE("emission and externality drift") {
  const ModelParams m = ModelParams::table1();
  CHECK(phi(m, Vec{0.2, 0.2})[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(externality_drift(m, Vec{0.0}, Vec{0.0})[0] == 0.0);
  CHECK(externality_drift(m, Vec{0.1}, Vec{0.2})[0] == doctest::Approx(0.01).epsilon(1e-14));
}

TEST_CASE("terminal reward") {
  ModelParams m = ModelParams::table1();
  const Vec k{0.2, 0.2}, p{0.0};
  const Big F = big_production(Big("0.2"), Big("0.2"), Big(0), Big("1e-6"));
  const Big oracle = pow(F, Big("0.8")) * exp(Big("-4.5")) / Big("0.1");
  CHECK(rel_err(terminal_reward(m, k, p), oracle.convert_to<double>()) < 1e-14);
  CHECK(rel_err(terminal_reward(m, k, p), 0.0740959170457895) < 1e-13);

  Sampler s;
  for (int trial = 0; trial < 200; ++trial) {
    const Vec kk = s.k(), pp = s.p();
    const Vec gk = terminal_grad_k(m, kk, pp);
    const Vec gp = terminal_grad_p(m, kk, pp);
    for (int i = 0; i < 2; ++i) {
      CHECK(gk[i] >= 0.0);
      CHECK(rel_err(gk[i], central([&](const Vec& x) { return terminal_reward(m, x, pp); },
                                   kk, i, 1e-6)) < 1e-7);
    }
    CHECK(rel_err(gp[0], central([&](const Vec& x) { return terminal_reward(m, kk, x); }, pp,
                                 0, 1e-6)) < 1e-7);
    // concave along the diagonal
    const Vec lo{kk[0] * 0.9, kk[1] * 0.9}, hi{kk[0] * 1.1, kk[1] * 1.1};
    CHECK(terminal_reward(m, kk, pp) >=
          0.5 * (terminal_reward(m, lo, pp) + terminal_reward(m, hi, pp)));
  }

  // zero capital: the floor keeps g and its gradient finite
  const Vec gk0 = terminal_grad_k(m, Vec{0.0, 0.0}, p);
  CHECK(std::isfinite(gk0[0]));
  m.production.floor = 0.0;
  CHECK_THROWS_AS(terminal_reward(m, Vec{0.0, 0.0}, p), DomainError);
}

TEST_CASE("xi root at the initial state") {
  const ModelParams m = ModelParams::table1();
  const Vec k{0.2, 0.2}, p{0.0}, y{0.0, 0.0};
  const XiSolution x = solve_xi(m, k, p, y);
  CHECK(std::abs(x.residual) <= 1e-10);

  // independent bisection in 50-digit arithmetic
  const Big F = big_production(Big("0.2"), Big("0.2"), Big(0), Big("1e-6"));
  auto f = [&](const Big& xi) {
    const Big c = F - xi;
    const Big up = Big("0.8") * pow(c, Big("-0.2"));
    return xi - 2 * exp(-up / Big("0.1") - 1);
  };
  Big lo = 0, hi = F;
  for (int i = 0; i < 200; ++i) {
    const Big mid = (lo + hi) / 2;
    (f(mid) > 0 ? hi : lo) = mid;
  }
  CHECK(rel_err(x.xi, lo.convert_to<double>()) < 1e-9);
  CHECK(rel_err(x.xi, 1.052109205381339e-4) < 1e-9);
}

TEST_CASE("xi closed form under constant marginal utility") {
  const ModelParams m = stub_model();
  const Vec k{10.0}, p{0.0}, y{2.0};
  REQUIRE(production(m, k, p) > 1.0);
  const XiSolution x = solve_xi(m, k, p, y);
  CHECK(x.xi == doctest::Approx(1.0).epsilon(1e-10));
  const Vec a = feedback_control(m, k, p, y);
  CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-10));
  const XiGradient g = xi_gradient(m, k, p, y);
  CHECK(g.dk[0] == 0.0);
  CHECK(g.dp[0] == 0.0);
}

TEST_CASE("xi bracket, residual and slope over random inputs") {
  const ModelParams m = ModelParams::table1();
  Sampler s;
  double min_c = 1e300;
  for (int trial = 0; trial < 2000; ++trial) {
    const Vec k = s.k(), p = s.p(), y = s.y();
    const XiSolution x = solve_xi(m, k, p, y);
    CHECK(std::abs(x.residual) <= kXiTolerance);
    CHECK(x.xi > 0.0);
    CHECK(x.xi < x.production);
    min_c = std::min(min_c, x.production - x.xi);
    // f is increasing with slope >= 1
    const double lo = x.xi * 0.5, hi = x.xi + 0.5 * (x.production - x.xi);
    const double slope = (xi_residual(m, x.production, y, hi) -
                          xi_residual(m, x.production, y, lo)) /
                         (hi - lo);
    CHECK(slope >= 1.0 - 1e-12);
  }
  // consumption stays away from zero on the box
  CHECK(min_c >= 1e-4);
}

TEST_CASE("xi gradient: finite differences and production bounds") {
  const ModelParams m = ModelParams::table1();
  Sampler s;
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec k = s.k(), p = s.p(), y = s.y();
    const XiGradient g = xi_gradient(m, k, p, y);
    const ProductionGrad pg = production_grad(m, k, p);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(g.dk[i]) <= std::abs(pg.dk[i]) + 1e-15);
    CHECK(std::abs(g.dp[0]) <= std::abs(pg.dp[0]) + 1e-15);
    if (trial % 10 != 0) continue;
    auto xi_k = [&](const Vec& x) { return xi_oracle(x, p, y); };
    auto xi_p = [&](const Vec& x) { return xi_oracle(k, x, y); };
    auto xi_y = [&](const Vec& x) { return xi_oracle(k, p, x); };
    for (int i = 0; i < 2; ++i) {
      const double fk = central(xi_k, k, i, 1e-5);
      const double fy = central(xi_y, y, i, 1e-5);
      if (std::abs(fk) > 1e-8) CHECK(rel_err(g.dk[i], fk) < 1e-5);
      if (std::abs(fy) > 1e-8) CHECK(rel_err(g.dy[i], fy) < 1e-5);
    }
    const double fp = central(xi_p, p, 0, 1e-5);
    if (std::abs(fp) > 1e-8) CHECK(rel_err(g.dp[0], fp) < 1e-5);
  }
}

TEST_CASE("feedback control: first-order condition and maximality") {
  const ModelParams m = ModelParams::table1();
  Sampler s;
  for (int trial = 0; trial < 300; ++trial) {
    const Vec k = s.k(), p = s.p(), y = s.y();
    const Vec a = feedback_control(m, k, p, y);
    const double F = production(m, k, p);
    const double c = F - (a[0] + a[1]);
    CHECK(a[0] > 0.0);
    CHECK(a[1] > 0.0);
    CHECK(c > 0.0);
    for (int i = 0; i < 2; ++i)
      CHECK(std::abs(y[i] - m.utility.prime(c) - m.theta * (std::log(a[i]) + 1.0)) <= 1e-8);
    const double h_star = hamiltonian(m, a, k, p, y);
    for (int probe = 0; probe < 100; ++probe) {
      // uniform point of the open simplex {a > 0, a1 + a2 < F}
      double u1 = s.uniform(0, 1), u2 = s.uniform(0, 1);
      if (u1 + u2 >= 1.0) {
        u1 = 1.0 - u1;
        u2 = 1.0 - u2;
      }
      const Vec b{u1 * F, u2 * F};
      if (!(b[0] > 0 && b[1] > 0 && F - b[0] - b[1] > 0)) continue;
      CHECK(hamiltonian(m, b, k, p, y) <= h_star + 1e-12);
    }
  }
  const Vec sym = feedback_control(m, Vec{0.3, 1.1}, Vec{0.4}, Vec{1.7, 1.7});
  CHECK(sym[0] == doctest::Approx(sym[1]).epsilon(1e-14));
}

TEST_CASE("hamiltonian reductions and gradient") {
  const ModelParams m = ModelParams::table1();
  Sampler s;
  const Vec a{0.05, 0.07}, k{0.4, 0.9}, p{0.3};
  const double F = production(m, k, p);
  const double expect = m.utility.value(F - 0.12) + m.theta * entropic_cost(a);
  CHECK(hamiltonian(m, a, k, p, Vec{0.0, 0.0}) == doctest::Approx(expect).epsilon(1e-14));
  CHECK_THROWS_AS(hamiltonian(m, Vec{F, 0.01}, k, p, Vec{0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(hamiltonian(m, Vec{0.0, 0.01}, k, p, Vec{0.0, 0.0}), DomainError);

  for (int trial = 0; trial < 200; ++trial) {
    const Vec kk = s.k(), pp = s.p(), y = s.y();
    const Vec z{s.uniform(-1, 1), s.uniform(-1, 1), s.uniform(-1, 1), s.uniform(-1, 1)};
    const Vec aa = feedback_control(m, kk, pp, y);
    const Vec g = grad_k_hamiltonian(m, aa, kk, pp, y, z);
    for (int i = 0; i < 2; ++i) {
      const double fd = central(
          [&](const Vec& x) { return hamiltonian(m, aa, x, pp, y, z); }, kk, i, 1e-6);
      CHECK(std::abs(g[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
    // the z term does not depend on the control
    const Vec b{aa[0] * 0.7, aa[1] * 0.6};
    const Vec z2{z[0] + 3.0, z[1] - 2.0, z[2] + 0.5, z[3] + 1.0};
    const double d1 = hamiltonian(m, aa, kk, pp, y, z) - hamiltonian(m, b, kk, pp, y, z);
    const double d2 = hamiltonian(m, aa, kk, pp, y, z2) - hamiltonian(m, b, kk, pp, y, z2);
    CHECK(d1 == doctest::Approx(d2).epsilon(1e-10));
  }
}

TEST_CASE("parameter validation") {
  ModelParams m = ModelParams::table1();
  CHECK_NOTHROW(m.validate());
  m.theta = 0.0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = ModelParams::table1();
  m.delta = {0.1};
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = ModelParams::table1();
  m.T = -1.0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = ModelParams::table1();
  m.gamma = {-0.1};
  CHECK_THROWS_AS(m.validate(), ConfigError);
  CHECK_THROWS_AS(production(ModelParams::table1(), Vec{0.2}, Vec{0.1}), ContractViolation);
}
