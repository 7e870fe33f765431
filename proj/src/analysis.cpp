#include "mfg/analysis.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "mfg/errors.hpp"

namespace mfg {

// ---- contraction ----------------------------------------------------------

void LipschitzConstants::validate() const {
  const double fields[] = {C_Phi_e,     C_Phi_p,     C_phi,       C_gamma, C_sigma,
                           C_grad_g_k,  C_grad_g_p,  C_upsilon_k, C_upsilon_p,
                           C_upsilon_y, C_a_k,       C_a_p,       C_a_y,   delta,
                           rho};
  for (double v : fields)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ConfigError("Lipschitz constants must be finite and >= 0");
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("analysis.T must be > 0");
}

double growth_factor(double nu, double T) {
  if (std::abs(nu) < 1e-8) return T + nu * T * T / 2.0 + nu * nu * T * T * T / 6.0;
  return std::expm1(nu * T) / nu;
}

double composite_of(double C1, double C2, double C3, double C4, double C5) {
  return C4 * C1 + C5 * (C2 + C3 * C1);
}

ContractionReport contraction_constants(const LipschitzConstants& lc) {
  const double T = lc.T;
  ContractionReport r;
  r.C1 = lc.C_Phi_e * lc.C_phi * T *
         std::exp((lc.C_Phi_e + 2.0 * lc.C_Phi_p + lc.C_gamma * lc.C_gamma) * T);
  const double control_rate = lc.C_a_p + lc.C_a_y + 2.0 * lc.C_a_k +
                              lc.C_sigma * lc.C_sigma - 2.0 * lc.delta;
  const double control_factor = T * std::exp(control_rate * T);
  r.C4 = lc.C_a_p * control_factor;
  r.C5 = lc.C_a_y * control_factor;

  const double base = -2.0 * (lc.delta + lc.rho) + lc.C_sigma * lc.C_sigma +
                      lc.C_upsilon_k + lc.C_upsilon_p;
  auto variant = [&](double nu) {
    ContractionVariant v;
    v.nu = nu;
    const double gf = growth_factor(nu, T);
    v.C2 = (lc.C_grad_g_k * lc.C_grad_g_k + T * lc.C_upsilon_k * lc.C_upsilon_k) * gf;
    v.C3 = (lc.C_grad_g_p * lc.C_grad_g_p + T * lc.C_upsilon_p * lc.C_upsilon_p) * gf;
    v.composite = composite_of(r.C1, v.C2, v.C3, r.C4, r.C5);
    v.holds = v.composite < 1.0;
    return v;
  };
  r.squared = variant(base + lc.C_upsilon_y * lc.C_upsilon_y);
  r.linear = variant(base + 2.0 * lc.C_upsilon_y);
  r.composite = std::max(r.squared.composite, r.linear.composite);
  r.verdict = r.squared.holds && r.linear.holds;
  return r;
}

// ---- monotonicity example -------------------------------------------------

void MonotonicityInputs::validate() const {
  if (!(lambda > 0.0 && alpha > 0.0 && beta > 0.0))
    throw ConfigError("monotonicity: lambda, alpha, beta must be > 0");
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw ConfigError("monotonicity: epsilon must be in [0, 1]");
  if (!(norm_Dap_f >= 0.0 && norm_Dkp_f >= 0.0))
    throw ConfigError("monotonicity: norms must be >= 0");
}

MonotonicityReport check_monotonicity_example(const MonotonicityInputs& mi) {
  MonotonicityReport r;
  r.slack_control = 2.0 * mi.lambda - ((1.0 - mi.epsilon) * mi.beta + 0.5 * mi.norm_Dap_f);
  r.slack_capital =
      mi.beta * (mi.rho / 2.0 + mi.delta - mi.sigma * mi.sigma / 2.0 - mi.epsilon) -
      (0.5 * mi.norm_Dkp_f + mi.alpha * mi.C_Phi_e);
  r.slack_externality =
      mi.alpha * (mi.C_Phi_p - mi.C_Phi_e / 2.0 + mi.delta - mi.gamma * mi.gamma / 2.0) -
      (0.5 * mi.norm_Dap_f + 0.5 * mi.norm_Dkp_f);
  r.verdict = r.slack_control > 0.0 && r.slack_capital > 0.0 && r.slack_externality > 0.0;
  return r;
}

LambdaBoundReport check_lambda_bound(const MonotonicityInputs& mi, const Utility& u) {
  if (!(mi.theta > 0.0 && mi.T > 0.0 && mi.eta0 > 0.0))
    throw ConfigError("lambda bound: theta, T and eta0 must be > 0");
  LambdaBoundReport r;
  r.c_max = mi.theta * std::exp(-mi.T * u.prime(mi.eta0) * mi.norm_grad_k_F / mi.theta);
  if (std::abs(mi.norm_grad_k_g - 1.0) > 1e-12) {
    r.reason = "g-gradient normalization";
  } else if (mi.norm_grad_k_F > mi.delta + mi.rho) {
    r.reason = "production gradient exceeds delta + rho";
  } else if (mi.target_c > r.c_max) {
    r.reason = "target c above bound";
  }
  r.verdict = r.reason.empty();
  return r;
}

// ---- empirical Lipschitz constants ----------------------------------------

namespace {

double spectral_norm(const Eigen::MatrixXd& J) {
  if (J.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
  return svd.singularValues()(0);
}

// Central-difference Jacobian of f at x (columns = inputs).
Eigen::MatrixXd fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x) {
  const Vec f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const Vec fp = f(xp), fm = f(xm);
    for (std::size_t i = 0; i < f0.size(); ++i) J(i, j) = (fp[i] - fm[i]) / (2.0 * h);
  }
  return J;
}

}  // namespace

LipschitzConstants lipschitz_from_model(const ModelParams& m, const SampleBox& box) {
  m.validate();
  LipschitzConstants lc;
  for (int j = 0; j < m.d; ++j) {
    lc.C_Phi_e = std::max(lc.C_Phi_e, std::abs(m.emission_coeff[j]));
    lc.C_Phi_p = std::max(lc.C_Phi_p, std::abs(m.decay_coeff[j]));
  }
  lc.C_phi = spectral_norm(
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          m.phi_matrix.data(), m.d, m.n));
  lc.C_gamma = *std::max_element(m.gamma.begin(), m.gamma.end());
  lc.C_sigma = *std::max_element(m.sigma.begin(), m.sigma.end());
  lc.delta = *std::max_element(m.delta.begin(), m.delta.end());
  lc.rho = m.rho;
  lc.T = m.T;

  std::mt19937_64 rng(box.seed);
  std::uniform_real_distribution<double> uk(box.k_lo, box.k_hi), up(box.p_lo, box.p_hi),
      uy(box.y_lo, box.y_hi);
  for (int s = 0; s < box.samples; ++s) {
    Vec k(m.n), p(m.d), y(m.n);
    for (auto& v : k) v = uk(rng);
    for (auto& v : p) v = up(rng);
    for (auto& v : y) v = uy(rng);
    auto upd = [](double& c, const Eigen::MatrixXd& J) { c = std::max(c, spectral_norm(J)); };

    upd(lc.C_grad_g_k, fd_jacobian([&](const Vec& kk) { return terminal_grad_k(m, kk, p); }, k));
    upd(lc.C_grad_g_p, fd_jacobian([&](const Vec& pp) { return terminal_grad_k(m, k, pp); }, p));

    auto upsilon = [&](const Vec& kk, const Vec& pp, const Vec& yy) {
      return grad_k_hamiltonian(m, feedback_control(m, kk, pp, yy), kk, pp, yy);
    };
    upd(lc.C_upsilon_k, fd_jacobian([&](const Vec& kk) { return upsilon(kk, p, y); }, k));
    upd(lc.C_upsilon_p, fd_jacobian([&](const Vec& pp) { return upsilon(k, pp, y); }, p));
    upd(lc.C_upsilon_y, fd_jacobian([&](const Vec& yy) { return upsilon(k, p, yy); }, y));
    upd(lc.C_a_k, fd_jacobian([&](const Vec& kk) { return feedback_control(m, kk, p, y); }, k));
    upd(lc.C_a_p, fd_jacobian([&](const Vec& pp) { return feedback_control(m, k, pp, y); }, p));
    upd(lc.C_a_y, fd_jacobian([&](const Vec& yy) { return feedback_control(m, k, p, yy); }, y));
  }
  return lc;
}

// ---- reports --------------------------------------------------------------

std::string format_report(const ContractionReport& c, const MonotonicityReport* mono,
                          const LambdaBoundReport* lambda) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "Contraction constants\n";
  os << "  C1 = " << c.C1 << "\n  C4 = " << c.C4 << "\n  C5 = " << c.C5 << '\n';
  auto variant = [&](const char* name, const ContractionVariant& v) {
    os << "  [" << name << "] nu = " << v.nu << ", C2 = " << v.C2 << ", C3 = " << v.C3
       << ", C4 C1 + C5 (C2 + C3 C1) = " << v.composite << (v.holds ? " < 1" : " >= 1")
       << '\n';
  };
  variant("nu with C_upsilon_y^2", c.squared);
  variant("nu with 2 C_upsilon_y", c.linear);
  os << "  contraction: " << (c.verdict ? "HOLDS" : "FAILS") << " (composite "
     << c.composite << ")\n";
  if (mono) {
    os << "Monotonicity example\n";
    os << "  slack (control)     = " << mono->slack_control << '\n';
    os << "  slack (capital)     = " << mono->slack_capital << '\n';
    os << "  slack (externality) = " << mono->slack_externality << '\n';
    os << "  monotonicity: " << (mono->verdict ? "HOLDS" : "FAILS") << '\n';
  }
  if (lambda) {
    os << "Lambda lower bound\n";
    os << "  c_max = " << lambda->c_max << '\n';
    os << "  lambda bound: " << (lambda->verdict ? "HOLDS" : "FAILS");
    if (!lambda->verdict) os << " (" << lambda->reason << ")";
    os << '\n';
  }
  return os.str();
}

void write_report_csv(const ContractionReport& c, const MonotonicityReport* mono,
                      const LambdaBoundReport* lambda, const std::filesystem::path& file,
                      const std::string& manifest) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot open " + file.string());
  out.precision(17);
  if (!manifest.empty()) out << "# " << manifest << '\n';
  out << "name,value\n";
  out << "C1," << c.C1 << "\nC4," << c.C4 << "\nC5," << c.C5 << '\n';
  out << "nu_squared," << c.squared.nu << "\nC2_squared," << c.squared.C2 << "\nC3_squared,"
      << c.squared.C3 << "\ncomposite_squared," << c.squared.composite << '\n';
  out << "nu_linear," << c.linear.nu << "\nC2_linear," << c.linear.C2 << "\nC3_linear,"
      << c.linear.C3 << "\ncomposite_linear," << c.linear.composite << '\n';
  out << "composite," << c.composite << "\ncontraction_verdict," << int(c.verdict) << '\n';
  if (mono) {
    out << "slack_control," << mono->slack_control << "\nslack_capital,"
        << mono->slack_capital << "\nslack_externality," << mono->slack_externality
        << "\nmonotonicity_verdict," << int(mono->verdict) << '\n';
  }
  if (lambda)
    out << "lambda_c_max," << lambda->c_max << "\nlambda_verdict," << int(lambda->verdict)
        << '\n';
}

// ---- Pontryagin check -----------------------------------------------------

PolicyFn policy_fn(const PolicyNet& net, const ModelParams& m) {
  return [net, m](double t, std::span<const double> p, std::span<const double> k) {
    return net.act(m, t / m.T, p, k);
  };
}

namespace {

void require_deterministic(const ModelParams& m) {
  for (double s : m.sigma)
    if (s != 0.0) throw ContractViolation("deterministic reduction needs sigma = 0");
  for (double g : m.gamma)
    if (g != 0.0) throw ContractViolation("deterministic reduction needs gamma = 0");
}

double norm2(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Vec externality_rate(const ModelParams& m, const Vec& k, const Vec& p) {
  return externality_drift(m, phi(m, k), p);
}

}  // namespace

PontryaginResidual deterministic_pontryagin_check(const PolicyFn& policy,
                                                  const ModelParams& m,
                                                  const TimeGrid& grid) {
  require_deterministic(m);
  const int N = grid.steps;
  const double dt = grid.dt();
  PontryaginResidual r;
  r.k.assign(N + 1, Vec{});
  r.p.assign(N + 1, Vec{});
  r.a.assign(N + 1, Vec{});
  r.y.assign(N + 1, Vec{});
  r.k[0] = m.k0;
  r.p[0] = m.p0;
  for (int i = 0; i < N; ++i) {
    r.a[i] = policy(grid.t(i), r.p[i], r.k[i]);
    Vec k = r.k[i], p = r.p[i];
    const Vec drift = externality_rate(m, r.k[i], r.p[i]);
    for (int c = 0; c < m.n; ++c)
      k[c] = std::max(k[c] + (r.a[i][c] - m.delta[c] * k[c]) * dt, 1e-8);
    for (int j = 0; j < m.d; ++j) p[j] = std::max(p[j] + drift[j] * dt, 0.0);
    r.k[i + 1] = k;
    r.p[i + 1] = p;
  }
  r.y[N] = terminal_grad_k(m, r.k[N], r.p[N]);
  for (int i = N - 1; i >= 0; --i) {
    const Vec g = grad_k_hamiltonian(m, r.a[i], r.k[i], r.p[i], r.y[i + 1]);
    r.y[i] = r.y[i + 1];
    for (int c = 0; c < m.n; ++c) r.y[i][c] += g[c] * dt;
  }
  double sum = 0.0;
  for (int i = 0; i < N; ++i) {
    const Vec star = feedback_control(m, r.k[i], r.p[i], r.y[i]);
    Vec diff(m.n);
    for (int c = 0; c < m.n; ++c) diff[c] = r.a[i][c] - star[c];
    const double res = norm2(diff) / (1.0 + norm2(r.a[i]));
    r.sup = std::max(r.sup, res);
    sum += res;
  }
  r.mean = sum / N;
  return r;
}

namespace {

struct OdeState {
  Vec k, p, y;
};

OdeState ode_rhs(const ModelParams& m, const OdeState& s) {
  const Vec a = feedback_control(m, s.k, s.p, s.y);
  OdeState d;
  d.k.resize(m.n);
  for (int c = 0; c < m.n; ++c) d.k[c] = a[c] - m.delta[c] * s.k[c];
  d.p = externality_rate(m, s.k, s.p);
  const Vec g = grad_k_hamiltonian(m, a, s.k, s.p, s.y);
  d.y.resize(m.n);
  for (int c = 0; c < m.n; ++c) d.y[c] = -g[c];
  return d;
}

OdeState axpy(const OdeState& s, double h, const OdeState& d) {
  OdeState o = s;
  for (std::size_t c = 0; c < o.k.size(); ++c) o.k[c] += h * d.k[c];
  for (std::size_t c = 0; c < o.p.size(); ++c) o.p[c] += h * d.p[c];
  for (std::size_t c = 0; c < o.y.size(); ++c) o.y[c] += h * d.y[c];
  return o;
}

std::vector<OdeState> integrate(const ModelParams& m, const Vec& y0, int steps) {
  const double h = m.T / steps;
  std::vector<OdeState> path(steps + 1);
  path[0] = OdeState{m.k0, m.p0, y0};
  for (int i = 0; i < steps; ++i) {
    const OdeState& s = path[i];
    const OdeState k1 = ode_rhs(m, s);
    const OdeState k2 = ode_rhs(m, axpy(s, h / 2, k1));
    const OdeState k3 = ode_rhs(m, axpy(s, h / 2, k2));
    const OdeState k4 = ode_rhs(m, axpy(s, h, k3));
    OdeState next = s;
    for (int c = 0; c < m.n; ++c) {
      next.k[c] += h / 6 * (k1.k[c] + 2 * k2.k[c] + 2 * k3.k[c] + k4.k[c]);
      next.y[c] += h / 6 * (k1.y[c] + 2 * k2.y[c] + 2 * k3.y[c] + k4.y[c]);
    }
    for (int j = 0; j < m.d; ++j)
      next.p[j] += h / 6 * (k1.p[j] + 2 * k2.p[j] + 2 * k3.p[j] + k4.p[j]);
    for (double v : next.k)
      if (!std::isfinite(v) || v <= 0.0)
        throw NumericError("Pontryagin reference: capital left the domain", y0[0], y0[0]);
    path[i + 1] = std::move(next);
  }
  return path;
}

Vec shooting_residual(const ModelParams& m, const std::vector<OdeState>& path) {
  const OdeState& e = path.back();
  Vec r = terminal_grad_k(m, e.k, e.p);
  for (int c = 0; c < m.n; ++c) r[c] = e.y[c] - r[c];
  return r;
}

}  // namespace

PontryaginReference solve_pontryagin_reference(const ModelParams& m, int fine_steps) {
  require_deterministic(m);
  if (fine_steps < 1) throw ContractViolation("fine_steps must be >= 1");
  Vec y0 = terminal_grad_k(m, m.k0, m.p0);
  auto residual_at = [&](const Vec& y) {
    return shooting_residual(m, integrate(m, y, fine_steps));
  };
  Vec r = residual_at(y0);
  for (int it = 0; it < 100 && norm2(r) > 1e-12 * (1.0 + norm2(y0)); ++it) {
    Eigen::MatrixXd J(m.n, m.n);
    for (int c = 0; c < m.n; ++c) {
      const double h = 1e-7 * std::max(1.0, std::abs(y0[c]));
      Vec yp = y0;
      yp[c] += h;
      const Vec rp = residual_at(yp);
      for (int i = 0; i < m.n; ++i) J(i, c) = (rp[i] - r[i]) / h;
    }
    const Eigen::VectorXd step =
        J.fullPivLu().solve(-Eigen::Map<const Eigen::VectorXd>(r.data(), m.n));
    double lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt, lambda /= 2) {
      Vec trial = y0;
      for (int c = 0; c < m.n; ++c) trial[c] += lambda * step(c);
      try {
        const Vec rt = residual_at(trial);
        if (norm2(rt) < norm2(r)) {
          y0 = trial;
          r = rt;
          accepted = true;
          break;
        }
      } catch (const NumericError&) {
      } catch (const DomainError&) {
      }
    }
    if (!accepted) break;
  }
  const auto path = integrate(m, y0, fine_steps);
  PontryaginReference ref;
  ref.grid = TimeGrid(m.T, fine_steps);
  ref.terminal_mismatch = norm2(shooting_residual(m, path));
  if (!(ref.terminal_mismatch < 1e-8))
    throw NumericError("Pontryagin reference: shooting did not converge", y0[0], y0[0]);
  for (const auto& s : path) {
    ref.k.push_back(s.k);
    ref.p.push_back(s.p);
    ref.y.push_back(s.y);
  }
  return ref;
}

Vec PontryaginReference::y_at(double t) const {
  const double pos = std::clamp(t / grid.dt(), 0.0, static_cast<double>(grid.steps));
  const int i = std::min(static_cast<int>(pos), grid.steps - 1);
  const double w = pos - i;
  Vec out(y[i].size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = (1 - w) * y[i][c] + w * y[i + 1][c];
  return out;
}

PolicyFn PontryaginReference::policy(const ModelParams& m) const {
  return [ref = *this, m](double t, std::span<const double> p, std::span<const double> k) {
    return feedback_control(m, k, p, ref.y_at(t));
  };
}

// ---- dynamic programming --------------------------------------------------

double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double tol, int max_iter) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > tol * std::max(1.0, std::abs(b)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

namespace {

double interp(const Vec& x, const Vec& v, double q) {
  const auto it = std::upper_bound(x.begin(), x.end(), q);
  std::size_t hi = static_cast<std::size_t>(it - x.begin());
  hi = std::clamp<std::size_t>(hi, 1, x.size() - 1);
  const std::size_t lo = hi - 1;
  const double w = (q - x[lo]) / (x[hi] - x[lo]);
  return v[lo] + w * (v[hi] - v[lo]);
}

DpResult dp_solve(const ModelParams& m, int steps, int nodes, const DpGridSpec& spec,
                  const SimOptions& opt) {
  DpResult r;
  const double dt = m.T / steps;
  r.p_path.resize(steps + 1);
  r.p_path[0] = m.p0[0];
  const Vec zero_e(m.d, 0.0);
  for (int i = 0; i < steps; ++i) {
    const Vec pv{r.p_path[i]};
    r.p_path[i + 1] = std::max(r.p_path[i] + externality_drift(m, zero_e, pv)[0] * dt, opt.p_floor);
  }
  r.k_nodes.resize(nodes);
  const double llo = std::log(spec.k_lo), lhi = std::log(spec.k_hi);
  for (int j = 0; j < nodes; ++j)
    r.k_nodes[j] = std::exp(llo + (lhi - llo) * j / (nodes - 1));

  r.values.assign(steps + 1, Vec(nodes));
  const double disc_T = std::exp(-m.rho * m.T);
  for (int j = 0; j < nodes; ++j) {
    const Vec k{r.k_nodes[j]}, p{r.p_path[steps]};
    r.values[steps][j] = terminal_reward(m, k, p) * disc_T;
  }
  for (int i = steps - 1; i >= 0; --i) {
    const double w = dt * std::exp(-m.rho * i * dt);
    const Vec p{r.p_path[i]};
    const Vec& next = r.values[i + 1];
    for (int j = 0; j < nodes; ++j) {
      const double k = r.k_nodes[j];
      const Vec kv{k};
      const double F = production(m, kv, p);
      auto objective = [&](double a) {
        const double a_arr[1] = {a};
        const double kn = std::max(k + (a - m.delta[0] * k) * dt, opt.k_floor);
        return w * (m.utility.value(F - a) + m.theta * entropic_cost(a_arr)) +
               interp(r.k_nodes, next, kn);
      };
      const double a_star = golden_section_max(objective, F * 1e-12, F * (1.0 - 1e-12));
      r.values[i][j] = objective(a_star);
    }
  }
  r.value = interp(r.k_nodes, r.values[0], m.k0[0]);
  return r;
}

}  // namespace

DpResult dp_oracle(const ModelParams& m, int steps, const DpGridSpec& spec,
                   const SimOptions& opt) {
  if (m.n != 1) throw ContractViolation("dp_oracle needs n = 1");
  require_deterministic(m);
  for (double c : m.emission_coeff)
    if (c != 0.0) throw ContractViolation("dp_oracle needs an externality independent of e");
  if (opt.entropy_sign != 1.0)
    throw ContractViolation("dp_oracle needs the concave entropic reward (entropy_sign = 1)");
  if (steps < 0) throw ContractViolation("dp_oracle: steps must be >= 0");
  if (spec.nodes < 2 || !(spec.k_lo > 0.0 && spec.k_hi > spec.k_lo))
    throw ContractViolation("dp_oracle: bad grid");
  if (steps == 0) {
    ModelParams z = m;
    z.T = 0.0;
    DpResult r;
    r.value = r.refined_value = terminal_reward(z, m.k0, m.p0);
    return r;
  }
  DpResult r = dp_solve(m, steps, spec.nodes, spec, opt);
  r.refined_value = r.value;
  if (spec.refine_check) {
    r.refined_value = dp_solve(m, steps, 2 * spec.nodes - 1, spec, opt).value;
    r.relative_change = std::abs(r.refined_value - r.value) / std::abs(r.refined_value);
    r.too_coarse = r.relative_change > spec.max_refinement_change;
  }
  return r;
}

}  // namespace mfg
