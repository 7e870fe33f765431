#include "mfg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "mfg/errors.hpp"

namespace mfg {
namespace {

[[noreturn]] void fail_at(const toml::node& node, const std::string& msg) {
  const auto& src = node.source();
  throw ParseError(msg, src.begin.line, src.begin.column);
}

// Table wrapper that records consumed keys so leftovers can be rejected.
class Section {
 public:
  Section(const toml::table& t, std::string path) : t_(t), path_(std::move(path)) {}

  const toml::node* find(const std::string& key) {
    const toml::node* n = t_.get(key);
    if (n) used_.insert(key);
    return n;
  }

  double number(const std::string& key, double def) {
    const toml::node* n = find(key);
    if (!n) return def;
    return as_number(*n, key);
  }

  std::optional<double> optional_number(const std::string& key) {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    return as_number(*n, key);
  }

  std::int64_t integer(const std::string& key, std::int64_t def) {
    const toml::node* n = find(key);
    if (!n) return def;
    if (!n->is_integer()) fail_at(*n, name(key) + " must be an integer");
    return n->as_integer()->get();
  }

  int small_int(const std::string& key, int def) {
    const std::int64_t v = integer(key, def);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
      fail_at(*t_.get(key), name(key) + " is out of range");
    return static_cast<int>(v);
  }

  bool boolean(const std::string& key, bool def) {
    const toml::node* n = find(key);
    if (!n) return def;
    if (!n->is_boolean()) fail_at(*n, name(key) + " must be a boolean");
    return n->as_boolean()->get();
  }

  std::string string(const std::string& key, const std::string& def) {
    const toml::node* n = find(key);
    if (!n) return def;
    if (!n->is_string()) fail_at(*n, name(key) + " must be a string");
    return n->as_string()->get();
  }

  Vec numbers(const std::string& key, const Vec& def) {
    const toml::node* n = find(key);
    if (!n) return def;
    if (!n->is_array()) fail_at(*n, name(key) + " must be an array of numbers");
    Vec out;
    for (const auto& e : *n->as_array()) out.push_back(as_number(e, key));
    return out;
  }

  std::vector<int> ints(const std::string& key, const std::vector<int>& def) {
    const toml::node* n = find(key);
    if (!n) return def;
    if (!n->is_array()) fail_at(*n, name(key) + " must be an array of integers");
    std::vector<int> out;
    for (const auto& e : *n->as_array()) {
      if (!e.is_integer()) fail_at(e, name(key) + " must contain integers");
      out.push_back(static_cast<int>(e.as_integer()->get()));
    }
    return out;
  }

  std::optional<Section> table(const std::string& key) {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    if (!n->is_table()) fail_at(*n, name(key) + " must be a table");
    return Section(*n->as_table(), name(key));
  }

  const toml::array* array_of_tables(const std::string& key) {
    const toml::node* n = find(key);
    if (!n) return nullptr;
    if (!n->is_array_of_tables()) fail_at(*n, name(key) + " must be an array of tables");
    return n->as_array();
  }

  void reject_unknown() const {
    for (const auto& [k, v] : t_) {
      const std::string key(k.str());
      if (!used_.count(key)) {
        const auto& src = k.source().begin.line ? k.source() : v.source();
        throw ParseError("unknown key '" + name(key) + "'", src.begin.line,
                         src.begin.column);
      }
    }
  }

 private:
  std::string name(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  double as_number(const toml::node& n, const std::string& key) const {
    if (n.is_floating_point()) return n.as_floating_point()->get();
    if (n.is_integer()) return static_cast<double>(n.as_integer()->get());
    fail_at(n, name(key) + " must be a number");
  }

  const toml::table& t_;
  std::string path_;
  std::set<std::string> used_;
};

ModelParams parse_model(Section& s) {
  ModelParams m = ModelParams::table1();
  m.n = s.small_int("n", m.n);
  m.d = s.small_int("d", m.d);
  m.T = s.number("T", m.T);
  m.rho = s.number("rho", m.rho);
  m.delta = s.numbers("delta", m.delta);
  m.sigma = s.numbers("sigma", m.sigma);
  m.gamma = s.numbers("gamma", m.gamma);
  m.theta = s.number("theta", m.theta);
  m.sigma0 = s.number("sigma0", m.sigma0);
  const toml::node* un = s.find("utility");
  if (un) {
    if (!un->is_string()) fail_at(*un, "model.utility must be a string");
    const std::string kind = un->as_string()->get();
    if (kind == "power") {
      m.utility.kind = UtilityKind::kPower;
    } else if (kind == "log") {
      m.utility.kind = UtilityKind::kLog;
    } else {
      fail_at(*un, "model.utility must be \"power\" or \"log\"");
    }
  }
  m.utility.exponent = s.number("utility_exponent", m.utility.exponent);
  if (m.utility.kind == UtilityKind::kLog) m.utility.exponent = 0.0;
  m.production.beta = s.number("production_beta", m.production.beta);
  m.production.floor = s.number("production_floor", m.production.floor);
  m.phi_matrix = s.numbers("phi_matrix", m.phi_matrix);
  m.emission_coeff = s.numbers("emission_coeff", m.emission_coeff);
  m.decay_coeff = s.numbers("decay_coeff", m.decay_coeff);
  m.k0 = s.numbers("k0", m.k0);
  m.p0 = s.numbers("p0", m.p0);
  if (const toml::array* arr = s.array_of_tables("sectors")) {
    m.production.sectors.clear();
    for (const auto& e : *arr) {
      Section sec(*e.as_table(), "model.sectors");
      SectorProductivity p;
      p.base = sec.number("base", 0.0);
      p.amplitude = sec.number("amplitude", 0.0);
      p.slope = sec.numbers("slope", {});
      p.shift = sec.number("shift", 0.0);
      sec.reject_unknown();
      m.production.sectors.push_back(p);
    }
  }
  s.reject_unknown();
  return m;
}

SolverConfig parse_solver(Section& s) {
  SolverConfig c;
  c.steps = s.small_int("steps", c.steps);
  c.max_outer_iterations = s.small_int("max_outer_iterations", c.max_outer_iterations);
  c.policy_steps = s.small_int("policy_steps", c.policy_steps);
  c.first_policy_steps = s.small_int("first_policy_steps", c.first_policy_steps);
  c.regression_steps = s.small_int("regression_steps", c.regression_steps);
  c.scenarios = s.small_int("scenarios", c.scenarios);
  c.paths_per_scenario = s.small_int("paths_per_scenario", c.paths_per_scenario);
  c.validation_scenarios = s.small_int("validation_scenarios", c.validation_scenarios);
  c.validation_paths_per_scenario =
      s.small_int("validation_paths_per_scenario", c.validation_paths_per_scenario);
  c.validation_every = s.small_int("validation_every", c.validation_every);
  c.epsilon = s.optional_number("epsilon");
  c.learning_rate = s.number("learning_rate", c.learning_rate);
  c.regression_learning_rate = s.number("regression_learning_rate", c.regression_learning_rate);
  c.fictitious = s.boolean("fictitious", c.fictitious);
  c.literal_fictitious = s.boolean("literal_fictitious", c.literal_fictitious);
  c.policy_hidden = s.ints("policy_hidden", c.policy_hidden);
  c.regression_hidden = s.ints("regression_hidden", c.regression_hidden);
  c.consumption_margin = s.number("consumption_margin", c.consumption_margin);
  c.sim.entropy_sign = s.number("entropy_sign", c.sim.entropy_sign);
  c.sim.k_floor = s.number("k_floor", c.sim.k_floor);
  c.sim.p_floor = s.number("p_floor", c.sim.p_floor);
  s.reject_unknown();
  return c;
}

ReportConfig parse_report(Section& s) {
  ReportConfig r;
  r.evaluation_scenarios = s.small_int("evaluation_scenarios", r.evaluation_scenarios);
  r.evaluation_paths_per_scenario =
      s.small_int("evaluation_paths_per_scenario", r.evaluation_paths_per_scenario);
  r.histogram_bins = s.small_int("histogram_bins", r.histogram_bins);
  r.times = s.numbers("times", r.times);
  r.pair = s.ints("pair", r.pair);
  s.reject_unknown();
  return r;
}

LipschitzConstants parse_lipschitz(Section& s, double default_T) {
  LipschitzConstants l;
  l.C_Phi_e = s.number("C_Phi_e", 0.0);
  l.C_Phi_p = s.number("C_Phi_p", 0.0);
  l.C_phi = s.number("C_phi", 0.0);
  l.C_gamma = s.number("C_gamma", 0.0);
  l.C_sigma = s.number("C_sigma", 0.0);
  l.C_grad_g_k = s.number("C_grad_g_k", 0.0);
  l.C_grad_g_p = s.number("C_grad_g_p", 0.0);
  l.C_upsilon_k = s.number("C_upsilon_k", 0.0);
  l.C_upsilon_p = s.number("C_upsilon_p", 0.0);
  l.C_upsilon_y = s.number("C_upsilon_y", 0.0);
  l.C_a_k = s.number("C_a_k", 0.0);
  l.C_a_p = s.number("C_a_p", 0.0);
  l.C_a_y = s.number("C_a_y", 0.0);
  l.delta = s.number("delta", 0.0);
  l.rho = s.number("rho", 0.0);
  l.T = s.number("T", default_T);
  s.reject_unknown();
  return l;
}

MonotonicityInputs parse_monotonicity(Section& s) {
  MonotonicityInputs mi;
  mi.lambda = s.number("lambda", mi.lambda);
  mi.alpha = s.number("alpha", mi.alpha);
  mi.beta = s.number("beta", mi.beta);
  mi.epsilon = s.number("epsilon", mi.epsilon);
  mi.C_Phi_e = s.number("C_Phi_e", mi.C_Phi_e);
  mi.C_Phi_p = s.number("C_Phi_p", mi.C_Phi_p);
  mi.delta = s.number("delta", mi.delta);
  mi.rho = s.number("rho", mi.rho);
  mi.sigma = s.number("sigma", mi.sigma);
  mi.gamma = s.number("gamma", mi.gamma);
  mi.norm_Dap_f = s.number("norm_Dap_f", mi.norm_Dap_f);
  mi.norm_Dkp_f = s.number("norm_Dkp_f", mi.norm_Dkp_f);
  mi.theta = s.number("theta", mi.theta);
  mi.T = s.number("T", mi.T);
  mi.eta0 = s.number("eta0", mi.eta0);
  mi.norm_grad_k_F = s.number("norm_grad_k_F", mi.norm_grad_k_F);
  mi.norm_grad_k_g = s.number("norm_grad_k_g", mi.norm_grad_k_g);
  mi.target_c = s.number("target_c", mi.target_c);
  s.reject_unknown();
  return mi;
}

const char* condition_name(CheckCondition c) {
  switch (c) {
    case CheckCondition::kContraction: return "contraction";
    case CheckCondition::kMonotonicity: return "monotonicity";
    case CheckCondition::kLambdaBound: return "lambda_bound";
    case CheckCondition::kAll: return "all";
  }
  return "contraction";
}

AnalysisConfig parse_analysis(Section& s, double default_T) {
  AnalysisConfig a;
  if (const toml::node* n = s.find("condition")) {
    if (!n->is_string()) fail_at(*n, "analysis.condition must be a string");
    const std::string v = n->as_string()->get();
    bool ok = false;
    for (auto c : {CheckCondition::kContraction, CheckCondition::kMonotonicity,
                   CheckCondition::kLambdaBound, CheckCondition::kAll}) {
      if (v == condition_name(c)) {
        a.condition = c;
        ok = true;
      }
    }
    if (!ok)
      fail_at(*n, "analysis.condition must be contraction, monotonicity, lambda_bound or all");
  }
  if (auto t = s.table("lipschitz")) a.lipschitz = parse_lipschitz(*t, default_T);
  if (auto t = s.table("monotonicity")) a.monotonicity = parse_monotonicity(*t);
  if (auto t = s.table("box")) {
    a.box.k_lo = t->number("k_lo", a.box.k_lo);
    a.box.k_hi = t->number("k_hi", a.box.k_hi);
    a.box.p_lo = t->number("p_lo", a.box.p_lo);
    a.box.p_hi = t->number("p_hi", a.box.p_hi);
    a.box.y_lo = t->number("y_lo", a.box.y_lo);
    a.box.y_hi = t->number("y_hi", a.box.y_hi);
    a.box.samples = t->small_int("samples", a.box.samples);
    const std::int64_t seed = t->integer("seed", static_cast<std::int64_t>(a.box.seed));
    if (seed < 0) throw ConfigError("analysis.box.seed must be >= 0");
    a.box.seed = static_cast<std::uint64_t>(seed);
    t->reject_unknown();
  }
  s.reject_unknown();
  return a;
}

// ---- serialization --------------------------------------------------------

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string fmt(const Vec& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + "]";
}

std::string fmt(const std::vector<int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s + "]";
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

bool AnalysisConfig::operator==(const AnalysisConfig& o) const {
  return condition == o.condition && lipschitz == o.lipschitz &&
         monotonicity == o.monotonicity && box.k_lo == o.box.k_lo &&
         box.k_hi == o.box.k_hi && box.p_lo == o.box.p_lo && box.p_hi == o.box.p_hi &&
         box.y_lo == o.box.y_lo && box.y_hi == o.box.y_hi &&
         box.samples == o.box.samples && box.seed == o.box.seed;
}

bool RunConfig::operator==(const RunConfig& o) const {
  // Runtime-only solver fields and the copied seed are not part of the file.
  const SolverConfig& a = solver;
  const SolverConfig& b = o.solver;
  const bool solver_eq =
      a.steps == b.steps && a.max_outer_iterations == b.max_outer_iterations &&
      a.policy_steps == b.policy_steps && a.first_policy_steps == b.first_policy_steps &&
      a.regression_steps == b.regression_steps && a.scenarios == b.scenarios &&
      a.paths_per_scenario == b.paths_per_scenario &&
      a.validation_scenarios == b.validation_scenarios &&
      a.validation_paths_per_scenario == b.validation_paths_per_scenario &&
      a.validation_every == b.validation_every && a.epsilon == b.epsilon &&
      a.learning_rate == b.learning_rate &&
      a.regression_learning_rate == b.regression_learning_rate &&
      a.fictitious == b.fictitious && a.literal_fictitious == b.literal_fictitious &&
      a.policy_hidden == b.policy_hidden && a.regression_hidden == b.regression_hidden &&
      a.consumption_margin == b.consumption_margin &&
      a.sim.entropy_sign == b.sim.entropy_sign && a.sim.k_floor == b.sim.k_floor &&
      a.sim.p_floor == b.sim.p_floor;
  return seed == o.seed && output_dir == o.output_dir && model == o.model && solver_eq &&
         report == o.report && analysis == o.analysis;
}

void RunConfig::validate() const {
  model.validate();
  solver.validate();
  if (report.evaluation_scenarios < 1 || report.evaluation_paths_per_scenario < 1)
    throw ConfigError("report: evaluation counts must be >= 1");
  if (report.histogram_bins < 1) throw ConfigError("report.histogram_bins must be >= 1");
  for (double t : report.times)
    if (!(t >= 0.0)) throw ConfigError("report.times must be >= 0");
  for (int s : report.pair)
    if (s < 0 || s >= report.evaluation_scenarios)
      throw ConfigError("report.pair must index evaluation scenarios");
  if (analysis) {
    if (analysis->lipschitz) analysis->lipschitz->validate();
    if (analysis->monotonicity) analysis->monotonicity->validate();
    const auto& b = analysis->box;
    if (!(b.k_lo > 0.0 && b.k_hi > b.k_lo && b.p_hi >= b.p_lo && b.y_hi >= b.y_lo &&
          b.samples >= 1))
      throw ConfigError("analysis.box is malformed");
    const bool needs_mono = analysis->condition == CheckCondition::kMonotonicity ||
                            analysis->condition == CheckCondition::kLambdaBound ||
                            analysis->condition == CheckCondition::kAll;
    if (needs_mono && !analysis->monotonicity)
      throw ConfigError("analysis.condition needs an [analysis.monotonicity] table");
  }
}

RunConfig parse_config(std::string_view text, const std::string& source_name) {
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    throw ParseError(std::string(e.description()), e.source().begin.line,
                     e.source().begin.column);
  }
  Section top(root, "");
  RunConfig cfg;
  const std::int64_t seed = top.integer("seed", 1);
  if (seed < 0) throw ConfigError("seed must be >= 0");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.output_dir = top.string("output_dir", cfg.output_dir);
  if (auto s = top.table("model")) cfg.model = parse_model(*s);
  if (auto s = top.table("solver")) cfg.solver = parse_solver(*s);
  if (auto s = top.table("report")) cfg.report = parse_report(*s);
  if (auto s = top.table("analysis")) cfg.analysis = parse_analysis(*s, cfg.model.T);
  top.reject_unknown();
  cfg.solver.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), file.string());
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "seed = " << cfg.seed << '\n';
  os << "output_dir = " << quoted(cfg.output_dir) << "\n\n";

  const ModelParams& m = cfg.model;
  os << "[model]\n";
  os << "n = " << m.n << "\nd = " << m.d << "\nT = " << fmt(m.T) << "\nrho = " << fmt(m.rho)
     << "\ndelta = " << fmt(m.delta) << "\nsigma = " << fmt(m.sigma)
     << "\ngamma = " << fmt(m.gamma) << "\ntheta = " << fmt(m.theta)
     << "\nsigma0 = " << fmt(m.sigma0) << '\n';
  os << "utility = " << (m.utility.kind == UtilityKind::kLog ? "\"log\"" : "\"power\"") << '\n';
  if (m.utility.kind != UtilityKind::kLog)
    os << "utility_exponent = " << fmt(m.utility.exponent) << '\n';
  os << "production_beta = " << fmt(m.production.beta)
     << "\nproduction_floor = " << fmt(m.production.floor)
     << "\nphi_matrix = " << fmt(m.phi_matrix) << "\nemission_coeff = " << fmt(m.emission_coeff)
     << "\ndecay_coeff = " << fmt(m.decay_coeff) << "\nk0 = " << fmt(m.k0)
     << "\np0 = " << fmt(m.p0) << '\n';
  for (const auto& s : m.production.sectors) {
    os << "\n[[model.sectors]]\n";
    os << "base = " << fmt(s.base) << "\namplitude = " << fmt(s.amplitude)
       << "\nslope = " << fmt(s.slope) << "\nshift = " << fmt(s.shift) << '\n';
  }

  const SolverConfig& c = cfg.solver;
  os << "\n[solver]\n";
  os << "steps = " << c.steps << "\nmax_outer_iterations = " << c.max_outer_iterations
     << "\npolicy_steps = " << c.policy_steps
     << "\nfirst_policy_steps = " << c.first_policy_steps
     << "\nregression_steps = " << c.regression_steps << "\nscenarios = " << c.scenarios
     << "\npaths_per_scenario = " << c.paths_per_scenario
     << "\nvalidation_scenarios = " << c.validation_scenarios
     << "\nvalidation_paths_per_scenario = " << c.validation_paths_per_scenario
     << "\nvalidation_every = " << c.validation_every << '\n';
  if (c.epsilon) os << "epsilon = " << fmt(*c.epsilon) << '\n';
  os << "learning_rate = " << fmt(c.learning_rate)
     << "\nregression_learning_rate = " << fmt(c.regression_learning_rate)
     << "\nfictitious = " << (c.fictitious ? "true" : "false")
     << "\nliteral_fictitious = " << (c.literal_fictitious ? "true" : "false")
     << "\npolicy_hidden = " << fmt(c.policy_hidden)
     << "\nregression_hidden = " << fmt(c.regression_hidden)
     << "\nconsumption_margin = " << fmt(c.consumption_margin)
     << "\nentropy_sign = " << fmt(c.sim.entropy_sign) << "\nk_floor = " << fmt(c.sim.k_floor)
     << "\np_floor = " << fmt(c.sim.p_floor) << '\n';

  const ReportConfig& r = cfg.report;
  os << "\n[report]\n";
  os << "evaluation_scenarios = " << r.evaluation_scenarios
     << "\nevaluation_paths_per_scenario = " << r.evaluation_paths_per_scenario
     << "\nhistogram_bins = " << r.histogram_bins << "\ntimes = " << fmt(r.times)
     << "\npair = " << fmt(r.pair) << '\n';

  if (cfg.analysis) {
    const AnalysisConfig& a = *cfg.analysis;
    os << "\n[analysis]\ncondition = \"" << condition_name(a.condition) << "\"\n";
    if (a.lipschitz) {
      const auto& l = *a.lipschitz;
      os << "\n[analysis.lipschitz]\n";
      os << "C_Phi_e = " << fmt(l.C_Phi_e) << "\nC_Phi_p = " << fmt(l.C_Phi_p)
         << "\nC_phi = " << fmt(l.C_phi) << "\nC_gamma = " << fmt(l.C_gamma)
         << "\nC_sigma = " << fmt(l.C_sigma) << "\nC_grad_g_k = " << fmt(l.C_grad_g_k)
         << "\nC_grad_g_p = " << fmt(l.C_grad_g_p) << "\nC_upsilon_k = " << fmt(l.C_upsilon_k)
         << "\nC_upsilon_p = " << fmt(l.C_upsilon_p) << "\nC_upsilon_y = " << fmt(l.C_upsilon_y)
         << "\nC_a_k = " << fmt(l.C_a_k) << "\nC_a_p = " << fmt(l.C_a_p)
         << "\nC_a_y = " << fmt(l.C_a_y) << "\ndelta = " << fmt(l.delta)
         << "\nrho = " << fmt(l.rho) << "\nT = " << fmt(l.T) << '\n';
    }
    if (a.monotonicity) {
      const auto& mi = *a.monotonicity;
      os << "\n[analysis.monotonicity]\n";
      os << "lambda = " << fmt(mi.lambda) << "\nalpha = " << fmt(mi.alpha)
         << "\nbeta = " << fmt(mi.beta) << "\nepsilon = " << fmt(mi.epsilon)
         << "\nC_Phi_e = " << fmt(mi.C_Phi_e) << "\nC_Phi_p = " << fmt(mi.C_Phi_p)
         << "\ndelta = " << fmt(mi.delta) << "\nrho = " << fmt(mi.rho)
         << "\nsigma = " << fmt(mi.sigma) << "\ngamma = " << fmt(mi.gamma)
         << "\nnorm_Dap_f = " << fmt(mi.norm_Dap_f) << "\nnorm_Dkp_f = " << fmt(mi.norm_Dkp_f)
         << "\ntheta = " << fmt(mi.theta) << "\nT = " << fmt(mi.T)
         << "\neta0 = " << fmt(mi.eta0) << "\nnorm_grad_k_F = " << fmt(mi.norm_grad_k_F)
         << "\nnorm_grad_k_g = " << fmt(mi.norm_grad_k_g)
         << "\ntarget_c = " << fmt(mi.target_c) << '\n';
    }
    const auto& b = a.box;
    os << "\n[analysis.box]\n";
    os << "k_lo = " << fmt(b.k_lo) << "\nk_hi = " << fmt(b.k_hi) << "\np_lo = " << fmt(b.p_lo)
       << "\np_hi = " << fmt(b.p_hi) << "\ny_lo = " << fmt(b.y_lo) << "\ny_hi = " << fmt(b.y_hi)
       << "\nsamples = " << b.samples << "\nseed = " << b.seed << '\n';
  }
  return os.str();
}

std::string config_hash(const RunConfig& cfg) {
  // The output location does not change the run.
  RunConfig c = cfg;
  c.output_dir.clear();
  const std::string text = serialize_config(c);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string manifest_line(const RunConfig& cfg) {
  return "seed=" + std::to_string(cfg.seed) + " config_hash=" + config_hash(cfg) +
         " version=" + kVersion;
}

}  // namespace mfg
