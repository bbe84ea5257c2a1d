#include "hsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <sstream>

#include "hsim/error.hpp"

#ifndef HSIM_VERSION
#define HSIM_VERSION "0.0.0"
#endif

namespace hsim {

namespace fs = std::filesystem;

std::string_view version() { return HSIM_VERSION; }

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::cell_coeffs: return "cell_coeffs";
    case ExperimentKind::profile: return "profile";
    case ExperimentKind::homogenized_evolution: return "homogenized_evolution";
    case ExperimentKind::full_convergence: return "full_convergence";
    case ExperimentKind::linear_moments: return "linear_moments";
  }
  return "unknown";
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool ExperimentResult::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

// ---------------------------------------------------------------------------
// Defaults and parsing

Json default_config() {
  Json output_times = Json::array();
  for (double t : {1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0})
    output_times.push_back(t);
  Json perturbation = {{"kind", "gaussian"}, {"mass", 1.0}, {"center", nullptr},
                       {"width", 1.0},       {"seed", nullptr}, {"count", 4}};
  return Json{
      {"kind", "cell_coeffs"},
      {"output_dir", "hsim_out"},
      {"seed", 0},
      {"flux",
       {{"preset", "linear_ratchet"},
        {"dims", 1},
        {"omega", nullptr},
        {"psi", {{"constant", 0.0}, {"terms", Json::array({{{"k", {1, 0, 0}}, {"cos", 0.0}, {"sin", 1.0}}})}}},
        {"b", 1.0},
        {"higher", Json::array()},
        {"direction", nullptr},
        {"check_hypotheses", true}}},
      {"cell", {{"points", 128}, {"tolerance", 1e-10}, {"max_iterations", 0}}},
      {"stationary", {{"q", 0.0}}},
      {"profile", {{"mass", 1.0}, {"points", 0}, {"half_width", 0.0}, {"eta", nullptr}, {"a", nullptr}}},
      {"evolution", {{"tau_end", 6.0}, {"dtau", 0.1}, {"initial", "box"}, {"width", 2.0}}},
      {"simulation",
       {{"half_width", 64},
        {"cells", 8192},
        {"cfl", 0.9},
        {"output_times", output_times},
        {"perturbation", perturbation},
        {"second_perturbation", nullptr},
        {"weight_m", 0.0},
        {"check_wrap", true}}},
      {"checks",
       {{"l1_decay_ratio", 0.2},
        {"l1_reference_time", 1.0},
        {"mass_drift", 1e-10},
        {"cross_formula", 1e-8},
        {"profile_residual", 1e-8},
        {"profile_mass", 1e-10},
        {"final_l1", 1e-2},
        {"monotone_after", 1.0},
        {"moment_ratio", 2.0}}},
      {"sweep", Json::array()},
  };
}

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::ConfigInvalid, (path.empty() ? std::string("/") : path) + ": " + what);
}

// Objects merge key by key; anything else is replaced. Keys absent from the
// defaults are rejected, except below a null default (free-form value).
void merge_into(Json& base, const Json& user, const std::string& path) {
  if (!user.is_object()) invalid(path, "expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string sub = path + "/" + it.key();
    if (!base.contains(it.key())) invalid(sub, "unknown field");
    Json& target = base[it.key()];
    if (target.is_object() && it.value().is_object())
      merge_into(target, it.value(), sub);
    else if (target.is_object())
      invalid(sub, "expected an object");
    else
      target = it.value();
  }
}

// Typed access with JSON-path error messages.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {}

  Reader at(const std::string& key) const {
    if (!j_.is_object()) invalid(path_, "expected an object");
    if (!j_.contains(key)) invalid(path_ + "/" + key, "missing field");
    return {j_.at(key), path_ + "/" + key};
  }
  const Json& json() const { return j_; }
  const std::string& path() const { return path_; }
  bool is_null() const { return j_.is_null(); }

  double number() const {
    if (!j_.is_number()) invalid(path_, "expected a number");
    const double x = j_.get<double>();
    if (!std::isfinite(x)) invalid(path_, "expected a finite number");
    return x;
  }
  double positive() const {
    const double x = number();
    if (!(x > 0.0)) invalid(path_, "must be positive");
    return x;
  }
  long integer() const {
    if (!j_.is_number_integer()) invalid(path_, "expected an integer");
    return j_.get<long>();
  }
  bool boolean() const {
    if (!j_.is_boolean()) invalid(path_, "expected true or false");
    return j_.get<bool>();
  }
  std::string string() const {
    if (!j_.is_string()) invalid(path_, "expected a string");
    return j_.get<std::string>();
  }
  VectorXd vector(Index size) const {
    if (!j_.is_array()) invalid(path_, "expected an array");
    if (size >= 0 && static_cast<Index>(j_.size()) != size)
      invalid(path_, "expected " + std::to_string(size) + " entries");
    VectorXd out(j_.size());
    for (std::size_t i = 0; i < j_.size(); ++i) out[i] = Reader(j_[i], path_ + "/" + std::to_string(i)).number();
    return out;
  }
  MatrixXd matrix(int size) const {
    if (!j_.is_array() || static_cast<int>(j_.size()) != size) invalid(path_, "expected " + std::to_string(size) + " rows");
    MatrixXd out(size, size);
    for (int i = 0; i < size; ++i) out.row(i) = Reader(j_[i], path_ + "/" + std::to_string(i)).vector(size);
    return out;
  }

 private:
  const Json& j_;
  std::string path_;
};

TrigPoly parse_trig(const Reader& r, int dims) {
  TrigPoly p;
  p.constant = r.at("constant").number();
  const Reader terms = r.at("terms");
  if (!terms.json().is_array()) invalid(terms.path(), "expected an array");
  for (std::size_t i = 0; i < terms.json().size(); ++i) {
    const Reader t(terms.json()[i], terms.path() + "/" + std::to_string(i));
    if (!t.json().is_object()) invalid(t.path(), "expected an object with k, cos, sin");
    for (auto it = t.json().begin(); it != t.json().end(); ++it)
      if (it.key() != "k" && it.key() != "cos" && it.key() != "sin") invalid(t.path() + "/" + it.key(), "unknown field");
    TrigPoly::Term term;
    const Reader k = t.at("k");
    if (!k.json().is_array() || k.json().size() > 3) invalid(k.path(), "expected up to 3 integer wave numbers");
    for (std::size_t a = 0; a < k.json().size(); ++a) {
      const long ka = Reader(k.json()[a], k.path() + "/" + std::to_string(a)).integer();
      if (static_cast<int>(a) >= dims && ka != 0) invalid(k.path(), "wave number along an axis beyond dims");
      term.k[a] = static_cast<int>(ka);
    }
    term.cos_amp = t.json().contains("cos") ? t.at("cos").number() : 0.0;
    term.sin_amp = t.json().contains("sin") ? t.at("sin").number() : 0.0;
    p.terms.push_back(term);
  }
  return p;
}

FluxModel parse_flux(const Reader& r) {
  const long dims = r.at("dims").integer();
  if (dims < 1 || dims > 3) invalid(r.path() + "/dims", "must be 1, 2 or 3");
  const int n = static_cast<int>(dims);
  const VectorXd omega = r.at("omega").is_null() ? VectorXd::Zero(n) : r.at("omega").vector(n);
  const TrigPoly psi = parse_trig(r.at("psi"), n);
  VectorXd direction = VectorXd::Zero(n);
  direction[0] = 1.0;
  if (!r.at("direction").is_null()) direction = r.at("direction").vector(n);
  const std::string preset = r.at("preset").string();
  if (preset == "linear_ratchet") return linear_ratchet(n, omega, psi);
  if (preset == "variable_burgers") return variable_burgers(n, omega, psi, r.at("b").number(), direction);
  if (preset == "polynomial") {
    const VectorXd higher = r.at("higher").vector(-1);
    std::vector<double> h(higher.data(), higher.data() + higher.size());
    if (h.size() > 3) invalid(r.path() + "/higher", "at most 3 entries (p^2, p^3, p^4)");
    return polynomial_preset(n, omega, psi, h, direction);
  }
  invalid(r.path() + "/preset", "expected linear_ratchet, variable_burgers or polynomial");
}

Perturbation parse_perturbation(const Reader& r, int dims, std::uint64_t seed) {
  for (auto it = r.json().begin(); it != r.json().end(); ++it) {
    static const char* keys[] = {"kind", "mass", "center", "width", "seed", "count"};
    if (std::none_of(std::begin(keys), std::end(keys), [&](const char* k) { return it.key() == k; }))
      invalid(r.path() + "/" + it.key(), "unknown field");
  }
  auto get = [&](const std::string& key) {
    // Second perturbations may omit fields; fall back to the defaults.
    static const Json defaults = default_config()["simulation"]["perturbation"];
    return r.json().contains(key) ? r.at(key) : Reader(defaults.at(key), r.path() + "/" + key);
  };
  Perturbation p;
  const std::string kind = get("kind").string();
  if (kind == "gaussian") p.kind = PerturbationKind::gaussian;
  else if (kind == "box") p.kind = PerturbationKind::box;
  else if (kind == "odd_bump") p.kind = PerturbationKind::odd_bump;
  else if (kind == "random") p.kind = PerturbationKind::random;
  else invalid(r.path() + "/kind", "expected gaussian, box, odd_bump or random");
  p.mass = get("mass").number();
  if (!get("center").is_null()) p.center = get("center").vector(dims);
  p.width = get("width").positive();
  p.seed = get("seed").is_null() ? seed : static_cast<std::uint64_t>(get("seed").integer());
  const long count = get("count").integer();
  if (count < 1) invalid(r.path() + "/count", "must be at least 1");
  p.count = static_cast<int>(count);
  return p;
}

}  // namespace

Json parse_config_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Convert the byte offset into line and column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream msg;
    msg << source << ":" << line << ":" << col << ": syntax error";
    throw Error(ErrorKind::ConfigInvalid, msg.str());
  }
}

Json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigInvalid, path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

ExperimentConfig parse_config(const Json& user) {
  Json merged = default_config();
  merge_into(merged, user, "");
  const Reader root(merged, "");
  ExperimentConfig cfg;

  const std::string kind = root.at("kind").string();
  if (kind == "cell_coeffs") cfg.kind = ExperimentKind::cell_coeffs;
  else if (kind == "profile") cfg.kind = ExperimentKind::profile;
  else if (kind == "homogenized_evolution") cfg.kind = ExperimentKind::homogenized_evolution;
  else if (kind == "full_convergence") cfg.kind = ExperimentKind::full_convergence;
  else if (kind == "linear_moments") cfg.kind = ExperimentKind::linear_moments;
  else invalid("/kind", "expected cell_coeffs, profile, homogenized_evolution, full_convergence or linear_moments");

  cfg.output_dir = root.at("output_dir").string();
  if (cfg.output_dir.empty()) invalid("/output_dir", "must not be empty");
  const long seed = root.at("seed").integer();
  if (seed < 0) invalid("/seed", "must be non-negative");
  cfg.seed = static_cast<std::uint64_t>(seed);

  const Reader flux = root.at("flux");
  cfg.flux = parse_flux(flux);
  cfg.check_hypotheses = flux.at("check_hypotheses").boolean();
  const int n = cfg.flux.dims();

  const Reader cell = root.at("cell");
  const long points = cell.at("points").integer();
  if (points < 8 || points % 2 != 0) invalid("/cell/points", "must be an even integer >= 8");
  const long max_points = n == 1 ? 4096 : n == 2 ? 256 : 48;
  if (points > max_points) invalid("/cell/points", "at most " + std::to_string(max_points) + " in this dimension");
  cfg.torus_points = static_cast<int>(points);
  cfg.cell.tolerance = cell.at("tolerance").positive();
  const long iters = cell.at("max_iterations").integer();
  if (iters < 0) invalid("/cell/max_iterations", "must be non-negative");
  cfg.cell.max_iterations = static_cast<int>(iters);
  cfg.q = root.at("stationary").at("q").number();

  const Reader prof = root.at("profile");
  cfg.profile.mass = prof.at("mass").number();
  const long ppoints = prof.at("points").integer();
  if (ppoints < 0 || ppoints % 2 != 0) invalid("/profile/points", "must be 0 (default) or a positive even integer");
  cfg.profile.grid.points = static_cast<int>(ppoints);
  cfg.profile.grid.half_width = prof.at("half_width").number();
  if (cfg.profile.grid.half_width < 0.0) invalid("/profile/half_width", "must be 0 (default) or positive");
  if (!prof.at("eta").is_null()) cfg.profile.eta = prof.at("eta").matrix(n);
  if (!prof.at("a").is_null()) {
    if (n != 1) invalid("/profile/a", "only defined for dims = 1");
    cfg.profile.a = prof.at("a").number();
  }

  const Reader ev = root.at("evolution");
  cfg.evolution.tau_end = ev.at("tau_end").positive();
  cfg.evolution.dtau = ev.at("dtau").positive();
  if (cfg.evolution.dtau > 0.1) invalid("/evolution/dtau", "must not exceed 0.1");
  cfg.evolution.initial = ev.at("initial").string();
  if (cfg.evolution.initial != "box" && cfg.evolution.initial != "gaussian")
    invalid("/evolution/initial", "expected box or gaussian");
  cfg.evolution.width = ev.at("width").positive();

  const Reader sim = root.at("simulation");
  SimulationConfig& s = cfg.simulation;
  s.flux = cfg.flux;
  s.q = cfg.q;
  s.torus_points = cfg.torus_points;
  s.check_hypotheses = cfg.check_hypotheses;
  const long hw = sim.at("half_width").integer();
  if (hw < 1) invalid("/simulation/half_width", "must be a positive integer");
  s.half_width = static_cast<int>(hw);
  const long cells = sim.at("cells").integer();
  if (cells < 16 || cells % (2 * hw) != 0 || cells / (2 * hw) < 8)
    invalid("/simulation/cells", "must be a multiple of 2 half_width with at least 8 cells per period");
  s.cells = static_cast<int>(cells);
  s.cfl = sim.at("cfl").positive();
  if (s.cfl > 1.0) invalid("/simulation/cfl", "must lie in (0, 1]");
  const VectorXd times = sim.at("output_times").vector(-1);
  if (times.size() == 0) invalid("/simulation/output_times", "must not be empty");
  for (Index k = 0; k < times.size(); ++k)
    if (!(times[k] > (k == 0 ? 0.0 : times[k - 1])))
      invalid("/simulation/output_times/" + std::to_string(k), "times must be positive and increasing");
  s.output_times.assign(times.data(), times.data() + times.size());
  s.perturbation = parse_perturbation(sim.at("perturbation"), n, cfg.seed);
  if (!sim.at("second_perturbation").is_null()) {
    if (!sim.at("second_perturbation").json().is_object()) invalid("/simulation/second_perturbation", "expected an object");
    cfg.second_perturbation = parse_perturbation(sim.at("second_perturbation"), n, cfg.seed + 1);
  }
  s.weight_m = sim.at("weight_m").number();
  if (s.weight_m != 0.0 && !(s.weight_m > 2.0 * (n + 1)))
    invalid("/simulation/weight_m", "must be 0 (default 2N+4) or exceed 2(N+1)");
  s.check_wrap = sim.at("check_wrap").boolean();

  const Reader ch = root.at("checks");
  cfg.checks.l1_decay_ratio = ch.at("l1_decay_ratio").positive();
  cfg.checks.l1_reference_time = ch.at("l1_reference_time").positive();
  cfg.checks.mass_drift = ch.at("mass_drift").positive();
  cfg.checks.cross_formula = ch.at("cross_formula").positive();
  cfg.checks.profile_residual = ch.at("profile_residual").positive();
  cfg.checks.profile_mass = ch.at("profile_mass").positive();
  cfg.checks.final_l1 = ch.at("final_l1").positive();
  cfg.checks.monotone_after = ch.at("monotone_after").number();
  cfg.checks.moment_ratio = ch.at("moment_ratio").positive();

  if (cfg.kind == ExperimentKind::full_convergence || cfg.kind == ExperimentKind::linear_moments) {
    if (n > 2) invalid("/flux/dims", "the direct simulation supports dims 1 or 2");
    if (std::none_of(s.output_times.begin(), s.output_times.end(),
                     [&](double t) { return std::abs(t - cfg.checks.l1_reference_time) < 1e-12; }))
      invalid("/checks/l1_reference_time", "must be one of the output times");
  }
  if (cfg.kind == ExperimentKind::linear_moments && cfg.flux.degree() > 1)
    invalid("/flux/preset", "linear_moments requires a flux linear in p");
  if (cfg.kind == ExperimentKind::linear_moments && s.weight_m == 0.0) s.weight_m = n + 11.0;

  const Reader sweep = root.at("sweep");
  if (!sweep.json().is_array()) invalid("/sweep", "expected an array");
  for (std::size_t i = 0; i < sweep.json().size(); ++i) {
    const Json& entry = sweep.json()[i];
    if (!entry.is_object()) invalid("/sweep/" + std::to_string(i), "expected an object");
    if (entry.contains("sweep")) invalid("/sweep/" + std::to_string(i) + "/sweep", "sweeps do not nest");
    cfg.sweep.push_back(entry);
  }
  merged.erase("sweep");
  cfg.normalized = merged;
  return cfg;
}

std::uint64_t config_hash(const Json& normalized) {
  const std::string text = normalized.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

fs::path resolve_output_dir(const ExperimentConfig& cfg, const std::optional<fs::path>& override_dir) {
  if (override_dir) return *override_dir;
  fs::path out(cfg.output_dir);
  if (const char* root = std::getenv("HSIM_OUTPUT_ROOT"); root && *root && out.is_relative()) out = fs::path(root) / out;
  return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

Json vector_json(const VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json matrix_json(const MatrixXd& m) {
  Json a = Json::array();
  for (Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::ConfigInvalid, path.string() + ": cannot write");
  return os;
}

void write_json(const fs::path& path, const Json& j) {
  auto os = open_out(path);
  os << j.dump(2) << "\n";
}

Json hypotheses_json(const HypothesisReport& h) {
  return {{"div_max", h.div_max},
          {"div_ok", h.div_ok},
          {"growth_exponent", h.growth_exponent},
          {"growth_limit", h.growth_limit},
          {"growth_ok", h.growth_ok},
          {"pass", h.pass()},
          {"message", h.message}};
}

struct CoefficientSource {
  EffectiveCoefficients coeffs;
  std::optional<Homogenization> hom;
  std::optional<HypothesisReport> hypotheses;
  double stationary_residual = 0.0;
};

// Stationary state, Taylor data and cell correctors for the configured flux.
Homogenization homogenize_flux(const ExperimentConfig& cfg, double* stationary_res) {
  StationaryOptions sopts;
  sopts.points = cfg.torus_points;
  sopts.tolerance = cfg.cell.tolerance;
  const TorusField v = solve_stationary_periodic(cfg.flux, cfg.q, sopts);
  *stationary_res = stationary_residual(cfg.flux, v);
  const TaylorData taylor = taylor_flux_coeffs(cfg.flux, v);
  return homogenize(taylor.alpha1(), taylor.alpha_or_zero(2), taylor.alpha_or_zero(3), cfg.cell);
}

CoefficientSource coefficients_for(const ExperimentConfig& cfg) {
  CoefficientSource src;
  if (cfg.profile.eta) {
    const int n = static_cast<int>(cfg.profile.eta->rows());
    std::optional<double> a = cfg.profile.a;
    if (n == 1 && !a) a = 0.0;
    src.coeffs = EffectiveCoefficients::from_eta(*cfg.profile.eta, a);
    return src;
  }
  src.hypotheses = check_hypotheses(cfg.flux);
  if (cfg.check_hypotheses && !src.hypotheses->pass())
    throw Error(ErrorKind::HypothesisViolated, src.hypotheses->message);
  src.hom = homogenize_flux(cfg, &src.stationary_residual);
  src.coeffs = src.hom->coeffs;
  return src;
}

Json coefficients_json(const CoefficientSource& src) {
  const EffectiveCoefficients& c = src.coeffs;
  Json j{{"dims", c.dims},
         {"c", vector_json(c.c)},
         {"eta", matrix_json(c.eta)},
         {"eta_sym", matrix_json(c.eta_sym)},
         {"a", c.a ? Json(*c.a) : Json(nullptr)},
         {"eigenvalues", vector_json(c.lambdas)},
         {"det_s", c.det_s}};
  if (src.hom) {
    const Homogenization& h = *src.hom;
    j["eta_quadratic"] = matrix_json(h.eta_quadratic);
    j["cross_formula_error"] = (h.coeffs.eta_sym - h.eta_quadratic).cwiseAbs().maxCoeff();
    j["residuals"] = {{"f0", h.residual_f0}, {"f1", h.residual_f1}, {"chi", h.residual_chi}, {"g1", h.residual_g1}};
    j["stationary_residual"] = src.stationary_residual;
    j["f0_min"] = h.f0.min();
  }
  if (src.hypotheses) j["hypotheses"] = hypotheses_json(*src.hypotheses);
  return j;
}

void write_coefficients(const fs::path& dir, const CoefficientSource& src) {
  write_json(dir / "coefficients.json", coefficients_json(src));
  auto os = open_out(dir / "coefficients.csv");
  const EffectiveCoefficients& c = src.coeffs;
  os << "name,i,j,value\n";
  for (Index i = 0; i < c.c.size(); ++i) os << "c," << i << ",," << format_double(c.c[i]) << "\n";
  for (Index i = 0; i < c.eta.rows(); ++i)
    for (Index j = 0; j < c.eta.cols(); ++j) os << "eta," << i << "," << j << "," << format_double(c.eta(i, j)) << "\n";
  if (src.hom)
    for (Index i = 0; i < c.eta.rows(); ++i)
      for (Index j = 0; j < c.eta.cols(); ++j)
        os << "eta_quadratic," << i << "," << j << "," << format_double(src.hom->eta_quadratic(i, j)) << "\n";
  if (c.a) os << "a,,," << format_double(*c.a) << "\n";
}

void write_profile_csv(const fs::path& path, const Grid& grid, const VectorXd& values) {
  auto os = open_out(path);
  static const char* axes[] = {"x", "y", "z"};
  for (int d = 0; d < grid.dims; ++d) os << axes[d] << ",";
  os << "F\n";
  for (Index i = 0; i < grid.size(); ++i) {
    const auto idx = grid.unflatten(i);
    for (int d = 0; d < grid.dims; ++d) os << format_double(grid.coordinate(d, idx[d])) << ",";
    os << format_double(values[i]) << "\n";
  }
}

double value_at_origin(const Grid& grid, const VectorXd& values) {
  std::array<int, 3> idx{0, 0, 0};
  for (int d = 0; d < grid.dims; ++d)
    idx[d] = std::clamp(static_cast<int>(std::lround(-grid.origin[d] / grid.spacing())), 0, grid.points - 1);
  return values[grid.flatten(idx)];
}

// Trace of the second moment about the origin, normalised by the mass.
double second_moment(const Grid& grid, const VectorXd& F) {
  double m = 0.0, s = 0.0;
  for (Index i = 0; i < grid.size(); ++i) {
    m += F[i];
    s += F[i] * grid.point(i).squaredNorm();
  }
  return s / m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

// Least-squares slope of y against x.
double trend_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

class Run {
 public:
  Run(const ExperimentConfig& cfg, fs::path dir) : cfg_(cfg), dir_(std::move(dir)) {}

  ExperimentResult execute() {
    switch (cfg_.kind) {
      case ExperimentKind::cell_coeffs: cell_coeffs(); break;
      case ExperimentKind::profile: profile(); break;
      case ExperimentKind::homogenized_evolution: evolution(); break;
      case ExperimentKind::full_convergence: convergence(); break;
      case ExperimentKind::linear_moments: moments(); break;
    }
    Json checks = Json::object();
    Json values = Json::object();
    for (const CheckResult& c : result_.checks) {
      checks[c.name] = c.pass ? "pass" : "fail";
      values[c.name] = {{"value", c.value}, {"threshold", c.threshold}};
    }
    Json summary{{"tool", "hsim"},
                 {"version", std::string(version())},
                 {"config_hash", hash_hex(config_hash(cfg_.normalized))},
                 {"kind", std::string(to_string(cfg_.kind))},
                 {"status", result_.all_pass() ? "pass" : "fail"},
                 {"checks", checks},
                 {"check_values", values},
                 {"results", results_},
                 {"config", cfg_.normalized}};
    write_json(dir_ / "summary.json", summary);
    result_.kind = cfg_.kind;
    result_.out_dir = dir_;
    result_.summary = std::move(summary);
    return result_;
  }

 private:
  // Passes when value <= threshold.
  void check_le(const std::string& name, double value, double threshold) {
    result_.checks.push_back({name, value <= threshold, value, threshold});
  }
  void check_flag(const std::string& name, bool ok, double value = 0.0, double threshold = 0.0) {
    result_.checks.push_back({name, ok, value, threshold});
  }

  void coefficient_checks(const CoefficientSource& src) {
    if (src.hom) check_le("cross_formula", (src.coeffs.eta_sym - src.hom->eta_quadratic).cwiseAbs().maxCoeff(),
                          cfg_.checks.cross_formula);
    check_flag("coercive", src.coeffs.lambdas.minCoeff() > 0.0, src.coeffs.lambdas.minCoeff(), 0.0);
    if (src.hypotheses) check_flag("hypotheses", src.hypotheses->pass(), src.hypotheses->growth_exponent,
                                   src.hypotheses->growth_limit);
  }

  void cell_coeffs() {
    const CoefficientSource src = coefficients_for(cfg_);
    write_coefficients(dir_, src);
    results_["coefficients"] = coefficients_json(src);
    coefficient_checks(src);
  }

  void profile() {
    const CoefficientSource src = coefficients_for(cfg_);
    write_coefficients(dir_, src);
    const SelfSimilarProfile F = stationary_profile(cfg_.profile.mass, src.coeffs, cfg_.profile.grid);
    write_profile_csv(dir_ / "profile.csv", F.grid, F.values);
    const double residual = profile_residual(F, src.coeffs);
    const double mass_error = std::abs(F.grid_mass() - cfg_.profile.mass);
    results_["coefficients"] = coefficients_json(src);
    results_["profile"] = {{"points", F.grid.points},
                           {"half_width", 0.5 * F.grid.length},
                           {"F_origin", value_at_origin(F.grid, F.values)},
                           {"mass", F.grid_mass()},
                           {"residual", residual},
                           {"boundary_max", F.boundary_max()}};
    check_le("profile_residual", residual, cfg_.checks.profile_residual);
    check_le("profile_mass", mass_error, cfg_.checks.profile_mass);
  }

  void evolution() {
    const CoefficientSource src = coefficients_for(cfg_);
    write_coefficients(dir_, src);
    const Grid grid = profile_grid(src.coeffs, cfg_.profile.grid);
    VectorXd init(grid.size());
    const double w = cfg_.evolution.width;
    for (Index i = 0; i < grid.size(); ++i) {
      const VectorXd x = grid.point(i);
      init[i] = cfg_.evolution.initial == "box" ? (x.cwiseAbs().maxCoeff() <= w ? 1.0 : 0.0)
                                                : std::exp(-0.5 * x.squaredNorm() / (w * w));
    }
    const double m0 = integrate(grid, init);
    if (!(m0 > 0.0)) invalid("/evolution/width", "initial profile contains no grid node");
    init *= cfg_.profile.mass / m0;
    const SelfSimilarProfile start = make_profile(grid, init, src.coeffs);
    const HomogenizedTrajectory tr =
        evolve_homogenized(start, src.coeffs, cfg_.evolution.tau_end, cfg_.evolution.dtau);
    write_profile_csv(dir_ / "profile.csv", tr.target.grid, tr.target.values);

    auto os = open_out(dir_ / "trajectory.csv");
    os << "tau,mass,l1_to_fm,residual,second_moment\n";
    double drift = 0.0;
    bool monotone = true;
    double worst_increase = 0.0;
    for (std::size_t k = 0; k < tr.samples.size(); ++k) {
      const HomogenizedSample& s = tr.samples[k];
      os << format_double(s.tau) << "," << format_double(s.mass) << "," << format_double(s.l1_to_fm) << ","
         << format_double(s.residual) << "," << format_double(second_moment(grid, tr.states[k])) << "\n";
      drift = std::max(drift, std::abs(s.mass - tr.samples.front().mass));
      if (k > 0 && tr.samples[k - 1].tau >= cfg_.checks.monotone_after - 1e-12) {
        const double inc = s.l1_to_fm - tr.samples[k - 1].l1_to_fm;
        worst_increase = std::max(worst_increase, inc);
        if (inc > 0.0) monotone = false;
      }
    }
    const double final_l1 = tr.samples.back().l1_to_fm;
    results_["coefficients"] = coefficients_json(src);
    results_["evolution"] = {{"samples", tr.samples.size()},
                             {"final_tau", tr.samples.back().tau},
                             {"final_l1_to_fm", final_l1},
                             {"final_second_moment", second_moment(grid, tr.states.back())},
                             {"mass_drift", drift}};
    check_le("mass_drift", drift, cfg_.checks.mass_drift);
    check_flag("l1_monotone", monotone, worst_increase, 0.0);
    check_le("final_l1", final_l1, cfg_.checks.final_l1);
  }

  Trajectory simulate(bool diagnostics) {
    SimulationConfig s = cfg_.simulation;
    s.diagnostics = diagnostics;
    return run_simulation(s);
  }

  void write_simulation_common(const Trajectory& tr) {
    CoefficientSource src;
    src.coeffs = tr.hom.coeffs;
    src.hom = tr.hom;
    src.stationary_residual = tr.stationary_residual;
    src.hypotheses = check_hypotheses(cfg_.flux);
    write_coefficients(dir_, src);
    results_["coefficients"] = coefficients_json(src);
    write_profile_csv(dir_ / "profile.csv", tr.fm.grid, tr.fm.values);
    {
      auto os = open_out(dir_ / "diagnostics.csv");
      tr.diagnostics.write_csv(os);
    }
    results_["simulation"] = {{"steps", tr.steps},
                              {"initial_mass", tr.initial_mass},
                              {"initial_l1", tr.initial_l1},
                              {"max_mass_drift", tr.max_mass_drift},
                              {"linf_initial", tr.linf_initial},
                              {"linf_max", tr.linf_max}};
    check_le("mass_drift", tr.max_mass_drift, cfg_.checks.mass_drift);
    check_flag("linf_bound", tr.linf_ok, tr.linf_max, 10.0 * (tr.linf_initial + 1.0));
  }

  void convergence() {
    const Trajectory tr = simulate(true);
    write_simulation_common(tr);
    const auto& rows = tr.diagnostics.rows;
    double l1_ref = 0.0;
    std::vector<double> taus, H, tail_tau, tail_log;
    for (const DiagnosticsRow& r : rows) {
      if (std::abs(r.t - cfg_.checks.l1_reference_time) < 1e-12) l1_ref = r.l1_error;
      if (r.t >= cfg_.checks.l1_reference_time - 1e-12) {
        taus.push_back(r.tau);
        H.push_back(r.H);
      }
      if (r.t >= 0.75 * rows.back().t && r.l1_error > 0.0) {
        tail_tau.push_back(r.tau);
        tail_log.push_back(std::log(r.l1_error));
      }
    }
    const double l1_final = rows.back().l1_error;
    const double ratio = l1_ref > 0.0 ? l1_final / l1_ref : 0.0;
    const QuasiLyapunovCheck q = check_quasi_lyapunov(taus, H);
    results_["convergence"] = {{"l1_reference", l1_ref},
                               {"l1_final", l1_final},
                               {"l1_ratio", ratio},
                               {"last_quarter_log_slope", trend_slope(tail_tau, tail_log)},
                               {"quasi_lyapunov_C", q.C},
                               {"quasi_lyapunov_worst_excess", q.worst_excess}};
    check_flag("l1_decay", ratio < cfg_.checks.l1_decay_ratio, ratio, cfg_.checks.l1_decay_ratio);
    check_flag("quasi_lyapunov", q.holds, q.worst_excess, 0.0);

    if (cfg_.second_perturbation) {
      SimulationConfig s = cfg_.simulation;
      s.diagnostics = false;
      s.perturbation = *cfg_.second_perturbation;
      const Trajectory other = run_simulation(s);
      auto os = open_out(dir_ / "contraction.csv");
      os << "t,l1_distance\n";
      bool nonincreasing = true;
      double worst = 0.0, prev = 0.0;
      for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        const double d = l1_norm(tr.grid, tr.snapshots[k].f - other.snapshots[k].f);
        os << format_double(tr.snapshots[k].t) << "," << format_double(d) << "\n";
        // Relative rounding slack of the discrete L1 norm.
        if (k > 0 && d > prev * (1.0 + 1e-12)) {
          nonincreasing = false;
          worst = std::max(worst, d - prev);
        }
        prev = d;
      }
      check_le("mass_drift_second", other.max_mass_drift, cfg_.checks.mass_drift);
      check_flag("l1_contraction", nonincreasing, worst, 0.0);
    }
  }

  void moments() {
    const Trajectory tr = simulate(true);
    write_simulation_common(tr);
    std::vector<double> series;
    for (const DiagnosticsRow& r : tr.diagnostics.rows)
      if (r.t >= cfg_.checks.monotone_after - 1e-12) series.push_back(r.moment4);
    const double mx = *std::max_element(series.begin(), series.end());
    const double med = median(series);
    results_["moments"] = {{"max", mx}, {"median", med}, {"ratio", mx / med}, {"weight_m", cfg_.simulation.weight_m}};
    check_le("moment4_bounded", mx / med, cfg_.checks.moment_ratio);
  }

  const ExperimentConfig& cfg_;
  fs::path dir_;
  ExperimentResult result_;
  Json results_ = Json::object();
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::ConfigInvalid, out_dir.string() + ": " + ec.message());
  return Run(cfg, out_dir).execute();
}

std::vector<ExperimentResult> run_config(const Json& user, const std::optional<fs::path>& override_dir) {
  const ExperimentConfig base = parse_config(user);
  const fs::path root = resolve_output_dir(base, override_dir);
  if (base.sweep.empty()) return {run_experiment(base, root)};

  std::vector<ExperimentConfig> entries;
  for (std::size_t i = 0; i < base.sweep.size(); ++i) {
    Json merged = base.normalized;
    merge_into(merged, base.sweep[i], "/sweep/" + std::to_string(i));
    entries.push_back(parse_config(merged));
  }
  std::vector<std::future<ExperimentResult>> jobs;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sweep_%03zu", i);
    const fs::path dir = root / name;
    jobs.push_back(std::async(std::launch::async, [&entries, i, dir] { return run_experiment(entries[i], dir); }));
  }
  std::vector<ExperimentResult> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

}  // namespace hsim
