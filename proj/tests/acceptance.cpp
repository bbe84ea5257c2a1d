// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "hsim/error.hpp"
#include "hsim/experiment.hpp"
#include "support.hpp"

using namespace hsim;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

TrigPoly trig(std::initializer_list<TrigPoly::Term> terms) {
  TrigPoly p;
  p.terms = terms;
  return p;
}

Homogenization homogenize_flux(const FluxModel& flux, double q, int points) {
  StationaryOptions s;
  s.points = points;
  const TorusField v = solve_stationary_periodic(flux, q, s);
  const TaylorData t = taylor_flux_coeffs(flux, v);
  return homogenize(t.alpha1(), t.alpha_or_zero(2), t.alpha_or_zero(3));
}

EffectiveCoefficients one_d(double eta, double a) {
  return EffectiveCoefficients::from_eta(MatrixXd::Constant(1, 1, eta), a);
}

// Criterion 1.
Outcome effective_oracle() {
  const auto t0 = Clock::now();
  const Homogenization h = homogenize_flux(linear_ratchet(1, VectorXd::Zero(1), testing::sine()), 0.0, 256);
  const double elapsed = seconds_since(t0);
  const double ep = testing::simpson([](double z) { return std::exp(std::sin(2 * M_PI * z)); }, 0.0, 1.0);
  const double em = testing::simpson([](double z) { return std::exp(-std::sin(2 * M_PI * z)); }, 0.0, 1.0);
  const double oracle = 1.0 / (ep * em);
  const double bessel = std::pow(std::cyl_bessel_i(0.0, 1.0), -2);
  const double c = h.coeffs.c[0], eta = h.coeffs.eta(0, 0);
  const bool ok = std::abs(c) <= 1e-10 && std::abs(eta - oracle) <= 1e-6 && std::abs(oracle - bessel) <= 1e-12 &&
                  elapsed < 1.0;
  return {ok, "c=" + fmt("%.2e", c) + " eta=" + fmt("%.12f", eta) + " oracle=" + fmt("%.12f", oracle) +
                  " |err|=" + fmt("%.1e", std::abs(eta - oracle)) + " time=" + fmt("%.3f", elapsed) + "s"};
}

// Criterion 2.
Outcome cross_formula() {
  struct Case {
    std::string name;
    FluxModel flux;
    double q;
    int points;
  };
  const TrigPoly psi1 = trig({{{1, 0, 0}, 0.0, 1.0}, {{2, 0, 0}, 0.3, 0.0}});
  const TrigPoly psi2 = trig({{{1, 0, 0}, 0.0, 1.0}, {{1, 1, 0}, 0.5, 0.0}});
  const TrigPoly psi3 = trig({{{1, 0, 0}, 0.0, 1.0}, {{0, 1, 0}, 0.0, 0.5}, {{0, 0, 1}, 0.3, 0.0}});
  VectorXd e2(2), w2(2), w3(3);
  e2 << 1.0, 0.0;
  w2 << 0.3, -0.2;
  w3 << 0.2, 0.0, -0.1;
  const std::vector<Case> cases = {
      {"ratchet-1d", linear_ratchet(1, VectorXd::Zero(1), testing::sine()), 0.0, 128},
      {"tilted-1d", linear_ratchet(1, VectorXd::Constant(1, 0.7), psi1), 0.0, 128},
      {"burgers-1d", variable_burgers(1, VectorXd::Zero(1), testing::sine(), 1.0, VectorXd::Ones(1)), 0.3, 128},
      {"poly-1d", polynomial_preset(1, VectorXd::Constant(1, 0.2), psi1, {1.0, 0.5}, VectorXd::Ones(1)), 0.3, 128},
      {"ratchet-2d", linear_ratchet(2, w2, psi2), 0.0, 32},
      {"burgers-2d", variable_burgers(2, w2, psi2, 0.8, e2), 0.2, 32},
      {"ratchet-3d", linear_ratchet(3, w3, psi3), 0.0, 16},
  };
  bool ok = true;
  std::string detail;
  for (const Case& c : cases) {
    const Homogenization h = homogenize_flux(c.flux, c.q, c.points);
    const double err = (h.coeffs.eta_sym - h.eta_quadratic).cwiseAbs().maxCoeff();
    const double lmin = h.coeffs.lambdas.minCoeff();
    ok = ok && err <= 1e-8 && lmin > 0.0;
    detail += c.name + ":" + fmt("%.1e", err) + "/" + fmt("%.3f", lmin) + " ";
  }
  return {ok, "max|eta_sym-eta_quad|/min eig " + detail};
}

// Criterion 3.
Outcome gaussian_residual() {
  MatrixXd diag(2, 2), skew(2, 2);
  diag << 4.0, 0.0, 0.0, 1.0;
  skew << 1.0, 0.5, -0.5, 1.0;
  const std::vector<std::pair<std::string, MatrixXd>> etas = {
      {"I1", MatrixXd::Identity(1, 1)}, {"I2", MatrixXd::Identity(2, 2)}, {"diag(4,1)", diag}, {"skew", skew}};
  bool ok = true;
  std::string detail;
  for (const auto& [name, eta] : etas) {
    const EffectiveCoefficients c =
        eta.rows() == 1 ? EffectiveCoefficients::from_eta(eta, 0.0) : EffectiveCoefficients::from_eta(eta);
    const SelfSimilarProfile F = gaussian_profile(1.0, c);
    const double res = profile_residual(F, c);
    const double dm = std::abs(F.grid_mass() - 1.0);
    ok = ok && res <= 1e-8 && dm <= 1e-10;
    detail += name + ":res=" + fmt("%.1e", res) + ",dm=" + fmt("%.1e", dm) + " ";
  }
  return {ok, detail};
}

// Criterion 4.
Outcome mass_identity() {
  const SelfSimilarProfile F1 = solve_fm_1d(1.0, 1.0, 0.5);
  const SelfSimilarProfile F05 = solve_fm_1d(0.5, 1.0, 0.5);
  const VectorXd d = F1.values - F05.values;
  const double l1 = l1_norm(F1.grid, d);
  const double min_diff = d.minCoeff();
  const bool ok = min_diff > 0.0 && std::abs(l1 - 0.5) <= 1e-6;
  return {ok, "min(F1-F0.5)=" + fmt("%.3e", min_diff) + " ||F1-F0.5||_1=" + fmt("%.12f", l1)};
}

// Criterion 5.
Outcome homogenized_semigroup() {
  const auto t0 = Clock::now();
  ProfileGridOptions ou_grid;
  ou_grid.points = 1024;
  ou_grid.half_width = 16.0;
  const EffectiveCoefficients lin = one_d(1.0, 0.0);
  const Grid g = profile_grid(lin, ou_grid);
  VectorXd init(g.size());
  for (Index i = 0; i < g.size(); ++i) init[i] = std::exp(-std::pow(g.coordinate(0, static_cast<int>(i)), 2) / 8.0);
  init /= integrate(g, init);
  const HomogenizedTrajectory ou = evolve_homogenized(make_profile(g, init, lin), lin, 1.0, 0.1);
  double m = 0.0, s = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    m += ou.states.back()[i];
    s += ou.states.back()[i] * std::pow(g.coordinate(0, static_cast<int>(i)), 2);
  }
  const double variance = s / m;
  const double exact = 1.0 + 3.0 * std::exp(-2.0);

  ProfileGridOptions nl_grid;
  nl_grid.points = 1024;
  const EffectiveCoefficients nl = one_d(1.0, 0.5);
  const Grid gn = profile_grid(nl, nl_grid);
  VectorXd box(gn.size());
  for (Index i = 0; i < gn.size(); ++i) box[i] = std::abs(gn.coordinate(0, static_cast<int>(i)) - 1.0) <= 2.0;
  box /= integrate(gn, box);
  const HomogenizedTrajectory tr = evolve_homogenized(make_profile(gn, box, nl), nl, 6.0, 0.1, {1e9, 0.4, false});
  bool monotone = true;
  for (std::size_t k = 1; k < tr.samples.size(); ++k)
    if (tr.samples[k - 1].tau >= 1.0 - 1e-12 && tr.samples[k].l1_to_fm > tr.samples[k - 1].l1_to_fm) monotone = false;
  const double final_l1 = tr.samples.back().l1_to_fm;
  const double elapsed = seconds_since(t0);
  const bool ok = std::abs(variance - exact) <= 1e-4 && monotone && final_l1 < 1e-2 && elapsed < 10.0;
  return {ok, "variance=" + fmt("%.8f", variance) + " exact=" + fmt("%.8f", exact) +
                  " monotone=" + (monotone ? std::string("yes") : std::string("no")) +
                  " ||F(6)-F_M||_1=" + fmt("%.3e", final_l1) + " time=" + fmt("%.2f", elapsed) + "s"};
}

// Criterion 6.
Outcome remainder_decay() {
  const auto t0 = Clock::now();
  const FluxModel flux = variable_burgers(1, VectorXd::Zero(1), testing::sine(), 1.0, VectorXd::Ones(1));
  StationaryOptions s;
  const TorusField v = solve_stationary_periodic(flux, 0.0, s);
  const TaylorData taylor = taylor_flux_coeffs(flux, v);
  const Homogenization h = homogenize(taylor.alpha1(), taylor.alpha_or_zero(2), taylor.alpha_or_zero(3));
  const UappCells cells = solve_uapp_cells(h);
  const SelfSimilarProfile F = stationary_profile(1.0, h.coeffs);
  const RemainderFit fit =
      fit_remainder_decay(F, cells, h.coeffs, taylor, {1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0});
  const double elapsed = seconds_since(t0);
  return {fit.slope <= -0.9 && elapsed < 30.0,
          "slope=" + fmt("%.4f", fit.slope) + " L1(1)=" + fmt("%.3e", fit.l1.front()) +
              " L1(4)=" + fmt("%.3e", fit.l1.back()) + " time=" + fmt("%.2f", elapsed) + "s"};
}

struct DeskRuns {
  Trajectory ratchet, burgers;
  double seconds = 0.0;
};

DeskRuns desk_runs() {
  const auto t0 = Clock::now();
  DeskRuns r;
  SimulationConfig cfg;
  cfg.half_width = 64;
  cfg.cells = 8192;
  cfg.output_times = {1, 2, 3, 5, 7, 10, 15, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  cfg.flux = linear_ratchet(1, VectorXd::Zero(1), testing::sine());
  cfg.weight_m = 12.0;
  r.ratchet = run_simulation(cfg);
  cfg.flux = variable_burgers(1, VectorXd::Zero(1), testing::sine(), 1.0, VectorXd::Ones(1));
  cfg.weight_m = 0.0;
  r.burgers = run_simulation(cfg);
  r.seconds = seconds_since(t0);
  return r;
}

std::string convergence_summary(const std::string& name, const Trajectory& tr, bool* ok) {
  double l1_at_1 = 0.0;
  std::vector<double> taus, H;
  for (const DiagnosticsRow& row : tr.diagnostics.rows) {
    if (row.t == 1.0) l1_at_1 = row.l1_error;
    taus.push_back(row.tau);
    H.push_back(row.H);
  }
  const double factor = l1_at_1 / tr.diagnostics.rows.back().l1_error;
  const QuasiLyapunovCheck q = check_quasi_lyapunov(taus, H);
  *ok = *ok && factor >= 5.0 && q.holds;
  return name + ": l1(1)/l1(100)=" + fmt("%.2f", factor) + " C=" + fmt("%.2e", q.C) +
         " H-excess=" + fmt("%.1e", q.worst_excess) + (q.holds ? " holds" : " violated") + "; ";
}

// Criterion 7.
Outcome desk_convergence(const DeskRuns& r) {
  bool ok = r.seconds < 300.0;
  std::string detail = convergence_summary("ratchet", r.ratchet, &ok);
  detail += convergence_summary("burgers", r.burgers, &ok);
  return {ok, detail + "time=" + fmt("%.1f", r.seconds) + "s"};
}

// Criterion 8.
Outcome moment_monitor(const DeskRuns& r) {
  std::vector<double> m4;
  double w_sup = 0.0;
  for (const DiagnosticsRow& row : r.ratchet.diagnostics.rows)
    if (row.t >= 1.0) {
      m4.push_back(row.moment4);
      w_sup = std::max(w_sup, row.weighted_l2);
    }
  const double mx = *std::max_element(m4.begin(), m4.end());
  std::vector<double> sorted = m4;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t k = sorted.size() / 2;
  const double med = sorted.size() % 2 ? sorted[k] : 0.5 * (sorted[k - 1] + sorted[k]);
  return {mx <= 2.0 * med, "max=" + fmt("%.4f", mx) + " median=" + fmt("%.4f", med) +
                               " ratio=" + fmt("%.3f", mx / med) + " sup weighted L2 (m=12)=" + fmt("%.4f", w_sup)};
}

// Criterion 9.
Outcome conservation_contraction(const DeskRuns& r) {
  bool ok = true;
  double worst_drift = std::max(r.ratchet.max_mass_drift, r.burgers.max_mass_drift);
  std::string detail;
  struct Pair {
    std::string name;
    FluxModel flux;
    Perturbation a, b;
  };
  Perturbation gauss, random, box, odd;
  random.kind = PerturbationKind::random;
  random.seed = 3;
  random.width = 2.0;
  box.kind = PerturbationKind::box;
  box.width = 1.5;
  odd.kind = PerturbationKind::odd_bump;
  odd.mass = 0.5;
  const std::vector<Pair> pairs = {
      {"burgers", variable_burgers(1, VectorXd::Zero(1), testing::sine(), 1.0, VectorXd::Ones(1)), gauss, random},
      {"ratchet", linear_ratchet(1, VectorXd::Zero(1), testing::sine()), box, odd},
  };
  for (const Pair& p : pairs) {
    SimulationConfig cfg;
    cfg.flux = p.flux;
    cfg.half_width = 32;
    cfg.cells = 2048;
    cfg.output_times = {0.25, 0.5, 1, 2, 3, 5, 8, 12, 16, 20};
    cfg.diagnostics = false;
    cfg.perturbation = p.a;
    const Trajectory ta = run_simulation(cfg);
    cfg.perturbation = p.b;
    const Trajectory tb = run_simulation(cfg);
    worst_drift = std::max({worst_drift, ta.max_mass_drift, tb.max_mass_drift});
    double prev = 0.0, d0 = 0.0, worst_inc = 0.0;
    bool nonincreasing = true;
    for (std::size_t k = 0; k < ta.snapshots.size(); ++k) {
      const double d = l1_norm(ta.grid, ta.snapshots[k].f - tb.snapshots[k].f);
      if (k == 0) d0 = d;
      if (k > 0 && d > prev * (1.0 + 1e-12)) {
        nonincreasing = false;
        worst_inc = std::max(worst_inc, d - prev);
      }
      prev = d;
    }
    ok = ok && nonincreasing;
    detail += p.name + ": d(0)=" + fmt("%.4f", d0) + " d(20)=" + fmt("%.4f", prev) +
              (nonincreasing ? " nonincreasing" : " increase " + fmt("%.2e", worst_inc)) + "; ";
  }
  ok = ok && worst_drift <= 1e-10;
  return {ok, detail + "max mass drift=" + fmt("%.2e", worst_drift)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Criterion 10.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("hsim_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const Json cfg{{"kind", "full_convergence"},
                 {"flux", {{"preset", "variable_burgers"}}},
                 {"seed", 9},
                 {"simulation",
                  {{"half_width", 16},
                   {"cells", 1024},
                   {"output_times", {0.5, 1.0, 2.0, 4.0}},
                   {"perturbation", {{"kind", "random"}}},
                   {"second_perturbation", {{"kind", "gaussian"}}}}},
                 {"checks", {{"l1_decay_ratio", 1.0}}}};
  const ExperimentConfig parsed = parse_config(cfg);
  run_experiment(parsed, root / "a");
  run_experiment(parsed, root / "b");
  int files = 0, identical = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    ++files;
    if (slurp(entry.path()) == slurp(root / "b" / entry.path().filename())) ++identical;
  }
  fs::remove_all(root);
  return {files >= 5 && identical == files, std::to_string(identical) + "/" + std::to_string(files) +
                                                " output files byte-identical"};
}

}  // namespace

int main() {
  int passed = 0, total = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    ++total;
    if (o.pass) ++passed;
    std::printf("[%s] %2d %s | %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "effective-coefficient oracle", effective_oracle);
  report(2, "cross-formula eta and coercivity", cross_formula);
  report(3, "Gaussian profile residual and mass", gaussian_residual);
  report(4, "stationary-profile mass identity", mass_identity);
  report(5, "homogenized semigroup", homogenized_semigroup);
  report(6, "approximate-solution remainder decay", remainder_decay);

  std::optional<DeskRuns> runs;
  std::string run_error;
  try {
    runs = desk_runs();
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  auto with_runs = [&](Outcome (*fn)(const DeskRuns&)) {
    return [&, fn]() -> Outcome {
      if (!runs) return {false, "desk-scale runs failed: " + run_error};
      return fn(*runs);
    };
  };
  report(7, "desk-scale convergence and quasi-Lyapunov", with_runs(desk_convergence));
  report(8, "fourth-moment monitor", with_runs(moment_monitor));
  report(9, "conservation and L1 contraction", with_runs(conservation_contraction));
  report(10, "determinism", determinism);

  std::printf("acceptance: %d/%d criteria passed\n", passed, total);
  return passed == total ? 0 : 1;
}
