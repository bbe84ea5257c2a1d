#include <doctest.h>

#include <cmath>

#include "hsim/direct_sim.hpp"
#include "hsim/error.hpp"
#include "support.hpp"

using namespace hsim;

namespace {

FluxModel burgers() { return variable_burgers(1, VectorXd::Zero(1), testing::sine(), 1.0, VectorXd::Ones(1)); }

VectorXd gaussian_on(const Grid& g, double center, double var) {
  VectorXd f(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    const double d = g.coordinate(0, static_cast<int>(i)) - center;
    f[i] = std::exp(-0.5 * d * d / var) / std::sqrt(2 * M_PI * var);
  }
  return f;
}

double first_moment(const Grid& g, const VectorXd& f) {
  double s = 0.0;
  for (Index i = 0; i < g.size(); ++i) s += g.coordinate(0, static_cast<int>(i)) * f[i];
  return s * g.spacing();
}

}  // namespace

TEST_CASE("stationary periodic solution of a Burgers-type flux") {
  const FluxModel f = burgers();
  const TorusField v = solve_stationary_periodic(f, 0.2);
  CHECK(stationary_residual(f, v) <= 1e-9);
  CHECK(v.mean() == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(v.min() > 0.0);
}

TEST_CASE("stationary solve on a fine grid with a large mean") {
  const FluxModel f = burgers();
  StationaryOptions opts;
  opts.points = 128;
  for (double q : {0.25, 0.5, -0.8}) {
    const TorusField v = solve_stationary_periodic(f, q, opts);
    CHECK(v.grid().points == 128);
    CHECK(stationary_residual(f, v) <= 1e-10);
    CHECK(v.mean() == doctest::Approx(q).epsilon(1e-12));
  }
}

TEST_CASE("linear flux: the stationary solution is q times the Gibbs density") {
  const FluxModel f = linear_ratchet(1, VectorXd::Zero(1), testing::sine());
  const TorusField v = solve_stationary_periodic(f, 0.5);
  const double norm = testing::simpson([](double z) { return std::exp(-std::sin(2 * M_PI * z)); }, 0.0, 1.0);
  double err = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double z = v.grid().coordinate(0, static_cast<int>(i));
    err = std::max(err, std::abs(v.values()(i, 0) - 0.5 * std::exp(-std::sin(2 * M_PI * z)) / norm));
  }
  CHECK(err < 1e-10);
}

TEST_CASE("zero flux reduces to the exact heat kernel") {
  const FluxModel f = linear_ratchet(1, VectorXd::Zero(1), TrigPoly{});
  const TorusField v = TorusField::constant(Grid::torus(1, 16), VectorXd::Zero(1));
  const BoxSimulator sim(f, v, 32, 1024);
  VectorXd u = gaussian_on(sim.grid(), 0.0, 1.0);
  sim.advance(u, 0.0, 5.0);
  CHECK((u - gaussian_on(sim.grid(), 0.0, 11.0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constant drift moves the first moment at exactly the drift speed") {
  // A = -omega p transports with velocity -omega.
  const double omega = 0.75;
  const FluxModel f = linear_ratchet(1, VectorXd::Constant(1, omega), TrigPoly{});
  const TorusField v = TorusField::constant(Grid::torus(1, 16), VectorXd::Zero(1));
  const BoxSimulator sim(f, v, 32, 1024);
  VectorXd u = gaussian_on(sim.grid(), 0.0, 1.0);
  const long steps = sim.advance(u, 0.0, 4.0);
  CHECK(steps > 10);
  CHECK(first_moment(sim.grid(), u) == doctest::Approx(-omega * 4.0).epsilon(1e-10));
  CHECK(integrate(sim.grid(), u) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("zero perturbation is a fixed point") {
  const FluxModel f = burgers();
  const TorusField v = solve_stationary_periodic(f, 0.3);
  const BoxSimulator sim(f, v, 8, 512);
  VectorXd u = VectorXd::Zero(sim.grid().size());
  sim.advance(u, 0.0, 1.0);
  CHECK(u.isZero(0.0));
}

TEST_CASE("mass is conserved for a nonlinear flux") {
  const FluxModel f = burgers();
  const TorusField v = solve_stationary_periodic(f, 0.0);
  const BoxSimulator sim(f, v, 16, 1024);
  Perturbation p;
  p.kind = PerturbationKind::random;
  p.seed = 11;
  p.width = 3.0;
  p.mass = 2.0;
  VectorXd u = make_perturbation(sim.grid(), p);
  sim.advance(u, 0.0, 3.0);
  CHECK(integrate(sim.grid(), u) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("tilted ratchet: centre of mass travels at the effective drift") {
  const FluxModel f = linear_ratchet(1, VectorXd::Constant(1, 1.0), testing::sine());
  SimulationConfig cfg;
  cfg.flux = f;
  cfg.half_width = 64;
  cfg.cells = 4096;
  cfg.output_times = {5.0, 25.0};
  cfg.diagnostics = false;
  const Trajectory tr = run_simulation(cfg);
  const double c = tr.hom.coeffs.c[0];
  const double speed = (first_moment(tr.grid, tr.snapshots[2].f) - first_moment(tr.grid, tr.snapshots[1].f)) / 20.0;
  CHECK(std::abs(speed - c) <= 0.02 * std::abs(c));
}

TEST_CASE("step rejects time steps beyond the advective bound") {
  const FluxModel f = burgers();
  const TorusField v = solve_stationary_periodic(f, 0.0);
  const BoxSimulator sim(f, v, 8, 256);
  VectorXd u = gaussian_on(sim.grid(), 0.0, 1.0);
  const double dt = sim.max_dt(u);
  CHECK(dt > 0.0);
  try {
    sim.step(u, 2.0 * dt);
    FAIL("expected CFLViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CFLViolation);
  }
  SimulationState s{0.0, gaussian_on(sim.grid(), 0.0, 1.0)};
  s = step(sim, s, 0.5 * dt);
  CHECK(s.t == doctest::Approx(0.5 * dt));
}

TEST_CASE("simulator argument checks") {
  const TorusField v1 = TorusField::constant(Grid::torus(1, 16), VectorXd::Zero(1));
  CHECK_THROWS_AS(BoxSimulator(burgers(), v1, 8, 100), Error);  // not a multiple of 2L
  CHECK_THROWS_AS(BoxSimulator(burgers(), v1, 8, 64), Error);   // 4 cells per period
  const FluxModel f3 = linear_ratchet(3, VectorXd::Zero(3), TrigPoly{});
  const TorusField v3 = TorusField::constant(Grid::torus(3, 16), VectorXd::Zero(1));
  try {
    BoxSimulator(f3, v3, 2, 32);
    FAIL("expected DimensionUnsupported");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionUnsupported);
  }
}

TEST_CASE("perturbation shapes") {
  const Grid box = Grid::centered(1, 2048, 32.0);
  Perturbation p;
  p.mass = 1.5;
  CHECK(integrate(box, make_perturbation(box, p)) == doctest::Approx(1.5).epsilon(1e-12));
  p.kind = PerturbationKind::box;
  p.width = 2.0;
  CHECK(integrate(box, make_perturbation(box, p)) == doctest::Approx(1.5).epsilon(1e-12));
  p.kind = PerturbationKind::odd_bump;
  const VectorXd odd = make_perturbation(box, p);
  CHECK(l1_norm(box, odd) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(std::abs(integrate(box, odd)) < 1e-12);
  p.kind = PerturbationKind::random;
  p.seed = 3;
  const VectorXd r1 = make_perturbation(box, p), r2 = make_perturbation(box, p);
  CHECK(r1 == r2);
  p.seed = 4;
  CHECK(r1 != make_perturbation(box, p));
}

TEST_CASE("run_simulation records diagnostics and detects wrap contamination") {
  SimulationConfig cfg;
  cfg.flux = burgers();
  cfg.half_width = 16;
  cfg.cells = 1024;
  cfg.output_times = {0.5, 1.0, 2.0};
  const Trajectory tr = run_simulation(cfg);
  CHECK(tr.diagnostics.rows.size() == 4);
  CHECK(tr.snapshots.size() == 4);
  CHECK(tr.max_mass_drift < 1e-12);
  CHECK(tr.linf_ok);
  CHECK(tr.diagnostics.rows.back().mass == doctest::Approx(1.0).epsilon(1e-12));

  cfg.perturbation.width = 4.0;
  cfg.half_width = 8;
  cfg.cells = 512;
  cfg.output_times = {4.0};
  try {
    run_simulation(cfg);
    FAIL("expected WrapContamination");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::WrapContamination);
  }
}
