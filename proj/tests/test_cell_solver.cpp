#include <doctest.h>

#include <complex>

#include "hsim/cell_solver.hpp"
#include "hsim/error.hpp"
#include "support.hpp"

using namespace hsim;

namespace {

// Gradient drift alpha = -psi'(z) with psi = sin(2 pi z).
TorusField gradient_drift(const Grid& g) {
  return TorusField::sample(g, 1, [](const VectorXd& z) {
    return VectorXd::Constant(1, -2 * M_PI * std::cos(2 * M_PI * z[0]));
  });
}

double mean_exp(double sign) {
  return testing::simpson([&](double z) { return std::exp(sign * std::sin(2 * M_PI * z)); }, 0.0, 1.0);
}

}  // namespace

TEST_CASE("f0 of a gradient drift is the normalised Gibbs density") {
  const Grid g = Grid::torus(1, 64);
  const TorusField f0 = solve_f0(gradient_drift(g));
  const double norm = mean_exp(-1.0);
  double err = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    const double z = g.coordinate(0, static_cast<int>(i));
    err = std::max(err, std::abs(f0.values()(i, 0) - std::exp(-std::sin(2 * M_PI * z)) / norm));
  }
  CHECK(err < 1e-10);
  CHECK(f0.mean() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(f0.min() > 0.0);
}

TEST_CASE("discrete operators are adjoint to each other") {
  const Grid g = Grid::torus(2, 16);
  const TorusField drift = TorusField::sample(g, 2, [](const VectorXd& z) {
    VectorXd a(2);
    a << std::sin(2 * M_PI * z[0]) + 0.3, std::cos(2 * M_PI * (z[0] + z[1]));
    return a;
  });
  const CellOperator op(drift);
  VectorXd phi(g.size()), psi(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    const VectorXd z = g.point(i);
    phi[i] = std::cos(2 * M_PI * z[1]) + 0.2 * std::sin(4 * M_PI * z[0]);
    psi[i] = std::sin(2 * M_PI * (z[0] - z[1]));
  }
  const Spectral& sp = op.spectral();
  CHECK(sp.inner(op.apply(phi), psi) == doctest::Approx(sp.inner(phi, op.apply_adjoint(psi))).epsilon(1e-12));
}

TEST_CASE("incompatible right-hand sides are rejected") {
  const Grid g = Grid::torus(1, 32);
  CellProblem p;
  p.drift = gradient_drift(g);
  p.rhs = TorusField::constant(g, VectorXd::Constant(1, 0.5));
  CHECK_THROWS_WITH_AS(solve_cell(p), doctest::Contains("CompatibilityViolated"), Error);
  try {
    solve_cell(p);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CompatibilityViolated);
  }
}

TEST_CASE("adjoint corrector of a gradient drift") {
  // L* chi = alpha - c with c = 0 gives chi' = e^psi / <e^psi> - 1.
  const Grid g = Grid::torus(1, 64);
  const TorusField alpha = gradient_drift(g);
  const TorusField chi = solve_chi(alpha, VectorXd::Zero(1));
  const VectorXd dchi = Spectral(g).derivative(chi.component(0), 0);
  const double norm = mean_exp(1.0);
  double err = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    const double z = g.coordinate(0, static_cast<int>(i));
    err = std::max(err, std::abs(dchi[i] - (std::exp(std::sin(2 * M_PI * z)) / norm - 1.0)));
  }
  CHECK(err < 1e-9);
  CHECK(std::abs(chi.mean()) < 1e-14);
}

TEST_CASE("constant drift has trivial first-order correctors") {
  const Grid g = Grid::torus(1, 32);
  const TorusField alpha = TorusField::constant(g, VectorXd::Constant(1, 0.7));
  const TorusField f0 = solve_f0(alpha);
  CHECK((f0.component(0).array() - 1.0).abs().maxCoeff() < 1e-12);
  const TorusField f1 = solve_f1(alpha, VectorXd::Constant(1, 0.7), f0);
  CHECK(f1.values().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("g1 for a single Fourier mode") {
  // alpha1 = c0, alpha2 = cos(2 pi z): L g1 = -(g1)'' + c0 g1' = 2 pi sin(2 pi z), so
  // g1 = Re(2 pi e^{ikz} / (i k^2 - c0 k)) with k = 2 pi.
  const double c0 = 0.8;
  const Grid g = Grid::torus(1, 32);
  const TorusField alpha1 = TorusField::constant(g, VectorXd::Constant(1, c0));
  const TorusField alpha2 = TorusField::sample(g, 1, [](const VectorXd& z) {
    return VectorXd::Constant(1, std::cos(2 * M_PI * z[0]));
  });
  const TorusField f0 = solve_f0(alpha1);
  const TorusField g1 = solve_g1(alpha1, alpha2, f0);
  const double k = 2 * M_PI;
  const std::complex<double> amp = 2 * M_PI / std::complex<double>(-c0 * k, k * k);
  double err = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    const double z = g.coordinate(0, static_cast<int>(i));
    err = std::max(err, std::abs(g1.values()(i, 0) - std::real(amp * std::exp(std::complex<double>(0, k * z)))));
  }
  CHECK(err < 1e-12);
}

TEST_CASE("g1 is one-dimensional only") {
  const Grid g = Grid::torus(2, 16);
  const TorusField a = TorusField::constant(g, VectorXd::Zero(2));
  const TorusField f0 = solve_f0(a);
  try {
    solve_g1(a, a, f0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionUnsupported);
  }
}
