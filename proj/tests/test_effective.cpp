#include <doctest.h>

#include <cmath>
#include <vector>

#include "hsim/effective.hpp"
#include "hsim/error.hpp"
#include "support.hpp"

using namespace hsim;

namespace {

TorusField drift_1d(const Grid& g, double omega, double amp) {
  return TorusField::sample(g, 1, [&](const VectorXd& z) {
    return VectorXd::Constant(1, -omega - amp * 2 * M_PI * std::cos(2 * M_PI * z[0]));
  });
}

// 1 / (<e^psi> <e^-psi>) for psi = amp * sin(2 pi z).
double gradient_eta(double amp) {
  const double p = testing::simpson([&](double z) { return std::exp(amp * std::sin(2 * M_PI * z)); }, 0.0, 1.0);
  const double m = testing::simpson([&](double z) { return std::exp(-amp * std::sin(2 * M_PI * z)); }, 0.0, 1.0);
  return 1.0 / (p * m);
}

// Drift of -f'' + (alpha f)' = 0 with alpha = -omega - psi': the constant probability flux J,
// obtained from f' = alpha f - J by quadrature.
double tilted_drift(double omega) {
  const int n = 200000;
  const double h = 1.0 / n;
  auto Phi = [&](double z) { return -omega * z - std::sin(2 * M_PI * z); };
  std::vector<double> inner(n + 1, 0.0);  // int_0^z e^-Phi
  for (int i = 1; i <= n; ++i)
    inner[i] = inner[i - 1] + 0.5 * h * (std::exp(-Phi((i - 1) * h)) + std::exp(-Phi(i * h)));
  const double f0_over_j = std::exp(-omega) * inner[n] / (std::exp(-omega) - 1.0);
  double mass = 0.0;  // int_0^1 f / J
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 0.5 * h : h;
    mass += w * std::exp(Phi(i * h)) * (f0_over_j - inner[i]);
  }
  return 1.0 / mass;
}

}  // namespace

TEST_CASE("ratchet without tilt: Bessel closed form") {
  const Grid g = Grid::torus(1, 256);
  const Homogenization h = homogenize(drift_1d(g, 0.0, 1.0), std::nullopt, std::nullopt);
  const double bessel = std::cyl_bessel_i(0.0, 1.0);
  CHECK(std::abs(h.coeffs.c[0]) < 1e-10);
  CHECK(h.coeffs.eta(0, 0) == doctest::Approx(1.0 / (bessel * bessel)).epsilon(1e-10));
  CHECK(h.coeffs.eta(0, 0) == doctest::Approx(gradient_eta(1.0)).epsilon(1e-10));
  CHECK(std::abs(h.eta_quadratic(0, 0) - h.coeffs.eta(0, 0)) < 1e-10);
}

TEST_CASE("tilted ratchet drift matches the probability-flux quadrature") {
  const Grid g = Grid::torus(1, 128);
  for (double omega : {0.5, -1.5, 3.0}) {
    const Homogenization h = homogenize(drift_1d(g, omega, 1.0), std::nullopt, std::nullopt);
    CHECK(h.coeffs.c[0] == doctest::Approx(tilted_drift(omega)).epsilon(1e-8));
    CHECK(std::abs(h.eta_quadratic(0, 0) - h.coeffs.eta_sym(0, 0)) < 1e-8);
    CHECK(h.coeffs.eta(0, 0) > 0.0);
  }
}

TEST_CASE("constant drift gives unit diffusion and a = alpha2") {
  const Grid g = Grid::torus(1, 32);
  const TorusField a1 = TorusField::constant(g, VectorXd::Constant(1, -0.4));
  const TorusField a2 = TorusField::constant(g, VectorXd::Constant(1, 0.75));
  const Homogenization h = homogenize(a1, a2, std::nullopt);
  CHECK(h.coeffs.c[0] == doctest::Approx(-0.4).epsilon(1e-12));
  CHECK(h.coeffs.eta(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h.coeffs.a_or_zero() == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("gradient drift with a constant quadratic coefficient: a = b eta / 2") {
  // Integrating the g1 equation once gives a = (b/2) / (<e^psi> <e^-psi>).
  const Grid g = Grid::torus(1, 128);
  const double b = 1.3;
  const TorusField a2 = TorusField::constant(g, VectorXd::Constant(1, 0.5 * b));
  const Homogenization h = homogenize(drift_1d(g, 0.0, 0.8), a2, std::nullopt);
  CHECK(h.coeffs.a_or_zero() == doctest::Approx(0.5 * b * gradient_eta(0.8)).epsilon(1e-9));
}

TEST_CASE("separable two-dimensional drift") {
  const Grid g = Grid::torus(2, 48);
  const TorusField alpha = TorusField::sample(g, 2, [](const VectorXd& z) {
    VectorXd a(2);
    a << -2 * M_PI * std::cos(2 * M_PI * z[0]), -0.5 * 2 * M_PI * std::cos(2 * M_PI * z[1]);
    return a;
  });
  const Homogenization h = homogenize(alpha, std::nullopt, std::nullopt);
  CHECK(h.coeffs.eta(0, 0) == doctest::Approx(gradient_eta(1.0)).epsilon(1e-9));
  CHECK(h.coeffs.eta(1, 1) == doctest::Approx(gradient_eta(0.5)).epsilon(1e-9));
  CHECK(std::abs(h.coeffs.eta(0, 1)) < 1e-10);
  CHECK((h.coeffs.eta_sym - h.eta_quadratic).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(!h.coeffs.a.has_value());
}

TEST_CASE("factorisation of the symmetric part") {
  MatrixXd eta(2, 2);
  eta << 2.0, 0.6, -0.2, 1.0;
  const Factorization f = factorize(eta);
  CHECK((f.P * f.P.transpose() - 0.5 * (eta + eta.transpose())).norm() < 1e-14);
  CHECK(f.det_s == doctest::Approx(2.0 - 0.04).epsilon(1e-14));

  MatrixXd bad(2, 2);
  bad << 1.0, 0.0, 0.0, -1.0;
  try {
    factorize(bad);
    FAIL("expected NotCoercive");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotCoercive);
  }
}

TEST_CASE("coefficients from a given eta") {
  MatrixXd eta(2, 2);
  eta << 1.0, 0.5, -0.5, 1.0;
  const EffectiveCoefficients c = EffectiveCoefficients::from_eta(eta);
  CHECK(c.eta_sym.isApprox(MatrixXd::Identity(2, 2)));
  CHECK(c.c.isZero());
  CHECK(c.lambdas.minCoeff() == doctest::Approx(1.0));
}
