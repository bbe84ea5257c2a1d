#include <doctest.h>

#include "hsim/direct_sim.hpp"
#include "hsim/error.hpp"
#include "support.hpp"

using namespace hsim;

TEST_CASE("trigonometric polynomial evaluation and derivative") {
  TrigPoly p;
  p.constant = 0.5;
  p.terms.push_back({{1, 2, 0}, 0.3, -0.7});
  VectorXd y(2);
  y << 0.17, 0.61;
  const double phase = 2 * M_PI * (y[0] + 2 * y[1]);
  CHECK(p(y) == doctest::Approx(0.5 + 0.3 * std::cos(phase) - 0.7 * std::sin(phase)));
  const double h = 1e-6;
  VectorXd yp = y, ym = y;
  yp[1] += h;
  ym[1] -= h;
  CHECK(p.derivative(1)(y) == doctest::Approx((p(yp) - p(ym)) / (2 * h)).epsilon(1e-8));
  CHECK((-p)(y) == doctest::Approx(-p(y)));
  CHECK(TrigPoly{}.is_zero());
}

TEST_CASE("polynomial flux: values, p-derivatives and Taylor coefficients") {
  const TrigPoly psi = testing::sine(0.5);
  const FluxModel f = polynomial_preset(1, VectorXd::Constant(1, 0.2), psi, {1.0, 0.6}, VectorXd::Ones(1));
  CHECK(f.degree() == 3);
  const double y = 0.3;
  const double a1 = -0.2 - 0.5 * 2 * M_PI * std::cos(2 * M_PI * y);
  auto A = [&](double p) { return a1 * p + 0.5 * p * p + 0.1 * p * p * p; };
  for (double p : {-1.2, 0.0, 0.7}) {
    CHECK(f.value(0, &y, p) == doctest::Approx(A(p)));
    CHECK(f.dp(1, 0, &y, p) == doctest::Approx(a1 + p + 0.3 * p * p));
    CHECK(f.dp(2, 0, &y, p) == doctest::Approx(1.0 + 0.6 * p));
    CHECK(f.dp(3, 0, &y, p) == doctest::Approx(0.6));
    CHECK(f.dp(4, 0, &y, p) == 0.0);
  }
  // Taylor coefficients around v are (1/j!) d_p^j A(y, v).
  CHECK(f.taylor(2, 0, &y, 0.4) == doctest::Approx(0.5 * (1.0 + 0.6 * 0.4)));
  CHECK(f.taylor(3, 0, &y, 0.4) == doctest::Approx(0.1));
  // div_y A(y, p) = -psi'' p.
  const double psi2 = -0.5 * std::pow(2 * M_PI, 2) * std::sin(2 * M_PI * y);
  CHECK(f.div_y(&y, 0.8) == doctest::Approx(-psi2 * 0.8));
}

TEST_CASE("hypothesis check on the presets") {
  const TrigPoly psi = testing::sine();
  const HypothesisReport lin = check_hypotheses(linear_ratchet(1, VectorXd::Zero(1), psi));
  CHECK(lin.pass());
  CHECK(lin.growth_exponent == doctest::Approx(1.0));

  const HypothesisReport burgers = check_hypotheses(variable_burgers(1, VectorXd::Zero(1), psi, 1.0, VectorXd::Ones(1)));
  CHECK(burgers.pass());
  CHECK(burgers.growth_limit == doctest::Approx(3.0));

  TrigPoly psi2 = psi;
  psi2.terms.push_back({{0, 1, 0}, 0.4, 0.0});
  VectorXd e(2);
  e << 1.0, 0.0;
  const FluxModel cubic = polynomial_preset(2, VectorXd::Zero(2), psi2, {0.0, 1.0}, e);
  const HypothesisReport rc = check_hypotheses(cubic);
  CHECK_FALSE(rc.pass());
  CHECK(rc.div_ok);
  CHECK(rc.growth_exponent >= rc.growth_limit);
  CHECK(rc.message.find("growth exponent") != std::string::npos);
  try {
    verify_hypotheses(cubic);
    FAIL("expected HypothesisViolated");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::HypothesisViolated);
  }
}

TEST_CASE("a y-dependent flux at p0 violates the divergence condition") {
  std::vector<std::vector<TrigPoly>> coeffs(1);
  coeffs[0] = {testing::sine(), TrigPoly{}};
  coeffs[0][1].constant = 1.0;
  const FluxModel f(1, coeffs);
  const HypothesisReport r = check_hypotheses(f);
  CHECK_FALSE(r.div_ok);
  CHECK(r.div_max == doctest::Approx(2 * M_PI).epsilon(1e-3));
}

TEST_CASE("Taylor data and the quartic remainder constant") {
  const FluxModel f = polynomial_preset(1, VectorXd::Zero(1), testing::sine(), {1.0, 0.5, 2.4}, VectorXd::Ones(1));
  const TorusField v = TorusField::constant(Grid::torus(1, 16), VectorXd::Zero(1));
  const TaylorData t = taylor_flux_coeffs(f, v);
  REQUIRE(t.alpha.size() == 4);
  CHECK(t.alpha_or_zero(2).values().isConstant(0.5));
  CHECK(t.alpha_or_zero(3).values().isConstant(0.5 / 6.0));
  CHECK(t.alpha_or_zero(7).values().isZero());
  // B - (a1 f + a2 f^2 + a3 f^3) = (2.4 / 24) f^4 exactly.
  CHECK(fit_remainder_constant(f, v) == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("sampled drift") {
  const FluxModel f = linear_ratchet(1, VectorXd::Constant(1, 0.3), testing::sine());
  const TorusField d = sample_drift(f, Grid::torus(1, 8), 5.0);
  CHECK(d.values()(0, 0) == doctest::Approx(-0.3 - 2 * M_PI));
}
