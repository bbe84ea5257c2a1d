#include "hsim/flux.hpp"

#include <cmath>
#include <sstream>

#include "hsim/error.hpp"

namespace hsim {

namespace {

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

double falling(int k, int order) {
  double r = 1.0;
  for (int i = 0; i < order; ++i) r *= (k - i);
  return r;
}

}  // namespace

double TrigPoly::operator()(const double* y, int dims) const {
  double s = constant;
  for (const Term& t : terms) {
    double phase = 0.0;
    for (int a = 0; a < dims; ++a) phase += t.k[a] * y[a];
    phase *= 2.0 * M_PI;
    s += t.cos_amp * std::cos(phase) + t.sin_amp * std::sin(phase);
  }
  return s;
}

TrigPoly TrigPoly::derivative(int axis) const {
  TrigPoly d;
  for (const Term& t : terms) {
    const double w = 2.0 * M_PI * t.k[axis];
    if (w == 0.0) continue;
    d.terms.push_back({t.k, w * t.sin_amp, -w * t.cos_amp});
  }
  return d;
}

TrigPoly TrigPoly::operator-() const {
  TrigPoly n = *this;
  n.constant = -n.constant;
  for (Term& t : n.terms) {
    t.cos_amp = -t.cos_amp;
    t.sin_amp = -t.sin_amp;
  }
  return n;
}

bool TrigPoly::is_zero() const {
  if (constant != 0.0) return false;
  for (const Term& t : terms)
    if (t.cos_amp != 0.0 || t.sin_amp != 0.0) return false;
  return true;
}

FluxModel::FluxModel(int dims, std::vector<std::vector<TrigPoly>> coeffs, double p0, std::string name)
    : dims_(dims), p0_(p0), name_(std::move(name)), coeffs_(std::move(coeffs)) {
  require(dims >= 1 && dims <= 3, "flux dimension must be 1, 2 or 3");
  require(static_cast<int>(coeffs_.size()) == dims, "flux needs one coefficient list per axis");
  for (auto& list : coeffs_) {
    while (!list.empty() && list.back().is_zero()) list.pop_back();
    degree_ = std::max(degree_, static_cast<int>(list.size()) - 1);
  }
  for (auto& list : coeffs_) list.resize(degree_ + 1);
  dcoeffs_.resize(dims_);
  for (int d = 0; d < dims_; ++d)
    for (const TrigPoly& c : coeffs_[d]) dcoeffs_[d].push_back(c.derivative(d));
}

double FluxModel::value(int axis, const double* y, double p) const { return dp(0, axis, y, p); }

double FluxModel::dp(int order, int axis, const double* y, double p) const {
  const auto& list = coeffs_[axis];
  double s = 0.0;
  for (int k = static_cast<int>(list.size()) - 1; k >= order; --k)
    s = s * p + falling(k, order) * list[k](y, dims_);
  return s;
}

double FluxModel::div_y(const double* y, double p) const {
  double s = 0.0;
  for (int d = 0; d < dims_; ++d) {
    const auto& list = dcoeffs_[d];
    double t = 0.0;
    for (int k = static_cast<int>(list.size()) - 1; k >= 0; --k) t = t * p + list[k](y, dims_);
    s += t;
  }
  return s;
}

double FluxModel::taylor(int j, int axis, const double* y, double v) const {
  return dp(j, axis, y, v) / factorial(j);
}

MatrixXd FluxModel::coefficients_at(const double* y) const {
  MatrixXd out(dims_, degree_ + 1);
  for (int d = 0; d < dims_; ++d)
    for (int k = 0; k <= degree_; ++k) out(d, k) = coeffs_[d][k](y, dims_);
  return out;
}

namespace {

std::vector<std::vector<TrigPoly>> drift_part(int dims, const VectorXd& omega, const TrigPoly& psi) {
  require(omega.size() == dims, "omega must have one entry per axis");
  std::vector<std::vector<TrigPoly>> coeffs(dims, std::vector<TrigPoly>(2));
  for (int d = 0; d < dims; ++d) {
    TrigPoly drift = -psi.derivative(d);
    drift.constant -= omega[d];
    coeffs[d][1] = drift;
  }
  return coeffs;
}

}  // namespace

FluxModel linear_ratchet(int dims, const VectorXd& omega, const TrigPoly& psi) {
  return FluxModel(dims, drift_part(dims, omega, psi), 0.0, "linear_ratchet");
}

FluxModel variable_burgers(int dims, const VectorXd& omega, const TrigPoly& psi, double b,
                           const VectorXd& direction) {
  return polynomial_preset(dims, omega, psi, {b}, direction);
}

FluxModel polynomial_preset(int dims, const VectorXd& omega, const TrigPoly& psi,
                            const std::vector<double>& higher, const VectorXd& direction) {
  require(direction.size() == dims, "direction must have one entry per axis");
  auto coeffs = drift_part(dims, omega, psi);
  for (int d = 0; d < dims; ++d) {
    coeffs[d].resize(2 + higher.size());
    for (std::size_t j = 0; j < higher.size(); ++j) {
      // p^(j+2) coefficient: higher[j] / (j+2)!
      coeffs[d][j + 2].constant = higher[j] * direction[d] / factorial(static_cast<int>(j) + 2);
    }
  }
  const char* name = higher.size() == 1 ? "variable_burgers" : "polynomial";
  return FluxModel(dims, std::move(coeffs), 0.0, name);
}

HypothesisReport check_hypotheses(const FluxModel& flux, int points) {
  HypothesisReport r;
  const int n = flux.dims();
  const Grid g = Grid::torus(n, points);
  for (Index i = 0; i < g.size(); ++i) {
    const VectorXd y = g.point(i);
    r.div_max = std::max(r.div_max, std::abs(flux.div_y(y.data(), flux.p0())));
  }
  r.div_ok = r.div_max <= 1e-10;

  // Increment growth over |p| <= 1 at large |q|, sampled on a coarse grid.
  const Grid coarse = Grid::torus(n, 8);
  auto increment = [&](double q) {
    double worst = 0.0;
    for (Index i = 0; i < coarse.size(); ++i) {
      const VectorXd y = coarse.point(i);
      for (double p : {-1.0, -0.5, 0.0, 0.5, 1.0})
        for (double s : {q, -q}) {
          double inc = std::abs(flux.div_y(y.data(), p + s) - flux.div_y(y.data(), p));
          for (int d = 0; d < n; ++d)
            inc = std::max(inc, std::abs(flux.dp(1, d, y.data(), p + s) - flux.dp(1, d, y.data(), p)));
          worst = std::max(worst, inc);
        }
    }
    return worst;
  };
  const double q_lo = 1e4, q_hi = 1e6;
  const double d_lo = increment(q_lo), d_hi = increment(q_hi);
  double slope = 0.0;
  if (d_lo > 1e-12 * q_lo && d_hi > 0.0) slope = std::log(d_hi / d_lo) / std::log(q_hi / q_lo);
  // Increments of a polynomial flux grow with an integer power; lower-order terms bias
  // the finite-q slope slightly downwards.
  if (std::abs(slope - std::round(slope)) < 1e-2) slope = std::round(slope);
  r.growth_exponent = std::max(1.0, slope);
  r.growth_limit = (n + 2.0) / n;
  r.growth_ok = r.growth_exponent < r.growth_limit - 1e-6;

  std::ostringstream msg;
  if (!r.div_ok) msg << "div_y A(y, p0) does not vanish (max " << r.div_max << " at p0 = " << flux.p0() << "); ";
  if (!r.growth_ok)
    msg << "growth exponent n ~ " << r.growth_exponent << " is not below (N+2)/N = " << r.growth_limit << "; ";
  r.message = msg.str();
  return r;
}

HypothesisReport verify_hypotheses(const FluxModel& flux, int points) {
  HypothesisReport r = check_hypotheses(flux, points);
  if (!r.pass()) throw Error(ErrorKind::HypothesisViolated, r.message);
  return r;
}

TorusField TaylorData::alpha_or_zero(int j) const {
  if (j >= 1 && j <= static_cast<int>(alpha.size())) return alpha[j - 1];
  const TorusField& a1 = alpha.at(0);
  return TorusField(a1.grid(), a1.components());
}

TaylorData taylor_flux_coeffs(const FluxModel& flux, const TorusField& v) {
  require(v.dims() == flux.dims(), "flux and stationary solution dimensions differ");
  const Grid& g = v.grid();
  TaylorData out;
  const int degree = std::max(flux.degree(), 3);
  for (int j = 1; j <= degree; ++j) {
    TorusField a(g, flux.dims());
    for (Index i = 0; i < g.size(); ++i) {
      const VectorXd y = g.point(i);
      for (int d = 0; d < flux.dims(); ++d) a.values()(i, d) = flux.taylor(j, d, y.data(), v.values()(i, 0));
    }
    out.alpha.push_back(std::move(a));
  }
  return out;
}

double fit_remainder_constant(const FluxModel& flux, const TorusField& v, int f_samples) {
  const Grid& g = v.grid();
  double c = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    const VectorXd y = g.point(i);
    const double vi = v.values()(i, 0);
    for (int s = 0; s < f_samples; ++s) {
      const double f = -1.0 + 2.0 * s / (f_samples - 1);
      if (std::abs(f) < 1e-3) continue;
      for (int d = 0; d < flux.dims(); ++d) {
        const double b = flux.value(d, y.data(), vi + f) - flux.value(d, y.data(), vi);
        double taylor = 0.0;
        for (int j = 3; j >= 1; --j) taylor = (taylor + flux.taylor(j, d, y.data(), vi)) * f;
        c = std::max(c, std::abs(b - taylor) / std::pow(f, 4));
      }
    }
  }
  return c;
}

TorusField sample_drift(const FluxModel& flux, const Grid& grid, double p) {
  TorusField out(grid, flux.dims());
  for (Index i = 0; i < grid.size(); ++i) {
    const VectorXd y = grid.point(i);
    for (int d = 0; d < flux.dims(); ++d) out.values()(i, d) = flux.dp(1, d, y.data(), p);
  }
  return out;
}

}  // namespace hsim
