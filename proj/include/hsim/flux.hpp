#pragma once

#include <array>
#include <string>
#include <vector>

#include "hsim/torus_field.hpp"

namespace hsim {

/// c0 + sum_t [cos_t cos(2 pi k_t . y) + sin_t sin(2 pi k_t . y)], 1-periodic in each axis.
struct TrigPoly {
  struct Term {
    std::array<int, 3> k{0, 0, 0};
    double cos_amp = 0.0;
    double sin_amp = 0.0;
  };
  double constant = 0.0;
  std::vector<Term> terms;

  double operator()(const double* y, int dims) const;
  double operator()(const VectorXd& y) const { return (*this)(y.data(), static_cast<int>(y.size())); }
  TrigPoly derivative(int axis) const;
  TrigPoly operator-() const;
  bool is_zero() const;
};

/// Space-periodic flux polynomial in p:  A_d(y, p) = sum_k coeffs[d][k](y) p^k.
class FluxModel {
 public:
  FluxModel() = default;
  FluxModel(int dims, std::vector<std::vector<TrigPoly>> coeffs, double p0 = 0.0, std::string name = "");

  int dims() const { return dims_; }
  int degree() const { return degree_; }
  double p0() const { return p0_; }
  const std::string& name() const { return name_; }
  const std::vector<std::vector<TrigPoly>>& coeffs() const { return coeffs_; }

  double value(int axis, const double* y, double p) const;
  /// order-th p-derivative of A_axis.
  double dp(int order, int axis, const double* y, double p) const;
  /// sum_d d/dy_d A_d(y, p) at fixed p.
  double div_y(const double* y, double p) const;
  /// (1/j!) d_p^j A_axis(y, v): Taylor coefficient of the shifted flux around v.
  double taylor(int j, int axis, const double* y, double v) const;
  /// Coefficient polynomials evaluated at y: out(d, k).
  MatrixXd coefficients_at(const double* y) const;

 private:
  int dims_ = 1;
  int degree_ = 0;
  double p0_ = 0.0;
  std::string name_;
  std::vector<std::vector<TrigPoly>> coeffs_;
  std::vector<std::vector<TrigPoly>> dcoeffs_;  // d/dy_d of coeffs_[d][k]
};

/// A(y,p) = (-omega - grad psi(y)) p.
FluxModel linear_ratchet(int dims, const VectorXd& omega, const TrigPoly& psi);
/// A(y,p) = (-omega - grad psi(y)) p + (b/2) p^2 e, with e a fixed direction.
FluxModel variable_burgers(int dims, const VectorXd& omega, const TrigPoly& psi, double b,
                           const VectorXd& direction);
/// A(y,p) = (-omega - grad psi(y)) p + (b/2) p^2 e + (d3/6) p^3 e + (d4/24) p^4 e.
FluxModel polynomial_preset(int dims, const VectorXd& omega, const TrigPoly& psi,
                            const std::vector<double>& higher, const VectorXd& direction);

struct HypothesisReport {
  double div_max = 0.0;   // max_y |div_y A(y, p0)| on the sampling grid
  bool div_ok = false;
  double growth_exponent = 0.0;  // effective n (>= 1)
  double growth_limit = 0.0;     // (N + 2) / N
  bool growth_ok = false;
  bool pass() const { return div_ok && growth_ok; }
  std::string message;
};

/// Grid check of div_y A(., p0) = 0 and a sampled fit of the growth exponent n
/// in |d_p A(y, p+q) - d_p A(y, p)| + |div A(y, p+q) - div A(y, p)| <= C (|q| + |q|^n).
HypothesisReport check_hypotheses(const FluxModel& flux, int points = 32);
/// As check_hypotheses, throwing HypothesisViolated when a condition fails.
HypothesisReport verify_hypotheses(const FluxModel& flux, int points = 32);

/// Taylor data of B(y, f) = A(y, v + f) - A(y, v) on the torus grid of v.
/// alpha[j-1] holds (1/j!) d_p^j A(y, v(y)) for j = 1..degree (N components each).
struct TaylorData {
  std::vector<TorusField> alpha;
  const TorusField& alpha1() const { return alpha.at(0); }
  TorusField alpha_or_zero(int j) const;
};

TaylorData taylor_flux_coeffs(const FluxModel& flux, const TorusField& v);

/// Smallest C with |B - a1 f - a2 f^2 - a3 f^3| <= C |f|^4 on sampled (y, f), |f| <= 1.
double fit_remainder_constant(const FluxModel& flux, const TorusField& v, int f_samples = 41);

/// Samples alpha(y) = d_p A(y, p) at fixed p; N components.
TorusField sample_drift(const FluxModel& flux, const Grid& grid, double p);

}  // namespace hsim
