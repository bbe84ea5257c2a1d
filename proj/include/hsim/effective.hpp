#pragma once

#include <optional>

#include "hsim/cell_solver.hpp"

namespace hsim {

/// Symmetric part S of eta factorised as S = P P^T with P = O^T diag(sqrt(lambda)).
struct Factorization {
  MatrixXd S;
  MatrixXd P;
  VectorXd lambdas;
  double det_s = 1.0;
};

/// Throws NotCoercive when an eigenvalue of (eta + eta^T)/2 is below
/// 1e-12 * trace(S).
Factorization factorize(const MatrixXd& eta);

struct EffectiveCoefficients {
  int dims = 1;
  VectorXd c;
  MatrixXd eta;      // as computed, possibly non-symmetric
  MatrixXd eta_sym;  // (eta + eta^T) / 2
  std::optional<double> a;  // N = 1 only
  MatrixXd P;
  VectorXd lambdas;
  double det_s = 1.0;

  /// Builds a coefficient set directly from eta (and a, c); factorises eta.
  static EffectiveCoefficients from_eta(const MatrixXd& eta, std::optional<double> a = std::nullopt,
                                        std::optional<VectorXd> c = std::nullopt);
  double a_or_zero() const { return a.value_or(0.0); }
};

/// c_i = <alpha1_i f0>.
VectorXd compute_drift_c(const TorusField& alpha1, const TorusField& f0);

/// eta_ij = delta_ij - <(alpha1_i - c_i) f1_j>.
MatrixXd compute_eta_direct(const TorusField& alpha1, const VectorXd& c, const TorusField& f1);

/// Q with xi^T Q xi = <f0 |xi + grad(chi . xi)|^2>; symmetric positive definite.
MatrixXd compute_eta_quadratic(const TorusField& chi, const TorusField& f0);

/// a = <alpha2 f0^2> + <(alpha1 - c) g1>, N = 1 only.
double compute_a(const TorusField& alpha1, const TorusField& alpha2, const VectorXd& c,
                 const TorusField& f0, const TorusField& g1);

/// Every cell corrector and coefficient derived from the shifted-flux Taylor data.
struct Homogenization {
  TorusField alpha1;
  std::optional<TorusField> alpha2;  // 1/2 d_p^2 A(y, v), N components
  std::optional<TorusField> alpha3;  // 1/6 d_p^3 A(y, v), N components
  TorusField f0, f1, chi;
  std::optional<TorusField> g1;
  EffectiveCoefficients coeffs;
  MatrixXd eta_quadratic;
  double residual_f0 = 0.0;
  double residual_f1 = 0.0;
  double residual_chi = 0.0;
  double residual_g1 = 0.0;
};

Homogenization homogenize(const TorusField& alpha1, const std::optional<TorusField>& alpha2,
                          const std::optional<TorusField>& alpha3, const CellOptions& opts = {});

}  // namespace hsim
