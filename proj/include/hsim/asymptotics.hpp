#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "hsim/flux.hpp"
#include "hsim/profiles.hpp"

namespace hsim {

/// U(tau, x) = R^N f(t, R x + c t) with R = sqrt(1 + 2t) = e^tau, on an x-grid.
struct RescaledState {
  double t = 0.0;
  double tau = 0.0;
  double R = 1.0;
  VectorXd shift;  // c t = c (R^2 - 1) / 2
  Grid grid;
  VectorXd U;

  /// Grid of the fast variable z = R x + c t over the nodes of `grid`.
  Grid z_grid() const;
};

/// Exact pull-back: the box nodes mapped to x, so no interpolation is involved.
RescaledState to_self_similar(const Grid& box, const VectorXd& f, double t, const VectorXd& c);
/// Pull-back followed by a conservative transfer onto `target`; throws OutOfDomain when
/// mass would be lost outside `target`.
RescaledState to_self_similar(const Grid& box, const VectorXd& f, double t, const VectorXd& c,
                              const Grid& target);
/// f(t, y) = R^-N U((y - c t) / R) on `box`.
VectorXd from_self_similar(const RescaledState& state, const Grid& box);

/// Mass-conserving transfer between uniform grids (piecewise-constant reconstruction of
/// the cumulative mass). N <= 2.
VectorXd conservative_remap(const Grid& from, const VectorXd& values, const Grid& to);

/// Periodic fields at the nodes of an arbitrary uniform grid (coordinates taken mod 1).
/// Lattice-aligned grids are served from a one-period table.
MatrixXd sample_periodic(const TorusField& field, const Grid& at);
MatrixXd sample_periodic(const TorusField& field, const MatrixXd& points);

/// Cell data of the two-scale expansion U0 + R^-1 U1 + R^-2 U2.
struct UappCells {
  int dims = 1;
  TorusField f0, f1;
  std::optional<TorusField> g1;      // N = 1
  TorusField phi_a;                  // L phi_a = f0 - 1
  std::vector<TorusField> phi_ij;    // i * N + j
  std::optional<TorusField> phi_c;   // N = 1 nonlinear corrections
  std::optional<TorusField> phi_d;
  std::optional<TorusField> phi_e;
  std::optional<TorusField> phi_nl;  // N = 2 quadratic correction
  double max_residual = 0.0;
};

UappCells solve_uapp_cells(const Homogenization& hom, const CellOptions& opts = {});

/// One product term R^-order phi(z) G(x). For N = 1 stationary profiles `xfun` carries
/// G, G', G'' in its columns; otherwise one column.
struct ApproxTerm {
  int order = 0;
  TorusField cell;
  MatrixXd xfun;
};

struct ApproxSolution {
  double tau = 0.0;
  double R = 1.0;
  VectorXd shift;
  Grid profile_grid;
  std::vector<ApproxTerm> terms;

  /// Sum of all terms at the nodes of `xgrid`.
  VectorXd evaluate(const Grid& xgrid) const;
  /// Terms with order <= max_order only.
  VectorXd evaluate(const Grid& xgrid, int max_order) const;
};

/// Assembles U^app[F] at tau with R = e^(tau_offset + tau) and z = R x + c (R^2 - 1) / 2.
/// F must solve the homogenized equation (its tau-derivative is taken from it).
ApproxSolution build_uapp(const SelfSimilarProfile& F, const UappCells& cells,
                          const EffectiveCoefficients& coeffs, double tau, double tau_offset = 0.0);

/// L1 norm of the remainder obtained by inserting U^app into the rescaled equation
///   dU/dtau - d_x(x U) - d_xx U + d_x[R^2 B(z, U / R) - R c U] = 0     (N = 1)
/// on an x-grid with `points_per_period` nodes per fast period 1/R.
double uapp_remainder_l1(const ApproxSolution& uapp, const TaylorData& taylor, const VectorXd& c,
                         int points_per_period = 32);

struct RemainderFit {
  std::vector<double> taus;
  std::vector<double> l1;
  double slope = 0.0;  // least-squares slope of log l1 against tau
};

RemainderFit fit_remainder_decay(const SelfSimilarProfile& F, const UappCells& cells,
                                 const EffectiveCoefficients& coeffs, const TaylorData& taylor,
                                 const std::vector<double>& taus, int points_per_period = 32);

/// V = U / f0(z).
VectorXd compute_V(const RescaledState& state, const TorusField& f0);

/// integral |U - f0(z) F_M(x)| dx.
double diag_l1(const RescaledState& state, const TorusField& f0, const SelfSimilarProfile& fm);

/// integral |U - Uapp| dx.
double diag_quasi_lyapunov(const RescaledState& state, const VectorXd& uapp);

/// (integral |V|^2 (1 + |x|^2)^(m/2) dx, integral |grad V|^2 dx). Throws WeightTooSmall
/// unless m > 2 (N + 1).
std::pair<double, double> diag_weighted(const Grid& grid, const VectorXd& V, double m);

/// (1 + 2t)^-2 integral |f| |y - c t|^4 dy.
double diag_moment4(const Grid& box, const VectorXd& f, double t, const VectorXd& c);

struct DiagnosticsRow {
  double t = 0.0, tau = 0.0;
  double l1_error = 0.0, H = 0.0;
  double weighted_l2 = 0.0, grad_l2 = 0.0;
  double moment4 = 0.0, mass = 0.0;
  VectorXd com;
  double linf = 0.0;
};

struct DiagnosticsSeries {
  int dims = 1;
  std::vector<DiagnosticsRow> rows;

  /// Column order: t,tau,l1_error,H,weighted_l2,grad_l2,moment4,mass,com_x[,com_y],linf.
  void write_csv(std::ostream& os) const;
};

/// Near-monotonicity H(tau') - H(tau) <= C (e^-tau - e^-tau'). C is the smallest
/// constant that covers every pair within the first half of the series; the check then
/// runs over all pairs with an absolute slack for rounding.
struct QuasiLyapunovCheck {
  double C = 0.0;
  bool holds = true;
  double worst_excess = 0.0;  // max over pairs of increase beyond the bound
};

QuasiLyapunovCheck check_quasi_lyapunov(const std::vector<double>& taus, const std::vector<double>& H,
                                        double slack = 1e-12);

}  // namespace hsim
