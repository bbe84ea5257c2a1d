#pragma once

#include <optional>
#include <vector>

#include "hsim/effective.hpp"

namespace hsim {

/// Truncated real-space grid for profiles; zero fields select the defaults
/// (half width 10 max(1, sqrt(lambda_max)); 2048 points in 1D, 256 per axis in 2D, 64 in 3D).
struct ProfileGridOptions {
  int points = 0;
  double half_width = 0.0;
};

Grid profile_grid(const EffectiveCoefficients& coeffs, const ProfileGridOptions& opts = {});

/// Profile F on a centred grid [-L_x, L_x)^N; the Riemann sum equals the trapezoid
/// rule because F decays at the boundary.
struct SelfSimilarProfile {
  Grid grid;
  VectorXd values;
  double mass = 0.0;
  EffectiveCoefficients coeffs;
  /// N = 1 stationary profiles only: column k holds the k-th x-derivative (k = 0..6),
  /// generated from the once-integrated ODE rather than by numerical differentiation.
  std::optional<MatrixXd> jets;

  double grid_mass() const { return integrate(grid, values); }
  /// max |F| over nodes with some |x_i| >= 0.9 L_x.
  double boundary_max() const;
};

/// F_M = M (2 pi)^(-N/2) det(S)^(-1/2) exp(-|P^-1 x|^2 / 2). Requires a = 0 when N = 1.
SelfSimilarProfile gaussian_profile(double mass, const EffectiveCoefficients& coeffs,
                                    const ProfileGridOptions& opts = {});

/// Stationary N = 1 profile of -eta F'' - (x F)' + a (F^2)' = 0 with mass M, obtained by
/// shooting on F(0) for the once-integrated relation eta F' = a F^2 - x F.
SelfSimilarProfile solve_fm_1d(double mass, double eta, double a, const ProfileGridOptions& opts = {});

/// Stationary profile of matching mass for any dimension: Gaussian unless N = 1 and a != 0.
SelfSimilarProfile stationary_profile(double mass, const EffectiveCoefficients& coeffs,
                                      const ProfileGridOptions& opts = {});

/// Profile from arbitrary samples on a profile grid (mass taken from the samples).
SelfSimilarProfile make_profile(const Grid& grid, VectorXd values, const EffectiveCoefficients& coeffs);

/// Sup norm of -sum eta_ij d_ij F - div(x F) + a d_x F^2 with spectral derivatives.
double profile_residual(const SelfSimilarProfile& profile, const EffectiveCoefficients& coeffs);

/// Right-hand side of the homogenized equation, dF/dtau, by spectral derivatives.
VectorXd homogenized_rhs(const SelfSimilarProfile& profile, const EffectiveCoefficients& coeffs);

struct HomogenizedSample {
  double tau = 0.0;
  double mass = 0.0;
  double l1_to_fm = 0.0;
  double residual = 0.0;
};

struct HomogenizedTrajectory {
  std::vector<HomogenizedSample> samples;
  std::vector<VectorXd> states;  // F at each sample time
  SelfSimilarProfile target;     // F_M of the same mass
  SelfSimilarProfile final_state;
};

struct EvolveOptions {
  double cfl = 0.4;             // advective Courant number
  double diffusion_number = 0.4;  // bound on dt * sum_d eta_dd / h^2
  bool keep_states = true;
};

/// Finite-volume evolution of dF/dtau = sum eta_ij d_ij F + div(x F) - a d_x F^2 with
/// zero-flux boundaries, sampled every dtau (dtau <= 0.1) up to tau_end.
HomogenizedTrajectory evolve_homogenized(const SelfSimilarProfile& init, const EffectiveCoefficients& coeffs,
                                         double tau_end, double dtau, const EvolveOptions& opts = {});

}  // namespace hsim
