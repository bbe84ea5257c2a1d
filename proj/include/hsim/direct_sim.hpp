#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hsim/asymptotics.hpp"

namespace hsim {

struct StationaryOptions {
  int points = 64;           // torus resolution per axis
  double tolerance = 1e-10;  // RMS of -lap v + div_y A(y, v)
  int max_iterations = 50;
};

/// ||-lap v + div_y A(., v)|| as an RMS over the torus grid.
double stationary_residual(const FluxModel& flux, const TorusField& v);

/// Periodic stationary solution with mean q by damped Newton iteration; every Newton
/// step solves a cell problem with drift d_p A(y, v). Throws NewtonDiverged.
TorusField solve_stationary_periodic(const FluxModel& flux, double q, const StationaryOptions& opts = {});

/// d_p A(y, v(y)) on the grid of v.
TorusField sample_drift_on(const FluxModel& flux, const TorusField& v);

enum class PerturbationKind { gaussian, box, odd_bump, random };

/// Initial perturbation f = u_ini - v. `mass` is the integral, except for odd_bump where
/// it is the L1 norm (the integral vanishes by symmetry).
struct Perturbation {
  PerturbationKind kind = PerturbationKind::gaussian;
  double mass = 1.0;
  VectorXd center;     // empty means the origin
  double width = 1.0;  // standard deviation or half width
  std::uint64_t seed = 0;
  int count = 4;       // random: number of Gaussian blobs
};

VectorXd make_perturbation(const Grid& box, const Perturbation& p);

struct SimulationState {
  double t = 0.0;
  VectorXd f;  // u - v on the box nodes
};

/// Periodic box [-L, L)^N with an integer number of cells per unit period. Evolves
/// f = u - v under  d_t f + div_y B(y, f) - lap f = 0,  B(y, f) = A(y, v + f) - A(y, v),
/// by Strang splitting: half advection (SSP-RK3, conservative face fluxes), exact
/// spectral heat flow, half advection.
class BoxSimulator {
 public:
  BoxSimulator(const FluxModel& flux, const TorusField& v, int half_width, int cells, double cfl = 0.9);

  const Grid& grid() const { return grid_; }
  const VectorXd& v_box() const { return v_box_; }
  double cfl() const { return cfl_; }

  /// cfl * dx / max |d_f B| over the faces for the realised f.
  double max_dt(const VectorXd& f) const;
  /// Throws CFLViolation if dt exceeds max_dt(f), BlowUp on non-finite or huge values.
  void step(VectorXd& f, double dt) const;
  /// Steps from t0 to t1 with the largest admissible dt; returns the step count.
  long advance(VectorXd& f, double t0, double t1) const;

  /// -div_y B(y, f) with the face fluxes used by step().
  VectorXd advection_rhs(const VectorXd& f) const;

 private:
  double face_flux(int axis, Index face, double fl, double fr, double* speed) const;
  void advect(VectorXd& f, double dt) const;
  void heat(VectorXd& f, double dt) const;
  void check_bounded(const VectorXd& f) const;

  Grid grid_;
  Spectral spectral_;
  double cfl_;
  int degree_;
  VectorXd v_box_;
  // coeff_[axis][j - 1][face] = alpha_j at the face between node `face` and its +axis neighbour.
  std::vector<std::vector<VectorXd>> coeff_;
  std::vector<Index> strides_;
  double linear_dt_ = 0.0;  // f-independent bound when the flux is linear in p
  VectorXd k2_;             // |k|^2 per Fourier mode (half spectrum in 1D)
  mutable Eigen::FFT<double> fft_;
  mutable double heat_dt_ = -1.0;
  mutable VectorXd heat_factor_;
};

SimulationState step(const BoxSimulator& sim, SimulationState state, double dt);

struct SimulationConfig {
  FluxModel flux;
  double q = 0.0;
  int half_width = 64;
  int cells = 8192;  // per axis
  int torus_points = 64;
  double cfl = 0.9;
  std::vector<double> output_times;  // increasing, > 0; t = 0 is always recorded
  Perturbation perturbation;
  bool diagnostics = true;
  double weight_m = 0.0;  // 0 selects 2N + 4
  bool check_hypotheses = true;
  bool check_wrap = true;
};

struct Trajectory {
  Grid grid;
  TorusField v;
  VectorXd v_box;
  double stationary_residual = 0.0;
  Homogenization hom;
  SelfSimilarProfile fm;
  std::vector<SimulationState> snapshots;
  DiagnosticsSeries diagnostics;
  double initial_mass = 0.0;
  double initial_l1 = 0.0;
  double max_mass_drift = 0.0;
  double linf_initial = 0.0;
  double linf_max = 0.0;
  bool linf_ok = true;  // sup |u(t)| <= 10 (sup |u(0)| + 1)
  long steps = 0;
};

Trajectory run_simulation(const SimulationConfig& config);

/// Mass of |f| in the outer band max_d |y_d| >= 0.9 L.
double band_mass(const Grid& box, const VectorXd& f);

}  // namespace hsim
