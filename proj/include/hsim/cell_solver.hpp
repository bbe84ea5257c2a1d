#pragma once

#include <optional>
#include <vector>

#include "hsim/torus_field.hpp"

namespace hsim {

struct CellOptions {
  double tolerance = 1e-10;             // RMS residual bound for every solve
  int max_iterations = 0;               // 0 selects 10 * points^dims
  double compatibility_threshold = 1e-9;
  int restart = 60;
};

enum class CellKind { direct, adjoint };
enum class Normalization { mean_one, mean_zero };

struct CellProblem {
  TorusField drift;  // alpha_1, one component per axis
  TorusField rhs;
  CellKind kind = CellKind::direct;
  Normalization normalization = Normalization::mean_zero;
  /// Weight of the adjoint solvability condition <rhs f0> = 0; solved when absent.
  std::optional<TorusField> f0;
};

/// Spectral collocation of the cell operators on the torus
///   L phi  = -lap phi + div(alpha phi)
///   L* psi = -lap psi - alpha . grad psi
/// with dealiased products, so that <L phi, psi> = <phi, L* psi> holds to
/// rounding on the grid.
class CellOperator {
 public:
  explicit CellOperator(const TorusField& drift);

  VectorXd apply(const VectorXd& phi) const;
  VectorXd apply_adjoint(const VectorXd& psi) const;

  const Spectral& spectral() const { return spectral_; }
  const TorusField& drift() const { return drift_; }

 private:
  TorusField drift_;
  Spectral spectral_;
  std::vector<VectorXd> padded_drift_;
};

/// Returns f0 with L f0 = 0, <f0> = 1. Throws NotPositive if min f0 <= 0.
TorusField solve_f0(const TorusField& alpha1, const CellOptions& opts = {});

TorusField solve_cell(const CellProblem& problem, const CellOptions& opts = {});

/// N components: L f1_i = -f0 (alpha1_i - c_i) + 2 d_i f0, each mean zero.
TorusField solve_f1(const TorusField& alpha1, const VectorXd& c, const TorusField& f0,
                    const CellOptions& opts = {});

/// N = 1 only: L g1 = -d_z(alpha2 f0^2), mean zero.
TorusField solve_g1(const TorusField& alpha1, const TorusField& alpha2, const TorusField& f0,
                    const CellOptions& opts = {});

/// Adjoint correctors: L* chi_j = alpha1_j - c_j, <chi_j> = 0.
TorusField solve_chi(const TorusField& alpha1, const VectorXd& c, const TorusField& f0,
                     const CellOptions& opts = {});
TorusField solve_chi(const TorusField& alpha1, const VectorXd& c, const CellOptions& opts = {});

}  // namespace hsim
