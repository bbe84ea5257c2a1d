#pragma once

#include <functional>

#include <Eigen/Dense>

namespace hsim {

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct KrylovResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual = 0.0;  // Euclidean norm of b - A x, recomputed at exit
  bool converged = false;
};

/// Restarted GMRES with modified Gram-Schmidt Arnoldi. Stops when the true
/// residual's Euclidean norm drops below `abs_tol`.
KrylovResult gmres(const LinearOperator& apply, const Eigen::VectorXd& rhs,
                   const Eigen::VectorXd& x0, double abs_tol, int max_iterations,
                   int restart = 60);

}  // namespace hsim
