#include "hsim/krylov.hpp"

#include <cmath>
#include <vector>

namespace hsim {

KrylovResult gmres(const LinearOperator& apply, const Eigen::VectorXd& rhs,
                   const Eigen::VectorXd& x0, double abs_tol, int max_iterations, int restart) {
  KrylovResult out;
  out.x = x0;
  const Eigen::Index n = rhs.size();
  Eigen::VectorXd r = rhs - apply(out.x);
  double beta = r.norm();
  out.residual = beta;
  if (beta <= abs_tol) {
    out.converged = true;
    return out;
  }

  while (out.iterations < max_iterations) {
    const int m = restart;
    std::vector<Eigen::VectorXd> basis;
    basis.reserve(m + 1);
    basis.push_back(r / beta);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(m), sn = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
    g[0] = beta;

    int k = 0;
    for (; k < m && out.iterations < max_iterations; ++k) {
      ++out.iterations;
      Eigen::VectorXd w = apply(basis[k]);
      for (int i = 0; i <= k; ++i) {
        hess(i, k) = w.dot(basis[i]);
        w -= hess(i, k) * basis[i];
      }
      hess(k + 1, k) = w.norm();
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * hess(i, k) + sn[i] * hess(i + 1, k);
        hess(i + 1, k) = -sn[i] * hess(i, k) + cs[i] * hess(i + 1, k);
        hess(i, k) = t;
      }
      const double denom = std::hypot(hess(k, k), hess(k + 1, k));
      cs[k] = denom == 0.0 ? 1.0 : hess(k, k) / denom;
      sn[k] = denom == 0.0 ? 0.0 : hess(k + 1, k) / denom;
      hess(k, k) = denom;
      hess(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      const bool breakdown = std::abs(denom) < 1e-300 || w.norm() < 1e-300 * n;
      if (!breakdown) basis.push_back(w / (w.norm()));
      if (std::abs(g[k + 1]) <= 0.5 * abs_tol || breakdown) {
        ++k;
        break;
      }
    }

    Eigen::VectorXd y = hess.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    for (int i = 0; i < k; ++i) out.x += y[i] * basis[i];
    r = rhs - apply(out.x);
    beta = r.norm();
    out.residual = beta;
    if (beta <= abs_tol) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

}  // namespace hsim
