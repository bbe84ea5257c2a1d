#include "hsim/effective.hpp"

#include <sstream>

#include <Eigen/Eigenvalues>

#include "hsim/error.hpp"

namespace hsim {

Factorization factorize(const MatrixXd& eta) {
  require(eta.rows() == eta.cols() && eta.rows() >= 1, "eta must be square");
  Factorization out;
  out.S = 0.5 * (eta + eta.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(out.S);
  out.lambdas = eig.eigenvalues();
  const double threshold = 1e-12 * std::abs(out.S.trace());
  if (!(out.lambdas.minCoeff() > threshold)) {
    std::ostringstream msg;
    msg << "smallest eigenvalue of the symmetrised diffusion matrix is " << out.lambdas.minCoeff();
    throw Error(ErrorKind::NotCoercive, msg.str());
  }
  // S = V diag(lambda) V^T, so O = V^T and P = O^T diag(sqrt(lambda)) = V diag(sqrt(lambda)).
  out.P = eig.eigenvectors() * out.lambdas.cwiseSqrt().asDiagonal();
  out.det_s = out.lambdas.prod();
  return out;
}

EffectiveCoefficients EffectiveCoefficients::from_eta(const MatrixXd& eta, std::optional<double> a,
                                                      std::optional<VectorXd> c) {
  EffectiveCoefficients out;
  out.dims = static_cast<int>(eta.rows());
  out.eta = eta;
  const Factorization f = factorize(eta);
  out.eta_sym = f.S;
  out.P = f.P;
  out.lambdas = f.lambdas;
  out.det_s = f.det_s;
  out.a = a;
  out.c = c ? *c : VectorXd::Zero(out.dims);
  return out;
}

VectorXd compute_drift_c(const TorusField& alpha1, const TorusField& f0) {
  const Spectral sp(alpha1.grid());
  VectorXd c(alpha1.components());
  for (int i = 0; i < alpha1.components(); ++i)
    c[i] = sp.inner(alpha1.component(i), f0.component(0)) / f0.mean();
  return c;
}

MatrixXd compute_eta_direct(const TorusField& alpha1, const VectorXd& c, const TorusField& f1) {
  const int n = alpha1.components();
  const Spectral sp(alpha1.grid());
  MatrixXd eta = MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    VectorXd shifted = alpha1.component(i);
    shifted.array() -= c[i];
    for (int j = 0; j < n; ++j) eta(i, j) -= sp.inner(shifted, f1.component(j));
  }
  return eta;
}

MatrixXd compute_eta_quadratic(const TorusField& chi, const TorusField& f0) {
  const int n = chi.components();
  const Grid& g = chi.grid();
  const Spectral sp(g);
  // Gradient rows (delta_ki + d_k chi_i), sampled on a doubled grid so that the
  // triple products below are integrated without aliasing.
  const int fine = 2 * g.points;
  std::vector<std::vector<VectorXd>> grad(n, std::vector<VectorXd>(n));
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      VectorXd d = sp.resample(sp.derivative(chi.component(i), k), fine);
      if (k == i) d.array() += 1.0;
      grad[i][k] = std::move(d);
    }
  }
  const VectorXd w = sp.resample(f0.component(0), fine);
  MatrixXd q = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += (w.array() * grad[i][k].array() * grad[j][k].array()).mean();
      q(i, j) = q(j, i) = s;
    }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(q);
  if (!(eig.eigenvalues().minCoeff() > 0.0))
    throw Error(ErrorKind::NotCoercive, "quadratic form of the correctors is not positive definite");
  return q;
}

double compute_a(const TorusField& alpha1, const TorusField& alpha2, const VectorXd& c,
                 const TorusField& f0, const TorusField& g1) {
  if (alpha1.dims() != 1)
    throw Error(ErrorKind::DimensionUnsupported, "the coefficient a is defined for N = 1 only");
  const Spectral sp(alpha1.grid());
  const VectorXd f = f0.component(0);
  VectorXd shifted = alpha1.component(0);
  shifted.array() -= c[0];
  return sp.inner(alpha2.component(0), sp.product(f, f)) + sp.inner(shifted, g1.component(0));
}

Homogenization homogenize(const TorusField& alpha1, const std::optional<TorusField>& alpha2,
                          const std::optional<TorusField>& alpha3, const CellOptions& opts) {
  Homogenization h;
  h.alpha1 = alpha1;
  h.alpha2 = alpha2;
  h.alpha3 = alpha3;
  const int dims = alpha1.dims();
  const CellOperator op(alpha1);
  const Spectral& sp = op.spectral();

  h.f0 = solve_f0(alpha1, opts);
  h.residual_f0 = rms(op.apply(h.f0.component(0)));
  const VectorXd c = compute_drift_c(alpha1, h.f0);
  h.f1 = solve_f1(alpha1, c, h.f0, opts);
  h.chi = solve_chi(alpha1, c, h.f0, opts);
  for (int i = 0; i < dims; ++i) {
    VectorXd shifted = alpha1.component(i);
    shifted.array() -= c[i];
    const VectorXd f = h.f0.component(0);
    const VectorXd rhs = -sp.product(f, shifted) + 2.0 * sp.derivative(f, i);
    h.residual_f1 = std::max(h.residual_f1, rms(op.apply(h.f1.component(i)) - rhs));
    h.residual_chi = std::max(h.residual_chi, rms(op.apply_adjoint(h.chi.component(i)) - shifted));
  }

  std::optional<double> a;
  if (dims == 1) {
    const TorusField zero2(alpha1.grid(), 1);
    const TorusField& a2 = alpha2 ? *alpha2 : zero2;
    h.g1 = solve_g1(alpha1, a2, h.f0, opts);
    const VectorXd f = h.f0.component(0);
    const VectorXd rhs = -sp.derivative(sp.product(a2.component(0), sp.product(f, f)), 0);
    h.residual_g1 = rms(op.apply(h.g1->component(0)) - rhs);
    a = compute_a(alpha1, a2, c, h.f0, *h.g1);
  }
  h.coeffs = EffectiveCoefficients::from_eta(compute_eta_direct(alpha1, c, h.f1), a, c);
  h.eta_quadratic = compute_eta_quadratic(h.chi, h.f0);
  return h;
}

}  // namespace hsim
