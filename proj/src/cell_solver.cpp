#include "hsim/cell_solver.hpp"

#include <cmath>
#include <sstream>

#include "hsim/error.hpp"
#include "hsim/krylov.hpp"

namespace hsim {

namespace {

void check_drift(const TorusField& drift) {
  require(drift.components() == drift.dims(), "drift must have one component per axis");
  if (drift.grid().points < 16)
    throw Error(ErrorKind::InvalidArgument, "cell problems need at least 16 points per axis");
}

int max_iterations(const CellOptions& opts, const Grid& g) {
  return opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(10 * g.size());
}

/// Mean-zero phi with op(phi) = rhs (rhs mean-zero for the direct operator,
/// f0-orthogonal for the adjoint one), preconditioned by the inverse Laplacian.
VectorXd krylov_solve(const CellOperator& op, CellKind kind, const VectorXd& rhs,
                      const CellOptions& opts) {
  const Spectral& sp = op.spectral();
  const Index n = rhs.size();
  auto apply = [&](const VectorXd& w) -> VectorXd {
    const VectorXd phi = sp.solve_poisson(w);
    VectorXd out = kind == CellKind::direct ? op.apply(phi) : op.apply_adjoint(phi);
    out.array() -= out.mean();
    return out;
  };
  VectorXd b = rhs;
  b.array() -= b.mean();
  const double abs_tol = 0.25 * opts.tolerance * std::sqrt(static_cast<double>(n));
  KrylovResult res =
      gmres(apply, b, VectorXd::Zero(n), abs_tol, max_iterations(opts, sp.grid()), opts.restart);
  if (!res.converged) {
    std::ostringstream msg;
    msg << "GMRES stopped after " << res.iterations << " iterations with residual "
        << res.residual / std::sqrt(static_cast<double>(n));
    throw Error(ErrorKind::NonConvergence, msg.str());
  }
  return sp.solve_poisson(res.x);
}

void check_residual(double residual, const CellOptions& opts, const char* what) {
  if (!(residual <= opts.tolerance)) {
    std::ostringstream msg;
    msg << what << " residual " << residual << " exceeds tolerance " << opts.tolerance;
    throw Error(ErrorKind::NonConvergence, msg.str());
  }
}

}  // namespace

CellOperator::CellOperator(const TorusField& drift) : drift_(drift), spectral_(drift.grid()) {
  check_drift(drift_);
  for (int i = 0; i < drift_.components(); ++i)
    padded_drift_.push_back(spectral_.pad(spectral_.forward(drift_.component(i))));
}

VectorXd CellOperator::apply(const VectorXd& phi) const {
  const VectorXcd c = spectral_.forward(phi);
  const VectorXd padded = spectral_.pad(c);
  VectorXcd out = spectral_.negative_laplacian_coeffs(c);
  for (int i = 0; i < drift_.components(); ++i) {
    const VectorXcd flux = spectral_.truncate(padded_drift_[i].cwiseProduct(padded));
    out += spectral_.derivative_coeffs(flux, i);
  }
  return spectral_.inverse(out);
}

VectorXd CellOperator::apply_adjoint(const VectorXd& psi) const {
  const VectorXcd c = spectral_.forward(psi);
  VectorXcd out = spectral_.negative_laplacian_coeffs(c);
  for (int i = 0; i < drift_.components(); ++i) {
    const VectorXd grad = spectral_.pad(spectral_.derivative_coeffs(c, i));
    out -= spectral_.truncate(padded_drift_[i].cwiseProduct(grad));
  }
  return spectral_.inverse(out);
}

TorusField solve_f0(const TorusField& alpha1, const CellOptions& opts) {
  const CellOperator op(alpha1);
  const Index n = alpha1.size();
  const VectorXd ones = VectorXd::Ones(n);
  const VectorXd phi = krylov_solve(op, CellKind::direct, -op.apply(ones), opts);
  VectorXd f0 = ones + phi;
  f0 /= f0.mean();
  check_residual(rms(op.apply(f0)), opts, "f0");
  if (!(f0.minCoeff() > 0.0)) {
    std::ostringstream msg;
    msg << "min f0 = " << f0.minCoeff() << "; increase the cell resolution";
    throw Error(ErrorKind::NotPositive, msg.str());
  }
  return TorusField(alpha1.grid(), MatrixXd(f0));
}

TorusField solve_cell(const CellProblem& problem, const CellOptions& opts) {
  const TorusField& drift = problem.drift;
  require(problem.rhs.grid() == drift.grid(), "rhs and drift grids differ");
  require(problem.rhs.components() == 1, "cell right-hand side must be scalar");
  const CellOperator op(drift);
  VectorXd rhs = problem.rhs.component(0);

  std::optional<TorusField> f0;
  double defect = 0.0;
  if (problem.kind == CellKind::direct) {
    defect = rhs.mean();
  } else {
    f0 = problem.f0 ? *problem.f0 : solve_f0(drift, opts);
    defect = op.spectral().inner(rhs, f0->component(0)) / f0->mean();
  }
  if (std::abs(defect) > opts.compatibility_threshold) {
    std::ostringstream msg;
    msg << "solvability defect " << defect << " exceeds " << opts.compatibility_threshold;
    throw Error(ErrorKind::CompatibilityViolated, msg.str());
  }
  rhs.array() -= defect;

  VectorXd phi = krylov_solve(op, problem.kind, rhs, opts);
  if (problem.kind == CellKind::direct) {
    check_residual(rms(op.apply(phi) - rhs), opts, "cell");
    if (problem.normalization == Normalization::mean_one) phi += solve_f0(drift, opts).component(0);
  } else {
    check_residual(rms(op.apply_adjoint(phi) - rhs), opts, "adjoint cell");
    if (problem.normalization == Normalization::mean_one) phi.array() += 1.0;
  }
  return TorusField(drift.grid(), MatrixXd(phi));
}

TorusField solve_f1(const TorusField& alpha1, const VectorXd& c, const TorusField& f0,
                    const CellOptions& opts) {
  const int dims = alpha1.dims();
  require(c.size() == dims, "drift velocity has wrong length");
  const Spectral sp(alpha1.grid());
  TorusField out(alpha1.grid(), dims);
  const VectorXd f = f0.component(0);
  for (int i = 0; i < dims; ++i) {
    VectorXd shifted = alpha1.component(i);
    shifted.array() -= c[i];
    const VectorXd rhs = -sp.product(f, shifted) + 2.0 * sp.derivative(f, i);
    CellProblem p{alpha1, TorusField(alpha1.grid(), MatrixXd(rhs)), CellKind::direct,
                  Normalization::mean_zero, std::nullopt};
    out.values().col(i) = solve_cell(p, opts).component(0);
  }
  return out;
}

TorusField solve_g1(const TorusField& alpha1, const TorusField& alpha2, const TorusField& f0,
                    const CellOptions& opts) {
  if (alpha1.dims() != 1)
    throw Error(ErrorKind::DimensionUnsupported, "g1 corrector is defined for N = 1 only");
  const Spectral sp(alpha1.grid());
  const VectorXd f = f0.component(0);
  const VectorXd rhs = -sp.derivative(sp.product(alpha2.component(0), sp.product(f, f)), 0);
  CellProblem p{alpha1, TorusField(alpha1.grid(), MatrixXd(rhs)), CellKind::direct,
                Normalization::mean_zero, std::nullopt};
  return solve_cell(p, opts);
}

TorusField solve_chi(const TorusField& alpha1, const VectorXd& c, const TorusField& f0,
                     const CellOptions& opts) {
  const int dims = alpha1.dims();
  require(c.size() == dims, "drift velocity has wrong length");
  TorusField out(alpha1.grid(), dims);
  for (int j = 0; j < dims; ++j) {
    VectorXd rhs = alpha1.component(j);
    rhs.array() -= c[j];
    CellProblem p{alpha1, TorusField(alpha1.grid(), MatrixXd(rhs)), CellKind::adjoint,
                  Normalization::mean_zero, f0};
    out.values().col(j) = solve_cell(p, opts).component(0);
  }
  return out;
}

TorusField solve_chi(const TorusField& alpha1, const VectorXd& c, const CellOptions& opts) {
  return solve_chi(alpha1, c, solve_f0(alpha1, opts), opts);
}

}  // namespace hsim
