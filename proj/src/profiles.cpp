#include "hsim/profiles.hpp"

#include <cmath>
#include <sstream>

#include "hsim/error.hpp"

namespace hsim {

namespace {

int default_points(int dims) { return dims == 1 ? 2048 : dims == 2 ? 256 : 64; }

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Derivatives of a stationary 1D profile from eta F' = a F^2 - x F, differentiated k times:
// eta F^(k+1) = a sum_i C(k,i) F^(i) F^(k-i) - x F^(k) - k F^(k-1).
MatrixXd ode_jets(const Grid& grid, const VectorXd& f, double eta, double a, int order = 6) {
  const Index n = f.size();
  MatrixXd jets(n, order + 1);
  jets.col(0) = f;
  VectorXd x(n);
  for (Index i = 0; i < n; ++i) x[i] = grid.coordinate(0, static_cast<int>(i));
  for (int k = 0; k < order; ++k) {
    VectorXd next = VectorXd::Zero(n);
    for (int i = 0; i <= k; ++i)
      next.array() += a * binomial(k, i) * jets.col(i).array() * jets.col(k - i).array();
    next.array() -= x.array() * jets.col(k).array();
    if (k > 0) next -= k * jets.col(k - 1);
    jets.col(k + 1) = next / eta;
  }
  return jets;
}

VectorXd node_coordinate(const Grid& grid, int axis) {
  VectorXd x(grid.size());
  for (Index i = 0; i < grid.size(); ++i) x[i] = grid.coordinate(axis, grid.unflatten(i)[axis]);
  return x;
}

// Stationary operator -sum eta_ij d_ij F - div(x F) + a d_x F^2.
VectorXd stationary_operator(const Grid& grid, const VectorXd& f, const EffectiveCoefficients& coeffs) {
  const Spectral sp(grid);
  const int n = grid.dims;
  VectorXd out = VectorXd::Zero(f.size());
  std::vector<VectorXd> grad(n);
  for (int i = 0; i < n; ++i) grad[i] = sp.derivative(f, i);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out -= coeffs.eta_sym(i, j) * sp.derivative(grad[j], i);
  for (int i = 0; i < n; ++i) {
    const VectorXd xf = node_coordinate(grid, i).cwiseProduct(f);
    out -= sp.derivative(xf, i);
  }
  if (n == 1 && coeffs.a_or_zero() != 0.0) out += coeffs.a_or_zero() * sp.derivative(f.cwiseAbs2(), 0);
  return out;
}

}  // namespace

Grid profile_grid(const EffectiveCoefficients& coeffs, const ProfileGridOptions& opts) {
  const int n = coeffs.dims;
  const int points = opts.points > 0 ? opts.points : default_points(n);
  double half = opts.half_width;
  if (half <= 0.0) half = 10.0 * std::max(1.0, std::sqrt(coeffs.lambdas.maxCoeff()));
  require(points % 2 == 0 && points >= 8, "profile grid needs an even number of points >= 8");
  return Grid::centered(n, points, half);
}

double SelfSimilarProfile::boundary_max() const {
  double worst = 0.0;
  const double edge = 0.9 * grid.length / 2.0;
  for (Index i = 0; i < grid.size(); ++i) {
    const VectorXd x = grid.point(i);
    if (x.cwiseAbs().maxCoeff() >= edge) worst = std::max(worst, std::abs(values[i]));
  }
  return worst;
}

SelfSimilarProfile gaussian_profile(double mass, const EffectiveCoefficients& coeffs,
                                    const ProfileGridOptions& opts) {
  const int n = coeffs.dims;
  if (n == 1 && coeffs.a_or_zero() != 0.0)
    throw Error(ErrorKind::InvalidArgument, "the Gaussian profile needs a = 0 in one dimension");
  const Factorization fac = factorize(coeffs.eta);
  SelfSimilarProfile out;
  out.grid = profile_grid(coeffs, opts);
  out.coeffs = coeffs;
  out.mass = mass;
  const MatrixXd s_inv = fac.S.inverse();
  const double norm = mass / (std::pow(2.0 * M_PI, 0.5 * n) * std::sqrt(fac.det_s));
  out.values.resize(out.grid.size());
  for (Index i = 0; i < out.grid.size(); ++i) {
    const VectorXd x = out.grid.point(i);
    out.values[i] = norm * std::exp(-0.5 * x.dot(s_inv * x));
  }
  if (n == 1) out.jets = ode_jets(out.grid, out.values, fac.S(0, 0), 0.0);
  return out;
}

SelfSimilarProfile solve_fm_1d(double mass, double eta, double a, const ProfileGridOptions& opts) {
  require(eta > 0.0, "eta must be positive");
  SelfSimilarProfile out;
  out.coeffs = EffectiveCoefficients::from_eta(MatrixXd::Constant(1, 1, eta), a);
  out.grid = profile_grid(out.coeffs, opts);
  out.mass = mass;
  const Grid& g = out.grid;
  const int n = g.points;
  const int origin = n / 2;  // node at x = 0
  const double h = g.spacing();
  constexpr int substeps = 8;

  auto rhs = [&](double x, double f) { return (a * f * f - x * f) / eta; };
  // Integrates outward from F(0) = s with fixed-step RK4 (uniform steps keep the error
  // smooth across nodes). Returns false on blow-up.
  auto shoot = [&](double s, VectorXd& f) {
    f.setZero(n);
    f[origin] = s;
    const double limit = 1e6 * std::max(1.0, std::abs(s));
    for (int dir : {1, -1}) {
      const double dx = dir * h / substeps;
      double y = s;
      for (int i = origin; i + dir >= 0 && i + dir < n; i += dir) {
        double x = g.coordinate(0, i);
        for (int k = 0; k < substeps; ++k) {
          const double k1 = rhs(x, y);
          const double k2 = rhs(x + 0.5 * dx, y + 0.5 * dx * k1);
          const double k3 = rhs(x + 0.5 * dx, y + 0.5 * dx * k2);
          const double k4 = rhs(x + dx, y + dx * k3);
          y += dx * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
          x += dx;
        }
        if (!std::isfinite(y) || std::abs(y) > limit) return false;
        f[i + dir] = y;
      }
    }
    return true;
  };

  VectorXd f = VectorXd::Zero(n);
  if (mass != 0.0) {
    const double sign = mass > 0.0 ? 1.0 : -1.0;
    // excess(s) > 0 when the shot carries too much mass (blow-up counts as too much).
    auto excess = [&](double s, VectorXd& trial) {
      if (!shoot(s, trial)) return std::numeric_limits<double>::infinity();
      return sign * (integrate(g, trial) - mass);
    };
    VectorXd trial;
    double lo = 0.0, hi = mass / std::sqrt(2.0 * M_PI * eta);
    int expand = 0;
    while (excess(hi, trial) < 0.0) {
      lo = hi;
      hi *= 2.0;
      if (++expand > 200) throw Error(ErrorKind::ShootingFailed, "could not bracket the requested mass");
    }
    for (int it = 0; it < 400 && std::abs(hi - lo) > 1e-16 * std::abs(hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      const double e = excess(mid, trial);
      if (e < 0.0) lo = mid;
      else hi = mid;
      if (e == 0.0) break;
    }
    const double s = 0.5 * (lo + hi);
    if (!shoot(s, f) || std::abs(integrate(g, f) - mass) > 1e-10 * std::max(1.0, std::abs(mass))) {
      std::ostringstream msg;
      msg << "bisection on F(0) did not reach mass " << mass;
      throw Error(ErrorKind::ShootingFailed, msg.str());
    }
  }
  out.values = f;
  out.jets = ode_jets(g, f, eta, a);
  return out;
}

SelfSimilarProfile stationary_profile(double mass, const EffectiveCoefficients& coeffs,
                                      const ProfileGridOptions& opts) {
  if (coeffs.dims == 1 && coeffs.a_or_zero() != 0.0) {
    SelfSimilarProfile p = solve_fm_1d(mass, coeffs.eta_sym(0, 0), coeffs.a_or_zero(), opts);
    p.coeffs = coeffs;
    return p;
  }
  return gaussian_profile(mass, coeffs, opts);
}

SelfSimilarProfile make_profile(const Grid& grid, VectorXd values, const EffectiveCoefficients& coeffs) {
  require(values.size() == grid.size(), "profile values do not match the grid");
  SelfSimilarProfile p;
  p.grid = grid;
  p.values = std::move(values);
  p.coeffs = coeffs;
  p.mass = integrate(grid, p.values);
  return p;
}

double profile_residual(const SelfSimilarProfile& profile, const EffectiveCoefficients& coeffs) {
  return stationary_operator(profile.grid, profile.values, coeffs).cwiseAbs().maxCoeff();
}

VectorXd homogenized_rhs(const SelfSimilarProfile& profile, const EffectiveCoefficients& coeffs) {
  return -stationary_operator(profile.grid, profile.values, coeffs);
}

namespace {

// Conservative finite-volume right-hand side with zero-flux boundaries.
class FvOperator {
 public:
  FvOperator(const Grid& grid, const EffectiveCoefficients& coeffs)
      : grid_(grid), eta_(coeffs.eta_sym), a_(grid.dims == 1 ? coeffs.a_or_zero() : 0.0) {
    const int n = grid.dims;
    strides_.resize(n);
    Index s = 1;
    for (int d = n - 1; d >= 0; --d) {
      strides_[d] = s;
      s *= grid.points;
    }
    for (int d = 0; d < n; ++d) x_.push_back(node_coordinate(grid, d));
  }

  double max_speed(const VectorXd& f) const {
    return grid_.length / 2.0 + 2.0 * std::abs(a_) * f.cwiseAbs().maxCoeff();
  }

  VectorXd operator()(const VectorXd& f) const { return grid_.dims == 1 ? apply_1d(f) : apply_nd(f); }

 private:
  // Advective face flux uses cell-centred velocities, (b_i + b_j) / 2 with b = -x F + a F^2,
  // so the discrete second moment obeys the same ODE as the continuous one.
  VectorXd apply_1d(const VectorXd& f) const {
    const Index m = f.size();
    const double h = grid_.spacing();
    const double eta = eta_(0, 0);
    const double* x = x_[0].data();
    flux_.resize(m + 1);
    flux_[0] = flux_[m] = 0.0;
    for (Index i = 0; i + 1 < m; ++i) {
      const double fl = f[i], fr = f[i + 1];
      double flux = -eta * (fr - fl) / h + 0.5 * ((a_ * fl - x[i]) * fl + (a_ * fr - x[i + 1]) * fr);
      const double s = std::max(std::abs(2.0 * a_ * fl - x[i]), std::abs(2.0 * a_ * fr - x[i + 1]));
      if (s * h > 2.0 * eta) flux -= 0.5 * s * (fr - fl);
      flux_[i + 1] = flux;
    }
    VectorXd out(m);
    for (Index i = 0; i < m; ++i) out[i] = (flux_[i] - flux_[i + 1]) / h;
    return out;
  }

  VectorXd apply_nd(const VectorXd& f) const {
    const int n = grid_.dims;
    const int m = grid_.points;
    const double h = grid_.spacing();
    const Index size = f.size();
    VectorXd out = VectorXd::Zero(size);
    // Cell-centred gradients for the mixed-derivative terms.
    std::vector<VectorXd> grad(n, VectorXd::Zero(size));
    for (int e = 0; e < n; ++e)
      for (Index i = 0; i < size; ++i) {
        const int idx = static_cast<int>((i / strides_[e]) % m);
        const Index lo = idx > 0 ? i - strides_[e] : i;
        const Index hi = idx < m - 1 ? i + strides_[e] : i;
        grad[e][i] = (f[hi] - f[lo]) / (h * (hi == i || lo == i ? 1.0 : 2.0));
      }
    for (int d = 0; d < n; ++d) {
      const double eta_dd = eta_(d, d);
      for (Index i = 0; i < size; ++i) {
        const int idx = static_cast<int>((i / strides_[d]) % m);
        if (idx == m - 1) continue;
        const Index j = i + strides_[d];
        double flux = -eta_dd * (f[j] - f[i]) / h;
        for (int e = 0; e < n; ++e)
          if (e != d) flux -= eta_(d, e) * 0.5 * (grad[e][i] + grad[e][j]);
        double adv = -0.5 * (x_[d][i] * f[i] + x_[d][j] * f[j]);
        const double speed = std::max(std::abs(x_[d][i]), std::abs(x_[d][j]));
        if (speed * h > 2.0 * eta_dd) adv -= 0.5 * speed * (f[j] - f[i]);
        flux += adv;
        out[i] -= flux / h;
        out[j] += flux / h;
      }
    }
    return out;
  }

  Grid grid_;
  MatrixXd eta_;
  double a_;
  std::vector<Index> strides_;
  std::vector<VectorXd> x_;
  mutable std::vector<double> flux_;
};

}  // namespace

HomogenizedTrajectory evolve_homogenized(const SelfSimilarProfile& init, const EffectiveCoefficients& coeffs,
                                         double tau_end, double dtau, const EvolveOptions& opts) {
  require(dtau > 0.0 && dtau <= 0.1 + 1e-12, "dtau must lie in (0, 0.1]");
  require(tau_end >= 0.0, "tau_end must be nonnegative");
  require(init.grid.dims == coeffs.dims, "profile and coefficient dimensions differ");
  const Grid& g = init.grid;
  const FvOperator op(g, coeffs);
  const double h = g.spacing();

  HomogenizedTrajectory traj;
  ProfileGridOptions grid_opts{g.points, g.length / 2.0};
  traj.target = stationary_profile(init.grid_mass(), coeffs, grid_opts);

  auto record = [&](double tau, const VectorXd& f) {
    SelfSimilarProfile p = make_profile(g, f, coeffs);
    HomogenizedSample s;
    s.tau = tau;
    s.mass = p.grid_mass();
    s.l1_to_fm = l1_norm(g, f - traj.target.values);
    s.residual = profile_residual(p, coeffs);
    traj.samples.push_back(s);
    if (opts.keep_states) traj.states.push_back(f);
  };

  VectorXd f = init.values;
  record(0.0, f);
  const int intervals = static_cast<int>(std::llround(tau_end / dtau));
  const double eta_sum = coeffs.eta_sym.diagonal().sum();
  for (int k = 1; k <= intervals; ++k) {
    const double dt_max = std::min({dtau, opts.cfl * h / op.max_speed(f), opts.diffusion_number * h * h / eta_sum});
    const int sub = static_cast<int>(std::ceil(dtau / dt_max - 1e-12));
    const double dt = dtau / sub;
    for (int s = 0; s < sub; ++s) {
      const VectorXd f1 = f + dt * op(f);
      const VectorXd f2 = 0.75 * f + 0.25 * (f1 + dt * op(f1));
      f = (f + 2.0 * (f2 + dt * op(f2))) / 3.0;
    }
    const double peak = f.cwiseAbs().maxCoeff();
    if (!std::isfinite(peak) || peak > 1e6) {
      std::ostringstream msg;
      msg << "sup |F| = " << peak << " at tau = " << k * dtau;
      throw Error(ErrorKind::BlowUp, msg.str());
    }
    record(k * dtau, f);
  }
  traj.final_state = make_profile(g, f, coeffs);
  return traj;
}

}  // namespace hsim
