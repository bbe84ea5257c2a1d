#include "hsim/direct_sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hsim/error.hpp"

namespace hsim {

namespace {

// div_y A(y, v(y)) with spectral y-derivatives of the sampled composite flux.
VectorXd stationary_operator(const FluxModel& flux, const TorusField& v, const Spectral& sp) {
  const Grid& g = v.grid();
  const int n = g.dims;
  VectorXd out = -sp.laplacian(v.component(0));
  for (int d = 0; d < n; ++d) {
    VectorXd a(g.size());
    for (Index i = 0; i < g.size(); ++i) {
      const VectorXd y = g.point(i);
      a[i] = flux.value(d, y.data(), v.values()(i, 0));
    }
    out += sp.derivative(a, d);
  }
  return out;
}

}  // namespace

double stationary_residual(const FluxModel& flux, const TorusField& v) {
  const Spectral sp(v.grid());
  return rms(stationary_operator(flux, v, sp));
}

TorusField solve_stationary_periodic(const FluxModel& flux, double q, const StationaryOptions& opts) {
  const Grid g = Grid::torus(flux.dims(), opts.points);
  const Spectral sp(g);
  TorusField v = TorusField::constant(g, VectorXd::Constant(1, q));
  CellOptions cell;
  VectorXd G = stationary_operator(flux, v, sp);
  double r = rms(G);
  for (int it = 0; it < opts.max_iterations && r > opts.tolerance; ++it) {
    // Inexact Newton: a fixed tight inner tolerance sits at the roundoff floor on fine grids.
    cell.tolerance = std::max(0.1 * r, 0.25 * opts.tolerance);
    const TorusField drift = sample_drift_on(flux, v);
    CellProblem p{drift, TorusField(g, MatrixXd(-G)), CellKind::direct, Normalization::mean_zero, std::nullopt};
    const VectorXd delta = solve_cell(p, cell).component(0);
    // Backtracking on the residual norm.
    double lambda = 1.0;
    for (;;) {
      TorusField trial = v;
      trial.values().col(0) += lambda * delta;
      const VectorXd Gt = stationary_operator(flux, trial, sp);
      const double rt = rms(Gt);
      if (std::isfinite(rt) && rt <= (1.0 - 1e-4 * lambda) * r) {
        v = std::move(trial);
        G = Gt;
        r = rt;
        break;
      }
      lambda *= 0.5;
      if (lambda < 1e-6) {
        std::ostringstream msg;
        msg << "line search stalled at residual " << r << " after " << it << " iterations";
        throw Error(ErrorKind::NewtonDiverged, msg.str());
      }
    }
  }
  if (!(r <= opts.tolerance)) {
    std::ostringstream msg;
    msg << "final residual " << r << " after " << opts.max_iterations << " iterations";
    throw Error(ErrorKind::NewtonDiverged, msg.str());
  }
  return v;
}

TorusField sample_drift_on(const FluxModel& flux, const TorusField& v) {
  const Grid& g = v.grid();
  TorusField out(g, flux.dims());
  for (Index i = 0; i < g.size(); ++i) {
    const VectorXd y = g.point(i);
    for (int d = 0; d < flux.dims(); ++d) out.values()(i, d) = flux.dp(1, d, y.data(), v.values()(i, 0));
  }
  return out;
}

// ---------------------------------------------------------------------------

VectorXd make_perturbation(const Grid& box, const Perturbation& p) {
  const int n = box.dims;
  const VectorXd center = p.center.size() == 0 ? VectorXd::Zero(n) : p.center;
  require(center.size() == n, "perturbation centre has the wrong dimension");
  require(p.width > 0.0, "perturbation width must be positive");
  VectorXd f = VectorXd::Zero(box.size());
  auto gaussian = [&](const VectorXd& c0, double s, double weight) {
    const double norm = weight / std::pow(2.0 * M_PI * s * s, 0.5 * n);
    for (Index i = 0; i < box.size(); ++i) {
      const double r2 = (box.point(i) - c0).squaredNorm();
      f[i] += norm * std::exp(-0.5 * r2 / (s * s));
    }
  };
  switch (p.kind) {
    case PerturbationKind::gaussian:
      gaussian(center, p.width, p.mass);
      break;
    case PerturbationKind::box: {
      for (Index i = 0; i < box.size(); ++i)
        if ((box.point(i) - center).cwiseAbs().maxCoeff() <= p.width + 1e-12) f[i] = 1.0;
      const double m = integrate(box, f);
      require(m > 0.0, "box perturbation contains no grid node");
      f *= p.mass / m;
      break;
    }
    case PerturbationKind::odd_bump: {
      for (Index i = 0; i < box.size(); ++i) {
        const VectorXd d = box.point(i) - center;
        f[i] = d[0] * std::exp(-0.5 * d.squaredNorm() / (p.width * p.width));
      }
      const double l1 = l1_norm(box, f);
      if (l1 > 0.0) f *= p.mass / l1;
      break;
    }
    case PerturbationKind::random: {
      require(p.count >= 1, "random perturbation needs at least one blob");
      std::mt19937_64 rng(p.seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::vector<double> weights;
      double total = 0.0;
      for (int k = 0; k < p.count; ++k) {
        VectorXd c0(n);
        for (int a = 0; a < n; ++a) c0[a] = center[a] + p.width * (2.0 * unit(rng) - 1.0);
        const double s = p.width * (0.25 + 0.25 * unit(rng));
        const double w = 0.2 + 0.8 * unit(rng);
        total += w;
        gaussian(c0, s, w);
      }
      const double m = integrate(box, f);
      if (m != 0.0) f *= p.mass / m;
      break;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------

namespace {

// Values at box positions node + offset * h, via a one-period table with m points per axis.
MatrixXd periodic_on_box(const Grid& box, int m, int axis_offset, const std::function<VectorXd(const VectorXd&)>& fn,
                         int cols) {
  const int n = box.dims;
  const Grid table_grid = Grid::torus(n, m);
  MatrixXd table(table_grid.size(), cols);
  for (Index j = 0; j < table_grid.size(); ++j) {
    VectorXd y = table_grid.point(j);
    if (axis_offset >= 0) y[axis_offset] += 0.5 / m;
    table.row(j) = fn(y).transpose();
  }
  MatrixXd out(box.size(), cols);
  const long shift = std::lround(-box.origin[0] * m);  // origin is -L with L integer
  for (Index i = 0; i < box.size(); ++i) {
    auto idx = box.unflatten(i);
    for (int a = 0; a < n; ++a) idx[a] = static_cast<int>((idx[a] + shift) % m);
    out.row(i) = table.row(table_grid.flatten(idx));
  }
  return out;
}

}  // namespace

BoxSimulator::BoxSimulator(const FluxModel& flux, const TorusField& v, int half_width, int cells, double cfl)
    : grid_(Grid::centered(flux.dims(), cells, half_width)), spectral_(grid_), cfl_(cfl) {
  const int n = flux.dims();
  if (n > 2) throw Error(ErrorKind::DimensionUnsupported, "the direct simulator supports N = 1 or 2");
  require(half_width >= 1, "box half width must be a positive integer");
  require(cells % (2 * half_width) == 0, "cells must be a multiple of the box side 2L");
  require(cfl > 0.0 && cfl <= 1.0, "cfl must lie in (0, 1]");
  require(v.dims() == n, "stationary solution has the wrong dimension");
  const int m = cells / (2 * half_width);
  require(m >= 8, "need at least 8 cells per unit period");
  degree_ = std::max(1, flux.degree());

  strides_.resize(n);
  Index s = 1;
  for (int d = n - 1; d >= 0; --d) {
    strides_[d] = s;
    s *= cells;
  }

  const FourierInterpolant vi(v.grid(), v.values());
  auto v_at = [&](const VectorXd& y) { return vi.evaluate(MatrixXd(y.transpose()))(0, 0); };
  v_box_ = periodic_on_box(grid_, m, -1, [&](const VectorXd& y) { return VectorXd::Constant(1, v_at(y)); }, 1)
               .col(0);
  for (int d = 0; d < n; ++d) {
    const MatrixXd c = periodic_on_box(
        grid_, m, d,
        [&](const VectorXd& y) {
          const double vy = v_at(y);
          VectorXd out(degree_);
          for (int j = 1; j <= degree_; ++j) out[j - 1] = flux.taylor(j, d, y.data(), vy);
          return out;
        },
        degree_);
    coeff_.emplace_back();
    for (int j = 0; j < degree_; ++j) coeff_.back().push_back(c.col(j));
  }
  if (degree_ == 1) {
    double smax = 0.0;
    for (int d = 0; d < n; ++d) smax = std::max(smax, coeff_[d][0].cwiseAbs().maxCoeff());
    linear_dt_ = smax > 0.0 ? cfl_ * grid_.spacing() / (n * smax) : std::numeric_limits<double>::infinity();
  }

  fft_.SetFlag(Eigen::FFT<double>::Unscaled);
  fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  const double w = spectral_.wave_scale();
  if (n == 1) {
    k2_.resize(cells / 2 + 1);
    for (int k = 0; k <= cells / 2; ++k) k2_[k] = w * w * k * k;
  } else {
    k2_.resize(grid_.size());
    for (Index i = 0; i < grid_.size(); ++i) {
      const auto idx = grid_.unflatten(i);
      double k2 = 0.0;
      for (int a = 0; a < n; ++a) k2 += std::pow(w * spectral_.wavenumber(idx[a]), 2);
      k2_[i] = k2;
    }
  }
}

inline double BoxSimulator::face_flux(int axis, Index face, double fl, double fr, double* speed) const {
  const auto& c = coeff_[axis];
  double bl = 0.0, br = 0.0, dl = 0.0, dr = 0.0;
  for (int j = degree_; j >= 1; --j) {
    const double cj = c[j - 1][face];
    bl = (bl + cj) * fl;
    br = (br + cj) * fr;
    dl = dl * fl + j * cj;
    dr = dr * fr + j * cj;
  }
  const double s = std::max(std::abs(dl), std::abs(dr));
  *speed = s;
  double flux = 0.5 * (bl + br);
  // Central where the cell Peclet number allows it, Rusanov otherwise.
  if (s * grid_.spacing() > 2.0) flux -= 0.5 * s * (fr - fl);
  return flux;
}

VectorXd BoxSimulator::advection_rhs(const VectorXd& f) const {
  const int n = grid_.dims;
  const int m = grid_.points;
  const double inv_h = 1.0 / grid_.spacing();
  const Index size = f.size();
  VectorXd out = VectorXd::Zero(size);
  std::vector<double> flux(size);
  double speed = 0.0;
  if (n == 1) {
    for (Index i = 0; i + 1 < size; ++i) flux[i] = face_flux(0, i, f[i], f[i + 1], &speed);
    flux[size - 1] = face_flux(0, size - 1, f[size - 1], f[0], &speed);
    out[0] = (flux[size - 1] - flux[0]) * inv_h;
    for (Index i = 1; i < size; ++i) out[i] = (flux[i - 1] - flux[i]) * inv_h;
    return out;
  }
  for (int d = 0; d < n; ++d) {
    const Index stride = strides_[d];
    for (Index i = 0; i < size; ++i) {
      const int idx = static_cast<int>((i / stride) % m);
      const Index j = idx == m - 1 ? i - (m - 1) * stride : i + stride;
      flux[i] = face_flux(d, i, f[i], f[j], &speed);
    }
    for (Index i = 0; i < size; ++i) {
      const int idx = static_cast<int>((i / stride) % m);
      const Index k = idx == 0 ? i + (m - 1) * stride : i - stride;
      out[i] += (flux[k] - flux[i]) * inv_h;
    }
  }
  return out;
}

double BoxSimulator::max_dt(const VectorXd& f) const {
  if (degree_ == 1) return linear_dt_;
  const int n = grid_.dims;
  const int m = grid_.points;
  double smax = 0.0, speed = 0.0;
  for (int d = 0; d < n; ++d)
    for (Index i = 0; i < f.size(); ++i) {
      const int idx = static_cast<int>((i / strides_[d]) % m);
      const Index j = idx == m - 1 ? i - (m - 1) * strides_[d] : i + strides_[d];
      face_flux(d, i, f[i], f[j], &speed);
      smax = std::max(smax, speed);
    }
  return smax > 0.0 ? cfl_ * grid_.spacing() / (n * smax) : std::numeric_limits<double>::infinity();
}

void BoxSimulator::advect(VectorXd& f, double h) const {
  const VectorXd f1 = f + h * advection_rhs(f);
  const VectorXd f2 = 0.75 * f + 0.25 * (f1 + h * advection_rhs(f1));
  f = (f + 2.0 * (f2 + h * advection_rhs(f2))) / 3.0;
}

void BoxSimulator::heat(VectorXd& f, double dt) const {
  if (dt != heat_dt_) {
    heat_factor_ = (-dt * k2_.array()).exp();
    heat_dt_ = dt;
  }
  if (grid_.dims == 1) {
    const Index n = f.size();
    std::vector<double> real(f.data(), f.data() + n);
    std::vector<std::complex<double>> spec;
    fft_.fwd(spec, real);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= heat_factor_[k] * scale;
    fft_.inv(real, spec);
    f = Eigen::Map<const VectorXd>(real.data(), n);
    return;
  }
  VectorXcd c = spectral_.forward(f);
  c.array() *= heat_factor_.array();
  f = spectral_.inverse(c);
}

void BoxSimulator::check_bounded(const VectorXd& f) const {
  const double peak = f.cwiseAbs().maxCoeff();
  if (!std::isfinite(peak) || peak > 1e6) {
    std::ostringstream msg;
    msg << "sup |u - v| = " << peak;
    throw Error(ErrorKind::BlowUp, msg.str());
  }
}

void BoxSimulator::step(VectorXd& f, double dt) const {
  const double limit = max_dt(f);
  if (dt > limit * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "dt = " << dt << " exceeds the advective bound " << limit;
    throw Error(ErrorKind::CFLViolation, msg.str());
  }
  advect(f, 0.5 * dt);
  heat(f, dt);
  advect(f, 0.5 * dt);
  check_bounded(f);
}

long BoxSimulator::advance(VectorXd& f, double t0, double t1) const {
  // Consecutive Strang steps share their half advections: A(dt0/2) D A((dt0+dt1)/2) D ... A(dtk/2).
  auto next_dt = [&](double t) {
    const double remaining = t1 - t;
    double dt = std::min(max_dt(f), remaining);
    // Avoid a sliver step at the end of the interval.
    if (dt < remaining && remaining < 1.5 * dt) dt = 0.5 * remaining;
    return dt;
  };
  if (!(t1 > t0)) return 0;
  long steps = 0;
  double t = t0;
  double dt = next_dt(t);
  advect(f, 0.5 * dt);
  for (;;) {
    heat(f, dt);
    ++steps;
    const bool last = t + dt >= t1 || dt == t1 - t;
    t = last ? t1 : t + dt;
    if (last) {
      advect(f, 0.5 * dt);
      check_bounded(f);
      return steps;
    }
    const double dt_next = next_dt(t);
    advect(f, 0.5 * (dt + dt_next));
    check_bounded(f);
    dt = dt_next;
  }
}

SimulationState step(const BoxSimulator& sim, SimulationState state, double dt) {
  sim.step(state.f, dt);
  state.t += dt;
  return state;
}

double band_mass(const Grid& box, const VectorXd& f) {
  const double edge = 0.9 * box.length / 2.0;
  double m = 0.0;
  for (Index i = 0; i < box.size(); ++i)
    if (box.point(i).cwiseAbs().maxCoeff() >= edge) m += std::abs(f[i]);
  return m * box.cell_volume();
}

Trajectory run_simulation(const SimulationConfig& cfg) {
  const int n = cfg.flux.dims();
  for (std::size_t k = 0; k < cfg.output_times.size(); ++k)
    require(cfg.output_times[k] > (k == 0 ? 0.0 : cfg.output_times[k - 1]), "output times must increase from t > 0");
  if (cfg.check_hypotheses) verify_hypotheses(cfg.flux);

  Trajectory tr;
  StationaryOptions sopts;
  sopts.points = cfg.torus_points;
  tr.v = solve_stationary_periodic(cfg.flux, cfg.q, sopts);
  tr.stationary_residual = stationary_residual(cfg.flux, tr.v);
  const TaylorData taylor = taylor_flux_coeffs(cfg.flux, tr.v);
  tr.hom = homogenize(taylor.alpha1(), taylor.alpha_or_zero(2), taylor.alpha_or_zero(3));

  const BoxSimulator sim(cfg.flux, tr.v, cfg.half_width, cfg.cells, cfg.cfl);
  tr.grid = sim.grid();
  tr.v_box = sim.v_box();
  VectorXd f = make_perturbation(tr.grid, cfg.perturbation);
  tr.initial_mass = integrate(tr.grid, f);
  tr.initial_l1 = l1_norm(tr.grid, f);
  tr.linf_initial = (tr.v_box + f).cwiseAbs().maxCoeff();
  tr.linf_max = tr.linf_initial;
  const double linf_bound = 10.0 * (tr.linf_initial + 1.0);

  const EffectiveCoefficients& coeffs = tr.hom.coeffs;
  std::optional<UappCells> cells;
  if (cfg.diagnostics) {
    tr.fm = stationary_profile(tr.initial_mass, coeffs);
    cells = solve_uapp_cells(tr.hom);
  }
  const double weight_m = cfg.weight_m > 0.0 ? cfg.weight_m : 2.0 * n + 4.0;
  tr.diagnostics.dims = n;

  auto record = [&](double t) {
    tr.snapshots.push_back({t, f});
    const double drift = std::abs(integrate(tr.grid, f) - tr.initial_mass);
    tr.max_mass_drift = std::max(tr.max_mass_drift, drift);
    const double linf = (tr.v_box + f).cwiseAbs().maxCoeff();
    tr.linf_max = std::max(tr.linf_max, linf);
    if (linf > linf_bound) tr.linf_ok = false;
    if (cfg.check_wrap && band_mass(tr.grid, f) > 1e-6 * tr.initial_l1) {
      std::ostringstream msg;
      msg << "perturbation mass " << band_mass(tr.grid, f) << " in the outer 10% band at t = " << t;
      throw Error(ErrorKind::WrapContamination, msg.str());
    }
    if (!cfg.diagnostics) return;
    DiagnosticsRow row;
    const RescaledState state = to_self_similar(tr.grid, f, t, coeffs.c);
    row.t = t;
    row.tau = state.tau;
    row.l1_error = diag_l1(state, tr.hom.f0, tr.fm);
    const ApproxSolution uapp = build_uapp(tr.fm, *cells, coeffs, state.tau);
    row.H = diag_quasi_lyapunov(state, uapp.evaluate(state.grid));
    const auto [l2w, grad] = diag_weighted(state.grid, compute_V(state, tr.hom.f0), weight_m);
    row.weighted_l2 = l2w;
    row.grad_l2 = grad;
    row.moment4 = diag_moment4(tr.grid, f, t, coeffs.c);
    row.mass = integrate(tr.grid, f);
    row.com = VectorXd::Zero(n);
    const double l1 = f.cwiseAbs().sum();
    if (l1 > 0.0)
      for (Index i = 0; i < tr.grid.size(); ++i) row.com += std::abs(f[i]) / l1 * tr.grid.point(i);
    row.linf = linf;
    tr.diagnostics.rows.push_back(row);
  };

  record(0.0);
  double t = 0.0;
  for (double t_out : cfg.output_times) {
    tr.steps += sim.advance(f, t, t_out);
    t = t_out;
    record(t);
  }
  return tr;
}

}  // namespace hsim
